//! Gauss–Legendre quadrature, fixed-order and adaptive.

use std::f64::consts::PI;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

const ADAPTIVE_ORDER: usize = 20;
const ADAPTIVE_MAX_DEPTH: u32 = 40;

/// Adaptive bisection with a 20-point rule: an interval is accepted when the
/// rule on the whole and on its two halves agree to `tol` (absolute, scaled
/// by the interval's share of the total length).
pub fn adaptive_gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let rule = GaussLegendre::new(ADAPTIVE_ORDER);
    let whole = rule.integrate(&f, a, b);
    refine(&rule, &f, a, b, whole, tol, 0)
}

fn refine<F: Fn(f64) -> f64>(
    rule: &GaussLegendre,
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let split = left + right;
    if (split - whole).abs() <= tol.max(f64::EPSILON * split.abs()) || depth >= ADAPTIVE_MAX_DEPTH {
        return split;
    }
    refine(rule, f, a, mid, left, 0.5 * tol, depth + 1)
        + refine(rule, f, mid, b, right, 0.5 * tol, depth + 1)
}
