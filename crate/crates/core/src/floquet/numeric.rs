//! Wronskian of the linearization along the rescaled orbit, the trace
//! coefficient `τ(ε, σ)`, and the self-consistent characteristic equation.
//!
//! In the rescaled time `s = A t` with `ε = A⁻²`, the orbit is
//! `x(ε, s) = cn(√(1+εα) s, 1/(2(1+εα)))` and the linearization of the
//! delayed equation, with the delayed term replaced by `σ` times the
//! current one, reads `y'' + (c + 3x²) y = 0`, `c = ε(a + (−1)ⁿ b σ)`.
//! Its fundamental matrix `W` has unit determinant.

use num_complex::Complex64;

use crate::elliptic::{complete_k, jacobi, EllipticParameter};
use crate::error::{domain, Error, Result};
use crate::orbit::{solve_amplitude, DuffingParams, Parity};

use super::analytic;

/// RK4 steps per full period of the rescaled orbit.
pub const STEPS_PER_PERIOD: usize = 20_000;

const DET_TOLERANCE: f64 = 1e-7;

/// Data of the linearized equation at one `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linearization {
    pub epsilon: f64,
    pub a: f64,
    pub b: f64,
    pub parity: Parity,
}

impl Linearization {
    pub fn new(epsilon: f64, a: f64, b: f64, parity: Parity) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(domain(format!("epsilon = {epsilon} must be non-negative")));
        }
        let alpha = a + parity.sign() * b;
        if !(1.0 + epsilon * alpha > 0.5) {
            return Err(domain(format!(
                "rescaled orbit needs 1 + εα > 1/2, got {}",
                1.0 + epsilon * alpha
            )));
        }
        Ok(Self {
            epsilon,
            a,
            b,
            parity,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.a + self.parity.sign() * self.b
    }

    /// `c = ε(a + (−1)ⁿ b σ)`.
    pub fn coefficient(&self, sigma: Complex64) -> Complex64 {
        self.epsilon * (self.a + self.parity.sign() * self.b * sigma)
    }

    pub fn frequency(&self) -> f64 {
        (1.0 + self.epsilon * self.alpha()).sqrt()
    }

    pub fn parameter(&self) -> EllipticParameter {
        EllipticParameter::new(0.5 / (1.0 + self.epsilon * self.alpha()))
            .expect("checked in constructor")
    }

    /// `p(ε)`, the period of the rescaled orbit.
    pub fn period(&self) -> f64 {
        4.0 * complete_k(self.parameter()) / self.frequency()
    }

    /// `(x, ẋ, ẍ)` of the rescaled orbit.
    pub fn orbit(&self, s: f64) -> (f64, f64, f64) {
        let w = self.frequency();
        let j = jacobi(w * s, self.parameter());
        let x = j.cn;
        (
            x,
            -w * j.sn * j.dn,
            -self.epsilon * self.alpha() * x - x * x * x,
        )
    }
}

/// `W(ε, σ, t₁, t₀)`, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WronskiMatrix {
    pub entries: [[Complex64; 2]; 2],
    pub epsilon: f64,
    pub sigma: Complex64,
    pub t1: f64,
    pub t0: f64,
}

impl WronskiMatrix {
    pub fn det(&self) -> Complex64 {
        let e = &self.entries;
        e[0][0] * e[1][1] - e[0][1] * e[1][0]
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// `self · rhs`, i.e. the flow over `rhs` followed by `self`.
    pub fn compose(&self, rhs: &WronskiMatrix) -> WronskiMatrix {
        WronskiMatrix {
            entries: mat_mul(&self.entries, &rhs.entries),
            epsilon: self.epsilon,
            sigma: self.sigma,
            t1: self.t1,
            t0: rhs.t0,
        }
    }
}

type Mat = [[Complex64; 2]; 2];

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

const IDENTITY: Mat = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

/// `d/ds Y = [[0, 1], [−q, 0]] Y` for both columns at once.
#[inline]
fn deriv(y: &Mat, q: Complex64) -> Mat {
    [[y[1][0], y[1][1]], [-q * y[0][0], -q * y[0][1]]]
}

#[inline]
fn axpy(y: &Mat, h: f64, k: &Mat) -> Mat {
    [
        [y[0][0] + h * k[0][0], y[0][1] + h * k[0][1]],
        [y[1][0] + h * k[1][0], y[1][1] + h * k[1][1]],
    ]
}

/// One classical RK4 step; `q0`, `qm`, `q1` are the potential at the start,
/// middle and end of the step.
#[inline]
fn rk4_step(y: &Mat, h: f64, q0: Complex64, qm: Complex64, q1: Complex64) -> Mat {
    let k1 = deriv(y, q0);
    let k2 = deriv(&axpy(y, 0.5 * h, &k1), qm);
    let k3 = deriv(&axpy(y, 0.5 * h, &k2), qm);
    let k4 = deriv(&axpy(y, h, &k3), q1);
    let mut out = *y;
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
        }
    }
    out
}

fn checked(w: WronskiMatrix) -> Result<WronskiMatrix> {
    let drift = (w.det() - 1.0).norm();
    if drift > DET_TOLERANCE || !drift.is_finite() {
        return Err(Error::Accuracy(format!(
            "det W drifted to {} over [{}, {}]",
            w.det(),
            w.t0,
            w.t1
        )));
    }
    Ok(w)
}

/// Half-period Wronskian integrator for one `ε`, with `3x²` tabulated on the
/// RK4 grid so repeated solves at different `σ` skip the elliptic functions.
#[derive(Debug, Clone)]
pub struct WronskianIntegrator {
    lin: Linearization,
    half_period: f64,
    /// `3x²` at multiples of half a step, `2N + 1` values.
    potential: Vec<f64>,
}

impl WronskianIntegrator {
    pub fn new(lin: Linearization) -> Self {
        let half_period = 0.5 * lin.period();
        let steps = STEPS_PER_PERIOD / 2;
        let dh = half_period / (2 * steps) as f64;
        let potential = (0..=2 * steps)
            .map(|i| {
                let x = lin.orbit(i as f64 * dh).0;
                3.0 * x * x
            })
            .collect();
        Self {
            lin,
            half_period,
            potential,
        }
    }

    pub fn linearization(&self) -> &Linearization {
        &self.lin
    }

    /// `p(ε)/2`.
    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    /// `W(ε, σ, p(ε)/2, 0)`.
    pub fn half_period_matrix(&self, sigma: Complex64) -> Result<WronskiMatrix> {
        let c = self.lin.coefficient(sigma);
        let steps = (self.potential.len() - 1) / 2;
        let h = self.half_period / steps as f64;
        let mut y = IDENTITY;
        for i in 0..steps {
            let q = |j: usize| c + self.potential[j];
            y = rk4_step(&y, h, q(2 * i), q(2 * i + 1), q(2 * i + 2));
        }
        checked(WronskiMatrix {
            entries: y,
            epsilon: self.lin.epsilon,
            sigma,
            t1: self.half_period,
            t0: 0.0,
        })
    }
}

/// `W(ε, σ, t₁, t₀)` by RK4 with step at most `p(ε)/20000`.
pub fn wronskian(lin: &Linearization, sigma: Complex64, t1: f64, t0: f64) -> Result<WronskiMatrix> {
    if !t1.is_finite() || !t0.is_finite() {
        return Err(domain("Wronskian endpoints must be finite"));
    }
    let c = lin.coefficient(sigma);
    let span = t1 - t0;
    let max_h = lin.period() / STEPS_PER_PERIOD as f64;
    let steps = ((span.abs() / max_h).ceil() as usize).max(1);
    let h = span / steps as f64;
    let q = |s: f64| {
        let x = lin.orbit(s).0;
        c + 3.0 * x * x
    };
    let mut y = IDENTITY;
    let mut q0 = q(t0);
    for i in 0..steps {
        let s = t0 + i as f64 * h;
        let q1 = q(s + h);
        y = rk4_step(&y, h, q0, q(s + 0.5 * h), q1);
        q0 = q1;
    }
    checked(WronskiMatrix {
        entries: y,
        epsilon: lin.epsilon,
        sigma,
        t1,
        t0,
    })
}

/// `τ(ε, σ) = −(tr W(ε, σ, p/2, 0) + 2) / (2ε(σ − 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceTau {
    pub value: Complex64,
    /// Set when `|σ − 1| < 1e−6`, where the quotient loses its digits.
    pub ill_conditioned: bool,
}

pub fn trace_tau(lin: &Linearization, sigma: Complex64) -> Result<TraceTau> {
    if !(lin.epsilon > 0.0) {
        return Err(domain("trace_tau needs epsilon > 0"));
    }
    if sigma == Complex64::new(1.0, 0.0) {
        return Err(domain("trace_tau is undefined at sigma = 1"));
    }
    let w = WronskianIntegrator::new(*lin).half_period_matrix(sigma)?;
    Ok(TraceTau {
        value: -(w.trace() + 2.0) / (2.0 * lin.epsilon * (sigma - 1.0)),
        ill_conditioned: (sigma - 1.0).norm() < 1e-6,
    })
}

/// Step sizes used by [`tau_limit`].
pub const RICHARDSON_EPSILONS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// `τ(0, σ)` by two rounds of Richardson extrapolation over
/// `ε ∈ {1e−2, 5e−3, 2.5e−3}`, cancelling the `O(ε)` and `O(ε²)` terms.
pub fn tau_limit(a: f64, b: f64, parity: Parity, sigma: Complex64) -> Result<Complex64> {
    let mut t = [Complex64::new(0.0, 0.0); 3];
    for (slot, &eps) in t.iter_mut().zip(&RICHARDSON_EPSILONS) {
        *slot = trace_tau(&Linearization::new(eps, a, b, parity)?, sigma)?.value;
    }
    let r12 = 2.0 * t[1] - t[0];
    let r23 = 2.0 * t[2] - t[1];
    Ok((4.0 * r23 - r12) / 3.0)
}

/// Nontrivial solution of `μ² − tr W(ε, σ, p/2, 0) μ + 1 = 0` with
/// `σ = (−μ)^(−n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicSolution {
    /// Half-period Floquet multiplier.
    pub mu: Complex64,
    /// `(−μ)^(−n)`.
    pub sigma: Complex64,
    /// `(μ + 1)/√ε`.
    pub eta: Complex64,
    /// Number of half periods per delay; non-integer only for
    /// [`solve_characteristic_scaled`].
    pub n: f64,
    pub epsilon: f64,
    /// `tr W` at the converged `σ`.
    pub trace: Complex64,
    pub iterations: usize,
    /// Both quadratic roots were within `1e−6` of each other at the end.
    pub ambiguous: bool,
}

impl CharacteristicSolution {
    /// `μ² − tr μ + 1`.
    pub fn residual(&self) -> Complex64 {
        self.mu * self.mu - self.trace * self.mu + 1.0
    }

    /// `η̃ = −(1/T) log|σ|`, with `T` recovered from `n` and `ε`.
    pub fn exponent(&self, delay: f64) -> f64 {
        -self.sigma.norm().ln() / delay
    }
}

const MAX_CHAR_ITER: usize = 100;
const MU_TOLERANCE: f64 = 1e-10;

/// `σ = (−μ)^(−n)` on the principal branch. With `μ` near `−1`, `−μ` sits
/// near `+1`, well away from the cut of `Log`.
pub fn sigma_of_mu(mu: Complex64, n: f64) -> Complex64 {
    (-n * (-mu).ln()).exp()
}

struct FixedPoint<'a> {
    integrator: &'a WronskianIntegrator,
    n: f64,
    sqrt_eps: f64,
}

struct Step {
    eta: Complex64,
    sigma: Complex64,
    trace: Complex64,
    ambiguous: bool,
}

impl FixedPoint<'_> {
    /// One sweep of the map: `σ` from `η`, then `tr W`, then the root of
    /// `η² − √ε d η + d = 0` (`d = (tr + 2)/ε`) nearest to `η`.
    fn apply(&self, eta: Complex64) -> Result<Step> {
        let eps = self.integrator.linearization().epsilon;
        let mu = -1.0 + self.sqrt_eps * eta;
        let sigma = sigma_of_mu(mu, self.n);
        let trace = self.integrator.half_period_matrix(sigma)?.trace();
        let d = (trace + 2.0) / eps;
        let disc = (eps * d * d - 4.0 * d).sqrt();
        let r1 = 0.5 * (self.sqrt_eps * d + disc);
        let r2 = 0.5 * (self.sqrt_eps * d - disc);
        let next = if (r1 - eta).norm() <= (r2 - eta).norm() {
            r1
        } else {
            r2
        };
        Ok(Step {
            eta: next,
            sigma,
            trace,
            ambiguous: (self.sqrt_eps * (r1 - r2)).norm() < 1e-6,
        })
    }
}

fn solve_from(
    integrator: &WronskianIntegrator,
    n: f64,
    eta0: Complex64,
) -> Result<CharacteristicSolution> {
    let eps = integrator.linearization().epsilon;
    if !(eps > 0.0) {
        return Err(domain("characteristic equation needs epsilon > 0"));
    }
    let map = FixedPoint {
        integrator,
        n,
        sqrt_eps: eps.sqrt(),
    };
    // Secant iteration on R(η) = Φ(η) − η; plain fixed-point steps whenever
    // the secant update is degenerate or jumps further than the map would.
    let mut prev: Option<(Complex64, Complex64)> = None;
    let mut eta = eta0;
    for iteration in 1..=MAX_CHAR_ITER {
        let step = map.apply(eta)?;
        let r = step.eta - eta;
        if map.sqrt_eps * r.norm() < MU_TOLERANCE {
            let eta = step.eta;
            if map.sqrt_eps * eta.norm() < 1e-12 {
                return Err(Error::TrivialRoot(
                    "iteration collapsed onto the trivial multiplier mu = -1".into(),
                ));
            }
            let mu = -1.0 + map.sqrt_eps * eta;
            return Ok(CharacteristicSolution {
                mu,
                sigma: step.sigma,
                eta,
                n,
                epsilon: eps,
                trace: step.trace,
                iterations: iteration,
                ambiguous: step.ambiguous,
            });
        }
        let mut next = step.eta;
        if let Some((eta_prev, r_prev)) = prev {
            let dr = r - r_prev;
            if dr.norm() > 0.0 {
                let candidate = eta - r * (eta - eta_prev) / dr;
                if candidate.is_finite() && (candidate - eta).norm() <= 10.0 * r.norm() {
                    next = candidate;
                }
            }
        }
        prev = Some((eta, r));
        eta = next;
    }
    Err(Error::NonConvergence {
        what: "characteristic equation",
        iterations: MAX_CHAR_ITER,
        detail: format!("last eta = {eta}"),
    })
}

/// Solves the characteristic equation for the orbit `x_n` of `params`,
/// starting from the `ε = 0` exponent.
pub fn solve_characteristic(params: &DuffingParams, n: u32) -> Result<CharacteristicSolution> {
    let orbit = solve_amplitude(params, n)?;
    let lin = Linearization::new(orbit.epsilon(), params.a, params.b, Parity::of(n))?;
    let eta0 = analytic::eta_star(params, n)?;
    solve_from(&WronskianIntegrator::new(lin), n as f64, eta0)
}

/// Same equation at a prescribed `ε`, with `n = 2T/(√ε p(ε))` allowed to be
/// non-integer. This isolates the `T`-dependence from the amplitude.
pub fn solve_characteristic_scaled(
    a: f64,
    b: f64,
    parity: Parity,
    delay: f64,
    epsilon: f64,
) -> Result<CharacteristicSolution> {
    let lin = Linearization::new(epsilon, a, b, parity)?;
    if !(epsilon > 0.0) {
        return Err(domain("characteristic equation needs epsilon > 0"));
    }
    let n = 2.0 * delay / (epsilon.sqrt() * lin.period());
    let eta0 = analytic::eta_star_signed(parity.sign() * b, delay)?;
    solve_from(&WronskianIntegrator::new(lin), n, eta0)
}
