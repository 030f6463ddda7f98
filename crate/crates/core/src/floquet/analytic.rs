//! Closed-form results in the limit `ε → 0`: the trace coefficient `τ*`,
//! the scaled exponent `η*`, the stability verdict, the torus boundary,
//! and two parameter maps.
//!
//! At `ε = 0` the characteristic equation becomes `η² = 2τ*(σ − 1)` with
//! `σ = exp(z)`, `z = (2T/p*) η`. In `z` it reads `z = κ h(z)` with
//! `h(z) = (e^z − 1)/z` and `κ = −(−1)ⁿ b T²/3`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::elliptic::p_star;
use crate::error::{domain, Error, Result};
use crate::orbit::{DuffingParams, Parity};

/// `τ* = −(1/24) p*² (−1)ⁿ b`.
pub fn tau_star(b: f64, parity: Parity) -> f64 {
    -p_star().powi(2) / 24.0 * parity.sign() * b
}

/// `(e^z − 1)/z`, with `h(0) = 1`.
pub fn h(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        // 1 + z/2 + z²/6 + z³/24 + z⁴/120 + z⁵/720
        let coeffs = [
            1.0,
            1.0 / 2.0,
            1.0 / 6.0,
            1.0 / 24.0,
            1.0 / 120.0,
            1.0 / 720.0,
        ];
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    } else {
        exp_m1(z) / z
    }
}

/// `e^z − 1` without cancellation for small `|z|`.
fn exp_m1(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    Complex64::new(
        z.re.exp_m1() * z.im.cos() - 2.0 * half * half,
        z.re.exp() * z.im.sin(),
    )
}

fn h_prime(z: Complex64) -> Complex64 {
    if z.norm() < 1e-2 {
        // 1/2 + z/3 + z²/8 + z³/30 + z⁴/144 + z⁵/840
        let coeffs = [
            0.5,
            1.0 / 3.0,
            1.0 / 8.0,
            1.0 / 30.0,
            1.0 / 144.0,
            1.0 / 840.0,
        ];
        coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    } else {
        (z * exp_m1(z) - exp_m1(z) + z) / (z * z)
    }
}

const NEWTON_MAX_ITER: usize = 60;
const CONTINUATION_STEP: f64 = 0.01;

fn newton(kappa: f64, mut z: Complex64) -> Option<Complex64> {
    for _ in 0..NEWTON_MAX_ITER {
        let f = z - kappa * h(z);
        let df = 1.0 - kappa * h_prime(z);
        if df.norm() == 0.0 {
            return None;
        }
        let dz = f / df;
        z -= dz;
        if !z.is_finite() {
            return None;
        }
        if dz.norm() <= 1e-13 * z.norm().max(1e-300) {
            // one more step polishes the last digits
            let f = z - kappa * h(z);
            return Some(z - f / (1.0 - kappa * h_prime(z)));
        }
    }
    None
}

/// Nontrivial root of `z² = κ(e^z − 1)` on the branch through `z ≈ κ` near
/// `κ = 0`, continued in `κ`. Past the fold of the real branch the root is
/// the one with `Im z > 0`.
pub fn z_root(kappa: f64) -> Result<Complex64> {
    if kappa == 0.0 {
        return Err(Error::TrivialRoot("kappa = 0 leaves only z = 0".into()));
    }
    let steps = ((kappa.abs() / CONTINUATION_STEP).ceil() as usize).max(1);
    let mut z = Complex64::new(0.0, 0.0);
    for j in 1..=steps {
        let k = kappa * j as f64 / steps as f64;
        // The small imaginary kick lets Newton leave the real axis once the
        // two real roots have merged; real roots pull it back to zero.
        let guess = if j == 1 { Complex64::new(k, 0.0) } else { z } + Complex64::new(0.0, 1e-6);
        z = newton(k, guess).ok_or_else(|| Error::NonConvergence {
            what: "eta_star Newton",
            iterations: NEWTON_MAX_ITER,
            detail: format!("continuation stalled at kappa = {k}"),
        })?;
        if z.im.abs() < 1e-12 * z.norm() {
            z.im = 0.0;
        }
    }
    if z.im < 0.0 {
        z = z.conj();
    }
    if z.norm() < 1e-14 {
        return Err(Error::TrivialRoot(format!("Newton collapsed to z = {z}")));
    }
    Ok(z)
}

/// `κ = −(−1)ⁿ b T²/3`.
pub fn kappa(signed_b: f64, delay: f64) -> f64 {
    -signed_b * delay * delay / 3.0
}

pub(crate) fn eta_star_signed(signed_b: f64, delay: f64) -> Result<Complex64> {
    let z = z_root(kappa(signed_b, delay))?;
    Ok(z * p_star() / (2.0 * delay))
}

/// `η*`, the nontrivial root of `η = (2T/p*) 2τ* h((2T/p*) η)`.
pub fn eta_star(params: &DuffingParams, n: u32) -> Result<Complex64> {
    if n == 0 {
        return Err(domain("n must be a positive integer"));
    }
    eta_star_signed(params.signed_b(n), params.delay)
}

/// `σ* = exp((2T/p*) η*)`.
pub fn sigma_star(params: &DuffingParams, n: u32) -> Result<Complex64> {
    let eta = eta_star(params, n)?;
    Ok((2.0 * params.delay / p_star() * eta).exp())
}

/// `(3/2)π²`, the bound on `(−1)ⁿ⁺¹ b T²` below which the stable verdict
/// is established.
pub const STABILITY_BOUND: f64 = 1.5 * PI * PI;

/// Below this `n` the verdict rests on the asymptotic theory only.
pub const SMALL_N: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Unstable,
    BeyondValidity,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::BeyondValidity => "beyond-validity",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityVerdict {
    pub verdict: Verdict,
    pub n: u32,
    pub parity: Parity,
    /// `(−1)ⁿ⁺¹ b T²`.
    pub condition_value: f64,
    pub boundary: f64,
    /// `η̃ = (1/3)(−1)ⁿ b T`, leading order in `T`.
    pub predicted_exponent: f64,
    /// `n < 5`: outside the range where agreement has been observed.
    pub small_n: bool,
}

pub fn classify(params: &DuffingParams, n: u32) -> Result<StabilityVerdict> {
    if n == 0 {
        return Err(domain("n must be a positive integer"));
    }
    if params.b == 0.0 {
        return Err(domain("classification needs b != 0"));
    }
    let sb = params.signed_b(n);
    let t = params.delay;
    let condition_value = -sb * t * t;
    let verdict = if sb > 0.0 {
        Verdict::Unstable
    } else if condition_value < STABILITY_BOUND {
        Verdict::Stable
    } else {
        Verdict::BeyondValidity
    };
    Ok(StabilityVerdict {
        verdict,
        n,
        parity: Parity::of(n),
        condition_value,
        boundary: STABILITY_BOUND,
        predicted_exponent: sb * t / 3.0,
        small_n: n < SMALL_N,
    })
}

/// Delay at which `η*` is purely imaginary, `(2/3)(−1)ⁿ⁺¹ b T² = k²π²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusBoundary {
    pub delay: f64,
    /// `ω = √(4τ*)`, with `η* = iω` there.
    pub omega: f64,
}

pub fn torus_boundary(b: f64, parity: Parity, k: u32) -> Result<Option<TorusBoundary>> {
    if b == 0.0 {
        return Err(domain("torus boundary needs b != 0"));
    }
    if k.is_multiple_of(2) {
        return Err(domain(format!("k = {k} must be an odd positive integer")));
    }
    let radicand = -parity.sign() * b;
    if radicand <= 0.0 {
        return Ok(None);
    }
    Ok(Some(TorusBoundary {
        delay: k as f64 * PI * (1.5 / radicand).sqrt(),
        omega: (4.0 * tau_star(b, parity)).sqrt(),
    }))
}

/// `T_crit = √(3/2) π`, the first torus boundary for `(−1)ⁿ b = −1`.
pub fn t_crit() -> f64 {
    1.5f64.sqrt() * PI
}

/// Coefficients `(a, b)` for Pyragas control `u = κ(x − (−1)ⁿ x(t − T))`
/// on `x'' + α x + x³ = u`.
pub fn pyragas_map(alpha_physical: f64, kappa: f64, n: u32) -> (f64, f64) {
    (alpha_physical - kappa, Parity::of(n).sign() * kappa)
}

/// The same orbit viewed with delay `T̃ = T(1 + 2k/n)`, holding `n + 2k`
/// half periods.
pub fn replicate_delays(delay: f64, n: u32, k: i64) -> Result<(f64, u32)> {
    if n == 0 {
        return Err(domain("n must be a positive integer"));
    }
    let n_tilde = n as i64 + 2 * k;
    if n_tilde < 1 {
        return Err(domain(format!("n + 2k = {n_tilde} must be at least 1")));
    }
    let n_tilde = u32::try_from(n_tilde).map_err(|_| domain("n + 2k overflows"))?;
    Ok((delay * n_tilde as f64 / n as f64, n_tilde))
}
