//! Reference periodic orbits `x_n(t) = A_n cn(ω_n t, m_n)`.
//!
//! For `x'' + a x + b x(t−T) + x³ = 0`, an odd periodic solution of the
//! undelayed oscillator `x'' + α x + x³ = 0` with `α = a + (−1)ⁿ b` and
//! minimal period `p = 2T/n` satisfies `x(t − T) = (−1)ⁿ x(t)` and therefore
//! solves the delayed equation too. This module finds the amplitude of that
//! orbit and evaluates it.

use crate::elliptic::{self, EllipticParameter};
use crate::error::{domain, Error, Result};

/// Coefficients of `x'' + a x + b x(t − T) + x³ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingParams {
    pub a: f64,
    pub b: f64,
    /// The delay `T > 0`.
    pub delay: f64,
}

impl DuffingParams {
    pub fn new(a: f64, b: f64, delay: f64) -> Result<Self> {
        if !(delay > 0.0 && delay.is_finite()) {
            return Err(domain(format!("delay T = {delay} must be positive")));
        }
        if !a.is_finite() || !b.is_finite() {
            return Err(domain("coefficients a, b must be finite"));
        }
        Ok(Self { a, b, delay })
    }

    /// `α = a + (−1)ⁿ b`, the stiffness seen by the `n`-th orbit.
    pub fn alpha(&self, n: u32) -> f64 {
        self.a + Parity::of(n).sign() * self.b
    }

    /// `(−1)ⁿ b`, the sign-carrying delayed coefficient.
    pub fn signed_b(&self, n: u32) -> f64 {
        Parity::of(n).sign() * self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(n: u32) -> Self {
        if n.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// `(−1)ⁿ`.
    pub fn sign(self) -> f64 {
        match self {
            Parity::Even => 1.0,
            Parity::Odd => -1.0,
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        })
    }
}

/// `H = ½ ẋ² + ½ α x² + ¼ x⁴`.
pub fn hamiltonian(alpha: f64, x: f64, xdot: f64) -> f64 {
    0.5 * xdot * xdot + 0.5 * alpha * x * x + 0.25 * x.powi(4)
}

/// Energy of the orbit through `(A, 0)`.
pub fn energy_of_amplitude(alpha: f64, amplitude: f64) -> f64 {
    hamiltonian(alpha, amplitude, 0.0)
}

fn elliptic_data(alpha: f64, amplitude: f64) -> Result<(f64, EllipticParameter)> {
    let omega2 = alpha + amplitude * amplitude;
    if !(omega2 > 0.0) || !(energy_of_amplitude(alpha, amplitude) > 0.0) {
        return Err(domain(format!(
            "amplitude A = {amplitude} with alpha = {alpha} has non-positive energy"
        )));
    }
    let m = EllipticParameter::new(amplitude * amplitude / (2.0 * omega2))?;
    Ok((omega2.sqrt(), m))
}

/// Minimal period `4K(m)/ω` of the orbit of `x'' + α x + x³ = 0` through `(A, 0)`.
pub fn period_of_amplitude(alpha: f64, amplitude: f64) -> Result<f64> {
    let (omega, m) = elliptic_data(alpha, amplitude)?;
    Ok(4.0 * elliptic::complete_k(m) / omega)
}

/// `∂p/∂A`, analytic through `dK/dm`.
pub fn period_derivative(alpha: f64, amplitude: f64) -> Result<f64> {
    let (omega, m) = elliptic_data(alpha, amplitude)?;
    let k = elliptic::complete_k(m);
    let dk = elliptic::complete_k_derivative(m);
    let omega_a = amplitude / omega;
    let m_a = amplitude * alpha / omega.powi(4);
    Ok(4.0 * dk * m_a / omega - 4.0 * k * omega_a / (omega * omega))
}

/// A positive-energy orbit of the undelayed oscillator `x'' + α x + x³ = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DuffingOrbit {
    pub alpha: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub m: EllipticParameter,
    pub period: f64,
    pub energy: f64,
}

impl DuffingOrbit {
    pub fn new(alpha: f64, amplitude: f64) -> Result<Self> {
        if !(amplitude > 0.0) {
            return Err(domain(format!(
                "amplitude A = {amplitude} must be positive"
            )));
        }
        let (omega, m) = elliptic_data(alpha, amplitude)?;
        Ok(Self {
            alpha,
            amplitude,
            omega,
            m,
            period: 4.0 * elliptic::complete_k(m) / omega,
            energy: energy_of_amplitude(alpha, amplitude),
        })
    }

    /// `(x, ẋ) = (A cn(ωt), −Aω sn(ωt) dn(ωt))`.
    pub fn state(&self, t: f64) -> (f64, f64) {
        let j = elliptic::jacobi(self.omega * t, self.m);
        (
            self.amplitude * j.cn,
            -self.amplitude * self.omega * j.sn * j.dn,
        )
    }
}

/// The reference orbit `x_n` with minimal period `2T/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicOrbit {
    pub n: u32,
    pub orbit: DuffingOrbit,
}

impl PeriodicOrbit {
    pub fn alpha(&self) -> f64 {
        self.orbit.alpha
    }
    pub fn amplitude(&self) -> f64 {
        self.orbit.amplitude
    }
    pub fn omega(&self) -> f64 {
        self.orbit.omega
    }
    pub fn m(&self) -> EllipticParameter {
        self.orbit.m
    }
    pub fn period(&self) -> f64 {
        self.orbit.period
    }
    pub fn energy(&self) -> f64 {
        self.orbit.energy
    }
    /// Small parameter `ε = A⁻²` of the rescaled problem.
    pub fn epsilon(&self) -> f64 {
        self.amplitude().powi(-2)
    }
    pub fn state(&self, t: f64) -> (f64, f64) {
        self.orbit.state(t)
    }
}

const MAX_ROOT_ITER: usize = 200;

/// Finds `A_n` with `period_of_amplitude(α, A_n) = 2T/n` by bracketed Newton.
pub fn solve_amplitude(params: &DuffingParams, n: u32) -> Result<PeriodicOrbit> {
    if n == 0 {
        return Err(domain("n must be a positive integer"));
    }
    let alpha = params.alpha(n);
    let target = 2.0 * params.delay / n as f64;
    let g = |amp: f64| period_of_amplitude(alpha, amp).map(|p| p - target);

    // Smallest admissible amplitude: the period diverges at the homoclinic
    // energy for α < 0 and tends to 2π/√α for α > 0.
    let floor = (-2.0 * alpha).max(0.0).sqrt();
    if alpha > 0.0 {
        let small_amplitude_period = 2.0 * std::f64::consts::PI / alpha.sqrt();
        if target >= small_amplitude_period {
            return Err(Error::NoRoot(format!(
                "period 2T/n = {target} exceeds the small-amplitude limit {small_amplitude_period}; \
                 need n > T·√α/π = {}",
                params.delay * alpha.sqrt() / std::f64::consts::PI
            )));
        }
    }

    let mut guess = n as f64 * elliptic::p_star() / (2.0 * params.delay);
    if guess <= floor {
        guess = 2.0 * floor.max(1.0);
    }

    // Bracket [lo, hi] with g(lo) > 0 > g(hi); g is decreasing and
    // g(lo) > 0 holds at the admissible floor.
    let mut lo = floor * (1.0 + 1e-12);
    let mut hi = guess;
    let mut value = g(hi)?;
    let mut expansions = 0;
    while value > 0.0 {
        lo = hi;
        hi *= 2.0;
        value = g(hi)?;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::NoRoot("could not bracket the amplitude".into()));
        }
    }

    // Newton to machine precision: stop once the step or the bracket is at
    // the rounding level of `A`.
    let mut amp = hi;
    for _ in 0..MAX_ROOT_ITER {
        if value == 0.0 {
            return Ok(PeriodicOrbit {
                n,
                orbit: DuffingOrbit::new(alpha, amp)?,
            });
        }
        if value > 0.0 {
            lo = amp;
        } else {
            hi = amp;
        }
        let step = value / period_derivative(alpha, amp)?;
        let newton = amp - step;
        if step.abs() <= 2.0 * f64::EPSILON * amp || hi - lo <= 4.0 * f64::EPSILON * hi {
            let amp = if newton > lo && newton < hi {
                newton
            } else {
                amp
            };
            return Ok(PeriodicOrbit {
                n,
                orbit: DuffingOrbit::new(alpha, amp)?,
            });
        }
        amp = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        value = g(amp)?;
    }
    Err(Error::NonConvergence {
        what: "amplitude solve",
        iterations: MAX_ROOT_ITER,
        detail: format!("bracket [{lo}, {hi}], residual {value:e}"),
    })
}

/// Quadrature form of the period: with `x = A sin θ`,
/// `p/4 = ∫₀^{π/2} dθ / √(α + A²(1 + sin²θ)/2)`.
pub fn period_by_quadrature(alpha: f64, amplitude: f64) -> Result<f64> {
    elliptic_data(alpha, amplitude)?;
    let a2 = amplitude * amplitude;
    let quarter = crate::quadrature::adaptive_gauss_legendre(
        |theta: f64| 1.0 / (alpha + 0.5 * a2 * (1.0 + theta.sin().powi(2))).sqrt(),
        0.0,
        std::f64::consts::FRAC_PI_2,
        1e-15,
    );
    Ok(4.0 * quarter)
}
