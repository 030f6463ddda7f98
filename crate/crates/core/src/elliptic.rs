//! Jacobi elliptic functions `sn`, `cn`, `dn` and the complete elliptic
//! integrals `K(m)`, `E(m)`.
//!
//! **Parameter convention.** Every function here takes the *parameter*
//! `m = k²`, not the modulus `k`. With this convention
//! `K(1/2) = 1.854_074_677_301_372…` and `4 K(1/2) = 7.416_298_709_205_487…`.
//! Passing a modulus where a parameter is expected is the classic bug with
//! these functions; [`EllipticParameter`] exists so the conversion happens in
//! one visible place.
//!
//! `K` and `E` come from the arithmetic–geometric mean. The Jacobi functions
//! use the descending AGM (Landen) recursion after reducing the argument
//! modulo the real period `4K(m)`, so accuracy does not decay along long
//! trajectories.

use std::f64::consts::FRAC_PI_2;

use crate::error::{domain, Result};

const AGM_MAX_ITER: usize = 32;

/// Elliptic parameter `m = k²`, restricted to `0 ≤ m < 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EllipticParameter(f64);

impl EllipticParameter {
    pub fn new(m: f64) -> Result<Self> {
        if m.is_finite() && (0.0..1.0).contains(&m) {
            Ok(Self(m))
        } else {
            Err(domain(format!("elliptic parameter m = {m} not in [0, 1)")))
        }
    }

    /// Builds the parameter from a modulus `k`, i.e. `m = k²`.
    pub fn from_modulus(k: f64) -> Result<Self> {
        Self::new(k * k)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Complementary parameter `1 - m`.
    #[inline]
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

/// `(sn, cn, dn)` at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobi {
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

/// Complete elliptic integral of the first kind,
/// `K(m) = ∫₀^{π/2} (1 − m sin²v)^{−1/2} dv`.
pub fn complete_k(m: EllipticParameter) -> f64 {
    FRAC_PI_2 / agm(1.0, m.complement().sqrt())
}

/// Complete elliptic integral of the second kind,
/// `E(m) = ∫₀^{π/2} (1 − m sin²v)^{1/2} dv`.
pub fn complete_e(m: EllipticParameter) -> f64 {
    let mut a = 1.0;
    let mut b = m.complement().sqrt();
    let mut c = m.value().sqrt();
    // E = K (1 − Σ 2^{i−1} c_i²)
    let mut sum = 0.5 * c * c;
    let mut weight = 0.5;
    for _ in 0..AGM_MAX_ITER {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let next = 0.5 * (a + b);
        c = 0.5 * (a - b);
        b = (a * b).sqrt();
        a = next;
        weight *= 2.0;
        sum += weight * c * c;
    }
    FRAC_PI_2 / a * (1.0 - sum)
}

/// `dK/dm = (E − (1 − m) K) / (2 m (1 − m))`, with the `m → 0` limit `π/8`.
pub fn complete_k_derivative(m: EllipticParameter) -> f64 {
    let mv = m.value();
    if mv < 1e-8 {
        // K = π/2 (1 + m/4 + 9m²/64 + …)
        return std::f64::consts::PI / 8.0 * (1.0 + 9.0 * mv / 8.0);
    }
    let k = complete_k(m);
    let e = complete_e(m);
    (e - m.complement() * k) / (2.0 * mv * m.complement())
}

/// Reduces `u` into `[-2K, 2K]` using the real period `4K`.
fn reduce(u: f64, quarter: f64) -> f64 {
    let period = 4.0 * quarter;
    let mut r = u.rem_euclid(period);
    if r > 2.0 * quarter {
        r -= period;
    }
    r
}

/// All three Jacobi functions at `u` with parameter `m`.
pub fn jacobi(u: f64, m: EllipticParameter) -> Jacobi {
    let mv = m.value();
    if mv == 0.0 {
        let (s, c) = u.sin_cos();
        return Jacobi {
            sn: s,
            cn: c,
            dn: 1.0,
        };
    }
    let u = reduce(u, complete_k(m));

    let mut a = [0.0f64; AGM_MAX_ITER + 1];
    let mut c = [0.0f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    c[0] = mv.sqrt();
    let mut b = m.complement().sqrt();
    let mut levels = 0;
    while levels < AGM_MAX_ITER && c[levels].abs() > f64::EPSILON * a[levels] {
        let ai = a[levels];
        a[levels + 1] = 0.5 * (ai + b);
        c[levels + 1] = 0.5 * (ai - b);
        b = (ai * b).sqrt();
        levels += 1;
    }

    let mut phi = (1u64 << levels) as f64 * a[levels] * u;
    for i in (1..=levels).rev() {
        let s = (c[i] / a[i] * phi.sin()).clamp(-1.0, 1.0);
        phi = 0.5 * (phi + s.asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = (1.0 - mv * sn * sn).sqrt();
    Jacobi { sn, cn, dn }
}

/// Jacobi elliptic cosine `cn(u | m)`.
pub fn cn(u: f64, m: EllipticParameter) -> f64 {
    jacobi(u, m).cn
}

/// `(sn(u | m), dn(u | m))`.
pub fn sn_dn(u: f64, m: EllipticParameter) -> (f64, f64) {
    let j = jacobi(u, m);
    (j.sn, j.dn)
}

/// The limiting rescaled period `p* = 4K(1/2)` of `ẍ + x³ = 0` at unit amplitude.
pub fn p_star() -> f64 {
    4.0 * complete_k(EllipticParameter(0.5))
}
