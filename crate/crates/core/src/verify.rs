//! Self-check suite behind `duffing verify`.
//!
//! Each check recomputes an identity the library must satisfy and reports
//! pass/fail with the observed error. [`VerifyOptions::p_star`] lets a test
//! substitute a wrong period constant to confirm the suite notices.

use num_complex::Complex64;

use crate::dde::{integrate, HistoryFunction, IntegratorOptions};
use crate::elliptic::{self, p_star, EllipticParameter};
use crate::floquet::{self, Linearization, WronskianIntegrator};
use crate::orbit::{period_of_amplitude, solve_amplitude, DuffingParams, Parity};
use crate::quadrature::adaptive_gauss_legendre;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Period constant used by the checks that take it as input.
    pub p_star: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { p_star: p_star() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, error: f64, tolerance: f64) -> Check {
    Check {
        name,
        passed: error <= tolerance,
        detail: format!("error {error:.3e}, tolerance {tolerance:.0e}"),
    }
}

fn failed(name: &'static str, err: impl std::fmt::Display) -> Check {
    Check {
        name,
        passed: false,
        detail: err.to_string(),
    }
}

/// `|∫₀^{p/2} ẋ*² dt − p/6|` along `x* = cn(t, 1/2)`.
pub fn energy_identity_error(p: f64) -> f64 {
    let m = EllipticParameter::new(0.5).expect("valid");
    let integral = adaptive_gauss_legendre(
        |t| {
            let (sn, dn) = elliptic::sn_dn(t, m);
            (sn * dn).powi(2)
        },
        0.0,
        0.5 * p,
        1e-14,
    );
    (integral - p / 6.0).abs()
}

#[allow(clippy::excessive_precision)]
const PRINTED_AMPLITUDES: [(f64, u32, f64); 6] = [
    (0.6, 1, 6.29721145),
    (0.6, 2, 12.30144591494),
    (0.3, 11, 135.97083402978303460),
    (0.3, 12, 148.32106281755626611),
    (0.9, 28, 115.35833191723956861),
    (0.9, 52, 214.24522922435665376),
];

pub fn run(options: &VerifyOptions) -> Vec<Check> {
    let mut out = Vec::new();

    out.push(check(
        "period constant p* = 4K(1/2)",
        (options.p_star - 7.4162987).abs(),
        1e-7,
    ));
    out.push(check(
        "energy identity int_0^{p*/2} x'^2 = p*/6",
        energy_identity_error(options.p_star),
        1e-9,
    ));
    out.push(check(
        "T_crit = sqrt(3/2) pi",
        (floquet::t_crit() - 3.847_649_490_485_592_3).abs(),
        1e-12,
    ));

    let mut ident: f64 = 0.0;
    for i in 0..40 {
        let u = -20.0 + i as f64 * 1.07;
        let m = EllipticParameter::new((i as f64 * 0.0247) % 0.99).expect("valid");
        let j = elliptic::jacobi(u, m);
        ident = ident
            .max((j.sn * j.sn + j.cn * j.cn - 1.0).abs())
            .max((j.dn * j.dn + m.value() * j.sn * j.sn - 1.0).abs());
        let k = elliptic::complete_k(m);
        ident = ident.max((elliptic::cn(u + 4.0 * k, m) - j.cn).abs());
    }
    out.push(check("elliptic identities and periodicity", ident, 1e-10));

    let mut amp: f64 = 0.0;
    let mut amp_err = None;
    for &(t, n, printed) in &PRINTED_AMPLITUDES {
        let digits =
            10f64.powi(-(printed.to_string().split('.').nth(1).map_or(0, |d| d.len()) as i32));
        match DuffingParams::new(0.0, 1.0, t).and_then(|p| solve_amplitude(&p, n)) {
            Ok(o) => {
                amp = amp.max(((o.amplitude() - printed).abs() - 0.5 * digits).max(0.0) / printed);
                let back = period_of_amplitude(o.alpha(), o.amplitude()).unwrap_or(f64::NAN);
                amp = amp.max(((back - 2.0 * t / n as f64) / back).abs());
            }
            Err(e) => amp_err = Some(e),
        }
    }
    out.push(match amp_err {
        Some(e) => failed("amplitude round trips", e),
        None => check("amplitude round trips", amp, 1e-10),
    });

    let mut det: f64 = 0.0;
    let mut trace: f64 = 0.0;
    let mut wr_err = None;
    for eps in [0.0, 1e-3, 1e-2, 1e-1] {
        let integ = match Linearization::new(eps, 0.0, 1.0, Parity::Odd) {
            Ok(lin) => WronskianIntegrator::new(lin),
            Err(e) => {
                wr_err = Some(e);
                continue;
            }
        };
        for sigma in [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
        ] {
            match integ.half_period_matrix(sigma) {
                Ok(w) => {
                    det = det.max((w.det() - 1.0).norm());
                    if sigma == Complex64::new(1.0, 0.0) {
                        trace = trace.max((w.trace() + 2.0).norm());
                    }
                }
                Err(e) => wr_err = Some(e),
            }
        }
    }
    match wr_err {
        Some(e) => out.push(failed("Wronskian determinant and trace", e)),
        None => {
            out.push(check("Wronskian det W = 1", det, 1e-9));
            out.push(check("Wronskian tr W(eps, 1, p/2, 0) = -2", trace, 1e-8));
        }
    }

    out.push(
        match floquet::tau_limit(0.0, 1.0, Parity::Odd, Complex64::new(0.5, 0.0)) {
            Ok(tau) => {
                let star = -options.p_star.powi(2) / 24.0 * Parity::Odd.sign();
                check(
                    "limiting trace coefficient tau*",
                    ((tau - star) / star).norm(),
                    1e-3,
                )
            }
            Err(e) => failed("limiting trace coefficient tau*", e),
        },
    );

    let exact = DuffingParams::new(0.0, 1.0, 0.6)
        .and_then(|p| solve_amplitude(&p, 1).map(|o| (p, o)))
        .and_then(|(p, o)| {
            let traj = integrate(
                &p,
                &HistoryFunction::orbit(o, 0.0),
                10.0 * o.period(),
                &IntegratorOptions::default(),
            )?;
            Ok(traj
                .knots()
                .iter()
                .map(|k| {
                    ((crate::orbit::hamiltonian(o.alpha(), k.x, k.xdot) - o.energy()) / o.energy())
                        .abs()
                })
                .fold(0.0, f64::max))
        });
    out.push(match exact {
        Ok(e) => check("exact orbit preserved by the DDE integrator", e, 1e-4),
        Err(e) => failed("exact orbit preserved by the DDE integrator", e),
    });

    out
}
