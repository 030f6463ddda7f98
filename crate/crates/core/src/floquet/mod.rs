//! Floquet analysis of the reference orbits.
//!
//! [`numeric`] integrates the linearized flow at finite `ε = A⁻²`;
//! [`analytic`] holds the `ε → 0` results it is checked against.

pub mod analytic;
pub mod numeric;

pub use analytic::{
    classify, eta_star, pyragas_map, replicate_delays, sigma_star, t_crit, tau_star,
    torus_boundary, StabilityVerdict, TorusBoundary, Verdict, SMALL_N, STABILITY_BOUND,
};
pub use numeric::{
    solve_characteristic, solve_characteristic_scaled, tau_limit, trace_tau, wronskian,
    CharacteristicSolution, Linearization, TraceTau, WronskiMatrix, WronskianIntegrator,
};
