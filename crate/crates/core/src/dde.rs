//! Method-of-steps integration of `x'' + a x + b x(t − T) + x³ = 0`.
//!
//! The equation is advanced as the first-order system `(x, ẋ)` with the
//! Bogacki–Shampine 3(2) pair (local extrapolation, FSAL). Every accepted
//! step stores a knot `(t, x, ẋ, ẍ)`; the cubic Hermite interpolant through
//! consecutive knots is the dense output, and it also supplies the delayed
//! value `x(t − T)`. Before `t = 0` the history function is used instead.
//!
//! Steps are capped at `max_step` and land exactly on the breakpoints
//! `t = kT`, where the solution inherits derivative jumps from the history.

use std::collections::VecDeque;

use crate::error::{domain, Error, Result};
use crate::orbit::{DuffingOrbit, DuffingParams, PeriodicOrbit};

/// One stored state `(t, x, ẋ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
}

/// Initial data on `[−T, 0]`.
#[derive(Debug, Clone)]
pub enum HistoryFunction {
    /// `(A cn(ωt, m), −Aω sn dn)` with `ω`, `m` fixed by `A` and `α`.
    Elliptic(DuffingOrbit),
    /// A reference orbit shifted by `phase`.
    Orbit { orbit: PeriodicOrbit, phase: f64 },
    /// Samples sorted by time; `x` is Hermite-interpolated, `ẋ` linearly.
    Tabulated(Vec<Sample>),
}

impl HistoryFunction {
    pub fn elliptic(amplitude: f64, alpha: f64) -> Result<Self> {
        Ok(Self::Elliptic(DuffingOrbit::new(alpha, amplitude)?))
    }

    pub fn orbit(orbit: PeriodicOrbit, phase: f64) -> Self {
        Self::Orbit { orbit, phase }
    }

    pub fn tabulated(samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(domain("tabulated history needs at least two samples"));
        }
        if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(domain(
                "tabulated history times must be strictly increasing",
            ));
        }
        Ok(Self::Tabulated(samples))
    }

    fn span(&self) -> Option<(f64, f64)> {
        match self {
            Self::Tabulated(s) => Some((s[0].t, s[s.len() - 1].t)),
            _ => None,
        }
    }

    pub fn state(&self, t: f64) -> (f64, f64) {
        match self {
            Self::Elliptic(orbit) => orbit.state(t),
            Self::Orbit { orbit, phase } => orbit.state(t + phase),
            Self::Tabulated(samples) => {
                let i = samples
                    .partition_point(|s| s.t <= t)
                    .clamp(1, samples.len() - 1);
                let (s0, s1) = (samples[i - 1], samples[i]);
                let h = s1.t - s0.t;
                let s = (t - s0.t) / h;
                let x = hermite(s, h, s0.x, s0.xdot, s1.x, s1.xdot);
                let xdot = s0.xdot + s * (s1.xdot - s0.xdot);
                (x, xdot)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorOptions {
    pub max_step: f64,
    pub rtol: f64,
    pub atol: f64,
    pub min_step: f64,
    /// Knots older than one delay are kept only every `history_stride`
    /// steps. `1` keeps the full dense output.
    pub history_stride: usize,
    /// Record `(t, x, ẋ)` from the full-resolution dense output at
    /// multiples of this spacing.
    pub sample_dt: Option<f64>,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            max_step: 1e-4,
            rtol: 1e-6,
            atol: 1e-6,
            min_step: 1e-12,
            history_stride: 1,
            sample_dt: None,
        }
    }
}

/// Dense-output knot: state and second derivative at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Knot {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub xddot: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
}

#[inline]
fn hermite(s: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

#[inline]
fn interpolate(k0: &Knot, k1: &Knot, t: f64) -> (f64, f64) {
    let h = k1.t - k0.t;
    let s = (t - k0.t) / h;
    (
        hermite(s, h, k0.x, k0.xdot, k1.x, k1.xdot),
        hermite(s, h, k0.xdot, k0.xddot, k1.xdot, k1.xddot),
    )
}

/// Solution on `[−T, t_end]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    delay: f64,
    history: HistoryFunction,
    knots: Vec<Knot>,
    samples: Vec<Sample>,
    sample_dt: Option<f64>,
    stats: StepStats,
}

impl Trajectory {
    pub fn delay(&self) -> f64 {
        self.delay
    }
    pub fn t_start(&self) -> f64 {
        0.0
    }
    pub fn t_end(&self) -> f64 {
        self.knots.last().map_or(0.0, |k| k.t)
    }
    pub fn knots(&self) -> &[Knot] {
        &self.knots
    }
    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }
    pub fn sample_dt(&self) -> Option<f64> {
        self.sample_dt
    }
    pub fn stats(&self) -> StepStats {
        self.stats
    }
    pub fn history(&self) -> &HistoryFunction {
        &self.history
    }

    /// `(x, ẋ)` at any `t ∈ [−T, t_end]`; exact stored state at knots.
    pub fn evaluate(&self, t: f64) -> Result<(f64, f64)> {
        let hi = self.t_end();
        if !(t >= -self.delay && t <= hi) {
            return Err(Error::OutOfRange {
                t,
                lo: -self.delay,
                hi,
            });
        }
        if t < 0.0 {
            return Ok(self.history.state(t));
        }
        let i = self.knots.partition_point(|k| k.t <= t);
        if i == 0 {
            return Ok(self.history.state(t));
        }
        let k0 = &self.knots[i - 1];
        if k0.t == t || i == self.knots.len() {
            return Ok((k0.x, k0.xdot));
        }
        Ok(interpolate(k0, &self.knots[i], t))
    }
}

struct Solver<'a> {
    params: DuffingParams,
    history: &'a HistoryFunction,
    recent: VecDeque<Knot>,
}

impl Solver<'_> {
    fn delayed_x(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.history.state(t).0;
        }
        let i = self
            .recent
            .partition_point(|k| k.t <= t)
            .clamp(1, self.recent.len() - 1);
        interpolate(&self.recent[i - 1], &self.recent[i], t).0
    }

    #[inline]
    fn rhs(&self, t: f64, y: [f64; 2]) -> [f64; 2] {
        let lag = self.delayed_x(t - self.params.delay);
        let x = y[0];
        [y[1], -self.params.a * x - self.params.b * lag - x * x * x]
    }
}

fn validate(
    params: &DuffingParams,
    history: &HistoryFunction,
    t_end: f64,
    o: &IntegratorOptions,
) -> Result<()> {
    if !(t_end > 0.0) {
        return Err(domain("t_end must be positive"));
    }
    if !(o.max_step > 0.0) || !(o.rtol > 0.0) || !(o.atol >= 0.0) || !(o.min_step > 0.0) {
        return Err(domain(
            "integrator step sizes and tolerances must be positive",
        ));
    }
    if o.max_step >= params.delay {
        return Err(domain("max_step must be smaller than the delay"));
    }
    if o.history_stride == 0 {
        return Err(domain("history_stride must be at least 1"));
    }
    if let Some(dt) = o.sample_dt {
        if !(dt > 0.0) {
            return Err(domain("sample_dt must be positive"));
        }
    }
    if let Some((lo, hi)) = history.span() {
        let slack = 1e-12 * params.delay;
        if lo > -params.delay + slack || hi < -slack {
            return Err(domain(format!(
                "tabulated history covers [{lo}, {hi}], not [-T, 0] = [{}, 0]",
                -params.delay
            )));
        }
    }
    Ok(())
}

/// Integrates the delayed oscillator from `t = 0` to `t_end`.
pub fn integrate(
    params: &DuffingParams,
    history: &HistoryFunction,
    t_end: f64,
    options: &IntegratorOptions,
) -> Result<Trajectory> {
    validate(params, history, t_end, options)?;
    let delay = params.delay;
    let mut solver = Solver {
        params: *params,
        history,
        recent: VecDeque::new(),
    };

    let (x0, v0) = history.state(0.0);
    let mut t = 0.0;
    let mut y = [x0, v0];
    let mut k1 = solver.rhs(t, y);
    solver.recent.push_back(Knot {
        t,
        x: y[0],
        xdot: y[1],
        xddot: k1[1],
    });

    let mut archive: Vec<Knot> = Vec::new();
    let mut archived_steps = 0usize;
    let mut samples = Vec::new();
    let mut next_sample = 0u64;
    if options.sample_dt.is_some() {
        samples.push(Sample {
            t,
            x: y[0],
            xdot: y[1],
        });
        next_sample = 1;
    }

    let mut stats = StepStats::default();
    let mut h = options.max_step;
    let mut breakpoint = delay;

    while t < t_end {
        h = h.min(options.max_step).min(t_end - t);
        if t + h >= breakpoint {
            h = breakpoint - t;
        } else if breakpoint - (t + h) < 0.01 * h {
            // avoid a sliver step right before the breakpoint
            h = 0.5 * (breakpoint - t);
        }
        if t_end - (t + h) < 0.01 * h {
            h = t_end - t;
        }

        let k2 = solver.rhs(
            t + 0.5 * h,
            [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]],
        );
        let k3 = solver.rhs(
            t + 0.75 * h,
            [y[0] + 0.75 * h * k2[0], y[1] + 0.75 * h * k2[1]],
        );
        let y_new = [
            y[0] + h * (2.0 / 9.0 * k1[0] + 1.0 / 3.0 * k2[0] + 4.0 / 9.0 * k3[0]),
            y[1] + h * (2.0 / 9.0 * k1[1] + 1.0 / 3.0 * k2[1] + 4.0 / 9.0 * k3[1]),
        ];
        let t_new = if h == breakpoint - t {
            breakpoint
        } else {
            t + h
        };
        if !y_new[0].is_finite() || !y_new[1].is_finite() || y_new[0].abs() > 1e100 {
            return Err(Error::BlowUp { t: t_new });
        }
        let k4 = solver.rhs(t_new, y_new);

        let mut err: f64 = 0.0;
        for i in 0..2 {
            let e = h
                * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i]
                    - 1.0 / 8.0 * k4[i]);
            let scale = options.atol + options.rtol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / scale);
        }

        if err > 1.0 {
            stats.rejected += 1;
            h *= (0.9 * err.powf(-1.0 / 3.0)).max(0.2);
            if h < options.min_step {
                return Err(Error::StepUnderflow { t, h });
            }
            continue;
        }

        stats.accepted += 1;
        let knot = Knot {
            t: t_new,
            x: y_new[0],
            xdot: y_new[1],
            xddot: k4[1],
        };
        if let Some(dt) = options.sample_dt {
            let prev = *solver.recent.back().expect("at least one knot");
            loop {
                let ts = next_sample as f64 * dt;
                if ts > t_new * (1.0 + 1e-14) {
                    break;
                }
                let (x, xdot) = interpolate(&prev, &knot, ts.min(t_new));
                samples.push(Sample { t: ts, x, xdot });
                next_sample += 1;
            }
        }
        solver.recent.push_back(knot);
        t = t_new;
        y = y_new;
        k1 = k4;
        if t >= breakpoint {
            breakpoint += delay;
        }

        // Keep the knot just before t − T and everything after it.
        while solver.recent.len() > 2 && solver.recent[1].t <= t - delay {
            let old = solver.recent.pop_front().expect("non-empty");
            if archived_steps.is_multiple_of(options.history_stride) {
                archive.push(old);
            }
            archived_steps += 1;
        }

        let growth = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-1.0 / 3.0)).min(5.0)
        };
        h *= growth;
    }

    archive.extend(solver.recent);
    Ok(Trajectory {
        delay,
        history: history.clone(),
        knots: archive,
        samples,
        sample_dt: options.sample_dt,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::{hamiltonian, solve_amplitude};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = DuffingParams::new(0.0, 1.0, 0.6).unwrap();
        let h = HistoryFunction::elliptic(3.7, -1.0).unwrap();
        let o = IntegratorOptions::default();
        assert!(integrate(&p, &h, 0.0, &o).is_err());
        assert!(integrate(&p, &h, 1.0, &IntegratorOptions { max_step: 0.0, ..o }).is_err());
        assert!(integrate(
            &p,
            &h,
            1.0,
            &IntegratorOptions {
                history_stride: 0,
                ..o
            }
        )
        .is_err());
        let short = HistoryFunction::tabulated(vec![
            Sample {
                t: -0.1,
                x: 1.0,
                xdot: 0.0,
            },
            Sample {
                t: 0.0,
                x: 1.0,
                xdot: 0.0,
            },
        ])
        .unwrap();
        assert!(integrate(&p, &short, 1.0, &o).is_err());
        assert!(HistoryFunction::tabulated(vec![Sample {
            t: 0.0,
            x: 1.0,
            xdot: 0.0
        }])
        .is_err());
    }

    #[test]
    fn exact_orbit_is_preserved() {
        let p = DuffingParams::new(0.0, 1.0, 0.6).unwrap();
        let orbit = solve_amplitude(&p, 1).unwrap();
        let h = HistoryFunction::orbit(orbit, 0.0);
        let traj = integrate(&p, &h, 50.0 * orbit.period(), &IntegratorOptions::default()).unwrap();
        for k in traj.knots().iter().step_by(97) {
            let e = hamiltonian(orbit.alpha(), k.x, k.xdot);
            assert!(rel(e, orbit.energy()) < 1e-4);
        }
    }

    #[test]
    fn undelayed_energy_conserved() {
        let p = DuffingParams::new(0.5, 0.0, 1.0).unwrap();
        let h = HistoryFunction::elliptic(2.0, 0.5).unwrap();
        let traj = integrate(&p, &h, 100.0, &IntegratorOptions::default()).unwrap();
        let e0 = hamiltonian(0.5, 2.0, 0.0);
        for k in traj.knots() {
            assert!(rel(hamiltonian(0.5, k.x, k.xdot), e0) < 1e-8);
        }
    }

    #[test]
    fn knots_and_history_are_exact() {
        let p = DuffingParams::new(0.0, 1.0, 0.6).unwrap();
        let h = HistoryFunction::elliptic(3.7, -1.0).unwrap();
        let traj = integrate(&p, &h, 2.0, &IntegratorOptions::default()).unwrap();
        for k in traj.knots().iter().step_by(311) {
            assert_eq!(traj.evaluate(k.t).unwrap(), (k.x, k.xdot));
        }
        assert_eq!(traj.evaluate(-0.6).unwrap(), h.state(-0.6));
        assert!(matches!(traj.evaluate(2.5), Err(Error::OutOfRange { .. })));
        assert!(traj.evaluate(-0.61).is_err());
        // breakpoints at multiples of T are knots
        assert!(traj.knots().iter().any(|k| k.t == 0.6));
        assert!(traj.knots().iter().any(|k| k.t == 1.2));
    }

    #[test]
    fn dense_output_matches_refined_run() {
        // b = 0: compare midpoints against a run with a quarter of the step
        let p = DuffingParams::new(1.0, 0.0, 0.5).unwrap();
        let h = HistoryFunction::elliptic(1.5, 1.0).unwrap();
        let o = IntegratorOptions {
            max_step: 1e-3,
            rtol: 1e-10,
            atol: 1e-10,
            ..Default::default()
        };
        let coarse = integrate(&p, &h, 5.0, &o).unwrap();
        let fine = integrate(
            &p,
            &h,
            5.0,
            &IntegratorOptions {
                max_step: 2.5e-4,
                ..o
            },
        )
        .unwrap();
        let exact = DuffingOrbit::new(1.0, 1.5).unwrap();
        for w in coarse.knots().windows(2).step_by(113) {
            let tm = 0.5 * (w[0].t + w[1].t);
            let (x, v) = coarse.evaluate(tm).unwrap();
            let (xf, vf) = fine.evaluate(tm).unwrap();
            assert!((x - xf).abs() < 1e-8, "t = {tm}");
            assert!((v - vf).abs() < 1e-8, "t = {tm}");
            let (xe, _) = exact.state(tm);
            assert!((x - xe).abs() < 1e-8);
        }
    }

    #[test]
    fn continuity_at_knots() {
        let p = DuffingParams::new(0.0, 1.0, 0.3).unwrap();
        let h = HistoryFunction::elliptic(12.0, -1.0).unwrap();
        let traj = integrate(&p, &h, 1.0, &IntegratorOptions::default()).unwrap();
        for w in traj.knots().windows(3).step_by(57) {
            let (x, v) = interpolate(&w[0], &w[1], w[1].t);
            assert!((x - w[1].x).abs() <= 1e-12 * w[1].x.abs().max(1.0));
            assert!((v - w[1].xdot).abs() <= 1e-12 * w[1].xdot.abs().max(1.0));
        }
    }

    #[test]
    fn deterministic() {
        let p = DuffingParams::new(0.0, 1.0, 0.6).unwrap();
        let h = HistoryFunction::elliptic(3.7, -1.0).unwrap();
        let o = IntegratorOptions::default();
        let a = integrate(&p, &h, 3.0, &o).unwrap();
        let b = integrate(&p, &h, 3.0, &o).unwrap();
        assert_eq!(a.knots(), b.knots());
    }

    #[test]
    fn strided_history_and_samples() {
        let p = DuffingParams::new(0.0, 1.0, 0.6).unwrap();
        let h = HistoryFunction::elliptic(3.7, -1.0).unwrap();
        let full = integrate(&p, &h, 5.0, &IntegratorOptions::default()).unwrap();
        let thin = integrate(
            &p,
            &h,
            5.0,
            &IntegratorOptions {
                history_stride: 50,
                sample_dt: Some(0.01),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(thin.knots().len() < full.knots().len() / 5);
        assert_eq!(thin.samples().len(), 501);
        assert_eq!(full.knots().last(), thin.knots().last());
        for s in thin.samples().iter().step_by(7) {
            let (x, v) = full.evaluate(s.t).unwrap();
            assert!((x - s.x).abs() < 1e-12 * x.abs().max(1.0));
            assert!((v - s.xdot).abs() < 1e-12 * v.abs().max(1.0));
        }
    }

    #[test]
    fn tabulated_history_matches_analytic() {
        let p = DuffingParams::new(0.0, 1.0, 0.6).unwrap();
        let orbit = DuffingOrbit::new(-1.0, 3.7).unwrap();
        let samples: Vec<Sample> = (0..=6000)
            .map(|i| {
                let t = -0.6 + i as f64 * 1e-4;
                let (x, xdot) = orbit.state(t);
                Sample { t, x, xdot }
            })
            .collect();
        let tab = HistoryFunction::tabulated(samples).unwrap();
        let ell = HistoryFunction::Elliptic(orbit);
        let o = IntegratorOptions::default();
        let a = integrate(&p, &tab, 3.0, &o).unwrap();
        let b = integrate(&p, &ell, 3.0, &o).unwrap();
        let (xa, _) = a.evaluate(3.0).unwrap();
        let (xb, _) = b.evaluate(3.0).unwrap();
        assert!((xa - xb).abs() < 1e-6);
    }

    #[test]
    fn blow_up_and_underflow_reported() {
        let p = DuffingParams::new(0.0, 1.0, 0.5).unwrap();
        let o = IntegratorOptions::default();
        let flat = |x: f64| {
            HistoryFunction::tabulated(vec![
                Sample {
                    t: -0.5,
                    x,
                    xdot: 0.0,
                },
                Sample {
                    t: 0.0,
                    x,
                    xdot: 0.0,
                },
            ])
            .unwrap()
        };
        let r = integrate(&p, &flat(f64::NAN), 1.0, &o);
        assert!(matches!(r, Err(Error::BlowUp { .. })), "{r:?}");
        let r = integrate(&p, &flat(1e60), 1.0, &o);
        assert!(
            matches!(
                r,
                Err(Error::BlowUp { .. }) | Err(Error::StepUnderflow { .. })
            ),
            "{r:?}"
        );
    }
}
