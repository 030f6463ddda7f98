//! Post-processing of simulated trajectories: the relative Hamiltonian
//! deviation `(H(t) − H_n)/H_n`, its exponential rate, and a test for a
//! sustained slow oscillation of it.
//!
//! Tracking `H` rather than `x` removes the phase drift along the orbit,
//! which the delayed equation does not damp.

use crate::dde::{Sample, Trajectory};
use crate::error::{domain, Error, Result};
use crate::orbit::{hamiltonian, PeriodicOrbit};

/// Samples `(t, (H(t) − H_ref)/H_ref)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeviationSeries {
    pub t: Vec<f64>,
    pub deviation: Vec<f64>,
}

impl DeviationSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn from_samples(samples: &[Sample], alpha: f64, reference_energy: f64) -> Self {
        let mut out = Self::default();
        for s in samples {
            out.t.push(s.t);
            out.deviation
                .push((hamiltonian(alpha, s.x, s.xdot) - reference_energy) / reference_energy);
        }
        out
    }

    /// Multiplies every deviation by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            t: self.t.clone(),
            deviation: self.deviation.iter().map(|d| c * d).collect(),
        }
    }
}

/// Deviation from an arbitrary reference energy, with `H` evaluated using
/// stiffness `alpha`.
pub fn track_energy(
    traj: &Trajectory,
    alpha: f64,
    reference_energy: f64,
    sample_dt: f64,
) -> Result<DeviationSeries> {
    if !(sample_dt > 0.0) {
        return Err(domain("sample_dt must be positive"));
    }
    if reference_energy == 0.0 {
        return Err(domain("reference energy must be nonzero"));
    }
    // Recorded samples come from the full dense output, so reuse them when
    // they are on the requested grid.
    if traj.sample_dt() == Some(sample_dt) {
        return Ok(DeviationSeries::from_samples(
            traj.samples(),
            alpha,
            reference_energy,
        ));
    }
    let count = (traj.t_end() / sample_dt * (1.0 + 1e-14)).floor() as usize;
    let mut samples = Vec::with_capacity(count + 1);
    for k in 0..=count {
        let t = (k as f64 * sample_dt).min(traj.t_end());
        let (x, xdot) = traj.evaluate(t)?;
        samples.push(Sample { t, x, xdot });
    }
    Ok(DeviationSeries::from_samples(
        &samples,
        alpha,
        reference_energy,
    ))
}

/// `(H(t) − H_n)/H_n` along `traj`.
pub fn track_hamiltonian(
    traj: &Trajectory,
    orbit: &PeriodicOrbit,
    sample_dt: f64,
) -> Result<DeviationSeries> {
    track_energy(traj, orbit.alpha(), orbit.energy(), sample_dt)
}

/// Least-squares line through `log|deviation|` on `[t_lo, t_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub n_points: usize,
}

/// Above this `|deviation|` the dynamics is no longer linear.
pub const NONLINEAR_LEVEL: f64 = 0.5;
/// Growth fits stop at this fraction of the largest `|deviation|`.
pub const SATURATION_FRACTION: f64 = 0.25;
pub const MIN_FIT_POINTS: usize = 10;
pub const MAX_RESIDUAL_RMS: f64 = 0.5;

fn rms(xs: &[f64]) -> f64 {
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Estimates the exponential rate of `|deviation|`.
///
/// The window drops the first 10% of samples. If the RMS of the final 5%
/// is below `|deviation|` at the start of the window, the run is decaying:
/// the window starts after the last sample above 0.5 and ends when
/// `|deviation|` first falls below ten times that final RMS (the noise
/// floor). Otherwise the run is growing, and the window ends once
/// `|deviation|` exceeds 0.5 or a quarter of its largest value, whichever
/// is lower; an unstable orbit usually saturates onto a neighbour well
/// below 0.5.
pub fn fit_exponent(series: &DeviationSeries) -> Result<SlopeFit> {
    let n = series.len();
    if n < MIN_FIT_POINTS {
        return Err(Error::InsufficientLength(format!(
            "{n} samples, need {MIN_FIT_POINTS}"
        )));
    }
    let dev = &series.deviation;
    let start = n / 10;
    let tail = &dev[n - (n / 20).max(1)..];
    let floor = rms(tail);
    let growing = !(floor < dev[start].abs());
    let (lo, hi) = if !growing {
        let lo = dev[start..]
            .iter()
            .rposition(|d| d.abs() > NONLINEAR_LEVEL)
            .map_or(start, |i| start + i + 1);
        let threshold = 10.0 * floor;
        let hi = dev[lo..]
            .iter()
            .position(|d| d.abs() < threshold)
            .map_or(n, |i| lo + i);
        (lo, hi)
    } else {
        let peak = dev[start..].iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let level = NONLINEAR_LEVEL.min(SATURATION_FRACTION * peak);
        let hi = dev[start..]
            .iter()
            .position(|d| d.abs() > level)
            .map_or(n, |i| start + i);
        (start, hi)
    };

    let points: Vec<(f64, f64)> = (lo..hi)
        .filter(|&i| dev[i] != 0.0 && dev[i].is_finite())
        .map(|i| (series.t[i], dev[i].abs().ln()))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::NoExponentialRegime(format!(
            "only {} samples in the fit window",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let stt: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sty: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sty / stt;
    let intercept = my - slope * mt;
    let resid: Vec<f64> = points
        .iter()
        .map(|p| p.1 - intercept - slope * p.0)
        .collect();
    let residual_rms = rms(&resid);
    let window = (points[0].0, points[points.len() - 1].0);
    if !(residual_rms <= MAX_RESIDUAL_RMS) {
        return Err(Error::NoExponentialRegime(format!(
            "log-linear residual RMS {residual_rms:.3} on [{:.3}, {:.3}]",
            window.0, window.1
        )));
    }
    Ok(SlopeFit {
        slope,
        intercept,
        window,
        residual_rms,
        n_points: points.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusReport {
    pub sustained: bool,
    /// Mean spacing of upward crossings after the transient; 0 if fewer
    /// than two were found.
    pub oscillation_period: f64,
    /// Half the peak-to-peak range over the final half of the record.
    pub relative_amplitude: f64,
    pub transient_end: f64,
}

/// Relative spread allowed in the settled envelope.
pub const ENVELOPE_TOLERANCE: f64 = 0.1;
/// Oscillations smaller than this are treated as numerical noise.
pub const MIN_TORUS_AMPLITUDE: f64 = 1e-3;
/// Slow periods (windows of length `2T`) required in the record.
pub const MIN_SLOW_PERIODS: usize = 20;

fn half_range(xs: &[f64]) -> f64 {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    0.5 * (hi - lo)
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Upward crossings of the mean with hysteresis `±band`, linearly
/// interpolated.
fn upward_crossings(t: &[f64], x: &[f64], band: f64) -> Vec<f64> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let mut armed = false;
    let mut out = Vec::new();
    for i in 1..x.len() {
        let (a, b) = (x[i - 1] - mean, x[i] - mean);
        if b < -band {
            armed = true;
        }
        if armed && a < 0.0 && b >= 0.0 {
            let s = -a / (b - a);
            out.push(t[i - 1] + s * (t[i] - t[i - 1]));
            armed = false;
        }
    }
    out
}

/// Looks for a sustained slow oscillation of the deviation, as left behind
/// by a torus bifurcation.
///
/// The record is cut into windows of length `2T`. The transient ends at the
/// first window after which every window amplitude is within 10% of the
/// final level (the median of the last four windows). The oscillation
/// counts as sustained when the two halves of the post-transient record
/// have amplitudes within 10% of each other, above the noise level, with
/// regular mean crossings.
pub fn detect_torus(series: &DeviationSeries, delay: f64) -> Result<TorusReport> {
    if !(delay > 0.0) {
        return Err(domain("delay must be positive"));
    }
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientLength("fewer than two samples".into()));
    }
    let (t, dev) = (&series.t, &series.deviation);
    let window = 2.0 * delay;
    let t0 = t[0];
    let windows = ((t[n - 1] - t0) / window).floor() as usize;
    if windows < MIN_SLOW_PERIODS {
        return Err(Error::InsufficientLength(format!(
            "{windows} windows of length 2T, need at least {MIN_SLOW_PERIODS}"
        )));
    }
    let bounds: Vec<usize> = (0..=windows)
        .map(|k| t.partition_point(|&ti| ti < t0 + k as f64 * window))
        .collect();
    let amps: Vec<f64> = bounds
        .windows(2)
        .map(|w| half_range(&dev[w[0]..w[1].max(w[0] + 1)]))
        .collect();

    // Settled once every later window is within 10% of the final level.
    let mut last: Vec<f64> = amps[windows.saturating_sub(4)..].to_vec();
    last.sort_by(f64::total_cmp);
    let level = 0.5 * (last[last.len() / 2] + last[(last.len() - 1) / 2]);
    let mut settled = windows;
    for k in (0..windows).rev() {
        if relative_change(amps[k], level) >= ENVELOPE_TOLERANCE {
            break;
        }
        settled = k;
    }
    let transient_end = t0 + settled as f64 * window;
    let not_sustained = TorusReport {
        sustained: false,
        oscillation_period: 0.0,
        relative_amplitude: half_range(&dev[n / 2..]),
        transient_end,
    };

    // Need two windows in each half to compare.
    if windows - settled < 4 {
        return Ok(not_sustained);
    }
    let start = bounds[settled];
    let mid = bounds[settled + (windows - settled) / 2];
    let end = bounds[windows];
    let first = half_range(&dev[start..mid]);
    let second = half_range(&dev[mid..end]);
    let amplitude = second;
    let crossings = upward_crossings(&t[start..end], &dev[start..end], 0.25 * amplitude);
    let period = if crossings.len() >= 2 {
        (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64
    } else {
        0.0
    };
    let regular = crossings.len() >= 3 && {
        let gaps: Vec<f64> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.iter().all(|g| (g - period).abs() < 0.5 * period)
    };
    let sustained = relative_change(first, second) < ENVELOPE_TOLERANCE
        && amplitude > MIN_TORUS_AMPLITUDE
        && regular;
    Ok(TorusReport {
        sustained,
        oscillation_period: if sustained { period } else { 0.0 },
        relative_amplitude: amplitude,
        transient_end,
    })
}
