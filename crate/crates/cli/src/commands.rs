use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use duffing_core::dde::{integrate, HistoryFunction, IntegratorOptions, Trajectory};
use duffing_core::diagnostics::{detect_torus, fit_exponent, DeviationSeries};
use duffing_core::elliptic::p_star;
use duffing_core::floquet::{
    classify as classify_orbit, sigma_star, solve_characteristic, torus_boundary,
};
use duffing_core::orbit::{hamiltonian, solve_amplitude, DuffingParams, Parity, PeriodicOrbit};
use duffing_core::verify::{self, VerifyOptions};

use crate::config::{runs, Run, Settings};
use crate::csv::{Cell, Table};

/// Knots older than one delay are thinned to every this many steps; series
/// output is sampled from the full-resolution dense output regardless.
const HISTORY_STRIDE: usize = 1000;

fn grid(s: &Settings) -> Result<Vec<(f64, u32)>> {
    let ns = s.require_ns()?;
    Ok(s.require_delays()?
        .iter()
        .flat_map(|&t| ns.iter().map(move |&n| (t, n)))
        .collect())
}

fn params(s: &Settings, delay: f64) -> Result<DuffingParams> {
    Ok(DuffingParams::new(s.a, s.b, delay)?)
}

fn orbit_for(s: &Settings, delay: f64, n: u32) -> Result<PeriodicOrbit> {
    solve_amplitude(&params(s, delay)?, n)
        .with_context(|| format!("solving for x_{n} at T = {delay}"))
}

pub fn amplitude(s: &Settings) -> Result<()> {
    let rows = grid(s)?
        .into_par_iter()
        .map(|(t, n)| {
            let o = orbit_for(s, t, n)?;
            Ok(vec![
                Cell::from(t),
                n.into(),
                o.amplitude().into(),
                o.period().into(),
                o.energy().into(),
                o.omega().into(),
                o.m().value().into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(
        "amplitude",
        s.header(),
        &["T", "n", "A_n", "p_n", "H_n", "omega_n", "m_n"],
    );
    rows.into_iter().for_each(|r| table.push(r));
    table.emit(s.out.as_deref())
}

pub fn classify(s: &Settings) -> Result<()> {
    let mut table = Table::new(
        "classify",
        s.header(),
        &[
            "T",
            "n",
            "b",
            "verdict",
            "condition_value",
            "predicted_exponent",
            "small_n",
        ],
    );
    for (t, n) in grid(s)? {
        let v = classify_orbit(&params(s, t)?, n)?;
        table.push(vec![
            t.into(),
            n.into(),
            s.b.into(),
            v.verdict.to_string().into(),
            v.condition_value.into(),
            v.predicted_exponent.into(),
            v.small_n.into(),
        ]);
    }
    table.emit(s.out.as_deref())
}

pub fn characteristic(s: &Settings) -> Result<()> {
    let rows = grid(s)?
        .into_par_iter()
        .map(|(t, n)| {
            let p = params(s, t)?;
            let sol = solve_characteristic(&p, n).with_context(|| format!("T = {t}, n = {n}"))?;
            let star = sigma_star(&p, n)?;
            let exponent = sol.exponent(t);
            Ok(vec![
                Cell::from(t),
                n.into(),
                sol.epsilon.into(),
                sol.mu.re.into(),
                sol.mu.im.into(),
                sol.sigma.norm().into(),
                if exponent > 0.0 { "unstable" } else { "stable" }.into(),
                exponent.into(),
                star.norm().into(),
                sol.iterations.into(),
                sol.ambiguous.into(),
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(
        "characteristic",
        s.header(),
        &[
            "T",
            "n",
            "epsilon",
            "re_mu",
            "im_mu",
            "abs_sigma",
            "verdict",
            "exponent",
            "abs_sigma_star",
            "iterations",
            "ambiguous",
        ],
    );
    rows.into_iter().for_each(|r| table.push(r));
    table.emit(s.out.as_deref())
}

pub fn tcrit(s: &Settings) -> Result<()> {
    let mut table = Table::new("tcrit", s.header(), &["b", "parity", "k", "T", "omega"]);
    for &k in &s.k {
        for parity in [Parity::Even, Parity::Odd] {
            if let Some(tb) = torus_boundary(s.b, parity, k)? {
                table.push(vec![
                    s.b.into(),
                    parity.to_string().into(),
                    k.into(),
                    tb.delay.into(),
                    tb.omega.into(),
                ]);
            }
        }
    }
    table.emit(s.out.as_deref())
}

struct Simulation {
    run: Run,
    orbit: PeriodicOrbit,
    traj: Trajectory,
    series: DeviationSeries,
}

impl Simulation {
    fn a0(&self) -> f64 {
        self.run.a0.unwrap_or(self.orbit.amplitude())
    }
}

fn simulate_one(s: &Settings, run: Run) -> Result<Simulation> {
    let orbit = orbit_for(s, run.delay, run.n)?;
    let history = match run.a0 {
        Some(a0) => HistoryFunction::elliptic(a0, orbit.alpha())?,
        None => HistoryFunction::orbit(orbit, 0.0),
    };
    let options = IntegratorOptions {
        max_step: s.max_step,
        rtol: s.tol,
        atol: s.tol,
        history_stride: HISTORY_STRIDE,
        sample_dt: Some(s.sample_dt),
        ..Default::default()
    };
    let traj = integrate(&params(s, run.delay)?, &history, run.t_end, &options)
        .with_context(|| format!("integrating T = {}, n = {}", run.delay, run.n))?;
    let series = DeviationSeries::from_samples(traj.samples(), orbit.alpha(), orbit.energy());
    Ok(Simulation {
        run,
        orbit,
        traj,
        series,
    })
}

fn simulate_all(s: &Settings) -> Result<Vec<Simulation>> {
    let runs = runs(s)?;
    if s.out.is_none() && runs.len() > 1 {
        bail!(
            "{} runs requested; --out DIR is required to hold one series file each",
            runs.len()
        );
    }
    runs.into_par_iter().map(|r| simulate_one(s, r)).collect()
}

fn series_table(s: &Settings, sim: &Simulation) -> Table {
    let mut header = s.header();
    header.push_str(&format!(
        "# run: T = {}, n = {}, A0 = {}, t_end = {}, A_n = {:.16e}, H_n = {:.16e}\n",
        sim.run.delay,
        sim.run.n,
        sim.a0(),
        sim.run.t_end,
        sim.orbit.amplitude(),
        sim.orbit.energy()
    ));
    let mut table = Table::new("series", header, &["t", "x", "xdot", "H", "rel_dev"]);
    let alpha = sim.orbit.alpha();
    for (smp, dev) in sim.traj.samples().iter().zip(&sim.series.deviation) {
        if smp.t + 1e-12 < s.t_from {
            continue;
        }
        table.push(vec![
            smp.t.into(),
            smp.x.into(),
            smp.xdot.into(),
            hamiltonian(alpha, smp.x, smp.xdot).into(),
            (*dev).into(),
        ]);
    }
    table
}

fn series_path(dir: &Path, kind: &str, run: &Run, a0: f64) -> PathBuf {
    dir.join(format!("{kind}_T{}_n{}_A{}.csv", run.delay, run.n, a0))
}

/// Writes each run's series, to `--out DIR` or to stdout for a single run,
/// then the summary table to stdout and, with a directory, `summary.csv`.
fn emit_runs(s: &Settings, kind: &str, sims: &[Simulation], summary: &Table) -> Result<()> {
    match &s.out {
        Some(dir) => {
            sims.par_iter().try_for_each(|sim| {
                series_table(s, sim).emit(Some(&series_path(dir, kind, &sim.run, sim.a0())))
            })?;
            summary.emit(Some(&dir.join(format!("{kind}_summary.csv"))))?;
            summary.emit(None)
        }
        None => series_table(s, &sims[0]).emit(None),
    }
}

pub fn simulate(s: &Settings) -> Result<()> {
    let sims = simulate_all(s)?;
    let mut summary = Table::new(
        "simulate-summary",
        s.header(),
        &[
            "T",
            "n",
            "A0",
            "A_n",
            "t_end",
            "accepted_steps",
            "rejected_steps",
            "final_rel_dev",
            "max_abs_rel_dev",
        ],
    );
    for sim in &sims {
        let stats = sim.traj.stats();
        summary.push(vec![
            sim.run.delay.into(),
            sim.run.n.into(),
            sim.a0().into(),
            sim.orbit.amplitude().into(),
            sim.run.t_end.into(),
            stats.accepted.into(),
            stats.rejected.into(),
            sim.series
                .deviation
                .last()
                .copied()
                .unwrap_or(f64::NAN)
                .into(),
            sim.series
                .deviation
                .iter()
                .fold(0.0f64, |m, d| m.max(d.abs()))
                .into(),
        ]);
    }
    emit_runs(s, "simulate", &sims, &summary)
}

pub fn floquet(s: &Settings) -> Result<()> {
    let sims = simulate_all(s)?;
    let mut summary = Table::new(
        "floquet",
        s.header(),
        &[
            "T",
            "n",
            "parity",
            "A0",
            "A_n",
            "t_end",
            "slope",
            "intercept",
            "fit_t_lo",
            "fit_t_hi",
            "residual_rms",
            "n_points",
            "predicted_exponent",
            "sigma_star_exponent",
        ],
    );
    for sim in &sims {
        let run = &sim.run;
        let fit = fit_exponent(&sim.series).with_context(|| {
            format!(
                "fitting T = {}, n = {}, A0 = {}",
                run.delay,
                run.n,
                sim.a0()
            )
        })?;
        let p = params(s, run.delay)?;
        let predicted = classify_orbit(&p, run.n)?.predicted_exponent;
        let star = -sigma_star(&p, run.n)?.norm().ln() / run.delay;
        summary.push(vec![
            run.delay.into(),
            run.n.into(),
            Parity::of(run.n).to_string().into(),
            sim.a0().into(),
            sim.orbit.amplitude().into(),
            run.t_end.into(),
            fit.slope.into(),
            fit.intercept.into(),
            fit.window.0.into(),
            fit.window.1.into(),
            fit.residual_rms.into(),
            fit.n_points.into(),
            predicted.into(),
            star.into(),
        ]);
    }
    emit_runs(s, "floquet", &sims, &summary)
}

pub fn torus(s: &Settings) -> Result<()> {
    let sims = simulate_all(s)?;
    let mut summary = Table::new(
        "torus",
        s.header(),
        &[
            "T",
            "n",
            "A0",
            "t_end",
            "sustained",
            "oscillation_period",
            "period_over_2T",
            "relative_amplitude",
            "transient_end",
        ],
    );
    for sim in &sims {
        let run = &sim.run;
        let r = detect_torus(&sim.series, run.delay).with_context(|| {
            format!(
                "torus test T = {}, n = {}, A0 = {}",
                run.delay,
                run.n,
                sim.a0()
            )
        })?;
        summary.push(vec![
            run.delay.into(),
            run.n.into(),
            sim.a0().into(),
            run.t_end.into(),
            r.sustained.into(),
            r.oscillation_period.into(),
            (r.oscillation_period / (2.0 * run.delay)).into(),
            r.relative_amplitude.into(),
            r.transient_end.into(),
        ]);
    }
    emit_runs(s, "torus", &sims, &summary)
}

pub fn verify(perturb: Option<f64>) -> ExitCode {
    let options = VerifyOptions {
        p_star: p_star() * (1.0 + perturb.unwrap_or(0.0)),
    };
    let checks = verify::run(&options);
    let mut ok = true;
    for c in &checks {
        println!(
            "[{}] {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        ok &= c.passed;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!(
        "{} of {} checks passed",
        checks.len() - failed,
        checks.len()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
