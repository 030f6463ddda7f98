mod commands;
mod config;
mod csv;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use config::{DelaySpec, Layer, OneOrMany};

#[derive(Parser)]
#[command(
    name = "duffing",
    version,
    about = "Rapidly oscillating periodic orbits of x'' + a x + b x(t-T) + x^3 = 0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Amplitude, period, energy, frequency and elliptic parameter of each orbit x_n.
    Amplitude(Common),
    /// Integrate the delayed equation from an elliptic history; writes t, x, xdot, H.
    Simulate(Common),
    /// Simulate and fit the exponential rate of the Hamiltonian deviation.
    Floquet(Common),
    /// Stability verdict of the small-delay theory on a (T, n) grid.
    Classify(Common),
    /// Solve the half-period characteristic equation on a (T, n) grid.
    Characteristic(Common),
    /// Torus boundaries T = k pi sqrt(3/(2 |b|)) for odd k.
    Tcrit(Common),
    /// Simulate and test the Hamiltonian deviation for a sustained slow oscillation.
    Torus(Common),
    /// Run the invariant self-check suite.
    Verify(VerifyArgs),
}

/// Settings shared by the computational subcommands. List flags take
/// comma-separated values; for simulate, floquet and torus the lists are
/// paired element by element and a single value applies to every run.
#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    /// Delays: numbers, `tcrit`, `tcrit+x`, `tcrit-x` or `x*tcrit`.
    #[arg(long = "T", value_delimiter = ',', allow_hyphen_values = true)]
    delay: Vec<String>,
    /// Orbit indices n >= 1 (half periods per delay).
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
    n: Vec<u32>,
    /// Initial amplitudes of the elliptic history; omitted starts on x_n.
    #[arg(long = "A0", value_delimiter = ',')]
    a0: Vec<f64>,
    #[arg(long = "t-end", value_delimiter = ',')]
    t_end: Vec<f64>,
    /// First time written to series files.
    #[arg(long = "t-from")]
    t_from: Option<f64>,
    #[arg(long = "max-step")]
    max_step: Option<f64>,
    /// Relative and absolute local error tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "sample-dt")]
    sample_dt: Option<f64>,
    /// Odd torus indices for `tcrit`.
    #[arg(long, value_delimiter = ',')]
    k: Vec<u32>,
    /// Output file for tables, output directory for series commands.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with a `[defaults]` table and `[scenario.NAME]` tables.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario to load from the config file.
    #[arg(long, requires = "config")]
    scenario: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Fault injection: scale the period constant by (1 + REL) in the checks
    /// that take it as input.
    #[arg(
        long = "perturb-p-star",
        value_name = "REL",
        allow_hyphen_values = true
    )]
    perturb_p_star: Option<f64>,
}

fn list<T>(v: Vec<T>) -> Option<OneOrMany<T>> {
    (!v.is_empty()).then_some(OneOrMany::Many(v))
}

impl Common {
    fn settings(self) -> Result<config::Settings> {
        let file = match &self.config {
            Some(path) => config::load(path, self.scenario.as_deref())?,
            None => Layer::default(),
        };
        let flags = Layer {
            a: self.a,
            b: self.b,
            delay: list(self.delay.into_iter().map(DelaySpec::Expr).collect()),
            n: list(self.n),
            a0: list(self.a0),
            t_end: list(self.t_end),
            t_from: self.t_from,
            max_step: self.max_step,
            tol: self.tol,
            sample_dt: self.sample_dt,
            k: list(self.k),
            out: self.out,
        };
        config::Settings::resolve(flags.over(file))
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Amplitude(c) => commands::amplitude(&c.settings()?)?,
        Command::Simulate(c) => commands::simulate(&c.settings()?)?,
        Command::Floquet(c) => commands::floquet(&c.settings()?)?,
        Command::Classify(c) => commands::classify(&c.settings()?)?,
        Command::Characteristic(c) => commands::characteristic(&c.settings()?)?,
        Command::Tcrit(c) => commands::tcrit(&c.settings()?)?,
        Command::Torus(c) => commands::torus(&c.settings()?)?,
        Command::Verify(v) => return Ok(commands::verify(v.perturb_p_star)),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
