//! Scenario settings: built-in defaults, then a TOML file's `[defaults]`
//! table, then one `[scenario.<name>]` table, then command-line flags.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use duffing_core::floquet::t_crit;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// A delay given as a number or as an expression in `tcrit`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Value(f64),
    Expr(String),
}

impl DelaySpec {
    pub fn resolve(&self) -> Result<f64> {
        match self {
            DelaySpec::Value(v) => Ok(*v),
            DelaySpec::Expr(s) => parse_delay(s),
        }
    }
}

/// Parses `0.6`, `tcrit`, `tcrit+0.1`, `tcrit-0.2` or `0.9*tcrit`.
pub fn parse_delay(s: &str) -> Result<f64> {
    let s = s.trim().to_ascii_lowercase();
    if let Ok(v) = s.parse::<f64>() {
        return Ok(v);
    }
    let tc = t_crit();
    if let Some(rest) = s.strip_prefix("tcrit") {
        if rest.is_empty() {
            return Ok(tc);
        }
        let (sign, num) = match rest.split_at(1) {
            ("+", n) => (1.0, n),
            ("-", n) => (-1.0, n),
            _ => bail!("cannot parse delay '{s}'"),
        };
        let v: f64 = num
            .parse()
            .with_context(|| format!("cannot parse delay '{s}'"))?;
        return Ok(tc + sign * v);
    }
    if let Some(factor) = s.strip_suffix("*tcrit") {
        let v: f64 = factor
            .parse()
            .with_context(|| format!("cannot parse delay '{s}'"))?;
        return Ok(v * tc);
    }
    bail!("cannot parse delay '{s}' (expected a number, tcrit, tcrit+x, tcrit-x or x*tcrit)")
}

/// One layer of settings; unset fields fall through to the layer below.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub a: Option<f64>,
    pub b: Option<f64>,
    #[serde(rename = "T")]
    pub delay: Option<OneOrMany<DelaySpec>>,
    pub n: Option<OneOrMany<u32>>,
    #[serde(rename = "A0")]
    pub a0: Option<OneOrMany<f64>>,
    pub t_end: Option<OneOrMany<f64>>,
    pub t_from: Option<f64>,
    pub max_step: Option<f64>,
    pub tol: Option<f64>,
    pub sample_dt: Option<f64>,
    pub k: Option<OneOrMany<u32>>,
    pub out: Option<PathBuf>,
}

impl Layer {
    /// Fields set in `self` win over `below`.
    pub fn over(self, below: Layer) -> Layer {
        Layer {
            a: self.a.or(below.a),
            b: self.b.or(below.b),
            delay: self.delay.or(below.delay),
            n: self.n.or(below.n),
            a0: self.a0.or(below.a0),
            t_end: self.t_end.or(below.t_end),
            t_from: self.t_from.or(below.t_from),
            max_step: self.max_step.or(below.max_step),
            tol: self.tol.or(below.tol),
            sample_dt: self.sample_dt.or(below.sample_dt),
            k: self.k.or(below.k),
            out: self.out.or(below.out),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    defaults: Layer,
    #[serde(default)]
    scenario: BTreeMap<String, Layer>,
}

/// Reads `path` and returns its `[defaults]` merged under the chosen
/// scenario.
pub fn load(path: &Path, scenario: Option<&str>) -> Result<Layer> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    from_toml(&text, scenario).with_context(|| format!("in config file {}", path.display()))
}

pub fn from_toml(text: &str, scenario: Option<&str>) -> Result<Layer> {
    let mut file: ConfigFile = toml::from_str(text)?;
    let Some(name) = scenario else {
        return Ok(file.defaults);
    };
    let Some(layer) = file.scenario.remove(name) else {
        let known: Vec<_> = file.scenario.keys().cloned().collect();
        bail!("no scenario '{name}' (known: {})", known.join(", "));
    };
    Ok(layer.over(file.defaults))
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub a: f64,
    pub b: f64,
    pub delays: Vec<f64>,
    pub ns: Vec<u32>,
    pub a0: Vec<f64>,
    pub t_end: Vec<f64>,
    pub t_from: f64,
    pub max_step: f64,
    pub tol: f64,
    pub sample_dt: f64,
    pub k: Vec<u32>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_MAX_STEP: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_SAMPLE_DT: f64 = 0.01;

fn positive(name: &str, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        bail!("{name} must be positive, got {v}");
    }
    Ok(v)
}

impl Settings {
    pub fn resolve(layer: Layer) -> Result<Self> {
        let delays = layer
            .delay
            .map(OneOrMany::into_vec)
            .unwrap_or_default()
            .iter()
            .map(DelaySpec::resolve)
            .collect::<Result<Vec<_>>>()?;
        for &t in &delays {
            positive("T", t)?;
        }
        let ns = layer.n.map(OneOrMany::into_vec).unwrap_or_default();
        if ns.contains(&0) {
            bail!("n must be a positive integer");
        }
        let a0 = layer.a0.map(OneOrMany::into_vec).unwrap_or_default();
        for &v in &a0 {
            positive("A0", v)?;
        }
        let t_end = layer.t_end.map(OneOrMany::into_vec).unwrap_or_default();
        for &v in &t_end {
            positive("t_end", v)?;
        }
        let k = layer.k.map(OneOrMany::into_vec).unwrap_or_else(|| vec![1]);
        Ok(Self {
            a: layer.a.unwrap_or(0.0),
            b: layer.b.unwrap_or(1.0),
            delays,
            ns,
            a0,
            t_end,
            t_from: layer.t_from.unwrap_or(0.0),
            max_step: positive("max_step", layer.max_step.unwrap_or(DEFAULT_MAX_STEP))?,
            tol: positive("tol", layer.tol.unwrap_or(DEFAULT_TOL))?,
            sample_dt: positive("sample_dt", layer.sample_dt.unwrap_or(DEFAULT_SAMPLE_DT))?,
            k,
            out: layer.out,
        })
    }

    pub fn require_delays(&self) -> Result<&[f64]> {
        if self.delays.is_empty() {
            bail!("no delay given (use --T or set T in the config)");
        }
        Ok(&self.delays)
    }

    pub fn require_ns(&self) -> Result<&[u32]> {
        if self.ns.is_empty() {
            bail!("no n given (use --n or set n in the config)");
        }
        Ok(&self.ns)
    }

    /// Header comment lines echoing every setting.
    pub fn header(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let _ = writeln!(s, "# a = {}, b = {}", self.a, self.b);
        let _ = writeln!(s, "# T = [{}]", list(&self.delays));
        let _ = writeln!(
            s,
            "# n = [{}]",
            self.ns
                .iter()
                .map(u32::to_string)
                .collect::<Vec<_>>()
                .join(",")
        );
        if !self.a0.is_empty() {
            let _ = writeln!(s, "# A0 = [{}]", list(&self.a0));
        }
        if !self.t_end.is_empty() {
            let _ = writeln!(
                s,
                "# t_end = [{}], t_from = {}",
                list(&self.t_end),
                self.t_from
            );
        }
        let _ = writeln!(
            s,
            "# max_step = {:e}, tol = {:e}, sample_dt = {}",
            self.max_step, self.tol, self.sample_dt
        );
        s
    }
}

/// One simulation: delay, orbit index, initial amplitude, horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Run {
    pub delay: f64,
    pub n: u32,
    /// `None` starts on the reference orbit.
    pub a0: Option<f64>,
    pub t_end: f64,
}

/// Pairs the list-valued settings element by element; a list of length
/// one applies to every run.
pub fn runs(s: &Settings) -> Result<Vec<Run>> {
    let delays = s.require_delays()?;
    let ns = s.require_ns()?;
    if s.t_end.is_empty() {
        bail!("no t_end given (use --t-end or set t_end in the config)");
    }
    let lens = [delays.len(), ns.len(), s.a0.len().max(1), s.t_end.len()];
    let count = *lens.iter().max().expect("non-empty");
    if lens.iter().any(|&l| l != 1 && l != count) {
        bail!("list lengths of T, n, A0, t_end must be 1 or all equal, got {lens:?}");
    }
    let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
    Ok((0..count)
        .map(|i| Run {
            delay: pick(delays, i),
            n: if ns.len() == 1 { ns[0] } else { ns[i] },
            a0: if s.a0.is_empty() {
                None
            } else {
                Some(pick(&s.a0, i))
            },
            t_end: pick(&s.t_end, i),
        })
        .collect())
}
