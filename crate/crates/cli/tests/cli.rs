use std::path::Path;
use std::process::{Command, Output};

fn duffing(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_duffing"))
        .args(args)
        .output()
        .expect("spawn duffing")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Header row and data rows, skipping `#` comments.
fn table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .expect("header")
        .split(',')
        .map(str::to_owned)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(text: &str, name: &str) -> Vec<String> {
    let (header, rows) = table(text);
    let i = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

fn floats(text: &str, name: &str) -> Vec<f64> {
    column(text, name)
        .iter()
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn amplitude_matches_printed_values() {
    let o = duffing(&[
        "amplitude",
        "--a",
        "0",
        "--b",
        "1",
        "--T",
        "0.6",
        "--n",
        "1,2",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("# schema: duffing-amplitude/v1"));
    let a = floats(&text, "A_n");
    assert_eq!(format!("{:.8}", a[0]), "6.29721145");
    assert_eq!(format!("{:.11}", a[1]), "12.30144591494");
}

#[test]
#[allow(clippy::excessive_precision)]
fn amplitude_full_precision() {
    let text = stdout(&duffing(&["amplitude", "--T", "0.9", "--n", "27,28,51,52"]));
    let raw = column(&text, "A_n");
    assert_eq!(raw.len(), 4);
    for v in &raw {
        let mantissa = v.split('e').next().unwrap().replace(['.', '-'], "");
        assert_eq!(mantissa.len(), 17, "{v}");
    }
    let a = floats(&text, "A_n");
    assert!((a[1] - 115.35833191723956861).abs() < 1e-9);
    assert!((a[3] - 214.24522922435665376).abs() < 1e-9);
}

#[test]
fn zero_n_is_a_usage_error() {
    let o = duffing(&["amplitude", "--T", "0.6", "--n", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--n"));
}

#[test]
fn computation_errors_exit_nonzero() {
    let o = duffing(&["amplitude", "--T", "-1", "--n", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = duffing(&["amplitude", "--n", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = duffing(&["tcrit", "--k", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_passes_and_fault_injection_fails() {
    let o = duffing(&["verify"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("[FAIL]"));
    let o = duffing(&["verify", "--perturb-p-star", "1e-6"]);
    assert_eq!(o.status.code(), Some(1));
    let text = stdout(&o);
    assert!(
        text.lines()
            .any(|l| l.starts_with("[FAIL] energy identity")),
        "{text}"
    );
}

#[test]
fn classify_parity_law() {
    let text = stdout(&duffing(&["classify", "--T", "0.3", "--n", "1,2,11,12"]));
    assert_eq!(
        column(&text, "verdict"),
        ["stable", "unstable", "stable", "unstable"]
    );
    let text = stdout(&duffing(&[
        "classify", "--b", "-1", "--T", "0.3", "--n", "1,2",
    ]));
    assert_eq!(column(&text, "verdict"), ["unstable", "stable"]);
    assert_eq!(column(&text, "small_n"), ["true", "true"]);
}

#[test]
fn characteristic_agrees_with_classify() {
    let text = stdout(&duffing(&["characteristic", "--T", "0.3", "--n", "11,12"]));
    assert_eq!(column(&text, "verdict"), ["stable", "unstable"]);
    let s = floats(&text, "abs_sigma");
    let star = floats(&text, "abs_sigma_star");
    for (a, b) in s.iter().zip(&star) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }
}

#[test]
fn tcrit_values() {
    let text = stdout(&duffing(&["tcrit", "--k", "1,3"]));
    let t = floats(&text, "T");
    assert!((t[0] - 1.5f64.sqrt() * std::f64::consts::PI).abs() < 1e-14);
    assert!((t[1] - 3.0 * t[0]).abs() < 1e-13);
    assert_eq!(column(&text, "parity"), ["odd", "odd"]);
}

#[test]
fn simulate_on_orbit_writes_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = duffing(&[
        "simulate",
        "--T",
        "0.6",
        "--n",
        "1",
        "--t-end",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let file = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| {
            p.file_name()
                .unwrap()
                .to_str()
                .unwrap()
                .starts_with("simulate_T0.6_n1_A6.2972")
        })
        .expect("series file named after T, n and A0");
    let text = std::fs::read_to_string(&file).unwrap();
    let (header, rows) = table(&text);
    assert_eq!(header, ["t", "x", "xdot", "H", "rel_dev"]);
    assert_eq!(rows.len(), 201);
    for d in floats(&text, "rel_dev") {
        assert!(d.abs() < 1e-5);
    }
    assert!(Path::new(&out.join("simulate_summary.csv")).exists());
}

#[test]
fn config_layers_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[defaults]\nb = 1.0\ntol = 1e-8\n[scenario.s]\nT = 0.6\nn = [1, 2]\n",
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let text = stdout(&duffing(&["amplitude", "--config", c, "--scenario", "s"]));
    assert!(text.contains("# max_step = 1e-4, tol = 1e-8"));
    assert_eq!(column(&text, "n"), ["1", "2"]);
    let text = stdout(&duffing(&[
        "amplitude",
        "--config",
        c,
        "--scenario",
        "s",
        "--n",
        "3",
        "--tol",
        "1e-9",
    ]));
    assert!(text.contains("tol = 1e-9"));
    assert_eq!(column(&text, "n"), ["3"]);
    let o = duffing(&["amplitude", "--config", c, "--scenario", "missing"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shipped_scenarios_parse() {
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios.toml");
    for name in [
        "attractor",
        "basin",
        "slopes-short-delay",
        "slopes-long-delay",
        "torus",
        "torus-closeup",
    ] {
        let o = duffing(&["amplitude", "--config", cfg, "--scenario", name]);
        assert!(
            o.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn multiple_runs_need_out_dir() {
    let o = duffing(&["simulate", "--T", "0.6", "--n", "1,2", "--t-end", "1"]);
    assert_eq!(o.status.code(), Some(1));
}
