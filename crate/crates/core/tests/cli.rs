use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use heatctl::cli::export::parse_curve;
use heatctl::cli::{EXIT_INSIDE_TARGET, EXIT_INVALID_CONFIG, EXIT_OK};
use serde_json::Value;

const SMALL: &str = r#"{
  "grid": { "ell": 1.0, "n": 31 },
  "nonlinearity": { "kind": "zero" },
  "y0": { "modes": { "1": 2.0 } },
  "r": 0.5,
  "nt": 100,
  "experiment": { "t_grid": [0.03, 0.07], "m_grid": [0.0, 1.0, 10.0] }
}"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.json");
    std::fs::write(&path, text).unwrap();
    path
}

fn heatctl(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_wall_time(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.contains("wall_time_s"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn mintime_with_zero_bound_returns_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(
        heatctl(&["gamma"], &config, &out).status.code(),
        Some(EXIT_OK)
    );
    assert_eq!(
        heatctl(&["mintime", "0"], &config, &out).status.code(),
        Some(EXIT_OK)
    );
    let gamma = read_json(&out.join("gamma.json"));
    let mintime = read_json(&out.join("mintime.json"));
    assert_eq!(mintime["outputs"]["tau"], gamma["outputs"]["gamma"]);
    assert_eq!(mintime["outputs"]["gamma"], gamma["outputs"]["gamma"]);
    assert!(out.join("mintime_control.csv").exists());
    assert!(out.join("gamma_trajectory.csv").exists());
}

#[test]
fn summaries_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(
            heatctl(&["equivalence"], &config, out).status.code(),
            Some(EXIT_OK)
        );
    }
    assert_eq!(
        without_wall_time(&a.join("equivalence.json")),
        without_wall_time(&b.join("equivalence.json"))
    );
    assert_eq!(
        std::fs::read(a.join("equivalence_t.csv")).unwrap(),
        std::fs::read(b.join("equivalence_t.csv")).unwrap()
    );
    let record = read_json(&a.join("equivalence.json"));
    assert_eq!(record["config_hash"].as_str().unwrap().len(), 64);
    assert!(record["outputs"]["max_relative_residual"].as_f64().unwrap() <= 5e-3);
}

#[test]
fn sequential_execution_gives_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        heatctl(&["sweep"], &config, &a).status.code(),
        Some(EXIT_OK)
    );
    let out = Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .args([
            "sweep",
            "--override",
            "solver.execution=sequential",
            "--config",
        ])
        .arg(&config)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let (ra, rb) = (
        read_json(&a.join("sweep.json")),
        read_json(&b.join("sweep.json")),
    );
    assert_eq!(ra["outputs"], rb["outputs"]);
    assert_ne!(ra["config_hash"], rb["config_hash"]);
}

#[test]
fn exported_curves_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(
        heatctl(&["sweep"], &config, &out).status.code(),
        Some(EXIT_OK)
    );
    let record = read_json(&out.join("sweep.json"));
    let header = std::fs::read_to_string(out.join("tau_curve.csv")).unwrap();
    assert!(header.starts_with("param,value,bracket_lo,bracket_hi,oracle_value,iterations\n"));

    let tau = parse_curve(&out.join("tau_curve.csv")).unwrap();
    let values: Vec<f64> = record["outputs"]["tau"]["values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(tau.iter().map(|r| r.value).collect::<Vec<_>>(), values);
    assert_eq!(
        tau.iter().map(|r| r.param).collect::<Vec<_>>(),
        vec![0.0, 1.0, 10.0]
    );
    // Linear, fully controlled, y0 on e_1: the closed form applies.
    assert!(tau.iter().all(|r| r.oracle_value.is_some()));
    assert!(record["outputs"]["tau"]["strictly_decreasing"]
        .as_bool()
        .unwrap());

    let alpha = parse_curve(&out.join("alpha_curve.csv")).unwrap();
    assert_eq!(alpha.len(), 2);
    for row in &alpha {
        let exact = row.oracle_value.unwrap();
        assert!((row.value - exact).abs() <= 0.02 * exact, "{row:?}");
    }
}

#[test]
fn invalid_config_reports_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let bad = Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .args([
            "gamma",
            "--override",
            "grid.n=0",
            "--override",
            "r=-1",
            "--config",
        ])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_INVALID_CONFIG));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(
        stderr.contains("grid.n:") && stderr.contains("r:"),
        "{stderr}"
    );

    let unknown = write_config(
        dir.path(),
        &SMALL.replace("\"r\": 0.5", "\"r\": 0.5, \"radius\": 1"),
    );
    let res = heatctl(&["gamma"], &unknown, &out);
    assert_eq!(res.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(String::from_utf8_lossy(&res.stderr).contains("radius"));

    let kind = write_config(dir.path(), &SMALL.replace("\"zero\"", "\"cubic\""));
    let res = heatctl(&["gamma"], &kind, &out);
    assert_eq!(res.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(String::from_utf8_lossy(&res.stderr).contains("nonlinearity.kind"));

    let res = heatctl(&["simulate"], &write_config(dir.path(), SMALL), &out);
    assert_eq!(res.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(String::from_utf8_lossy(&res.stderr).contains("experiment.horizon"));
}

#[test]
fn initial_state_inside_ball_has_its_own_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("\"r\": 0.5", "\"r\": 3.0"));
    let res = heatctl(&["gamma"], &config, &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(EXIT_INSIDE_TARGET));
    assert_ne!(EXIT_INSIDE_TARGET, EXIT_INVALID_CONFIG);
}

#[test]
fn equivalence_refuses_horizons_beyond_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("[0.03, 0.07]", "[0.07, 0.5]"));
    let res = heatctl(&["equivalence"], &config, &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(EXIT_INVALID_CONFIG));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(
        stderr.contains("experiment.t_grid") && stderr.contains("gamma = 1.4"),
        "{stderr}"
    );
}

#[test]
fn initial_state_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let modes = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(
        heatctl(&["gamma"], &modes, &out).status.code(),
        Some(EXIT_OK)
    );
    let from_modes = read_json(&out.join("gamma.json"));

    let h = 1.0 / 32.0;
    let values: Vec<String> = (1..=31)
        .map(|i| {
            format!(
                "{:.17e}",
                2.0 * 2f64.sqrt() * (std::f64::consts::PI * i as f64 * h).sin()
            )
        })
        .collect();
    std::fs::write(dir.path().join("y0.txt"), values.join("\n")).unwrap();
    let file = write_config(
        dir.path(),
        &SMALL.replace(r#"{ "modes": { "1": 2.0 } }"#, r#"{ "file": "y0.txt" }"#),
    );
    assert_eq!(
        heatctl(&["gamma"], &file, &out).status.code(),
        Some(EXIT_OK)
    );
    let from_file = read_json(&out.join("gamma.json"));
    let (a, b) = (
        from_modes["outputs"]["gamma"].as_f64().unwrap(),
        from_file["outputs"]["gamma"].as_f64().unwrap(),
    );
    assert!((a - b).abs() < 1e-12, "{a} {b}");
    assert_ne!(from_modes["config_hash"], from_file["config_hash"]);

    std::fs::write(dir.path().join("y0.txt"), "1 2 3").unwrap();
    let res = heatctl(&["gamma"], &file, &out);
    assert_eq!(res.status.code(), Some(EXIT_INVALID_CONFIG));
    assert!(String::from_utf8_lossy(&res.stderr).contains("y0.file"));
}

#[test]
fn remaining_subcommands_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    for (args, json, csv) in [
        (
            vec!["simulate", "--override", "experiment.horizon=0.1"],
            "simulate.json",
            "trajectory.csv",
        ),
        (
            vec!["minnorm", "0.05"],
            "minnorm.json",
            "minnorm_control.csv",
        ),
        (
            vec!["gradcheck", "--override", "experiment.gradcheck.samples=4"],
            "gradcheck.json",
            "gradcheck.csv",
        ),
        (
            vec!["oracle-compare"],
            "oracle-compare.json",
            "oracle_compare.csv",
        ),
    ] {
        let res = heatctl(&args, &config, &out);
        assert_eq!(
            res.status.code(),
            Some(EXIT_OK),
            "{args:?}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
        assert!(out.join(csv).exists(), "{csv}");
        let record = read_json(&out.join(json));
        assert!(record["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
    let sim = read_json(&out.join("simulate.json"));
    assert!(sim["outputs"]["decay"]["passes"].as_bool().unwrap());
    let grad = read_json(&out.join("gradcheck.json"));
    assert!(grad["outputs"]["passes"].as_bool().unwrap());
    let cmp = read_json(&out.join("oracle-compare.json"));
    assert!(cmp["outputs"]["scalar"]["passes"].as_bool().unwrap());
    let minnorm = read_json(&out.join("minnorm.json"));
    assert!(minnorm["outputs"]["bangbang_fraction"].as_f64().unwrap() >= 0.95);
}
