use std::path::Path;
use std::process::{Command, Output};

use hybridfp_cli::csv::{density_csv, parse_snapshot, read_snapshot};
use hybridfp_core::validation::ScenarioPreset;
use hybridfp_core::{gaussian_init, DensityField, Grid};

fn hybridfp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hybridfp"))
        .args(args)
        .env("HYBRIDFP_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn csv_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    names
}

#[test]
fn presets_lists_the_five_scenarios() {
    let out = hybridfp(&["presets"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        let cols: Vec<&str> = row.split_whitespace().collect();
        assert_eq!(&cols[2..6], ["1", "2", "3", "1"], "{row}");
    }
}

#[test]
fn zero_horizon_writes_the_initial_density() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("out");
    let config = write_config(
        tmp.path(),
        r#"{"scenario": "sde-det-jump-H0.5", "t_final": 0, "n_particles": 1000,
            "emit": {"mc": false, "report": false}}"#,
    );
    let out = hybridfp(&["run", &config, "--out", out_dir.to_str().unwrap(), "--quiet"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_files(&out_dir), vec!["fp_000.csv"]);
    let snap = read_snapshot(&out_dir.join("fp_000.csv")).unwrap();
    let preset = ScenarioPreset::named("sde-det-jump-H0.5").unwrap();
    let g = gaussian_init(&preset.grid, 1.0, 0.125).unwrap();
    assert_eq!(snap.scenario, "sde-det-jump-H0.5");
    assert_eq!(snap.time, 0.0);
    assert_eq!(snap.values, g.values);
}

#[test]
fn identical_config_and_seed_give_identical_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        r#"{"scenario": "sde-pois-jump-H0.05", "t_final": 0.3, "n_particles": 5000,
            "snapshot_times": [0.0, 0.1, 0.3], "emit": {"koopman": true}}"#,
    );
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for (dir, threads) in dirs.iter().zip(["1", "3"]) {
        let out = Command::new(env!("CARGO_BIN_EXE_hybridfp"))
            .args([
                "run",
                "--config",
                &config,
                "--seed",
                "17",
                "--quiet",
                "--out",
                dir.to_str().unwrap(),
            ])
            .env("HYBRIDFP_THREADS", threads)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let names = csv_files(&dirs[0]);
    assert_eq!(names.len(), 7, "{names:?}");
    assert!(names.contains(&"koopman.csv".to_string()));
    for name in names.iter().chain(std::iter::once(&"report.json".to_string())) {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dirs[0].join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"], "sde-pois-jump-H0.05");
    assert_eq!(report["snapshots"].as_array().unwrap().len(), 3);
    assert_eq!(report["mc"]["rng_seed"], 17);
}

#[test]
fn configuration_errors_exit_with_1() {
    let tmp = tempfile::tempdir().unwrap();
    for body in [
        r#"{"scenario": "det-jump", "typo": 1}"#,
        r#"{"scenario": "det-jump", "dx": 0.2}"#,
        r#"{"scenario": "det-jump", "dt": 0.5}"#,
        r#"{"scenario": "nope"}"#,
        "not json",
    ] {
        let config = write_config(tmp.path(), body);
        let out = hybridfp(&["run", &config, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{body}");
        assert!(!out.stderr.is_empty());
    }
    let missing = hybridfp(&["run", tmp.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(hybridfp(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn check_lists_every_criterion_and_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("check");
    let out = hybridfp(&["check", "--particles", "20000", "--out", out_dir.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
        .collect();
    assert_eq!(lines.len(), 12, "{text}");
    let all_pass = lines.iter().all(|l| l.starts_with("PASS"));
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 3 }));
    for name in hybridfp_core::validation::PRESET_NAMES {
        let dir = out_dir.join(name);
        let files = csv_files(&dir);
        assert_eq!(files.iter().filter(|f| f.starts_with("fp_")).count(), 11);
        assert_eq!(files.iter().filter(|f| f.starts_with("mc_")).count(), 11);
        assert!(dir.join("report.json").exists());
    }
    assert!(out_dir.join("acceptance.json").exists());
}

proptest::proptest! {
    #[test]
    fn csv_round_trips(values in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::ZERO, 1..40),
                       time in 0.0f64..10.0) {
        let grid = Grid::uniform(-1.0, 3.0, values.len()).unwrap();
        let field = DensityField { values, time };
        let back = parse_snapshot(&density_csv("p", &field, &grid)).unwrap();
        proptest::prop_assert_eq!(back.density(), field);
    }
}
