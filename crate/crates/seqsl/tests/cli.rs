use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use seqsl::csvio;
use seqsl::ExperimentConfig;
use seqsl_core::learners::{LearnerFamily, LearnerSpec};
use seqsl_core::simulator::{DgpConfig, GraphKind};
use sha2::{Digest, Sha256};

fn seqsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqsl"))
        .arg("--quiet")
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn minimal() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dgp = DgpConfig {
        unit_count: 4,
        graph: GraphKind::DisjointCliques { size: 2 },
        horizon: 2,
        ..c.dgp
    };
    c.verify.times = vec![1, 2];
    c
}

fn noiseless(units: usize, horizon: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dgp = DgpConfig {
        unit_count: units,
        horizon,
        shared_noise: 0.0,
        idiosyncratic_noise: 0.0,
        ..c.dgp
    };
    c.verify.times = vec![horizon];
    c
}

fn write_config(dir: &Path, name: &str, c: &ExperimentConfig) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, c.emit().unwrap()).unwrap();
    path
}

fn digest(path: &Path) -> String {
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

/// simulate then run; returns the run directory.
fn simulate_and_run(dir: &Path, config: &Path, with_manifest: bool) -> PathBuf {
    let sim = dir.join("sim");
    let run = dir.join("run");
    assert_eq!(code(&seqsl(&["--config", p(config), "--out", p(&sim), "simulate"])), 0);
    let panel = sim.join("panel.csv");
    let graph = sim.join("graph.csv");
    let manifest = sim.join("manifest.json");
    let mut args = vec!["--config", p(config), "--out", p(&run), "run", "--panel", p(&panel), "--graph", p(&graph)];
    if with_manifest {
        args.extend(["--manifest", p(&manifest)]);
    }
    let o = seqsl(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    run
}

#[test]
fn simulate_minimal_config_writes_eight_rows_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", &minimal());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = seqsl(&["--config", p(&config), "--out", p(out), "simulate"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(a.join("panel.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert_eq!(text.lines().next().unwrap(), "t,alpha,w,y,z_1,x_1,x_2");
    let graph = std::fs::read_to_string(a.join("graph.csv")).unwrap();
    assert!(graph.starts_with("alpha,clique_id\n"));
    for f in ["panel.csv", "graph.csv", "manifest.json"] {
        assert_eq!(digest(&a.join(f)), digest(&b.join(f)), "{f}");
    }
    // the seed flag changes the draw
    let c = tmp.path().join("c");
    assert_eq!(code(&seqsl(&["--config", p(&config), "--seed", "9", "--out", p(&c), "simulate"])), 0);
    assert_ne!(digest(&a.join("panel.csv")), digest(&c.join("panel.csv")));
}

#[test]
fn invalid_configs_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = minimal();
    c.dgp.graph = GraphKind::DisjointCliques { size: 3 };
    let path = tmp.path().join("bad.toml");
    std::fs::write(&path, toml::to_string(&c).unwrap_or_default()).unwrap();
    let o = seqsl(&["--config", p(&path), "--out", p(tmp.path()), "simulate"]);
    assert_eq!(code(&o), 2);

    std::fs::write(&path, "seed = 1\nreplications = 3\n\n[dgp]\nunit_count = 4\nclique = 2\n").unwrap();
    let o = seqsl(&["--config", p(&path), "simulate"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 6") && err.contains("clique"), "{err}");
}

#[test]
fn run_outputs_and_rerun_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = minimal();
    c.ensemble.methods.push(seqsl_core::ensemble::MetaMethod::Discrete);
    let config = write_config(tmp.path(), "c.toml", &c);
    let run = simulate_and_run(tmp.path(), &config, true);
    let traj = csvio::read_trajectory(csvio::open(&run.join("trajectory.csv")).unwrap()).unwrap();
    assert_eq!(traj.len(), 2 * 4);
    for t in [1, 2] {
        let rows: Vec<_> = traj.iter().filter(|r| r.t == t).collect();
        assert_eq!(rows.iter().filter(|r| r.selected).count(), 1);
        let total: f64 = rows.iter().map(|r| r.weight).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }
    for f in ["predictions.csv", "oracle_trajectory.csv", "overarching.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let again = tmp.path().join("again");
    let sim = tmp.path().join("sim");
    let o = seqsl(&[
        "--config", p(&config), "--out", p(&again), "run",
        "--panel", p(&sim.join("panel.csv")),
        "--graph", p(&sim.join("graph.csv")),
        "--manifest", p(&sim.join("manifest.json")),
    ]);
    assert_eq!(code(&o), 0);
    for f in ["trajectory.csv", "predictions.csv", "oracle_trajectory.csv", "overarching.csv"] {
        assert_eq!(digest(&run.join(f)), digest(&again.join(f)), "{f}");
    }
    // without a manifest there is no oracle trajectory
    let plain = tmp.path().join("plain");
    let o = seqsl(&["--config", p(&config), "--out", p(&plain), "run", "--panel", p(&sim.join("panel.csv"))]);
    assert_eq!(code(&o), 0);
    assert!(!plain.join("oracle_trajectory.csv").exists());
}

#[test]
fn single_learner_run_always_selects_it() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = minimal();
    c.learners = vec![LearnerSpec::new("ols", LearnerFamily::OrdinaryLeastSquares)];
    let config = write_config(tmp.path(), "c.toml", &c);
    let run = simulate_and_run(tmp.path(), &config, false);
    let traj = csvio::read_trajectory(csvio::open(&run.join("trajectory.csv")).unwrap()).unwrap();
    assert!(traj.iter().all(|r| r.selected && r.weight == 1.0));

    let report = tmp.path().join("report");
    assert_eq!(code(&seqsl(&["--out", p(&report), "report", p(&run)])), 0);
    let m = std::fs::read_to_string(report.join("weights_matrix.csv")).unwrap();
    assert_eq!(m, "t,ols\n1,1\n2,1\n");
}

#[test]
fn two_constants_on_noiseless_data() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = noiseless(50, 4);
    c.learners = vec![
        LearnerSpec::new("low", LearnerFamily::ConstantMean).with("value", 0.05),
        LearnerSpec::new("high", LearnerFamily::ConstantMean).with("value", 0.5),
    ];
    c.ensemble.methods = vec![seqsl_core::ensemble::MetaMethod::Discrete];
    let config = write_config(tmp.path(), "c.toml", &c);
    let run = simulate_and_run(tmp.path(), &config, false);
    let traj = csvio::read_trajectory(csvio::open(&run.join("trajectory.csv")).unwrap()).unwrap();
    let picked: Vec<&str> = traj.iter().filter(|r| r.selected).map(|r| r.learner_id.as_str()).collect();
    // both learners start from the zero predictor, so t = 1 is a tie
    assert_eq!(picked, ["low", "high", "high", "high"]);
}

#[test]
fn panel_errors_exit_two_with_location() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "c.toml", &minimal());
    let sim = tmp.path().join("sim");
    assert_eq!(code(&seqsl(&["--config", p(&config), "--out", p(&sim), "simulate"])), 0);
    let text = std::fs::read_to_string(sim.join("panel.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // force w = 0 with a nonzero outcome on row 3
    let mut cells: Vec<String> = lines[2].split(',').map(String::from).collect();
    cells[2] = "0".into();
    cells[3] = "0.5".into();
    lines[2] = cells.join(",");
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let o = seqsl(&["--config", p(&config), "--out", p(tmp.path()), "run", "--panel", p(&bad)]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 3") && err.contains("\"y\""), "{err}");

    let garbled = text.replacen("t,alpha,w,y", "t,alpha,w,outcome", 1);
    std::fs::write(&bad, garbled).unwrap();
    let o = seqsl(&["--config", p(&config), "run", "--panel", p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("column 4"));
}

#[test]
fn bounds_table_and_invalid_parameters() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    assert_eq!(code(&seqsl(&["--out", p(&sim), "simulate"])), 0);
    let manifest = sim.join("manifest.json");
    let o = seqsl(&["bounds", p(&manifest)]);
    assert_eq!(code(&o), 0);
    let table = String::from_utf8_lossy(&o.stdout);
    for key in ["v2", "C1", "C2'", "C3'", "x_lower'", "minimal N'", "regime"] {
        assert!(table.lines().any(|l| l.starts_with(key)), "{key} missing:\n{table}");
    }
    assert!(table.contains("time-sharper"));
    let o = seqsl(&["bounds", "--csv", p(&manifest)]);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("constant,value\n"));

    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&manifest).unwrap()).unwrap();
    for (key, value) in [("b2", 2.5), ("beta", 1.5), ("beta", 0.0)] {
        let mut b = m["bounds"].clone();
        b[key] = serde_json::json!(value);
        let path = tmp.path().join("params.json");
        std::fs::write(&path, b.to_string()).unwrap();
        assert_eq!(code(&seqsl(&["bounds", p(&path)])), 2, "{key} = {value}");
    }
}

fn quick_verify(c: &mut ExperimentConfig) {
    c.verify.janson_draws = 500;
    c.verify.audit_predictors = 5;
    c.verify.audit_draws = 200;
    c.verify.x_points = 5;
}

#[test]
fn verify_with_one_replication_is_low_power_and_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = noiseless(20, 3);
    c.dgp.shared_noise = 0.1;
    c.dgp.graph = GraphKind::DisjointCliques { size: 4 };
    c.replications = 1;
    quick_verify(&mut c);
    let config = write_config(tmp.path(), "c.toml", &c);
    let out = tmp.path().join("v");
    let o = seqsl(&["--config", p(&config), "--out", p(&out), "verify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("non-vacuous failures: 0"), "{summary}");
    for f in ["tail_report.csv", "expectation_report.csv", "bernstein_report.csv", "janson_report.csv", "audit_report.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    // every non-vacuous tail cell has a half-width above the low-power line
    let tail = std::fs::read_to_string(out.join("tail_report.csv")).unwrap();
    for line in tail.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let hw: f64 = cells[7].parse().unwrap();
        assert!(hw > seqsl::verify::LOW_POWER);
    }
}

#[test]
fn reused_replication_seeds_fail_the_self_check() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = noiseless(20, 3);
    c.dgp.graph = GraphKind::DisjointCliques { size: 4 };
    quick_verify(&mut c);
    c.verify.replication_seeds = Some(vec![11, 12, 11]);
    let config = write_config(tmp.path(), "c.toml", &c);
    let out = tmp.path().join("v");
    let o = seqsl(&["--config", p(&config), "--out", p(&out), "verify"]);
    assert_eq!(code(&o), 1);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("distinct replication seeds: FAIL"), "{summary}");
}

#[test]
fn report_on_noiseless_exact_learner_gives_unit_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = noiseless(60, 4);
    c.learners = vec![LearnerSpec::new("ols", LearnerFamily::OrdinaryLeastSquares)];
    let config = write_config(tmp.path(), "c.toml", &c);
    let run = simulate_and_run(tmp.path(), &config, false);
    let out = tmp.path().join("rep");
    let o = seqsl(&["--out", p(&out), "report", p(&run), "--burn-in", "1"]);
    assert_eq!(code(&o), 0);
    let costs = std::fs::read_to_string(out.join("costs.csv")).unwrap();
    for line in costs.lines().skip(2) {
        let ratio: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((ratio - 1.0).abs() < 1e-9, "{line}");
    }
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.contains("mean_ratio_percent = 100.00"), "{summary}");

    assert_eq!(code(&seqsl(&["report", p(&tmp.path().join("nothing"))])), 2);
}
