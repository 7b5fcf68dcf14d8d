//! Acceptance run: one PASS/FAIL line per criterion.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use seqsl::verify::{self, ReplicationResult, Status};
use seqsl::ExperimentConfig;
use seqsl_core::bounds::{self, BoundKind, BoundParameters};
use seqsl_core::ensemble::{continuous_select, convex_grid_select, MetaDesign};
use seqsl_core::seed;
use seqsl_core::simulator::{DgpConfig, GraphKind};
use sha2::{Digest, Sha256};

/// Results of the shared default-config runs.
struct Shared {
    config: ExperimentConfig,
    outcome: verify::VerifyOutcome,
    results: Vec<ReplicationResult>,
    seconds: f64,
}

const DEFAULT_R: usize = 200;
const THEOREM1_R: usize = 500;

fn report(results: &mut Vec<(usize, bool)>, id: usize, pass: bool, detail: String) {
    println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
    results.push((id, pass));
}

fn shared() -> Shared {
    let config = ExperimentConfig {
        replications: THEOREM1_R,
        ..ExperimentConfig::default()
    };
    let start = Instant::now();
    let (outcome, results) = verify::verify_detailed(&config).expect("default verification runs");
    Shared {
        config,
        outcome,
        results,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn criterion_1(s: &Shared) -> (bool, String) {
    let inv = verify::invariant_check(&s.results[..DEFAULT_R]);
    (
        inv.empirical_argmin == 0 && inv.oracle_argmin == 0,
        format!(
            "argmins over {} (replication, t) pairs: {} empirical, {} oracle violations",
            inv.checks, inv.empirical_argmin, inv.oracle_argmin
        ),
    )
}

fn criterion_2(s: &Shared) -> (bool, String) {
    let inv = verify::invariant_check(&s.results[..DEFAULT_R]);
    let worst = s.results[..DEFAULT_R]
        .iter()
        .flat_map(|r| &r.times)
        .map(|t| t.combined_risk - t.empirical_risks[t.j_hat])
        .fold(f64::NEG_INFINITY, f64::max);
    (
        inv.dominance == 0,
        format!(
            "simplex risk <= discrete risk + 1e-8: {} violations, max difference {worst:.3e}",
            inv.dominance
        ),
    )
}

fn objective(rows: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    rows.iter()
        .zip(y)
        .map(|(r, y)| {
            let f: f64 = r.iter().zip(w).map(|(a, b)| a * b).sum();
            (y - f).powi(2)
        })
        .sum::<f64>()
        / y.len() as f64
}

fn criterion_3() -> (bool, String) {
    let mut rng = seed::rng(3);
    let (mut worst_gap, mut worst_kkt) = (0.0f64, f64::INFINITY);
    for inst in 0..100 {
        let j = 2 + inst % 2;
        let n = rng.random_range(5..60);
        // learners of varied quality around a common signal
        let signal: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let rows: Vec<Vec<f64>> = signal
            .iter()
            .map(|s| {
                (0..j)
                    .map(|_| (s + 0.3 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
                    .collect()
            })
            .collect();
        let y: Vec<f64> = signal
            .iter()
            .map(|s| (s + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0))
            .collect();
        let design = MetaDesign::from_rows(&rows, &y, 1.0).unwrap();
        let w = continuous_select(&design).unwrap().weights;
        let g = convex_grid_select(&design, 400).unwrap().weights;
        let (fc, fg) = (objective(&rows, &y, &w), objective(&rows, &y, &g));
        worst_gap = worst_gap.max((fc - fg).abs());
        // directional derivative towards each vertex
        let grad: Vec<f64> = (0..j)
            .map(|k| {
                -2.0 * rows
                    .iter()
                    .zip(&y)
                    .map(|(r, y)| (y - r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()) * r[k])
                    .sum::<f64>()
                    / n as f64
            })
            .collect();
        let at_w: f64 = grad.iter().zip(&w).map(|(a, b)| a * b).sum();
        for gk in &grad {
            worst_kkt = worst_kkt.min(gk - at_w);
        }
    }
    (
        worst_gap <= 1e-4 && worst_kkt >= -1e-6,
        format!(
            "100 designs, J in {{2,3}}: max |continuous - grid(400)| = {worst_gap:.2e}, min directional derivative = {worst_kkt:.2e}"
        ),
    )
}

fn high_ratio_config() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dgp = DgpConfig {
        unit_count: 5000,
        graph: GraphKind::DisjointCliques { size: 1 },
        horizon: 5,
        ..c.dgp
    };
    c.replications = 100;
    c.verify.times = vec![2, 5];
    c
}

fn criterion_4(s: &Shared) -> (bool, String) {
    let base = s.outcome.manifest.bounds;
    let default = verify::bernstein_check(&s.results[..DEFAULT_R], &base, base.v1, &s.config.verify.times, s.config.verify.x_points)
        .unwrap();
    let hr = high_ratio_config();
    let m = seqsl::manifest::Manifest::from_config(&hr).unwrap();
    let seeds = verify::replication_seeds(&hr);
    let results = verify::run_replications(&hr, &seeds).unwrap();
    let high = verify::bernstein_check(&results, &m.bounds, m.bounds.v1, &hr.verify.times, hr.verify.x_points).unwrap();
    let active_with_hits = high
        .cells
        .iter()
        .filter(|c| c.status == Status::Pass && c.frequency > 0.0)
        .count();
    let pass = default.tally.fail == 0
        && default.variance_violations() == 0
        && high.tally.fail == 0
        && high.variance_violations() == 0;
    (
        pass,
        format!(
            "default (ratio {}): pass {} / vacuous {} / fail {}, var_tilde > v2: {}; ratio {} run (R = {}): pass {} ({} with nonzero frequency) / vacuous {} / fail {}, var_tilde > v2: {}",
            base.ratio,
            default.tally.pass,
            default.tally.vacuous,
            default.tally.fail,
            default.variance_violations(),
            m.ratio,
            results.len(),
            high.tally.pass,
            active_with_hits,
            high.tally.vacuous,
            high.tally.fail,
            high.variance_violations()
        ),
    )
}

fn criterion_5(s: &Shared) -> (bool, String) {
    let mut fail = 0;
    let mut parts = Vec::new();
    for r in &s.outcome.tails {
        fail += r.tally.fail;
        parts.push(format!(
            "t = {}: pass {} / vacuous {} / fail {}",
            r.t, r.tally.pass, r.tally.vacuous, r.tally.fail
        ));
    }
    let within = s.seconds <= 15.0 * 60.0;
    (
        fail == 0 && within && s.results.len() == THEOREM1_R,
        format!("R = {}, {} ({:.0} s for the full verification)", s.results.len(), parts.join("; "), s.seconds),
    )
}

fn criterion_6(s: &Shared) -> (bool, String) {
    let base = s.outcome.manifest.bounds;
    let mut ok = true;
    let mut parts = Vec::new();
    for &t in &s.config.verify.times {
        let p = verify::params_at(&base, t).unwrap();
        for row in verify::expectation_check(&s.results[..DEFAULT_R], &p).unwrap() {
            ok &= row.pass;
            parts.push(format!(
                "t = {} {:?}: {:.3e} <= {:.3e}",
                t, row.kind, row.mean, row.bound
            ));
        }
    }
    (ok, parts.join("; "))
}

fn criterion_7() -> (bool, String) {
    let start = Instant::now();
    let mut rng = seed::rng(7);
    let (mut checked, mut good, mut errors) = (0, 0, 0);
    let mut beta_below_one = (0, 0);
    for _ in 0..20_000 {
        let b1 = 10f64.powf(rng.random_range(-2.0..2.0));
        let beta = if rng.random::<f64>() < 0.5 { 1.0 } else { rng.random_range(0.2..1.0) };
        let p = BoundParameters {
            b1,
            b2: b1 * rng.random_range(0.01..2.0),
            beta,
            gamma: 10f64.powf(rng.random_range(-2.0..3.0)),
            v1: 10f64.powf(rng.random_range(-3.0..2.0)),
            ratio: 10f64.powf(rng.random_range(1.0..7.0)),
            a: rng.random_range(0.01..1.0),
            j: rng.random_range(1..50),
            t: rng.random_range(1..200),
            n: 2,
            n_prime: 2,
        };
        let r = bounds::regime_compare(&p).unwrap();
        if !r.condition_two {
            continue;
        }
        let n = r
            .common_n
            .max(bounds::minimal_n(&p).unwrap())
            .max(bounds::minimal_n_prime(&p));
        let q = BoundParameters { n, n_prime: n, ..p };
        let (time, graph) = match (
            bounds::corollary_bound(&q, BoundKind::Time),
            bounds::corollary_bound(&q, BoundKind::Graph),
        ) {
            (Ok(a), Ok(b)) => (a.value, b.value),
            _ => {
                errors += 1;
                continue;
            }
        };
        let sharper = graph <= time * (1.0 + 1e-12);
        if beta == 1.0 {
            checked += 1;
            good += usize::from(sharper);
        } else {
            beta_below_one.0 += 1;
            beta_below_one.1 += usize::from(sharper);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    (
        checked > 0 && good == checked && errors == 0 && secs < 1.0,
        format!(
            "beta = 1: {good}/{checked} sweep points graph <= time ({secs:.2} s); for information, beta < 1: {}/{}",
            beta_below_one.1, beta_below_one.0
        ),
    )
}

fn criterion_8(s: &Shared) -> (bool, String) {
    let a = &s.outcome.audit;
    let names: Vec<String> = a
        .checks
        .iter()
        .map(|c| format!("{}: {}/{} (worst {:.3e} vs {:.3e})", c.name, c.violations, c.evaluations, c.worst, c.bound))
        .collect();
    (
        a.violations() == 0 && s.config.verify.audit_predictors == 100 && s.config.verify.audit_draws == 10_000,
        format!("{} predictors x {} draws; {}", s.config.verify.audit_predictors, s.config.verify.audit_draws, names.join("; ")),
    )
}

fn criterion_9() -> (bool, String) {
    let start = Instant::now();
    let dgp = DgpConfig::default();
    let draws = 100_000;
    let edgeless = DgpConfig {
        graph: GraphKind::DisjointCliques { size: 1 },
        ..dgp.clone()
    };
    let a = verify::janson_empirical_check(&edgeless, "edgeless", draws, 25).unwrap();
    let b = verify::janson_empirical_check(&dgp, "cliques-5", draws, 25).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut h_ok = 0;
    for i in 0..10_000 {
        let u = if i == 0 { 0.0 } else { 10f64.powf(-8.0 + 14.0 * i as f64 / 9_999.0) };
        if bounds::h(u) >= u * (1.0 + u).ln() / 2.0 - 1e-15 * u {
            h_ok += 1;
        }
    }
    (
        a.tally.fail == 0 && b.tally.fail == 0 && h_ok == 10_000 && secs < 60.0,
        format!(
            "R = {draws}: edgeless pass {} / vacuous {} / fail {}; cliques pass {} / vacuous {} / fail {} ({secs:.1} s); h sweep {h_ok}/10000",
            a.tally.pass, a.tally.vacuous, a.tally.fail, b.tally.pass, b.tally.vacuous, b.tally.fail
        ),
    )
}

fn hash_dir(dir: &Path) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            out.extend(hash_dir(&p));
        } else {
            let digest = Sha256::digest(std::fs::read(&p).unwrap());
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, format!("{digest:x}")));
        }
    }
    out
}

fn pipeline(root: &Path, config: &Path) {
    let bin = env!("CARGO_BIN_EXE_seqsl");
    let run = |args: &[&str]| {
        let status = Command::new(bin)
            .args(["--quiet", "--seed", "4242", "--config"])
            .arg(config)
            .args(args)
            .status()
            .unwrap();
        assert!(status.success(), "{args:?} exited with {status}");
    };
    let sim = root.join("sim");
    let s = sim.to_str().unwrap();
    run(&["--out", s, "simulate"]);
    run(&[
        "--out",
        root.join("run").to_str().unwrap(),
        "run",
        "--panel",
        &format!("{s}/panel.csv"),
        "--graph",
        &format!("{s}/graph.csv"),
        "--manifest",
        &format!("{s}/manifest.json"),
    ]);
    run(&["--out", root.join("verify").to_str().unwrap(), "verify"]);
}

fn criterion_10() -> (bool, String) {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.toml");
    let mut c = ExperimentConfig {
        replications: 20,
        ..Default::default()
    };
    c.ensemble.methods.push(seqsl_core::ensemble::MetaMethod::Discrete);
    c.verify.janson_draws = 2_000;
    c.verify.audit_predictors = 10;
    c.verify.audit_draws = 1_000;
    std::fs::write(&config, c.emit().unwrap()).unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&a, &config);
    pipeline(&b, &config);
    let (ha, hb) = (hash_dir(&a), hash_dir(&b));
    (
        ha == hb && ha.len() >= 10,
        format!("{} files from simulate/run/verify, identical SHA-256 on rerun: {}", ha.len(), ha == hb),
    )
}

fn criterion_11() -> (bool, String) {
    let mut rng = seed::rng(11);
    let (mut worst_resid, mut worst_ineq) = (0.0f64, f64::NEG_INFINITY);
    for _ in 0..10_000 {
        let mut draw = || 10f64.powf(rng.random_range(-6.0..6.0));
        let (a, b, c) = (draw(), draw(), draw());
        let p = bounds::quadratic_lemma_solve(a, b, c).unwrap();
        worst_resid = worst_resid.max((c - b * p.sqrt() - a * p).abs() / c);
        let rhs = (b * b + 2.0 * a * c) * p;
        worst_ineq = worst_ineq.max((c * c - rhs) / rhs);
    }
    (
        worst_resid <= 1e-12 && worst_ineq <= 1e-12,
        format!("10^4 triples: max relative residual {worst_resid:.2e}, max relative excess in c^2 <= (b^2 + 2ac) p: {worst_ineq:.2e}"),
    )
}

fn main() {
    let mut results = Vec::new();
    let s = shared();
    let (ok, d) = criterion_1(&s);
    report(&mut results, 1, ok, d);
    let (ok, d) = criterion_2(&s);
    report(&mut results, 2, ok, d);
    let (ok, d) = criterion_3();
    report(&mut results, 3, ok, d);
    let (ok, d) = criterion_4(&s);
    report(&mut results, 4, ok, d);
    let (ok, d) = criterion_5(&s);
    report(&mut results, 5, ok, d);
    let (ok, d) = criterion_6(&s);
    report(&mut results, 6, ok, d);
    let (ok, d) = criterion_7();
    report(&mut results, 7, ok, d);
    let (ok, d) = criterion_8(&s);
    report(&mut results, 8, ok, d);
    let (ok, d) = criterion_9();
    report(&mut results, 9, ok, d);
    let (ok, d) = criterion_10();
    report(&mut results, 10, ok, d);
    let (ok, d) = criterion_11();
    report(&mut results, 11, ok, d);
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria PASS", results.len());
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        std::process::exit(1);
    }
}
