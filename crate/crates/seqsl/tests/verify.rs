use seqsl::commands::{cost_rows, mean_ratio};
use seqsl::csvio::PredictionRow;
use seqsl::verify::{self, ReplicationResult, Status};
use seqsl::ExperimentConfig;
use seqsl_core::bounds::{self, BoundKind, BoundParameters, Regime};
use seqsl_core::learners::{LearnerFamily, LearnerSpec};
use seqsl_core::simulator::{DgpConfig, GraphKind};

fn small(units: usize, clique: usize, horizon: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.dgp = DgpConfig {
        unit_count: units,
        graph: GraphKind::DisjointCliques { size: clique },
        horizon,
        ..c.dgp
    };
    c.verify.times = vec![horizon];
    c
}

fn run(c: &ExperimentConfig) -> Vec<ReplicationResult> {
    verify::run_replications(c, &verify::replication_seeds(c)).unwrap()
}

#[test]
fn single_learner_single_time() {
    let mut c = small(20, 4, 1);
    c.replications = 1;
    c.learners = vec![LearnerSpec::new("ols", LearnerFamily::OrdinaryLeastSquares)];
    let r = run(&c);
    assert_eq!(r.len(), 1);
    let rec = r[0].at(1);
    assert_eq!(rec.excess_sl, rec.excess_oracle);
    assert_eq!((rec.j_hat, rec.j_tilde), (0, 0));
}

#[test]
fn equal_seeds_give_identical_results() {
    let c = small(30, 5, 3);
    let r = verify::run_replications(&c, &[77, 77]).unwrap();
    assert_eq!(r[0].times, r[1].times);
    let other = verify::run_replications(&c, &[78]).unwrap();
    assert_ne!(r[0].times, other[0].times);
}

#[test]
fn noiseless_linear_truth_with_least_squares() {
    let mut c = small(100, 5, 6);
    c.dgp.shared_noise = 0.0;
    c.dgp.idiosyncratic_noise = 0.0;
    c.replications = 5;
    c.learners = vec![
        LearnerSpec::new("mean", LearnerFamily::ConstantMean),
        LearnerSpec::new("ols", LearnerFamily::OrdinaryLeastSquares),
    ];
    for r in run(&c) {
        for rec in &r.times[1..] {
            // the cumulative excess still carries the zero predictor used at t = 1
            assert_eq!(rec.j_hat, rec.j_tilde);
            assert!(rec.excess_sl - rec.excess_oracle <= 1e-6);
            assert!(rec.instant_gap[1] <= 1e-6, "t = {}: {}", rec.t, rec.instant_gap[1]);
            assert_eq!(rec.star_risk, 0.0);
        }
    }
}

#[test]
fn oracle_excess_is_an_argmin_and_nonnegative() {
    let mut c = small(50, 5, 4);
    c.replications = 10;
    let results = run(&c);
    let inv = verify::invariant_check(&results);
    assert_eq!(inv.violations(), 0, "{inv:?}");
    for r in &results {
        for rec in &r.times {
            assert!(rec.excess_oracle >= 0.0);
            assert!(rec.h_tilde.iter().all(|&h| rec.excess_oracle <= h));
        }
    }
}

fn base_params(c: &ExperimentConfig) -> BoundParameters {
    seqsl::manifest::Manifest::from_config(c).unwrap().bounds
}

#[test]
fn tail_report_cells_are_consistent() {
    let mut c = small(50, 5, 4);
    c.replications = 30;
    let results = run(&c);
    let p = verify::params_at(&base_params(&c), 4).unwrap();
    let rep = verify::tail_check(&results, &p, 15).unwrap();
    assert_eq!(rep.cells.len(), 15);
    for cell in &rep.cells {
        assert!((0.0..=1.0).contains(&cell.frequency));
        if cell.bound.raw >= 1.0 {
            assert_eq!(cell.status, Status::Vacuous);
        }
    }
    assert!(rep.cells.windows(2).all(|w| w[1].frequency <= w[0].frequency));
    assert_eq!(rep.cells.last().unwrap().frequency, 0.0);
}

#[test]
fn small_ratio_long_horizon_regime() {
    // ratio 10 and t = 50; a small variance constant lets the time bound bite
    let mut c = small(50, 5, 50);
    c.bounds.gamma = Some(1e-3);
    c.replications = 4;
    let p = verify::params_at(&base_params(&c), 50).unwrap();
    assert_eq!(p.ratio, 10.0);
    assert_eq!(bounds::regime_compare(&p).unwrap().verdict, Regime::TimeSharper);
    let results = run(&c);
    let rep = verify::tail_check(&results, &p, 20).unwrap();
    assert_eq!(rep.regime, "time-sharper");
    assert!(rep.cells.iter().all(|cell| cell.graph_bound.is_none_or(|b| b.vacuous)));
    for x in [1.0, 2.0] {
        let time = bounds::theorem1_tail_bound(&p, x, BoundKind::Time).unwrap();
        let graph = bounds::theorem1_tail_bound(&p, x, BoundKind::Graph).unwrap();
        assert!(!time.vacuous && graph.vacuous, "{x}: {time:?} {graph:?}");
    }
}

#[test]
fn expectation_check_cases() {
    let mut c = small(40, 4, 3);
    c.replications = 8;
    c.learners = vec![LearnerSpec::new("ridge", LearnerFamily::Ridge)];
    let results = run(&c);
    let p = verify::params_at(&base_params(&c), 3).unwrap();
    for row in verify::expectation_check(&results, &p).unwrap() {
        assert!(row.mean <= 0.0 && row.bound >= 0.0 && row.pass);
    }

    // side conditions are propagated
    let bad = BoundParameters { n: 2, ..p };
    let needs = bounds::minimal_n(&bad).unwrap();
    if needs > 2 {
        assert!(verify::expectation_check(&results, &bad).is_err());
    }
    assert!(bounds::corollary_bound(&BoundParameters { a: 0.5, ..p }, BoundKind::Time).is_ok());
}

#[test]
fn high_ratio_configuration_is_graph_sharper() {
    let mut c = small(5000, 1, 5);
    c.replications = 1;
    let p = base_params(&c);
    assert_eq!(p.ratio, 5000.0);
    assert_eq!(bounds::regime_compare(&p).unwrap().verdict, Regime::GraphSharper);
    let time = bounds::corollary_bound(&p, BoundKind::Time).unwrap().value;
    let graph = bounds::corollary_bound(&p, BoundKind::Graph).unwrap().value;
    assert!(graph < time, "{graph} vs {time}");
}

#[test]
fn expectation_is_stable_when_doubling_replications() {
    let mut c = small(60, 5, 4);
    c.replications = 200;
    let results = run(&c);
    let p = verify::params_at(&base_params(&c), 4).unwrap();
    let half = verify::expectation_check(&results[..100], &p).unwrap()[0].clone();
    let full = verify::expectation_check(&results, &p).unwrap()[0].clone();
    let pooled = (half.standard_error.powi(2) + full.standard_error.powi(2)).sqrt();
    assert!((half.mean - full.mean).abs() < 3.0 * pooled, "{half:?} {full:?}");
}

#[test]
fn bernstein_at_zero_is_vacuous() {
    let v = bounds::theorem2_tail_bound(100.0, 0.27, 1.04, 0.0).unwrap();
    assert!(v.vacuous && v.capped == 1.0);

    let mut c = small(50, 5, 3);
    c.replications = 20;
    let results = run(&c);
    let p = base_params(&c);
    let rep = verify::bernstein_check(&results, &p, p.v1, &[2, 3], 10).unwrap();
    assert_eq!(rep.tally.fail, 0);
    assert_eq!(rep.variance_violations(), 0);
    assert_eq!(rep.cells.len(), 2 * 4 * 10);
}

#[test]
fn janson_edgeless_slack_and_clique_direction() {
    let dgp = DgpConfig {
        graph: GraphKind::DisjointCliques { size: 1 },
        unit_count: 200,
        ..DgpConfig::default()
    };
    let rep = verify::janson_empirical_check(&dgp, "edgeless", 20_000, 12).unwrap();
    assert_eq!(rep.degree, 1);
    assert_eq!(rep.tally.fail, 0);
    let zero = &rep.cells[0];
    assert_eq!(zero.x, 0.0);
    assert_eq!(zero.bound, 1.0);
    assert_eq!(zero.status, Status::Vacuous);
    // the centered statistic is near-symmetric, so half the draws clear 0
    assert!((zero.frequency - 0.5).abs() < 0.05, "{}", zero.frequency);
    // away from zero the bound keeps a wide margin
    let mid = rep.cells.iter().find(|c| c.x >= 2.0 * rep.empirical_sd).unwrap();
    assert!(mid.frequency < mid.bound / 2.0);

    let d = verify::janson_direction(&DgpConfig { unit_count: 200, ..DgpConfig::default() }, 2, 4, 20_000, 8).unwrap();
    assert!(d.agrees(), "{} {} {} {}", d.frequency_small, d.frequency_large, d.bound_small, d.bound_large);
}

#[test]
fn mean_ratio_is_the_average_of_per_time_ratios() {
    let row = |t, y, prediction| PredictionRow {
        t,
        alpha: "a".into(),
        w: y > 0.0,
        y,
        prediction,
    };
    let rows = vec![row(1, 1.0, 2.0), row(1, 1.0, 0.0), row(2, 2.0, 3.0), row(3, 0.0, 0.0)];
    let costs = cost_rows(&rows);
    assert_eq!(costs.len(), 3);
    assert_eq!(costs[0].ratio, Some(1.0));
    assert_eq!(costs[1].ratio, Some(1.5));
    assert_eq!(costs[2].ratio, None);
    assert_eq!(mean_ratio(&costs, 0), Some(1.25));
    assert_eq!(mean_ratio(&costs, 1), Some(1.5));
    assert_eq!(mean_ratio(&costs, 3), None);
}

