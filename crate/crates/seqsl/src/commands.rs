//! Subcommand implementations. Each returns the process exit code; input
//! errors surface as `Err` and map to exit code 2.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use seqsl_core::bounds::{self, BoundKind, BoundParameters};
use seqsl_core::ensemble::{EnsembleState, MetaMethod, OverarchingState, SimplexSolver};
use seqsl_core::learners::PredictorSnapshot;
use seqsl_core::seed;
use seqsl_core::simulator::{generate, OracleHandle};

use crate::config::ExperimentConfig;
use crate::csvio::{self, real, PredictionRow, TrajectoryRow};
use crate::manifest::{self, Manifest};
use crate::verify;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

pub const PANEL_FILE: &str = "panel.csv";
pub const GRAPH_FILE: &str = "graph.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const ORACLE_FILE: &str = "oracle_trajectory.csv";
pub const OVERARCHING_FILE: &str = "overarching.csv";

/// Ensemble state whose simplex solver draws its restarts from `seed_value`.
pub fn ensemble_state(config: &ExperimentConfig, method: MetaMethod, bound: f64, seed_value: u64) -> Result<EnsembleState> {
    let solver = SimplexSolver {
        seed: seed::substream(seed_value, 4),
        ..SimplexSolver::default()
    };
    Ok(EnsembleState::with_solver(config.learners.clone(), method, bound, solver)?)
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

pub fn cmd_simulate(config: &ExperimentConfig, out: &Path) -> Result<i32> {
    let manifest = Manifest::from_config(config)?;
    let (panel, graph, _) = generate(&config.dgp)?;
    create_dir(out)?;
    csvio::write_panel(csvio::create(&out.join(PANEL_FILE))?, &panel)?;
    csvio::write_graph(csvio::create(&out.join(GRAPH_FILE))?, &graph)?;
    std::fs::write(out.join(MANIFEST_FILE), manifest.to_json()?)?;
    log::info!(
        "simulated {} units x {} times into {}",
        panel.unit_count(),
        panel.horizon(),
        out.display()
    );
    Ok(EXIT_OK)
}

pub struct RunInputs {
    pub panel: PathBuf,
    pub graph: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

pub fn cmd_run(config: &ExperimentConfig, inputs: &RunInputs, out: &Path) -> Result<i32> {
    let manifest = inputs.manifest.as_deref().map(Manifest::load).transpose()?;
    let bound = match &manifest {
        Some(m) => m.outcome_bound,
        None => config.data.outcome_bound.unwrap_or(config.dgp.outcome_bound),
    };
    let panel = csvio::read_panel(csvio::open(&inputs.panel)?, bound)
        .with_context(|| format!("in {}", inputs.panel.display()))?;
    if let Some(g) = &inputs.graph {
        let graph = csvio::read_graph(csvio::open(g)?, &panel.unit_ids())
            .with_context(|| format!("in {}", g.display()))?;
        log::info!(
            "dependency graph: {} edges, deg = {}",
            graph.edge_count(),
            seqsl_core::graph::degree_plus_one(&graph)?
        );
    }
    let oracle = match &manifest {
        Some(m) => Some(OracleHandle::new(m.dgp())?),
        None => None,
    };

    let methods = &config.ensemble.methods;
    let inners = methods
        .iter()
        .map(|&m| ensemble_state(config, m, bound, config.seed))
        .collect::<Result<Vec<_>>>()?;
    let mut over = if methods.len() > 1 {
        Some(OverarchingState::new(inners.clone())?)
    } else {
        None
    };
    let mut primary = inners.into_iter().next().expect("validated nonempty");

    let ids: Vec<String> = config.learners.iter().map(|l| l.id.clone()).collect();
    let mut trajectory = Vec::new();
    let mut predictions = Vec::new();
    let mut over_predictions = Vec::new();
    let mut oracle_rows = Vec::new();
    let mut per_time = Vec::new();
    let mut star_terms = Vec::new();
    for slice in panel.slices() {
        let t = slice.time_index();
        let current = match &over {
            Some(o) => &o.inners()[0],
            None => &primary,
        };
        let pred = current.predict_aligned(slice)?;
        for (u, p) in slice.units().iter().zip(pred) {
            predictions.push(PredictionRow {
                t,
                alpha: u.unit_id.to_string(),
                w: u.declared,
                y: u.outcome,
                prediction: p,
            });
        }
        if let Some(oracle) = &oracle {
            let snaps: Vec<&PredictorSnapshot> = current.snapshots().iter().map(|s| &**s).collect();
            per_time.push(oracle.gap_moments(
                &snaps,
                slice,
                config.verify.draws_per_unit,
                seed::substream(config.seed, 100 + t as u64),
            )?);
            star_terms.push(oracle.star_risk(slice)?);
        }
        match over.take() {
            Some(o) => {
                let pred = o.predict_aligned(slice)?;
                for (u, p) in slice.units().iter().zip(pred) {
                    over_predictions.push(vec![
                        t.to_string(),
                        u.unit_id.to_string(),
                        u8::from(u.declared).to_string(),
                        real(u.outcome),
                        real(p),
                    ]);
                }
                over = Some(o.advance(slice.clone())?);
            }
            None => primary = primary.advance(slice.clone())?,
        }
        let current = match &over {
            Some(o) => &o.inners()[0],
            None => &primary,
        };
        let rec = current.records().last().expect("a record per step");
        for (j, id) in ids.iter().enumerate() {
            trajectory.push(TrajectoryRow {
                t,
                learner_id: id.clone(),
                empirical_risk: rec.empirical_risks[j],
                selected: rec.selected == j,
                weight: rec.weights[j],
            });
        }
        if oracle.is_some() {
            let sel = seqsl_core::simulator::oracle_select(&per_time, &star_terms, t)?;
            for (j, id) in ids.iter().enumerate() {
                oracle_rows.push(vec![
                    t.to_string(),
                    id.clone(),
                    real(sel.risks[j]),
                    real(sel.excess[j]),
                    u8::from(sel.index == j).to_string(),
                ]);
            }
        }
    }

    create_dir(out)?;
    csvio::write_trajectory(csvio::create(&out.join(TRAJECTORY_FILE))?, &trajectory)?;
    csvio::write_predictions(csvio::create(&out.join(PREDICTIONS_FILE))?, &predictions)?;
    if oracle.is_some() {
        csvio::write_table(
            csvio::create(&out.join(ORACLE_FILE))?,
            &["t", "learner_id", "oracle_risk", "excess", "oracle_selected_flag"],
            &oracle_rows,
        )?;
    }
    if let Some(o) = &over {
        let names: Vec<String> = methods.iter().map(MetaMethod::name).collect();
        let rows: Vec<Vec<String>> = o
            .records()
            .iter()
            .flat_map(|r| {
                names.iter().enumerate().map(move |(k, name)| {
                    vec![
                        r.time.to_string(),
                        name.clone(),
                        real(r.inner_risks[k]),
                        real(r.raw_weights[k]),
                        real(r.normalized_weights[k]),
                        u8::from(r.discrete_pick == k).to_string(),
                    ]
                })
            })
            .collect();
        csvio::write_table(
            csvio::create(&out.join(OVERARCHING_FILE))?,
            &["t", "method", "empirical_risk", "raw_weight", "normalized_weight", "discrete_flag"],
            &rows,
        )?;
        csvio::write_table(
            csvio::create(&out.join("overarching_predictions.csv"))?,
            &["t", "alpha", "w", "y", "prediction"],
            &over_predictions,
        )?;
    }
    log::info!("run over {} times written to {}", panel.horizon(), out.display());
    Ok(EXIT_OK)
}

/// Rows `(name, value)` of the constants table.
pub fn bounds_table(p: &BoundParameters) -> Result<Vec<(String, String)>> {
    let c = bounds::theorem1_constants(p)?;
    let regime = bounds::regime_compare(p)?;
    let mut at_minimal = *p;
    at_minimal.n = bounds::minimal_n(p)?;
    at_minimal.n_prime = bounds::minimal_n_prime(p);
    let time = bounds::corollary_bound(&at_minimal, BoundKind::Time)?;
    let graph = bounds::corollary_bound(&at_minimal, BoundKind::Graph)?;
    let rows: Vec<(String, String)> = vec![
        ("b1", real(p.b1)),
        ("b2", real(p.b2)),
        ("beta", real(p.beta)),
        ("gamma", real(p.gamma)),
        ("v1", real(p.v1)),
        ("ratio", real(p.ratio)),
        ("a", real(p.a)),
        ("J", p.j.to_string()),
        ("t", p.t.to_string()),
        ("N", p.n.to_string()),
        ("N'", p.n_prime.to_string()),
        ("v2", real(c.v2)),
        ("C1", real(c.c1)),
        ("C2", real(c.c2)),
        ("C1'", real(c.c1_prime)),
        ("C2'", real(c.c2_prime)),
        ("C3", real(time.c3)),
        ("C3'", real(time.c3_prime)),
        ("x_lower", real(c.x_lower)),
        ("x_lower'", real(c.x_lower_prime)),
        ("minimal N", time.minimal_n.to_string()),
        ("minimal N'", time.minimal_n_prime.to_string()),
        ("expected-risk bound (time, minimal N)", real(time.value)),
        ("expected-risk bound (graph, minimal N')", real(graph.value)),
        ("condition one", regime.condition_one.to_string()),
        ("condition two", regime.condition_two.to_string()),
        ("common N lower bound", real(regime.common_n_lower)),
        ("regime", regime.verdict.name().to_string()),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    Ok(rows)
}

pub fn cmd_bounds(manifest_path: &Path, csv: bool) -> Result<i32> {
    let p = manifest::load_bound_parameters(manifest_path)?;
    p.validate()?;
    let rows = bounds_table(&p)?;
    if csv {
        let mut out = Vec::new();
        let body: Vec<Vec<String>> = rows.into_iter().map(|(k, v)| vec![k, v]).collect();
        csvio::write_table(&mut out, &["constant", "value"], &body)?;
        print!("{}", String::from_utf8(out)?);
    } else {
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            println!("{k:<width$}  {v}");
        }
    }
    Ok(EXIT_OK)
}

pub fn cmd_verify(config: &ExperimentConfig, out: &Path) -> Result<i32> {
    let outcome = verify::verify(config)?;
    outcome.write(out)?;
    std::fs::write(out.join(MANIFEST_FILE), outcome.manifest.to_json()?)?;
    let summary = outcome.summary();
    log::info!("verification summary:\n{summary}");
    Ok(if outcome.failures() == 0 {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

/// Per-time sums of predictions and outcomes with their ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct CostRow {
    pub t: usize,
    pub predicted: f64,
    pub actual: f64,
    pub ratio: Option<f64>,
}

pub fn cost_rows(predictions: &[PredictionRow]) -> Vec<CostRow> {
    let mut rows: Vec<CostRow> = Vec::new();
    for p in predictions {
        match rows.last_mut() {
            Some(r) if r.t == p.t => {
                r.predicted += p.prediction;
                r.actual += p.y;
            }
            _ => rows.push(CostRow {
                t: p.t,
                predicted: p.prediction,
                actual: p.y,
                ratio: None,
            }),
        }
    }
    for r in &mut rows {
        r.ratio = (r.actual > 0.0).then(|| r.predicted / r.actual);
    }
    rows
}

/// Arithmetic mean of the per-time ratios after `burn_in` times.
pub fn mean_ratio(rows: &[CostRow], burn_in: usize) -> Option<f64> {
    let r: Vec<f64> = rows.iter().filter(|r| r.t > burn_in).filter_map(|r| r.ratio).collect();
    (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
}

pub fn cmd_report(run_dir: &Path, burn_in: usize, out: &Path) -> Result<i32> {
    let traj_path = run_dir.join(TRAJECTORY_FILE);
    let pred_path = run_dir.join(PREDICTIONS_FILE);
    for p in [&traj_path, &pred_path] {
        if !p.exists() {
            bail!("missing run output {}", p.display());
        }
    }
    let trajectory = csvio::read_trajectory(csvio::open(&traj_path)?)
        .with_context(|| format!("in {}", traj_path.display()))?;
    let predictions = csvio::read_predictions(csvio::open(&pred_path)?)
        .with_context(|| format!("in {}", pred_path.display()))?;

    let mut ids: Vec<String> = Vec::new();
    for r in &trajectory {
        if !ids.contains(&r.learner_id) {
            ids.push(r.learner_id.clone());
        }
    }
    let mut matrix: Vec<Vec<String>> = Vec::new();
    for chunk in trajectory.chunk_by(|a, b| a.t == b.t) {
        let mut row = vec![chunk[0].t.to_string()];
        for id in &ids {
            let w = chunk.iter().find(|r| &r.learner_id == id).map(|r| r.weight).unwrap_or(0.0);
            row.push(real(w));
        }
        matrix.push(row);
    }
    let costs = cost_rows(&predictions);
    let mean = mean_ratio(&costs, burn_in);

    create_dir(out)?;
    let mut header = vec!["t"];
    header.extend(ids.iter().map(String::as_str));
    csvio::write_table(csvio::create(&out.join("weights_matrix.csv"))?, &header, &matrix)?;
    let rows: Vec<Vec<String>> = costs
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                real(r.predicted),
                real(r.actual),
                r.ratio.map(real).unwrap_or_default(),
            ]
        })
        .collect();
    csvio::write_table(
        csvio::create(&out.join("costs.csv"))?,
        &["t", "predicted_total", "actual_total", "ratio"],
        &rows,
    )?;
    let summary = match mean {
        Some(m) => format!("burn_in = {burn_in}\nmean_ratio = {}\nmean_ratio_percent = {:.2}\n", real(m), 100.0 * m),
        None => format!("burn_in = {burn_in}\nmean_ratio = undefined (no time with a positive outcome total)\n"),
    };
    std::fs::write(out.join("report.txt"), &summary)?;
    print!("{summary}");
    Ok(EXIT_OK)
}
