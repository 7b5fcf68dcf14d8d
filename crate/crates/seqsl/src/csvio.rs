//! CSV schemas for panels, graphs and run outputs.
//!
//! Reals are written with the shortest representation that parses back to
//! the same `f64`, so write -> read -> write is byte-identical.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use seqsl_core::data::{PanelDataset, TimeSlice, UnitId, UnitObservation};
use seqsl_core::graph::DependencyGraph;

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::None)
        .from_reader(input)
}

fn writer<W: Write>(output: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(output)
}

pub fn real(v: f64) -> String {
    format!("{v}")
}

/// Row number as shown to users: the header is line 1.
fn line(record: &csv::StringRecord, fallback: usize) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(fallback as u64 + 2)
}

fn cell<'a>(rec: &'a csv::StringRecord, headers: &csv::StringRecord, col: usize, row: u64) -> Result<&'a str> {
    match rec.get(col) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => bail!("row {row}, column {:?}: missing value", headers.get(col).unwrap_or("?")),
    }
}

fn parse_real(rec: &csv::StringRecord, headers: &csv::StringRecord, col: usize, row: u64) -> Result<f64> {
    let text = cell(rec, headers, col, row)?;
    let v: f64 = text.parse().map_err(|_| {
        anyhow!("row {row}, column {:?}: {text:?} is not a real number", &headers[col])
    })?;
    if !v.is_finite() {
        bail!("row {row}, column {:?}: {text:?} is not finite", &headers[col]);
    }
    Ok(v)
}

/// Reads `t, alpha, w, y, z_1..z_p, x_1..x_q`.
pub fn read_panel<R: Read>(input: R, outcome_bound: f64) -> Result<PanelDataset> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let fixed = ["t", "alpha", "w", "y"];
    for (i, name) in fixed.iter().enumerate() {
        if headers.get(i) != Some(name) {
            bail!("header column {}: expected {name:?}, found {:?}", i + 1, headers.get(i).unwrap_or(""));
        }
    }
    let rest: Vec<&str> = headers.iter().skip(4).collect();
    let p = rest.iter().take_while(|h| h.starts_with("z_")).count();
    let q = rest.len() - p;
    for (k, h) in rest.iter().enumerate() {
        let want = if k < p { format!("z_{}", k + 1) } else { format!("x_{}", k - p + 1) };
        if *h != want {
            bail!("header column {}: expected {want:?}, found {h:?}", k + 5);
        }
    }

    let mut by_time: BTreeMap<usize, Vec<UnitObservation>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("record {}", i + 1))?;
        let row = line(&rec, i);
        if rec.len() != headers.len() {
            bail!("row {row}: {} cells, header has {}", rec.len(), headers.len());
        }
        let t_text = cell(&rec, &headers, 0, row)?;
        let t: usize = t_text
            .parse()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| anyhow!("row {row}, column \"t\": {t_text:?} is not a time index >= 1"))?;
        let alpha = cell(&rec, &headers, 1, row)?.to_string();
        let w = match cell(&rec, &headers, 2, row)? {
            "0" => false,
            "1" => true,
            other => bail!("row {row}, column \"w\": {other:?} must be 0 or 1"),
        };
        let y = parse_real(&rec, &headers, 3, row)?;
        if !w && y != 0.0 {
            bail!("row {row}, column \"y\": w = 0 requires y = 0, found {y}");
        }
        let z = (0..p).map(|k| parse_real(&rec, &headers, 4 + k, row)).collect::<Result<_>>()?;
        let x = (0..q).map(|k| parse_real(&rec, &headers, 4 + p + k, row)).collect::<Result<_>>()?;
        let obs = UnitObservation::new(alpha, w, x, z, y).map_err(|e| anyhow!("row {row}: {e}"))?;
        by_time.entry(t).or_default().push(obs);
    }
    if by_time.is_empty() {
        bail!("panel has no rows");
    }
    let slices = by_time
        .into_iter()
        .map(|(t, units)| TimeSlice::new(t, units).map_err(|e| anyhow!("time {t}: {e}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(PanelDataset::new(slices, outcome_bound)?)
}

pub fn write_panel<W: Write>(output: W, panel: &PanelDataset) -> Result<()> {
    let first = &panel.slices()[0];
    let (p, q) = (first.summary_dim(), first.covariate_dim());
    let mut w = writer(output);
    let mut header: Vec<String> = ["t", "alpha", "w", "y"].iter().map(|s| s.to_string()).collect();
    header.extend((1..=p).map(|k| format!("z_{k}")));
    header.extend((1..=q).map(|k| format!("x_{k}")));
    w.write_record(&header)?;
    for slice in panel.slices() {
        for u in slice.units() {
            let mut row = vec![
                slice.time_index().to_string(),
                u.unit_id.to_string(),
                if u.declared { "1" } else { "0" }.to_string(),
                real(u.outcome),
            ];
            row.extend(u.summary.iter().map(|v| real(*v)));
            row.extend(u.covariates.iter().map(|v| real(*v)));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes clique membership when the graph is a union of cliques, the edge
/// list otherwise.
pub fn write_graph<W: Write>(output: W, graph: &DependencyGraph) -> Result<()> {
    let mut w = writer(output);
    let ids = graph.vertices();
    match graph.clique_partition() {
        Some(labels) => {
            w.write_record(["alpha", "clique_id"])?;
            for (id, label) in ids.iter().zip(labels) {
                w.write_record([id.as_str(), &label.to_string()])?;
            }
        }
        None => {
            w.write_record(["alpha_a", "alpha_b"])?;
            for (i, j) in graph.edges() {
                w.write_record([ids[i].as_str(), ids[j].as_str()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_graph<R: Read>(input: R, units: &[UnitId]) -> Result<DependencyGraph> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let known = |id: &str, row: u64, col: &str| -> Result<UnitId> {
        let id = UnitId::from(id);
        if units.binary_search(&id).is_err() {
            bail!("row {row}, column {col:?}: unit {id} is not in the panel");
        }
        Ok(id)
    };
    let mut units = units.to_vec();
    units.sort();
    let units = &units[..];
    let graph = match headers.iter().collect::<Vec<_>>()[..] {
        ["alpha", "clique_id"] => {
            let mut members = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = line(&rec, i);
                let id = known(cell(&rec, &headers, 0, row)?, row, "alpha")?;
                let text = cell(&rec, &headers, 1, row)?;
                let label: u64 = text
                    .parse()
                    .map_err(|_| anyhow!("row {row}, column \"clique_id\": {text:?} is not an integer"))?;
                members.push((id, label));
            }
            DependencyGraph::from_cliques(members)?
        }
        ["alpha_a", "alpha_b"] => {
            let mut edges = Vec::new();
            for (i, rec) in rdr.records().enumerate() {
                let rec = rec?;
                let row = line(&rec, i);
                let a = known(cell(&rec, &headers, 0, row)?, row, "alpha_a")?;
                let b = known(cell(&rec, &headers, 1, row)?, row, "alpha_b")?;
                if a == b {
                    bail!("row {row}: self-loop on {a}");
                }
                edges.push((a, b));
            }
            DependencyGraph::from_edges(units.to_vec(), edges)?
        }
        _ => bail!("graph header must be \"alpha,clique_id\" or \"alpha_a,alpha_b\""),
    };
    graph.check_vertices(units)?;
    Ok(graph)
}

/// One row of the selection trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub learner_id: String,
    pub empirical_risk: f64,
    pub selected: bool,
    pub weight: f64,
}

pub fn write_trajectory<W: Write>(output: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut w = writer(output);
    w.write_record(["t", "learner_id", "empirical_risk", "selected_flag", "weight"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.learner_id.clone(),
            real(r.empirical_risk),
            u8::from(r.selected).to_string(),
            real(r.weight),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "learner_id", "empirical_risk", "selected_flag", "weight"] {
        bail!("unexpected trajectory header");
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = line(&rec, i);
        let t_text = cell(&rec, &headers, 0, row)?;
        rows.push(TrajectoryRow {
            t: t_text.parse().map_err(|_| anyhow!("row {row}, column \"t\": {t_text:?}"))?,
            learner_id: cell(&rec, &headers, 1, row)?.to_string(),
            empirical_risk: parse_real(&rec, &headers, 2, row)?,
            selected: match cell(&rec, &headers, 3, row)? {
                "0" => false,
                "1" => true,
                other => bail!("row {row}, column \"selected_flag\": {other:?}"),
            },
            weight: parse_real(&rec, &headers, 4, row)?,
        });
    }
    Ok(rows)
}

/// One row of the predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub t: usize,
    pub alpha: String,
    pub w: bool,
    pub y: f64,
    pub prediction: f64,
}

pub fn write_predictions<W: Write>(output: W, rows: &[PredictionRow]) -> Result<()> {
    let mut w = writer(output);
    w.write_record(["t", "alpha", "w", "y", "prediction"])?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.alpha.clone(),
            u8::from(r.w).to_string(),
            real(r.y),
            real(r.prediction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions<R: Read>(input: R) -> Result<Vec<PredictionRow>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "alpha", "w", "y", "prediction"] {
        bail!("unexpected predictions header");
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = line(&rec, i);
        let t_text = cell(&rec, &headers, 0, row)?;
        rows.push(PredictionRow {
            t: t_text.parse().map_err(|_| anyhow!("row {row}, column \"t\": {t_text:?}"))?,
            alpha: cell(&rec, &headers, 1, row)?.to_string(),
            w: cell(&rec, &headers, 2, row)? == "1",
            y: parse_real(&rec, &headers, 3, row)?,
            prediction: parse_real(&rec, &headers, 4, row)?,
        });
    }
    Ok(rows)
}

/// Writes a plain table of strings.
pub fn write_table<W: Write>(output: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = writer(output);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    let f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(std::io::BufWriter::new(f))
}

pub fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))
}
