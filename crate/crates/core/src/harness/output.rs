//! File formats: snapshot and summary CSV, JSON records, positions CSV and
//! tab-delimited plot data.
//!
//! Everything written here is a pure function of its inputs except the
//! `metadata.created_unix` field of `manifest.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::{summarize_cell, ExperimentSpec, ExperimentSummary};
use crate::integrator::RunRecord;
use crate::metrics::MetricsReport;
use crate::model::{AgentState, Configuration};
use crate::vec2::Vec2;

pub const SNAPSHOT_HEADER: [&str; 7] = [
    "run_id",
    "t",
    "agent_id",
    "x",
    "y",
    "heading_x",
    "heading_y",
];

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn csv_writer(path: &Path, delimiter: u8) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(create(path)?))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn finish<W: Write>(mut w: csv::Writer<W>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// One row per agent per stored snapshot; positions are centroid-relative.
pub fn write_snapshots_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path, b',')?;
    w.write_record(SNAPSHOT_HEADER)?;
    for s in &record.snapshots {
        for (i, (p, h)) in s.positions.iter().zip(&s.headings).enumerate() {
            w.write_record([
                record.run_id.clone(),
                s.t.to_string(),
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                h.x.to_string(),
                h.y.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

/// Lab-frame centroid of every stored snapshot.
pub fn write_centroid_csv(path: &Path, record: &RunRecord) -> Result<()> {
    let mut w = csv_writer(path, b',')?;
    w.write_record(["run_id", "step", "t", "centroid_x", "centroid_y"])?;
    for s in &record.snapshots {
        w.write_record([
            record.run_id.clone(),
            s.step.to_string(),
            s.t.to_string(),
            s.centroid.x.to_string(),
            s.centroid.y.to_string(),
        ])?;
    }
    finish(w, path)
}

pub fn write_metrics_json(path: &Path, report: &MetricsReport) -> Result<()> {
    write_json(path, report)
}

pub fn read_metrics_json(path: &Path) -> Result<MetricsReport> {
    read_json(path)
}

pub fn write_record(path: &Path, record: &RunRecord) -> Result<()> {
    write_json(path, record)
}

/// Reads and validates a run record.
pub fn read_record(path: &Path) -> Result<RunRecord> {
    let record: RunRecord = read_json(path)?;
    record.validate()?;
    Ok(record)
}

/// Files written for one run inside `dir`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunFiles {
    pub record: PathBuf,
    pub snapshots: PathBuf,
    pub centroid: PathBuf,
    pub metrics: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path, run_id: &str) -> Self {
        Self {
            record: dir.join(format!("{run_id}.record.json")),
            snapshots: dir.join(format!("{run_id}.snapshots.csv")),
            centroid: dir.join(format!("{run_id}.centroid.csv")),
            metrics: dir.join(format!("{run_id}.metrics.json")),
        }
    }
}

pub fn write_run(dir: &Path, record: &RunRecord) -> Result<RunFiles> {
    let files = RunFiles::in_dir(dir, &record.run_id);
    write_record(&files.record, record)?;
    write_snapshots_csv(&files.snapshots, record)?;
    write_centroid_csv(&files.centroid, record)?;
    write_metrics_json(&files.metrics, &record.final_metrics)?;
    Ok(files)
}

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const RUNS_DIR: &str = "runs";

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    base: &'a crate::params::ModelParams,
    sweep: &'a [crate::harness::experiment::SweepAxis],
    replicates: usize,
    seed_base: u64,
    snapshot_stride: u64,
    ai_probes: &'a [f64],
    cells: Vec<CellEntry>,
    metadata: Metadata,
}

#[derive(Debug, Serialize)]
struct CellEntry {
    cell: usize,
    run_ids: Vec<String>,
    seeds: Vec<u64>,
}

#[derive(Debug, Serialize)]
struct Metadata {
    created_unix: u64,
}

/// Long-format summary: one row per (cell, metric).
pub fn write_summary_csv(path: &Path, summary: &ExperimentSummary) -> Result<()> {
    let mut w = csv_writer(path, b',')?;
    w.write_record([
        "cell",
        "params",
        "runs",
        "steady_runs",
        "metric",
        "count",
        "mean",
        "variance",
        "min",
        "max",
    ])?;
    for cell in &summary.cells {
        let params = cell
            .assignment
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";");
        for (key, s) in &cell.metrics {
            w.write_record([
                cell.cell.to_string(),
                params.clone(),
                cell.runs.to_string(),
                cell.steady_runs.to_string(),
                key.clone(),
                s.count.to_string(),
                s.mean.to_string(),
                s.variance.to_string(),
                s.min.to_string(),
                s.max.to_string(),
            ])?;
        }
    }
    finish(w, path)
}

pub fn read_summary(path: &Path) -> Result<ExperimentSummary> {
    read_json(path)
}

/// Writes per-run files under `dir/runs`, then `summary.json`,
/// `summary.csv` and `manifest.json`.
pub fn write_experiment(
    dir: &Path,
    spec: &ExperimentSpec,
    summary: &ExperimentSummary,
    records: &[Vec<RunRecord>],
) -> Result<()> {
    let runs = dir.join(RUNS_DIR);
    for rec in records.iter().flatten() {
        write_run(&runs, rec)?;
    }
    write_json(&dir.join(SUMMARY_JSON), summary)?;
    write_summary_csv(&dir.join(SUMMARY_CSV), summary)?;
    let created_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = Manifest {
        base: &spec.base,
        sweep: &spec.sweep,
        replicates: spec.replicates,
        seed_base: spec.seed_base,
        snapshot_stride: spec.snapshot_stride,
        ai_probes: &spec.ai_probes,
        cells: records
            .iter()
            .enumerate()
            .map(|(c, recs)| CellEntry {
                cell: c,
                run_ids: recs.iter().map(|r| r.run_id.clone()).collect(),
                seeds: recs.iter().map(|r| r.seed).collect(),
            })
            .collect(),
        metadata: Metadata { created_unix },
    };
    write_json(&dir.join(MANIFEST_JSON), &manifest)
}

/// Rebuilds the summary of an experiment directory from its persisted run
/// records, using the cell layout of its `summary.json`.
pub fn recompute_summary(dir: &Path) -> Result<ExperimentSummary> {
    let stored = read_summary(&dir.join(SUMMARY_JSON))?;
    let runs = dir.join(RUNS_DIR);
    let cells = stored
        .cells
        .iter()
        .map(|cell| {
            let records = cell
                .run_ids
                .iter()
                .map(|id| read_record(&RunFiles::in_dir(&runs, id).record))
                .collect::<Result<Vec<_>>>()?;
            Ok(summarize_cell(cell.cell, cell.assignment.clone(), &records))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentSummary { cells, ..stored })
}

#[derive(Debug, Serialize, Deserialize)]
struct PositionRow {
    x: f64,
    y: f64,
    #[serde(default)]
    heading_x: Option<f64>,
    #[serde(default)]
    heading_y: Option<f64>,
}

/// Writes `x,y,heading_x,heading_y` rows.
pub fn write_positions_csv(path: &Path, config: &Configuration) -> Result<()> {
    let mut w = csv_writer(path, b',')?;
    for a in &config.agents {
        w.serialize(PositionRow {
            x: a.position.x,
            y: a.position.y,
            heading_x: Some(a.heading.x),
            heading_y: Some(a.heading.y),
        })?;
    }
    finish(w, path)
}

/// Reads a positions CSV with header `x,y` and optional
/// `heading_x,heading_y` columns (heading defaults to +x).
pub fn read_positions_csv(path: &Path) -> Result<Configuration> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut agents = Vec::new();
    for row in r.deserialize::<PositionRow>() {
        let row = row?;
        let position = Vec2::new(row.x, row.y);
        let agent = match (row.heading_x, row.heading_y) {
            (Some(hx), Some(hy)) => AgentState::with_heading(position, Vec2::new(hx, hy)),
            (None, None) => AgentState::at(position),
            _ => {
                return Err(Error::Config(format!(
                    "{}: heading_x and heading_y must be given together",
                    path.display()
                )))
            }
        };
        agents.push(agent);
    }
    let config = Configuration::new(agents);
    config.validate()?;
    Ok(config)
}

pub const SCATTER_TSV: &str = "scatter.tsv";
pub const ROSE_TSV: &str = "rose.tsv";
pub const TIMESERIES_TSV: &str = "timeseries.tsv";

/// Tab-delimited plot tables for one run: terminal scatter
/// (centroid-relative), nearest-neighbor angle rose, and per-snapshot metric
/// series.
pub fn write_plotdata(dir: &Path, record: &RunRecord) -> Result<Vec<PathBuf>> {
    record.validate()?;
    let last = record.terminal_snapshot().expect("validated");

    let scatter = dir.join(SCATTER_TSV);
    let mut w = csv_writer(&scatter, b'\t')?;
    w.write_record(["agent_id", "x", "y", "heading_x", "heading_y"])?;
    for (i, (p, h)) in last.positions.iter().zip(&last.headings).enumerate() {
        w.write_record([
            i.to_string(),
            p.x.to_string(),
            p.y.to_string(),
            h.x.to_string(),
            h.y.to_string(),
        ])?;
    }
    finish(w, &scatter)?;

    let rose = dir.join(ROSE_TSV);
    let hist = &record.final_metrics.angle_histogram;
    let total = hist.total().max(1) as f64;
    let mut w = csv_writer(&rose, b'\t')?;
    w.write_record(["bin_low", "bin_high", "count", "fraction"])?;
    for (k, &count) in hist.counts.iter().enumerate() {
        let (lo, hi) = hist.edges(k);
        w.write_record([
            lo.to_string(),
            hi.to_string(),
            count.to_string(),
            (count as f64 / total).to_string(),
        ])?;
    }
    finish(w, &rose)?;

    let series = dir.join(TIMESERIES_TSV);
    let probes: Vec<f64> = record
        .final_metrics
        .ai_values
        .iter()
        .map(|v| v.theta)
        .collect();
    let mut w = csv_writer(&series, b'\t')?;
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend(record.final_metrics.flat().into_iter().map(|(k, _)| k));
    w.write_record(&header)?;
    for s in &record.snapshots {
        let m = MetricsReport::compute(&s.to_configuration(), &record.params, &probes)?;
        let mut row = vec![s.step.to_string(), s.t.to_string()];
        row.extend(m.flat().into_iter().map(|(_, v)| v.to_string()));
        w.write_record(&row)?;
    }
    finish(w, &series)?;

    Ok(vec![scatter, rose, series])
}
