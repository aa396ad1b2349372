//! Parameter sweeps with replicates.
//!
//! A sweep is the cross product of its axes. An axis sets one parameter, or
//! several parameters in lockstep (e.g. `(alpha_r, alpha_a)` pairs). Each
//! cell runs `replicates` independent simulations; replicate `r` of cell `c`
//! uses seed `seed_base + replicate_seed_offset(c, r)` (wrapping).

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{random_initial, run_with, RunOptions, RunRecord, TerminationKind};
use crate::params::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub names: Vec<String>,
    /// One entry per point; each holds a value for every name.
    pub points: Vec<Vec<f64>>,
}

impl SweepAxis {
    pub fn single(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            names: vec![name.into()],
            points: values.into_iter().map(|v| vec![v]).collect(),
        }
    }

    pub fn zipped(names: Vec<String>, points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != names.len()) {
            return Err(Error::Config(format!(
                "sweep point {p:?} has {} values for {} parameters",
                p.len(),
                names.len()
            )));
        }
        Ok(Self { names, points })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: ModelParams,
    pub sweep: Vec<SweepAxis>,
    pub replicates: usize,
    pub seed_base: u64,
    pub snapshot_stride: u64,
    /// Where per-run records and the summary go; `None` keeps everything in
    /// memory.
    pub output_dir: Option<PathBuf>,
    /// Extra alignment-index probe angles.
    pub ai_probes: Vec<f64>,
}

/// Default replicates per sweep cell.
pub const DEFAULT_REPLICATES: usize = 100;

impl ExperimentSpec {
    pub fn new(base: ModelParams, seed_base: u64) -> Self {
        Self {
            base,
            sweep: Vec::new(),
            replicates: DEFAULT_REPLICATES,
            seed_base,
            snapshot_stride: 0,
            output_dir: None,
            ai_probes: Vec::new(),
        }
    }

    /// Parameter assignments of every cell, in row-major order over the
    /// axes (last axis varies fastest).
    pub fn cells(&self) -> Vec<Vec<(String, f64)>> {
        let mut cells: Vec<Vec<(String, f64)>> = vec![Vec::new()];
        for axis in &self.sweep {
            let mut next = Vec::with_capacity(cells.len() * axis.points.len());
            for cell in &cells {
                for point in &axis.points {
                    let mut c = cell.clone();
                    c.extend(axis.names.iter().cloned().zip(point.iter().copied()));
                    next.push(c);
                }
            }
            cells = next;
        }
        cells
    }

    /// Parameters of every cell, validated. Fails before anything runs.
    pub fn cell_params(&self) -> Result<Vec<ModelParams>> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        self.cells()
            .into_iter()
            .enumerate()
            .map(|(c, assignment)| {
                let mut p = self.base.clone();
                for (name, value) in &assignment {
                    p.set(name, *value)?;
                }
                p.validate()
                    .map_err(|e| Error::Config(format!("sweep cell {c}: {e}")))?;
                Ok(p)
            })
            .collect()
    }
}

/// splitmix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-replicate seed offset: `splitmix64((cell << 32) ^ replicate)`.
pub fn replicate_seed_offset(cell: usize, replicate: usize) -> u64 {
    splitmix64(((cell as u64) << 32) ^ replicate as u64)
}

pub fn replicate_seed(seed_base: u64, cell: usize, replicate: usize) -> u64 {
    seed_base.wrapping_add(replicate_seed_offset(cell, replicate))
}

pub fn run_id(cell: usize, replicate: usize) -> String {
    format!("c{cell:03}_r{replicate:03}")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    /// Number of finite samples the statistics are computed over.
    pub count: usize,
    /// The remaining fields are NaN (serialized as `null`) when `count == 0`.
    #[serde(with = "nullable")]
    pub mean: f64,
    /// Population variance.
    #[serde(with = "nullable")]
    pub variance: f64,
    #[serde(with = "nullable")]
    pub min: f64,
    #[serde(with = "nullable")]
    pub max: f64,
}

mod nullable {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

impl MetricStats {
    pub fn of(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let count = finite.len();
        if count == 0 {
            return Self {
                count,
                mean: f64::NAN,
                variance: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let mean = finite.iter().sum::<f64>() / count as f64;
        let variance = finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count as f64;
        Self {
            count,
            mean,
            variance,
            min: finite.iter().copied().fold(f64::INFINITY, f64::min),
            max: finite.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: usize,
    pub assignment: Vec<(String, f64)>,
    pub runs: usize,
    pub steady_runs: usize,
    pub run_ids: Vec<String>,
    /// Across-replicate statistics of each scalar metric, keyed as in
    /// [`crate::metrics::MetricsReport::flat`].
    pub metrics: Vec<(String, MetricStats)>,
}

impl CellSummary {
    pub fn metric(&self, key: &str) -> Option<&MetricStats> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, s)| s)
    }
}

/// Summarises the replicates of one cell. Keys come from the first record.
pub fn summarize_cell(
    cell: usize,
    assignment: Vec<(String, f64)>,
    records: &[RunRecord],
) -> CellSummary {
    let keys: Vec<String> = records
        .first()
        .map(|r| r.final_metrics.flat().into_iter().map(|(k, _)| k).collect())
        .unwrap_or_default();
    let metrics = keys
        .into_iter()
        .map(|key| {
            let values: Vec<f64> = records
                .iter()
                .filter_map(|r| {
                    r.final_metrics
                        .flat()
                        .into_iter()
                        .find(|(k, _)| *k == key)
                        .map(|(_, v)| v)
                })
                .collect();
            let stats = MetricStats::of(&values);
            (key, stats)
        })
        .collect();
    CellSummary {
        cell,
        assignment,
        runs: records.len(),
        steady_runs: records
            .iter()
            .filter(|r| r.termination.kind == TerminationKind::SteadyState)
            .count(),
        run_ids: records.iter().map(|r| r.run_id.clone()).collect(),
        metrics,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub replicates: usize,
    pub seed_base: u64,
    pub cells: Vec<CellSummary>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub summary: ExperimentSummary,
    /// Records grouped by cell, replicate order.
    pub records: Vec<Vec<RunRecord>>,
}

/// Runs one replicate.
pub fn run_replicate(
    params: &ModelParams,
    seed: u64,
    run_id: String,
    snapshot_stride: u64,
    ai_probes: &[f64],
) -> Result<RunRecord> {
    let params = ModelParams {
        seed,
        ..params.clone()
    };
    let initial = random_initial(&params, seed)?;
    run_with(
        &initial,
        &params,
        &RunOptions {
            snapshot_stride,
            run_id,
            ai_probes: ai_probes.to_vec(),
        },
    )
}

/// Executes every cell and replicate (in parallel), then writes per-run
/// outputs and the summary when `output_dir` is set. Results do not depend
/// on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    let cell_params = spec.cell_params()?;
    let jobs: Vec<(usize, usize)> = (0..cell_params.len())
        .flat_map(|c| (0..spec.replicates).map(move |r| (c, r)))
        .collect();
    let results: Vec<Result<RunRecord>> = jobs
        .par_iter()
        .map(|&(c, r)| {
            run_replicate(
                &cell_params[c],
                replicate_seed(spec.seed_base, c, r),
                run_id(c, r),
                spec.snapshot_stride,
                &spec.ai_probes,
            )
        })
        .collect();

    let mut records: Vec<Vec<RunRecord>> =
        vec![Vec::with_capacity(spec.replicates); cell_params.len()];
    for (&(c, _), res) in jobs.iter().zip(results) {
        records[c].push(res?);
    }
    let cells = spec
        .cells()
        .into_iter()
        .zip(&records)
        .enumerate()
        .map(|(c, (assignment, recs))| summarize_cell(c, assignment, recs))
        .collect();
    let summary = ExperimentSummary {
        replicates: spec.replicates,
        seed_base: spec.seed_base,
        cells,
    };
    if let Some(dir) = &spec.output_dir {
        crate::harness::output::write_experiment(dir, spec, &summary, &records)?;
    }
    Ok(ExperimentOutcome { summary, records })
}
