//! Config files: TOML with `[model]`, `[solver]` and `[experiment]` tables.
//!
//! ```toml
//! preset = "line"          # optional starting point
//!
//! [model]
//! N = 30
//! n = 7
//! xi = 10
//! alpha_a = 180
//! alpha_r = 40
//! R_sr = 1
//! v_max = 10
//! L = 15
//! alpha_noise = 0
//! heading_rule = "fixed"
//!
//! [solver]
//! dt_max = 0.05
//! max_iters = 200000
//!
//! [experiment]
//! replicates = 10
//! snapshot_stride = 100
//!
//! [[experiment.sweep]]
//! param = "xi"
//! values = [2, 4, 6]
//!
//! [[experiment.sweep]]
//! params = ["alpha_r", "alpha_a"]
//! points = [[360, 360], [344, 351]]
//! ```
//!
//! Keys in `[model]` and `[solver]` are the parameter symbols accepted by
//! [`ModelParams::set`]; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::experiment::SweepAxis;
use crate::params::{HeadingRule, ModelParams, Preset};

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub replicates: Option<usize>,
    pub seed_base: Option<u64>,
    pub snapshot_stride: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub ai_probes: Option<Vec<f64>>,
    #[serde(default)]
    pub sweep: Vec<SweepEntry>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SweepEntry {
    Single {
        param: String,
        values: Vec<f64>,
    },
    Zipped {
        params: Vec<String>,
        points: Vec<Vec<f64>>,
    },
}

impl SweepEntry {
    pub fn into_axis(self) -> Result<SweepAxis> {
        match self {
            SweepEntry::Single { param, values } => Ok(SweepAxis::single(param, values)),
            SweepEntry::Zipped { params, points } => SweepAxis::zipped(params, points),
        }
    }
}

/// Parsed config file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigFile {
    pub params: ModelParams,
    pub experiment: ExperimentSection,
}

fn number(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Integer(i) => Ok(*i as f64),
        Value::Float(f) => Ok(*f),
        other => Err(Error::Config(format!(
            "`{key}` must be a number, got {}",
            other.type_str()
        ))),
    }
}

/// Applies `key = value` from a `[model]` or `[solver]` table.
pub fn apply_key(params: &mut ModelParams, key: &str, v: &Value) -> Result<()> {
    match key {
        "heading_rule" => {
            let s = v
                .as_str()
                .ok_or_else(|| Error::Config("`heading_rule` must be a string".into()))?;
            params.heading_rule = parse_heading_rule(s)?;
        }
        "seed" => {
            let i = v
                .as_integer()
                .filter(|i| *i >= 0)
                .ok_or_else(|| Error::Config("`seed` must be a non-negative integer".into()))?;
            params.seed = i as u64;
        }
        _ => params.set(key, number(key, v)?)?,
    }
    Ok(())
}

pub fn parse_heading_rule(s: &str) -> Result<HeadingRule> {
    match s {
        "fixed" => Ok(HeadingRule::Fixed),
        "velocity" => Ok(HeadingRule::Velocity),
        other => Err(Error::Config(format!(
            "unknown heading_rule `{other}` (fixed, velocity)"
        ))),
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;

        let mut params = match table.remove("preset") {
            Some(Value::String(name)) => name.parse::<Preset>()?.params(),
            Some(_) => return Err(Error::Config("`preset` must be a string".into())),
            None => ModelParams::default(),
        };

        for section in ["model", "solver"] {
            match table.remove(section) {
                Some(Value::Table(t)) => {
                    for (k, v) in &t {
                        apply_key(&mut params, k, v)?;
                    }
                }
                Some(_) => return Err(Error::Config(format!("`{section}` must be a table"))),
                None => {}
            }
        }

        let experiment = match table.remove("experiment") {
            Some(v) => v
                .try_into()
                .map_err(|e: toml::de::Error| Error::Config(format!("[experiment]: {e}")))?,
            None => ExperimentSection::default(),
        };

        if let Some(key) = table.keys().next() {
            return Err(Error::Config(format!("unknown top-level key `{key}`")));
        }
        Ok(Self { params, experiment })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

/// Renders `params` in the config-file layout.
pub fn render_params(params: &ModelParams) -> String {
    let rule = match params.heading_rule {
        HeadingRule::Fixed => "fixed",
        HeadingRule::Velocity => "velocity",
    };
    let mut out = format!(
        "[model]\nN = {}\nn = {}\nxi = {:?}\nalpha_a = {:?}\nalpha_r = {:?}\nR_sr = {:?}\n\
         v_max = {:?}\nL = {:?}\nalpha_noise = {:?}\neps_angle = {:?}\nheading_rule = \"{rule}\"\n\
         seed = {}\n\n[solver]\ndt_max = {:?}\n",
        params.n_agents,
        params.n_neighbors,
        params.xi,
        params.alpha_a,
        params.alpha_r,
        params.r_sr,
        params.v_max,
        params.domain,
        params.alpha_noise,
        params.eps_angle,
        params.seed,
        params.solver.dt_max,
    );
    if let Some(cap) = params.solver.disp_cap {
        out.push_str(&format!("disp_cap = {cap:?}\n"));
    }
    out.push_str(&format!(
        "eps_steady = {:?}\nsteady_window = {}\nmax_iters = {}\n",
        params.solver.eps_steady, params.solver.steady_window, params.solver.max_iters
    ));
    out
}
