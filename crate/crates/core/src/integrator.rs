//! Adaptive explicit Euler stepping with speed capping, directional noise
//! and steady-state detection in the centroid frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{select_neighbors_with, velocity_field, AgentState, Configuration, TieBreak};
use crate::params::{HeadingRule, ModelParams, HEADING_SPEED_THRESHOLD};
use crate::vec2::Vec2;

/// The generator behind every random draw in a run.
pub type SimRng = ChaCha8Rng;

/// ChaCha stream reserved for heading noise. Streams `0..N` place agents.
pub const NOISE_STREAM: u64 = u64::MAX;

/// Initial positions closer than this to an earlier agent are redrawn.
pub const MIN_INITIAL_SEPARATION: f64 = 1e-6;

/// Total redraw budget for [`random_initial`].
pub const MAX_PLACEMENT_DRAWS: u64 = 1_000_000;

/// Noise generator for a run seeded with `seed`.
pub fn noise_rng(seed: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(NOISE_STREAM);
    rng
}

/// `N` positions uniform on `[0, L]^2`, headings +x, at rest.
///
/// Agent `i` draws from its own ChaCha stream `i` under `seed`, so the
/// position of agent `i` depends only on `(seed, i)` and the agents before
/// it that forced a redraw. Two calls with the same seed and different `N`
/// agree on their common prefix.
pub fn random_initial(params: &ModelParams, seed: u64) -> Result<Configuration> {
    params.validate()?;
    let l = params.domain;
    let mut positions: Vec<Vec2> = Vec::with_capacity(params.n_agents);
    let mut draws = 0u64;
    for i in 0..params.n_agents {
        let mut rng = SimRng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        loop {
            if draws >= MAX_PLACEMENT_DRAWS {
                return Err(Error::Placement {
                    count: params.n_agents,
                    attempts: draws,
                });
            }
            draws += 1;
            let p = Vec2::new(rng.random_range(0.0..=l), rng.random_range(0.0..=l));
            if positions
                .iter()
                .all(|q| q.distance(p) >= MIN_INITIAL_SEPARATION)
            {
                positions.push(p);
                break;
            }
        }
    }
    Ok(Configuration::from_positions(positions))
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    /// Configuration after the step. Each agent's `velocity` is the applied
    /// (capped, rotated) velocity.
    pub config: Configuration,
    pub dt_used: f64,
    /// Largest applied speed (BL/TU).
    pub max_speed: f64,
    /// Largest per-TU change of `x_i - centroid`.
    pub max_relative_drift: f64,
}

/// Rescales `v` to norm `v_max` when it is faster.
pub fn cap_speed(v: Vec2, v_max: f64) -> Vec2 {
    let s = v.norm();
    if s > v_max {
        v * (v_max / s)
    } else {
        v
    }
}

/// One adaptive Euler step with the default index tie-break.
pub fn step<R: Rng + ?Sized>(
    config: &Configuration,
    params: &ModelParams,
    rng: &mut R,
) -> Result<StepResult> {
    step_with(config, params, rng, &TieBreak::Index)
}

pub fn step_with<R: Rng + ?Sized>(
    config: &Configuration,
    params: &ModelParams,
    rng: &mut R,
    tie: &TieBreak,
) -> Result<StepResult> {
    let neighbors = select_neighbors_with(config, params, tie)?;
    let raw = velocity_field(config, &neighbors, params)?;

    let noise = params.alpha_noise.to_radians();
    let velocities: Vec<Vec2> = raw
        .into_iter()
        .map(|v| {
            let v = cap_speed(v, params.v_max);
            if noise > 0.0 {
                v.rotated(rng.random_range(-noise..=noise))
            } else {
                v
            }
        })
        .collect();

    let max_speed = velocities.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dt_max = params.solver.dt_max;
    let dt = if max_speed > 0.0 {
        dt_max.min(params.disp_cap() / max_speed)
    } else {
        dt_max
    };

    let mean_v = velocities.iter().copied().sum::<Vec2>() / velocities.len() as f64;
    let max_relative_drift = velocities
        .iter()
        .map(|&v| (v - mean_v).norm())
        .fold(0.0, f64::max);

    let agents = config
        .agents
        .iter()
        .zip(&velocities)
        .map(|(a, &v)| {
            let heading = match params.heading_rule {
                HeadingRule::Velocity => v
                    .normalized_or_none(HEADING_SPEED_THRESHOLD)
                    .unwrap_or(a.heading),
                HeadingRule::Fixed => a.heading,
            };
            AgentState {
                position: a.position + v * dt,
                heading,
                velocity: v,
            }
        })
        .collect();
    let next = Configuration {
        agents,
        time: config.time + dt,
    };
    next.check_non_degenerate()?;

    Ok(StepResult {
        config: next,
        dt_used: dt,
        max_speed,
        max_relative_drift,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationKind {
    SteadyState,
    MaxIterations,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationReason {
    pub kind: TerminationKind,
    pub iterations: u64,
    pub final_time: f64,
}

/// Centroid-relative view of the group at one step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: u64,
    pub t: f64,
    /// Lab-frame centroid.
    pub centroid: Vec2,
    /// Positions relative to `centroid`.
    pub positions: Vec<Vec2>,
    pub headings: Vec<Vec2>,
}

impl Snapshot {
    pub fn of(config: &Configuration, step: u64) -> Self {
        let c = config.centroid();
        Self {
            step,
            t: config.time,
            centroid: c,
            positions: config.positions().map(|p| p - c).collect(),
            headings: config.agents.iter().map(|a| a.heading).collect(),
        }
    }

    /// Rebuilds a (centroid-relative) configuration. Velocities are not
    /// stored and come back as zero.
    pub fn to_configuration(&self) -> Configuration {
        Configuration {
            agents: self
                .positions
                .iter()
                .zip(&self.headings)
                .map(|(&p, &h)| AgentState::with_heading(p, h))
                .collect(),
            time: self.t,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub params: ModelParams,
    pub seed: u64,
    pub snapshots: Vec<Snapshot>,
    pub termination: TerminationReason,
    /// Metrics of the terminal snapshot.
    pub final_metrics: MetricsReport,
    /// Lab-frame terminal state.
    pub final_config: Configuration,
}

impl RunRecord {
    pub fn validate(&self) -> Result<()> {
        let last = self
            .snapshots
            .last()
            .ok_or_else(|| Error::InvalidRecord("snapshot list is empty".into()))?;
        for s in &self.snapshots {
            if s.positions.len() != s.headings.len() {
                return Err(Error::InvalidRecord(format!(
                    "snapshot at step {} has {} positions and {} headings",
                    s.step,
                    s.positions.len(),
                    s.headings.len()
                )));
            }
        }
        if last.positions.len() < 2 {
            return Err(Error::InvalidRecord(
                "terminal snapshot has fewer than 2 agents".into(),
            ));
        }
        Ok(())
    }

    pub fn terminal_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Store every `snapshot_stride`-th step (plus the first and last).
    /// Zero stores only the first and last.
    pub snapshot_stride: u64,
    pub run_id: String,
    /// Extra alignment-index probe angles for the final report.
    pub ai_probes: Vec<f64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 0,
            run_id: "run".into(),
            ai_probes: Vec::new(),
        }
    }
}

/// Runs from `initial` until steady state or the iteration cap, with heading
/// noise drawn from `noise_rng(params.seed)`.
pub fn run(initial: &Configuration, params: &ModelParams) -> Result<RunRecord> {
    run_with(initial, params, &RunOptions::default())
}

pub fn run_with(
    initial: &Configuration,
    params: &ModelParams,
    opts: &RunOptions,
) -> Result<RunRecord> {
    params.validate()?;
    initial.validate()?;
    if initial.len() != params.n_agents {
        return Err(Error::InvalidParams(format!(
            "initial configuration has {} agents but N = {}",
            initial.len(),
            params.n_agents
        )));
    }
    let mut rng = noise_rng(params.seed);
    let mut config = initial.clone();
    let mut snapshots = vec![Snapshot::of(&config, 0)];
    let window = params.solver.steady_window;
    let mut calm = 0usize;
    let mut iterations = 0u64;

    let kind = loop {
        if calm >= window {
            break TerminationKind::SteadyState;
        }
        if iterations >= params.solver.max_iters {
            break TerminationKind::MaxIterations;
        }
        let res = step(&config, params, &mut rng)?;
        iterations += 1;
        config = res.config;
        if res.max_relative_drift < params.solver.eps_steady {
            calm += 1;
        } else {
            calm = 0;
        }
        if opts.snapshot_stride > 0 && iterations.is_multiple_of(opts.snapshot_stride) {
            snapshots.push(Snapshot::of(&config, iterations));
        }
    };
    if snapshots.last().map(|s| s.step) != Some(iterations) {
        snapshots.push(Snapshot::of(&config, iterations));
    }

    let terminal = snapshots.last().expect("non-empty").to_configuration();
    let final_metrics = MetricsReport::compute(&terminal, params, &opts.ai_probes)?;
    Ok(RunRecord {
        run_id: opts.run_id.clone(),
        params: params.clone(),
        seed: params.seed,
        termination: TerminationReason {
            kind,
            iterations,
            final_time: config.time,
        },
        snapshots,
        final_metrics,
        final_config: config,
    })
}
