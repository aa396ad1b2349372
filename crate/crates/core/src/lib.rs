//! Anisotropic attraction-repulsion model of animal groups.
//!
//! Agents interact with their `n` nearest group mates inside frontal
//! sensitivity zones: linear attraction inside a cone of width `alpha_a`,
//! inverse-distance repulsion inside a cone of width `alpha_r` united with a
//! short-range disk. Depending on the cone widths and on `xi`, the balance
//! distance of a pair, the group settles into clusters, lines or Vees.
//!
//! - [`model`]: zones, topological neighbor selection, velocity field.
//! - [`integrator`]: adaptive Euler runs with capping, noise and
//!   steady-state detection.
//! - [`metrics`]: NND, elongation, nearest-neighbor bearings, alignment
//!   index, pattern labels.
//! - [`analysis`]: closest-neighbor sets, switching configurations,
//!   hexagonal lattices, equilibrium checks.
//! - [`harness`]: config files, parameter sweeps, persisted outputs.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod metrics;
pub mod model;
pub mod params;
pub mod vec2;

pub use error::{Error, Result};
pub use integrator::{random_initial, run, run_with, step, RunOptions, RunRecord, TerminationKind};
pub use model::{AgentState, Configuration, NeighborSets};
pub use params::{HeadingRule, ModelParams, Preset, SolverSettings};
pub use vec2::Vec2;
