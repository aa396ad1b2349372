//! Structural checks for the `n = 1`, isotropic regime: closest-neighbor
//! sets with multiplicity, switching-configuration detection, hexagonal
//! lattices, and the sufficient conditions for a Filippov equilibrium.
//!
//! A configuration in which every agent's closest neighbors all sit at
//! exactly `xi` is an equilibrium of the discontinuous flow even when some
//! agent has several equidistant closest neighbors (a switching
//! configuration): every selection of one closest neighbor per agent gives
//! zero velocity. In the plane at most six points fit on a circle of radius
//! `xi` with pairwise distances `>= xi`, so such agents have 1 to 6 closest
//! neighbors.
//!
//! Switching configurations also include ties among non-nearest distances.
//! For `n = 1` only nearest ties change the flow, so
//! [`is_switching_configuration`] tests that witness alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Configuration;
use crate::params::ModelParams;
use crate::vec2::Vec2;

/// Default tie tolerance for exact constructions (BL).
pub const EXACT_TIE_TOLERANCE: f64 = 1e-9;

/// Largest closest-set cardinality compatible with an equilibrium.
pub const MAX_EQUILIBRIUM_CARDINALITY: usize = 6;

/// Per-agent arg-min neighbor sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosestSet {
    pub members: Vec<Vec<usize>>,
    /// Distance to the nearest neighbor of each agent.
    pub min_distance: Vec<f64>,
}

impl ClosestSet {
    pub fn cardinality(&self, i: usize) -> usize {
        self.members[i].len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Indices `j != i` with `|x_i - x_j| <= min_k |x_i - x_k| + eps_tie`.
pub fn closest_sets(config: &Configuration, eps_tie: f64) -> Result<ClosestSet> {
    config.validate()?;
    let n = config.len();
    let mut members = Vec::with_capacity(n);
    let mut min_distance = Vec::with_capacity(n);
    let mut dist = vec![0.0; n];
    for (i, a) in config.agents.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, b) in config.agents.iter().enumerate() {
            dist[j] = if i == j {
                f64::INFINITY
            } else {
                a.position.distance(b.position)
            };
            best = best.min(dist[j]);
        }
        members.push(
            (0..n)
                .filter(|&j| j != i && dist[j] <= best + eps_tie)
                .collect(),
        );
        min_distance.push(best);
    }
    Ok(ClosestSet {
        members,
        min_distance,
    })
}

/// True iff some agent has more than one closest neighbor at `eps_tie`.
pub fn is_switching_configuration(config: &Configuration, eps_tie: f64) -> Result<bool> {
    Ok(closest_sets(config, eps_tie)?
        .members
        .iter()
        .any(|m| m.len() > 1))
}

/// Centered hexagonal lattice with `1 + 3 r (r + 1)` agents at
/// nearest-neighbor distance `spacing`, all heading +x. Agents are ordered
/// by ring, center first.
pub fn hex_lattice(rings: usize, spacing: f64) -> Configuration {
    let mut points = vec![Vec2::ZERO];
    let dirs: Vec<Vec2> = (0..6)
        .map(|k| Vec2::from_angle(k as f64 * std::f64::consts::FRAC_PI_3) * spacing)
        .collect();
    for r in 1..=rings {
        // walk the hexagonal ring of radius r starting from corner r * dirs[4]
        let mut p = dirs[4] * r as f64;
        for &step in &dirs {
            for _ in 0..r {
                points.push(p);
                p += step;
            }
        }
    }
    Configuration::from_positions(points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumVerdict {
    pub is_filippov_equilibrium: bool,
    /// Distance from each agent to its closest neighbor(s).
    pub per_agent_distances: Vec<f64>,
    pub per_agent_cardinality: Vec<usize>,
    pub max_cardinality: usize,
    /// Agents whose closest neighbors are not all at `xi`.
    pub violations: Vec<usize>,
    /// Set when the caller's parameters lie outside `n = 1`, isotropic.
    pub outside_scope: bool,
}

/// Checks that every closest neighbor of every agent sits within
/// `eps_dist` of `xi` and that no closest set exceeds six members.
pub fn verify_equilibrium(
    config: &Configuration,
    xi: f64,
    eps_dist: f64,
    eps_tie: f64,
) -> Result<EquilibriumVerdict> {
    if xi.is_nan() || xi <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "xi must be positive, got {xi}"
        )));
    }
    let sets = closest_sets(config, eps_tie)?;
    let mut violations = Vec::new();
    for (i, m) in sets.members.iter().enumerate() {
        let pi = config.agents[i].position;
        let ok = m
            .iter()
            .all(|&k| (pi.distance(config.agents[k].position) - xi).abs() <= eps_dist);
        if !ok {
            violations.push(i);
        }
    }
    let per_agent_cardinality = sets.cardinalities();
    let max_cardinality = per_agent_cardinality.iter().copied().max().unwrap_or(0);
    Ok(EquilibriumVerdict {
        is_filippov_equilibrium: violations.is_empty()
            && max_cardinality <= MAX_EQUILIBRIUM_CARDINALITY,
        per_agent_distances: sets.min_distance,
        per_agent_cardinality,
        max_cardinality,
        violations,
        outside_scope: false,
    })
}

/// [`verify_equilibrium`] taking `xi` from `params`, flagging the verdict
/// when `params` is not the `n = 1`, isotropic case.
pub fn verify_equilibrium_for(
    config: &Configuration,
    params: &ModelParams,
    eps_dist: f64,
    eps_tie: f64,
) -> Result<EquilibriumVerdict> {
    let mut verdict = verify_equilibrium(config, params.xi, eps_dist, eps_tie)?;
    verdict.outside_scope = !(params.n_neighbors == 1 && params.is_isotropic());
    Ok(verdict)
}
