//! Agents, sensitivity zones, topological neighbor selection and the
//! nondimensional attraction-repulsion velocity field.
//!
//! Each agent `i` is attracted linearly by the `n` closest agents inside its
//! frontal attraction cone and repelled with strength `xi^2 / d` by the `n`
//! closest agents inside its repulsion zone (frontal cone united with a disk
//! of radius `R_sr`). Cones are centred on the agent's heading; a cone of
//! width `alpha` spans `alpha / 2` on either side and includes its boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::vec2::Vec2;

/// Positions closer than this are treated as coincident.
pub const DEGENERACY_DISTANCE: f64 = 1e-12;

/// Relative slack on the cone boundary test, absorbing rounding in the
/// cosine comparison.
const CONE_BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: Vec2,
    /// Unit vector orienting the sensitivity zones.
    pub heading: Vec2,
    pub velocity: Vec2,
}

impl AgentState {
    pub fn at(position: Vec2) -> Self {
        Self {
            position,
            heading: Vec2::UNIT_X,
            velocity: Vec2::ZERO,
        }
    }

    pub fn with_heading(position: Vec2, heading: Vec2) -> Self {
        Self {
            position,
            heading,
            velocity: Vec2::ZERO,
        }
    }

    /// Signed angle in degrees from the heading to `other`, in `(-180, 180]`.
    pub fn bearing_to(&self, other: Vec2) -> f64 {
        let b = self
            .heading
            .signed_angle_to(other - self.position)
            .to_degrees();
        if b <= -180.0 {
            b + 360.0
        } else {
            b
        }
    }
}

/// Positions and headings of all agents at one instant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub agents: Vec<AgentState>,
    pub time: f64,
}

impl Configuration {
    pub fn new(agents: Vec<AgentState>) -> Self {
        Self { agents, time: 0.0 }
    }

    /// Agents at `positions`, all heading +x and at rest.
    pub fn from_positions(positions: impl IntoIterator<Item = Vec2>) -> Self {
        Self::new(positions.into_iter().map(AgentState::at).collect())
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = Vec2> + '_ {
        self.agents.iter().map(|a| a.position)
    }

    pub fn centroid(&self) -> Vec2 {
        if self.agents.is_empty() {
            return Vec2::ZERO;
        }
        self.positions().sum::<Vec2>() / self.agents.len() as f64
    }

    /// Errors with the first pair of agents closer than
    /// [`DEGENERACY_DISTANCE`].
    pub fn check_non_degenerate(&self) -> Result<()> {
        for (i, a) in self.agents.iter().enumerate() {
            for (j, b) in self.agents.iter().enumerate().skip(i + 1) {
                let d2 = (a.position - b.position).norm_squared();
                if d2 < DEGENERACY_DISTANCE * DEGENERACY_DISTANCE {
                    return Err(Error::degenerate(i, j, d2.sqrt()));
                }
            }
        }
        Ok(())
    }

    /// `N >= 2` and no coincident agents.
    pub fn validate(&self) -> Result<()> {
        if self.agents.len() < 2 {
            return Err(Error::TooFewAgents(self.agents.len()));
        }
        self.check_non_degenerate()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.agents.iter().enumerate() {
            for b in &self.agents[i + 1..] {
                best = best.min(a.position.distance(b.position));
            }
        }
        best
    }
}

fn offset_checked(focal: &AgentState, other: Vec2) -> Result<Vec2> {
    let offset = other - focal.position;
    let d = offset.norm();
    if d < DEGENERACY_DISTANCE {
        return Err(Error::Degenerate {
            pair: None,
            distance: d,
        });
    }
    Ok(offset)
}

/// Closed frontal cone of a given width, tested without trigonometry.
#[derive(Clone, Copy, Debug)]
struct Cone {
    full: bool,
    cos_half: f64,
}

impl Cone {
    fn new(width_deg: f64) -> Self {
        Self {
            full: width_deg >= 360.0,
            cos_half: (0.5 * width_deg).to_radians().cos(),
        }
    }

    /// `norm` must be `offset.norm()`.
    #[inline]
    fn contains(self, heading: Vec2, offset: Vec2, norm: f64) -> bool {
        self.full || heading.dot(offset) >= (self.cos_half - CONE_BOUNDARY_SLACK) * norm
    }
}

fn in_cone(heading: Vec2, offset: Vec2, width_deg: f64) -> bool {
    Cone::new(width_deg).contains(heading, offset, offset.norm())
}

/// True iff `other` lies in the closed frontal cone of width `alpha_a`.
pub fn in_attraction_zone(focal: &AgentState, other: Vec2, alpha_a: f64) -> Result<bool> {
    let offset = offset_checked(focal, other)?;
    Ok(in_cone(focal.heading, offset, alpha_a))
}

/// True iff `other` lies within `r_sr` of the focal agent or inside its
/// closed frontal cone of width `alpha_r`.
pub fn in_repulsion_zone(focal: &AgentState, other: Vec2, alpha_r: f64, r_sr: f64) -> Result<bool> {
    let offset = offset_checked(focal, other)?;
    Ok(offset.norm() <= r_sr || in_cone(focal.heading, offset, alpha_r))
}

/// Per-agent attraction and repulsion neighbor lists, nearest first.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSets {
    pub attract: Vec<Vec<usize>>,
    pub repel: Vec<Vec<usize>>,
}

/// Ordering among equidistant candidates.
#[derive(Clone, Debug, Default, PartialEq)]
pub enum TieBreak {
    /// Lower agent index wins among bit-equal distances.
    #[default]
    Index,
    /// `rank[j]` orders agent `j`; lower rank wins. Candidates whose
    /// distance lies within `rel_tol` (relative) of the nearest member of
    /// their group count as tied, so lattice ties survive rounding.
    Rank { rank: Vec<usize>, rel_tol: f64 },
}

/// Relative distance tolerance used by [`TieBreak::from_priority`].
pub const RANK_TIE_TOLERANCE: f64 = 1e-9;

impl TieBreak {
    /// Builds a rank table from a priority order (first entry wins ties).
    /// `order` must be a permutation of `0..N`.
    pub fn from_priority(order: &[usize]) -> Self {
        let mut rank = vec![0; order.len()];
        for (r, &agent) in order.iter().enumerate() {
            rank[agent] = r;
        }
        TieBreak::Rank {
            rank,
            rel_tol: RANK_TIE_TOLERANCE,
        }
    }

    #[inline]
    fn rank(&self, j: usize) -> usize {
        match self {
            TieBreak::Index => j,
            TieBreak::Rank { rank, .. } => rank[j],
        }
    }

    /// Sorts `(d2, j, offset)` candidates nearest first.
    fn order(&self, candidates: &mut [(f64, usize, Vec2)]) {
        candidates.sort_unstable_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(self.rank(a.1).cmp(&self.rank(b.1)))
        });
        let TieBreak::Rank { rel_tol, .. } = self else {
            return;
        };
        // Regroup near-equal distances, anchored at each group's nearest.
        let factor = (1.0 + rel_tol) * (1.0 + rel_tol);
        let mut start = 0;
        while start < candidates.len() {
            let limit = candidates[start].0 * factor;
            let end = start
                + candidates[start..]
                    .iter()
                    .take_while(|c| c.0 <= limit)
                    .count();
            candidates[start..end].sort_unstable_by_key(|c| self.rank(c.1));
            start = end;
        }
    }
}

/// Topological neighbor selection with the default index tie-break.
pub fn select_neighbors(config: &Configuration, params: &ModelParams) -> Result<NeighborSets> {
    select_neighbors_with(config, params, &TieBreak::Index)
}

/// For each agent, the `n` nearest members of each zone. Candidates are
/// ordered by squared distance, then by `tie`.
pub fn select_neighbors_with(
    config: &Configuration,
    params: &ModelParams,
    tie: &TieBreak,
) -> Result<NeighborSets> {
    let n = params.n_neighbors;
    let count = config.len();
    let mut sets = NeighborSets {
        attract: Vec::with_capacity(count),
        repel: Vec::with_capacity(count),
    };
    let r_sr_sq = params.r_sr * params.r_sr;
    let attract_cone = Cone::new(params.alpha_a);
    let repel_cone = Cone::new(params.alpha_r);
    let mut candidates: Vec<(f64, usize, Vec2)> = Vec::with_capacity(count);

    for (i, focal) in config.agents.iter().enumerate() {
        candidates.clear();
        for (j, other) in config.agents.iter().enumerate() {
            if j == i {
                continue;
            }
            let offset = other.position - focal.position;
            let d2 = offset.norm_squared();
            if d2 < DEGENERACY_DISTANCE * DEGENERACY_DISTANCE {
                return Err(Error::degenerate(i, j, d2.sqrt()));
            }
            candidates.push((d2, j, offset));
        }
        tie.order(&mut candidates);

        let mut attract = Vec::with_capacity(n);
        let mut repel = Vec::with_capacity(n);
        for &(d2, j, offset) in &candidates {
            let norm = d2.sqrt();
            if attract.len() < n && attract_cone.contains(focal.heading, offset, norm) {
                attract.push(j);
            }
            if repel.len() < n
                && (d2 <= r_sr_sq || repel_cone.contains(focal.heading, offset, norm))
            {
                repel.push(j);
            }
            if attract.len() == n && repel.len() == n {
                break;
            }
        }
        sets.attract.push(attract);
        sets.repel.push(repel);
    }
    Ok(sets)
}

/// Raw (uncapped, noise-free) velocities:
/// `v_i = sum_{j in attract_i} (x_j - x_i) - xi^2 sum_{j in repel_i} (x_j - x_i) / |x_j - x_i|^2`.
pub fn velocity_field(
    config: &Configuration,
    neighbors: &NeighborSets,
    params: &ModelParams,
) -> Result<Vec<Vec2>> {
    let xi_sq = params.xi * params.xi;
    let agents = &config.agents;
    let mut out = Vec::with_capacity(agents.len());
    for (i, focal) in agents.iter().enumerate() {
        let xi_pos = focal.position;
        let mut v = Vec2::ZERO;
        for &j in &neighbors.attract[i] {
            v += agents[j].position - xi_pos;
        }
        for &j in &neighbors.repel[i] {
            let offset = agents[j].position - xi_pos;
            let d2 = offset.norm_squared();
            if d2 < DEGENERACY_DISTANCE * DEGENERACY_DISTANCE {
                return Err(Error::degenerate(i, j, d2.sqrt()));
            }
            v -= offset * (xi_sq / d2);
        }
        out.push(v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn focal_x() -> AgentState {
        AgentState::at(Vec2::ZERO)
    }

    #[test]
    fn attraction_zone_examples() {
        let f = focal_x();
        assert!(in_attraction_zone(&f, Vec2::new(1.0, 0.0), 40.0).unwrap());
        assert!(in_attraction_zone(&f, Vec2::new(0.0, 1.0), 180.0).unwrap());
        assert!(!in_attraction_zone(&f, Vec2::new(0.0, 1.0), 179.9).unwrap());
        assert!(in_attraction_zone(&f, Vec2::new(-1.0, 0.0), 360.0).unwrap());
    }

    #[test]
    fn repulsion_zone_examples() {
        let f = focal_x();
        assert!(in_repulsion_zone(&f, Vec2::new(0.0, -0.5), 60.0, 1.0).unwrap());
        assert!(!in_repulsion_zone(&f, Vec2::new(0.0, -5.0), 60.0, 1.0).unwrap());
        let c = 30f64.to_radians();
        let boundary = Vec2::new(5.0 * c.cos(), -5.0 * c.sin());
        // independent check of the bearing: acos of the normalised dot product
        let direct = (boundary.x / boundary.norm()).acos().to_degrees();
        assert!((direct - 30.0).abs() < 1e-9);
        assert!(in_repulsion_zone(&f, boundary, 60.0, 1.0).unwrap());
        // just outside the boundary
        let outside = Vec2::from_angle(-(30.0f64 + 1e-6).to_radians()) * 5.0;
        assert!(!in_repulsion_zone(&f, outside, 60.0, 1.0).unwrap());
    }

    #[test]
    fn coincident_positions_are_degenerate() {
        let f = focal_x();
        assert!(matches!(
            in_attraction_zone(&f, Vec2::ZERO, 90.0),
            Err(Error::Degenerate { .. })
        ));
        assert!(matches!(
            in_repulsion_zone(&f, Vec2::new(1e-13, 0.0), 90.0, 1.0),
            Err(Error::Degenerate { .. })
        ));
        let cfg = Configuration::from_positions([Vec2::ZERO, Vec2::new(1.0, 0.0), Vec2::ZERO]);
        assert!(select_neighbors(&cfg, &ModelParams::isotropic(3, 1, 1.0)).is_err());
    }

    #[test]
    fn two_agents_see_each_other() {
        let cfg = Configuration::from_positions([Vec2::ZERO, Vec2::new(3.0, 1.0)]);
        let sets = select_neighbors(&cfg, &ModelParams::isotropic(2, 1, 1.0)).unwrap();
        assert_eq!(sets.attract, vec![vec![1], vec![0]]);
        assert_eq!(sets.repel, vec![vec![1], vec![0]]);
    }

    #[test]
    fn collinear_middle_agent_picks_nearer() {
        let cfg = Configuration::from_positions([0.0, 1.0, 3.0].map(|x| Vec2::new(x, 0.0)));
        let sets = select_neighbors(&cfg, &ModelParams::isotropic(3, 1, 1.0)).unwrap();
        assert_eq!(sets.attract[1], vec![0]);
        assert_eq!(sets.attract[0], vec![1]);
        assert_eq!(sets.attract[2], vec![1]);
    }

    #[test]
    fn equidistant_tie_goes_to_lower_index() {
        // agent 2 at the origin, agents 0 and 1 both at distance 2
        let cfg =
            Configuration::from_positions([Vec2::new(2.0, 0.0), Vec2::new(-2.0, 0.0), Vec2::ZERO]);
        let params = ModelParams::isotropic(3, 1, 1.0);
        let sets = select_neighbors(&cfg, &params).unwrap();
        assert_eq!(sets.attract[2], vec![0]);
        let flipped =
            select_neighbors_with(&cfg, &params, &TieBreak::from_priority(&[1, 0, 2])).unwrap();
        assert_eq!(flipped.attract[2], vec![1]);
    }

    #[test]
    fn velocity_vanishes_at_comfortable_distance() {
        let xi = 2.5;
        let cfg = Configuration::from_positions([Vec2::ZERO, Vec2::new(xi, 0.0)]);
        let params = ModelParams::isotropic(2, 1, xi);
        let sets = select_neighbors(&cfg, &params).unwrap();
        let v = velocity_field(&cfg, &sets, &params).unwrap();
        assert!(v[0].norm() < 1e-12 && v[1].norm() < 1e-12);
    }

    #[test]
    fn velocity_at_twice_comfortable_distance() {
        let xi = 3.0;
        let cfg = Configuration::from_positions([Vec2::ZERO, Vec2::new(2.0 * xi, 0.0)]);
        let params = ModelParams::isotropic(2, 1, xi);
        let sets = select_neighbors(&cfg, &params).unwrap();
        let v = velocity_field(&cfg, &sets, &params).unwrap();
        // attraction 2 xi minus repulsion xi^2 / (2 xi)
        assert!((v[0].x - 1.5 * xi).abs() < 1e-12 && v[0].y == 0.0);
        assert!((v[1].x + 1.5 * xi).abs() < 1e-12);
    }

    #[test]
    fn empty_neighbor_sets_give_zero_velocity() {
        let cfg = Configuration::from_positions([Vec2::ZERO, Vec2::new(5.0, 0.0)]);
        let sets = NeighborSets {
            attract: vec![vec![], vec![]],
            repel: vec![vec![], vec![]],
        };
        let v = velocity_field(&cfg, &sets, &ModelParams::isotropic(2, 1, 1.0)).unwrap();
        assert_eq!(v, vec![Vec2::ZERO, Vec2::ZERO]);
    }

    #[test]
    fn neighbor_relation_is_not_reciprocal() {
        // 0 -- 1 ---- 2: agent 2's nearest is 1, agent 1's nearest is 0
        let cfg = Configuration::from_positions([0.0, 1.0, 3.0].map(|x| Vec2::new(x, 0.0)));
        let sets = select_neighbors(&cfg, &ModelParams::isotropic(3, 1, 1.0)).unwrap();
        assert!(sets.attract[2].contains(&1));
        assert!(!sets.attract[1].contains(&2));
    }

    #[test]
    fn bearing_range() {
        let a = AgentState::at(Vec2::ZERO);
        assert_eq!(a.bearing_to(Vec2::new(-1.0, 0.0)), 180.0);
        assert_eq!(a.bearing_to(Vec2::new(-1.0, -0.0)), 180.0);
        assert!((a.bearing_to(Vec2::new(0.0, -1.0)) + 90.0).abs() < 1e-12);
    }

    #[test]
    fn frontal_cone_filters_candidates() {
        // agent 0 heading +x sees agent 2 ahead, agent 1 behind and closer
        let cfg =
            Configuration::from_positions([Vec2::ZERO, Vec2::new(-1.0, 0.0), Vec2::new(3.0, 0.0)]);
        let params = ModelParams {
            alpha_a: 180.0,
            alpha_r: 60.0,
            r_sr: 0.5,
            ..ModelParams::isotropic(3, 1, 1.0)
        };
        let sets = select_neighbors(&cfg, &params).unwrap();
        assert_eq!(sets.attract[0], vec![2]);
        assert_eq!(sets.repel[0], vec![2]);
        // agent 1 behind sees 0 first
        assert_eq!(sets.attract[1], vec![0]);
        // agent 2 looks forward into empty space
        assert!(sets.attract[2].is_empty() && sets.repel[2].is_empty());
    }
}
