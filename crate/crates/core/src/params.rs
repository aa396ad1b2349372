//! Model and solver parameters.
//!
//! Serialized names follow the model's symbols (`N`, `n`, `xi`, `alpha_a`,
//! `alpha_r`, `R_sr`, `v_max`, `L`, `alpha_noise`) so config files and run
//! records can be read side by side with the parameter table.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How an agent's heading (the axis of its sensitivity zones) evolves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingRule {
    /// Headings never change: zones stay oriented along the group's
    /// direction of travel (+x for generated initial states).
    #[default]
    Fixed,
    /// Heading follows the agent's own lab-frame velocity whenever the speed
    /// exceeds [`HEADING_SPEED_THRESHOLD`]; otherwise the previous heading is
    /// kept.
    Velocity,
}

/// Speeds at or below this (BL/TU) leave the heading untouched.
pub const HEADING_SPEED_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Largest allowed step (TU).
    pub dt_max: f64,
    /// Largest per-step displacement of any agent (BL). `None` means
    /// `0.2 * min(xi, R_sr)`.
    pub disp_cap: Option<f64>,
    /// Steady-state threshold on centroid-relative drift (BL/TU).
    pub eps_steady: f64,
    /// Consecutive steps below `eps_steady` required to stop.
    pub steady_window: usize,
    pub max_iters: u64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            dt_max: 0.05,
            disp_cap: None,
            eps_steady: 1e-3,
            steady_window: 10,
            max_iters: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelParams {
    #[serde(rename = "N")]
    pub n_agents: usize,
    /// Topological neighbor count.
    #[serde(rename = "n")]
    pub n_neighbors: usize,
    /// Comfortable distance, sqrt(F_r / F_a), in BL.
    pub xi: f64,
    /// Attraction cone width in degrees.
    pub alpha_a: f64,
    /// Repulsion cone width in degrees.
    pub alpha_r: f64,
    /// Short-range repulsion radius (BL).
    #[serde(rename = "R_sr")]
    pub r_sr: f64,
    pub v_max: f64,
    /// Edge of the square holding the initial positions (BL).
    #[serde(rename = "L")]
    pub domain: f64,
    /// Half-width of the uniform heading noise, degrees.
    pub alpha_noise: f64,
    /// Alignment index tolerance, degrees.
    pub eps_angle: f64,
    pub heading_rule: HeadingRule,
    pub solver: SolverSettings,
    pub seed: u64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n_agents: 30,
            n_neighbors: 1,
            xi: 10.0,
            alpha_a: 360.0,
            alpha_r: 360.0,
            r_sr: 1.0,
            v_max: 10.0,
            domain: 15.0,
            alpha_noise: 0.0,
            eps_angle: 3.0,
            heading_rule: HeadingRule::default(),
            solver: SolverSettings::default(),
            seed: 0,
        }
    }
}

/// Names accepted by [`ModelParams::set`] and by sweep axes.
pub const SWEEPABLE: &[&str] = &[
    "N",
    "n",
    "xi",
    "alpha_a",
    "alpha_r",
    "R_sr",
    "v_max",
    "L",
    "alpha_noise",
    "eps_angle",
    "dt_max",
    "disp_cap",
    "eps_steady",
    "steady_window",
    "max_iters",
];

impl ModelParams {
    /// Isotropic zones with `n` neighbors.
    pub fn isotropic(n_agents: usize, n_neighbors: usize, xi: f64) -> Self {
        Self {
            n_agents,
            n_neighbors,
            xi,
            ..Self::default()
        }
    }

    pub fn is_isotropic(&self) -> bool {
        self.alpha_a >= 360.0 && self.alpha_r >= 360.0
    }

    pub fn disp_cap(&self) -> f64 {
        self.solver
            .disp_cap
            .unwrap_or_else(|| 0.2 * self.xi.min(self.r_sr))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.n_agents < 2 {
            return bad(format!("N must be >= 2, got {}", self.n_agents));
        }
        if self.n_neighbors < 1 || self.n_neighbors > self.n_agents - 1 {
            return bad(format!(
                "n must lie in [1, N-1] = [1, {}], got {}",
                self.n_agents - 1,
                self.n_neighbors
            ));
        }
        for (name, value) in [
            ("xi", self.xi),
            ("R_sr", self.r_sr),
            ("v_max", self.v_max),
            ("L", self.domain),
            ("eps_angle", self.eps_angle),
            ("dt_max", self.solver.dt_max),
            ("eps_steady", self.solver.eps_steady),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {value}"));
            }
        }
        for (name, value) in [("alpha_a", self.alpha_a), ("alpha_r", self.alpha_r)] {
            if !(value > 0.0 && value <= 360.0) {
                return bad(format!("{name} must lie in (0, 360], got {value}"));
            }
        }
        if !(0.0..=360.0).contains(&self.alpha_noise) {
            return bad(format!(
                "alpha_noise must lie in [0, 360], got {}",
                self.alpha_noise
            ));
        }
        if let Some(cap) = self.solver.disp_cap {
            if !(cap > 0.0 && cap.is_finite()) {
                return bad(format!("disp_cap must be positive and finite, got {cap}"));
            }
        }
        if self.solver.steady_window == 0 {
            return bad("steady_window must be >= 1".into());
        }
        Ok(())
    }

    /// Sets a parameter by its symbol name. Integer-valued parameters reject
    /// non-integral values.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |v: f64| -> Result<u64> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as u64)
            } else {
                Err(Error::Config(format!(
                    "{name} needs a non-negative integer, got {v}"
                )))
            }
        };
        match name {
            "N" => self.n_agents = as_count(value)? as usize,
            "n" => self.n_neighbors = as_count(value)? as usize,
            "xi" => self.xi = value,
            "alpha_a" => self.alpha_a = value,
            "alpha_r" => self.alpha_r = value,
            "R_sr" => self.r_sr = value,
            "v_max" => self.v_max = value,
            "L" => self.domain = value,
            "alpha_noise" => self.alpha_noise = value,
            "eps_angle" => self.eps_angle = value,
            "dt_max" => self.solver.dt_max = value,
            "disp_cap" => self.solver.disp_cap = Some(value),
            "eps_steady" => self.solver.eps_steady = value,
            "steady_window" => self.solver.steady_window = as_count(value)? as usize,
            "max_iters" => self.solver.max_iters = as_count(value)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown parameter `{other}` (expected one of {})",
                    SWEEPABLE.join(", ")
                )))
            }
        }
        Ok(())
    }
}

/// Named parameter sets for the three reference patterns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Crystal-like cluster: isotropic, n = 1, xi = 10, N = 60.
    Cluster,
    /// Line: alpha_r = 40, alpha_a = 180, n = 7, xi = 10, N = 30.
    Line,
    /// Vee: alpha_r = 60, alpha_a = 360, n = 7, xi = 13, v_max = 10, N = 30.
    Vee,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Cluster, Preset::Line, Preset::Vee];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Cluster => "cluster",
            Preset::Line => "line",
            Preset::Vee => "vee",
        }
    }

    pub fn params(self) -> ModelParams {
        let base = ModelParams::default();
        match self {
            Preset::Cluster => ModelParams {
                n_agents: 60,
                n_neighbors: 1,
                xi: 10.0,
                alpha_a: 360.0,
                alpha_r: 360.0,
                ..base
            },
            Preset::Line => ModelParams {
                n_agents: 30,
                n_neighbors: 7,
                xi: 10.0,
                alpha_a: 180.0,
                alpha_r: 40.0,
                ..base
            },
            Preset::Vee => ModelParams {
                n_agents: 30,
                n_neighbors: 7,
                xi: 13.0,
                alpha_a: 360.0,
                alpha_r: 60.0,
                v_max: 10.0,
                ..base
            },
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown preset `{s}` (cluster, line, vee)")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelParams::default().validate().unwrap();
        for p in Preset::ALL {
            p.params().validate().unwrap();
        }
    }

    #[test]
    fn rejects_out_of_range() {
        let base = ModelParams::default();
        for p in [
            ModelParams {
                n_agents: 1,
                ..base.clone()
            },
            ModelParams {
                n_neighbors: base.n_agents,
                ..base.clone()
            },
            ModelParams {
                alpha_r: 0.0,
                ..base.clone()
            },
            ModelParams {
                alpha_noise: -1.0,
                ..base.clone()
            },
            ModelParams {
                xi: f64::NAN,
                ..base.clone()
            },
        ] {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn default_disp_cap_uses_smaller_length() {
        let p = ModelParams::isotropic(10, 1, 5.0);
        assert!((p.disp_cap() - 0.2).abs() < 1e-15);
        let p = ModelParams {
            r_sr: 10.0,
            ..ModelParams::isotropic(10, 1, 0.5)
        };
        assert!((p.disp_cap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn set_by_symbol() {
        let mut p = ModelParams::default();
        p.set("xi", 4.0).unwrap();
        p.set("N", 12.0).unwrap();
        assert_eq!(p.xi, 4.0);
        assert_eq!(p.n_agents, 12);
        assert!(p.set("N", 2.5).is_err());
        assert!(p.set("bogus", 1.0).is_err());
    }

    #[test]
    fn preset_parameter_sets() {
        let c = Preset::Cluster.params();
        assert_eq!((c.n_agents, c.n_neighbors, c.xi), (60, 1, 10.0));
        assert!(c.is_isotropic());
        let l = Preset::Line.params();
        assert_eq!(
            (l.alpha_r, l.alpha_a, l.n_neighbors, l.xi, l.n_agents),
            (40.0, 180.0, 7, 10.0, 30)
        );
        let v = Preset::Vee.params();
        assert_eq!(
            (
                v.alpha_r,
                v.alpha_a,
                v.n_neighbors,
                v.xi,
                v.v_max,
                v.n_agents
            ),
            (60.0, 360.0, 7, 13.0, 10.0, 30)
        );
    }
}
