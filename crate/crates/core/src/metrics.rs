//! Group-structure observables: nearest-neighbor distance, oriented
//! elongation, nearest-neighbor bearings and the alignment index.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::Configuration;
use crate::params::ModelParams;
use crate::vec2::Vec2;

/// Mean-heading norms below this fall back to +x.
const MEAN_HEADING_FLOOR: f64 = 1e-9;

/// Nearest neighbor of each agent (lowest index among ties) and its distance.
pub fn nearest_neighbors(config: &Configuration) -> Result<Vec<(usize, f64)>> {
    let n = config.len();
    if n < 2 {
        return Err(Error::TooFewAgents(n));
    }
    let mut out = Vec::with_capacity(n);
    for (i, a) in config.agents.iter().enumerate() {
        let mut best = (usize::MAX, f64::INFINITY);
        for (j, b) in config.agents.iter().enumerate() {
            if j == i {
                continue;
            }
            let d = a.position.distance(b.position);
            if d < best.1 {
                best = (j, d);
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Mean and population variance of the per-agent nearest-neighbor distance.
pub fn nnd(config: &Configuration) -> Result<(f64, f64)> {
    let nn = nearest_neighbors(config)?;
    let count = nn.len() as f64;
    let mean = nn.iter().map(|&(_, d)| d).sum::<f64>() / count;
    let var = nn.iter().map(|&(_, d)| (d - mean).powi(2)).sum::<f64>() / count;
    Ok((mean, var))
}

/// Normalised mean heading, or +x when the headings cancel out.
pub fn mean_heading(config: &Configuration) -> Vec2 {
    config
        .agents
        .iter()
        .map(|a| a.heading)
        .sum::<Vec2>()
        .normalized_or_none(MEAN_HEADING_FLOOR * config.len().max(1) as f64)
        .unwrap_or(Vec2::UNIT_X)
}

/// Transverse over longitudinal extent of the bounding rectangle aligned
/// with the mean heading. Zero longitudinal extent yields `f64::INFINITY`.
pub fn elongation(config: &Configuration) -> f64 {
    let u = mean_heading(config);
    let w = u.perp();
    let (mut lo_u, mut hi_u) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lo_w, mut hi_w) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in config.positions() {
        let (a, b) = (p.dot(u), p.dot(w));
        lo_u = lo_u.min(a);
        hi_u = hi_u.max(a);
        lo_w = lo_w.min(b);
        hi_w = hi_w.max(b);
    }
    let along = hi_u - lo_u;
    let across = hi_w - lo_w;
    if along > 0.0 {
        across / along
    } else {
        f64::INFINITY
    }
}

/// Signed bearing (degrees, `(-180, 180]`) of each agent's nearest neighbor
/// relative to that agent's own heading.
pub fn nn_bearings(config: &Configuration) -> Result<Vec<f64>> {
    let nn = nearest_neighbors(config)?;
    Ok(config
        .agents
        .iter()
        .zip(&nn)
        .map(|(a, &(j, _))| a.bearing_to(config.agents[j].position))
        .collect())
}

/// Counts over `(-180, 180]` in bins of `bin_width` degrees. Bin `k` covers
/// `(-180 + k w, -180 + (k + 1) w]`; the last bin is clipped at 180.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub bin_width: f64,
    pub counts: Vec<u64>,
}

impl AngleHistogram {
    pub fn new(bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width <= 360.0) {
            return Err(Error::InvalidParams(format!(
                "bin width must lie in (0, 360], got {bin_width}"
            )));
        }
        let bins = (360.0 / bin_width).ceil() as usize;
        Ok(Self {
            bin_width,
            counts: vec![0; bins],
        })
    }

    pub fn bin_of(&self, bearing: f64) -> usize {
        let k = ((bearing + 180.0) / self.bin_width).ceil() as isize - 1;
        k.clamp(0, self.counts.len() as isize - 1) as usize
    }

    pub fn add(&mut self, bearing: f64) {
        let k = self.bin_of(bearing);
        self.counts[k] += 1;
    }

    /// Merges counts from a histogram with the same binning.
    pub fn merge(&mut self, other: &AngleHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(lower, upper]` edges of bin `k`.
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let lo = -180.0 + k as f64 * self.bin_width;
        (lo, (lo + self.bin_width).min(180.0))
    }
}

pub fn nn_angle_histogram(config: &Configuration, bin_width: f64) -> Result<AngleHistogram> {
    let mut h = AngleHistogram::new(bin_width)?;
    for b in nn_bearings(config)? {
        h.add(b);
    }
    Ok(h)
}

/// Percentage of `bearings` whose absolute value lies within `eps_angle` of
/// `theta`.
pub fn alignment_index_of(bearings: &[f64], theta: f64, eps_angle: f64) -> f64 {
    if bearings.is_empty() {
        return 0.0;
    }
    let hits = bearings
        .iter()
        .filter(|b| (b.abs() - theta).abs() <= eps_angle)
        .count();
    100.0 * hits as f64 / bearings.len() as f64
}

/// Percentage of agents whose nearest neighbor sits at absolute bearing
/// `theta` (degrees) up to `eps_angle`.
pub fn alignment_index(config: &Configuration, theta: f64, eps_angle: f64) -> Result<f64> {
    if eps_angle.is_nan() || eps_angle <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "eps_angle must be positive, got {eps_angle}"
        )));
    }
    Ok(alignment_index_of(&nn_bearings(config)?, theta, eps_angle))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AiValue {
    pub theta: f64,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub nnd_mean: f64,
    pub nnd_variance: f64,
    /// `INFINITY` (serialized as `null`) when the longitudinal extent is zero.
    #[serde(serialize_with = "ser_ratio", deserialize_with = "de_ratio")]
    pub elongation: f64,
    pub angle_histogram: AngleHistogram,
    pub ai_values: Vec<AiValue>,
}

fn ser_ratio<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_ratio<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

/// Bin width used by [`MetricsReport::compute`].
pub const DEFAULT_BIN_WIDTH: f64 = 10.0;

impl MetricsReport {
    /// Computes every metric. AI is probed at 30 degrees, at `alpha_r / 2`,
    /// and at each angle in `extra_probes`.
    pub fn compute(
        config: &Configuration,
        params: &ModelParams,
        extra_probes: &[f64],
    ) -> Result<Self> {
        let (nnd_mean, nnd_variance) = nnd(config)?;
        let bearings = nn_bearings(config)?;
        let mut angle_histogram = AngleHistogram::new(DEFAULT_BIN_WIDTH)?;
        for &b in &bearings {
            angle_histogram.add(b);
        }
        let mut probes = vec![30.0, 0.5 * params.alpha_r];
        probes.extend_from_slice(extra_probes);
        let mut ai_values: Vec<AiValue> = Vec::new();
        for theta in probes {
            if ai_values.iter().any(|v| v.theta == theta) {
                continue;
            }
            ai_values.push(AiValue {
                theta,
                percent: alignment_index_of(&bearings, theta, params.eps_angle),
            });
        }
        Ok(Self {
            nnd_mean,
            nnd_variance,
            elongation: elongation(config),
            angle_histogram,
            ai_values,
        })
    }

    pub fn ai(&self, theta: f64) -> Option<f64> {
        self.ai_values
            .iter()
            .find(|v| (v.theta - theta).abs() < 1e-9)
            .map(|v| v.percent)
    }

    /// Scalar metrics as `(key, value)` pairs with fixed key names; AI probes
    /// appear as `ai_<theta>`.
    pub fn flat(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("nnd_mean".to_string(), self.nnd_mean),
            ("nnd_variance".to_string(), self.nnd_variance),
            ("elongation".to_string(), self.elongation),
        ];
        out.extend(
            self.ai_values
                .iter()
                .map(|v| (format!("ai_{}", v.theta), v.percent)),
        );
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Cluster,
    Line,
    Vee,
    Other,
}

impl std::fmt::Display for Pattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pattern::Cluster => "cluster",
            Pattern::Line => "line",
            Pattern::Vee => "vee",
            Pattern::Other => "other",
        })
    }
}

/// Operational thresholds for [`classify_pattern`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternThresholds {
    /// Elongation below this is a line.
    pub line_max_elongation: f64,
    /// AI(alpha_r / 2) above this (percent) is a Vee.
    pub vee_min_ai: f64,
    pub cluster_elongation: (f64, f64),
}

impl Default for PatternThresholds {
    fn default() -> Self {
        Self {
            line_max_elongation: 0.3,
            vee_min_ai: 25.0,
            cluster_elongation: (0.5, 2.0),
        }
    }
}

pub fn classify_pattern(report: &MetricsReport, params: &ModelParams) -> Pattern {
    classify_pattern_with(report, params, &PatternThresholds::default())
}

pub fn classify_pattern_with(
    report: &MetricsReport,
    params: &ModelParams,
    th: &PatternThresholds,
) -> Pattern {
    let ai = report.ai(0.5 * params.alpha_r).unwrap_or(0.0);
    let e = report.elongation;
    if e < th.line_max_elongation {
        Pattern::Line
    } else if ai > th.vee_min_ai {
        Pattern::Vee
    } else if (th.cluster_elongation.0..=th.cluster_elongation.1).contains(&e) {
        Pattern::Cluster
    } else {
        Pattern::Other
    }
}
