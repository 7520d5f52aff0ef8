//! Front quality indicators: hypervolume, evenness and the equispacing
//! residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::AnsatzMesh;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point {point} exceeds the reference point on axis {axis}")]
    NotDominatedByReference { point: usize, axis: usize },
    #[error("point {point} has a negative coordinate on axis {axis}; the origin convention needs non-negative points")]
    NegativeCoordinate { point: usize, axis: usize },
    #[error("point {point} has {got} coordinates, expected {expected}")]
    DimensionMismatch { point: usize, expected: usize, got: usize },
    #[error("evenness needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("all pairwise distances are zero")]
    ZeroMeanDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HvConvention {
    /// Union of the boxes `[p, reference]`.
    #[default]
    ReferenceDominated,
    /// Union of the boxes `[0, p]`.
    OriginAttained,
}

impl HvConvention {
    pub fn label(self) -> &'static str {
        match self {
            HvConvention::ReferenceDominated => "reference",
            HvConvention::OriginAttained => "origin",
        }
    }
}

impl std::str::FromStr for HvConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "reference" | "reference-dominated" => Ok(Self::ReferenceDominated),
            "origin" | "origin-attained" => Ok(Self::OriginAttained),
            other => Err(format!("unknown hypervolume convention `{other}` (use reference or origin)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypervolumeRequest<'a> {
    pub front: &'a [Vec<f64>],
    /// Ignored for the origin convention.
    pub reference: &'a [f64],
    pub convention: HvConvention,
}

/// Boxes `[lo_i, hi]` sharing the upper corner `hi`, after validation.
fn as_dominated_boxes(req: &HypervolumeRequest<'_>) -> Result<(Vec<Vec<f64>>, Vec<f64>), MetricError> {
    let k = match req.convention {
        HvConvention::ReferenceDominated => req.reference.len(),
        HvConvention::OriginAttained => req.front.first().map_or(0, Vec::len),
    };
    for (i, p) in req.front.iter().enumerate() {
        if p.len() != k {
            return Err(MetricError::DimensionMismatch {
                point: i,
                expected: k,
                got: p.len(),
            });
        }
    }
    match req.convention {
        HvConvention::ReferenceDominated => {
            for (i, p) in req.front.iter().enumerate() {
                if let Some(axis) = (0..k).find(|&j| p[j] > req.reference[j]) {
                    return Err(MetricError::NotDominatedByReference { point: i, axis });
                }
            }
            Ok((req.front.to_vec(), req.reference.to_vec()))
        }
        HvConvention::OriginAttained => {
            for (i, p) in req.front.iter().enumerate() {
                if let Some(axis) = (0..k).find(|&j| p[j] < 0.0) {
                    return Err(MetricError::NegativeCoordinate { point: i, axis });
                }
            }
            // [0, p] is the mirror image of [-p, 0].
            let mirrored = req.front.iter().map(|p| p.iter().map(|v| -v).collect()).collect();
            Ok((mirrored, vec![0.0; k]))
        }
    }
}

/// Exact volume of the union of boxes by slicing along the last axis.
pub fn hypervolume(req: &HypervolumeRequest<'_>) -> Result<f64, MetricError> {
    let (points, upper) = as_dominated_boxes(req)?;
    if points.is_empty() {
        return Ok(0.0);
    }
    let points = nondominated(points);
    Ok(union_volume(&points, &upper))
}

fn nondominated(mut points: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    points.dedup();
    let dominated = |p: &Vec<f64>, q: &Vec<f64>| p != q && q.iter().zip(p).all(|(a, b)| a <= b);
    let keep: Vec<bool> = points
        .iter()
        .map(|p| !points.iter().any(|q| dominated(p, q)))
        .collect();
    points.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

fn union_volume(points: &[Vec<f64>], upper: &[f64]) -> f64 {
    let k = upper.len();
    if points.is_empty() {
        return 0.0;
    }
    if k == 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        return (upper[0] - lo).max(0.0);
    }
    let last = k - 1;
    let mut order: Vec<&Vec<f64>> = points.iter().collect();
    order.sort_by(|a, b| a[last].total_cmp(&b[last]));
    let mut volume = 0.0;
    let mut active: Vec<Vec<f64>> = Vec::with_capacity(order.len());
    for (i, p) in order.iter().enumerate() {
        active.push(p[..last].to_vec());
        let top = order.get(i + 1).map_or(upper[last], |q| q[last]);
        let height = top - p[last];
        if height > 0.0 {
            let reduced = nondominated(active.clone());
            volume += height * union_volume(&reduced, &upper[..last]);
            active = reduced;
        }
    }
    volume
}

/// Monte-Carlo estimate: uniform samples in the bounding box of the boxes.
pub fn mc_hypervolume_oracle(req: &HypervolumeRequest<'_>, samples: usize, seed: u64) -> Result<f64, MetricError> {
    let (points, upper) = as_dominated_boxes(req)?;
    if points.is_empty() || samples == 0 {
        return Ok(0.0);
    }
    let k = upper.len();
    let lower: Vec<f64> = (0..k)
        .map(|j| points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
        .collect();
    let box_volume: f64 = lower.iter().zip(&upper).map(|(l, u)| u - l).product();
    if box_volume <= 0.0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = vec![0.0; k];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..k {
            s[j] = lower[j] + rng.random::<f64>() * (upper[j] - lower[j]);
        }
        if points.iter().any(|p| p.iter().zip(&s).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples as f64 * box_volume)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvennessReport {
    #[serde(rename = "E")]
    pub e: f64,
    pub d_lower: Vec<f64>,
    pub d_upper: Vec<f64>,
    pub sigma: f64,
    pub mean: f64,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// True when no third point lies strictly inside the ball with diameter
/// `(a, b)`.
fn gabriel_pair(points: &[Vec<f64>], i: usize, j: usize) -> bool {
    let (a, b) = (&points[i], &points[j]);
    let scale = dist2(a, b);
    points.iter().enumerate().all(|(l, p)| {
        if l == i || l == j {
            return true;
        }
        // p is inside the diametral ball iff (p - a).(p - b) < 0.
        let dot: f64 = p.iter().zip(a).zip(b).map(|((pv, av), bv)| (pv - av) * (pv - bv)).sum();
        dot >= -1e-12 * scale
    })
}

/// Evenness `E = sigma_d / mean_d` over nearest-neighbor distances and the
/// longest Gabriel edge of every point.
pub fn evenness(front: &[Vec<f64>]) -> Result<EvennessReport, MetricError> {
    let p = front.len();
    if p < 3 {
        return Err(MetricError::TooFewPoints(p));
    }
    let k = front[0].len();
    if let Some(i) = front.iter().position(|q| q.len() != k) {
        return Err(MetricError::DimensionMismatch {
            point: i,
            expected: k,
            got: front[i].len(),
        });
    }
    let mut d_lower = vec![f64::INFINITY; p];
    let mut d_upper = vec![0.0f64; p];
    for i in 0..p {
        for j in i + 1..p {
            let d = dist2(&front[i], &front[j]).sqrt();
            d_lower[i] = d_lower[i].min(d);
            d_lower[j] = d_lower[j].min(d);
            if (d > d_upper[i] || d > d_upper[j]) && gabriel_pair(front, i, j) {
                d_upper[i] = d_upper[i].max(d);
                d_upper[j] = d_upper[j].max(d);
            }
        }
    }
    let pooled: Vec<f64> = d_lower.iter().chain(&d_upper).copied().collect();
    let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
    if mean <= 0.0 {
        return Err(MetricError::ZeroMeanDistance);
    }
    let sigma = (pooled.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / pooled.len() as f64).sqrt();
    Ok(EvennessReport {
        e: sigma / mean,
        d_lower,
        d_upper,
        sigma,
        mean,
    })
}

/// Largest `| |F_p - F_l|^2 - |F_p - F_r|^2 |` over the pairs of the nodes
/// selected by `counted`. `positions[id]` is the normalized objective vector
/// of node `id`; anchor references resolve to their vertex nodes.
pub fn equispacing_residual(positions: &[Vec<f64>], mesh: &AnsatzMesh, counted: &[bool]) -> f64 {
    mesh.nodes
        .iter()
        .filter(|node| counted.get(node.id).copied().unwrap_or(false))
        .flat_map(|node| {
            node.adjacency.iter().map(move |pair| {
                let here = &positions[node.id];
                let left = &positions[mesh.resolve(pair.left)];
                let right = &positions[mesh.resolve(pair.right)];
                (dist2(here, left) - dist2(here, right)).abs()
            })
        })
        .fold(0.0, f64::max)
}
