//! Run and metric reports, serialized as flat JSON objects.

use homotopy_moo::driver::Front;
use homotopy_moo::metrics::{evenness, hypervolume, HvConvention, HypervolumeRequest};
use serde::{Deserialize, Serialize};

/// Front quality numbers shared by `run` and `metrics`, so both commands
/// agree bit for bit on the same front.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub evenness: Option<f64>,
    pub hypervolume: Option<f64>,
    pub hv_convention: String,
    /// `None` under the origin convention.
    pub hv_reference: Option<Vec<f64>>,
    pub notes: Vec<String>,
}

/// Reference point used when none is given: the componentwise maximum
/// pushed out by a tenth of the range (or 0.1 on a flat axis).
pub fn default_reference(points: &[Vec<f64>]) -> Vec<f64> {
    let k = points.first().map_or(0, Vec::len);
    (0..k)
        .map(|j| {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p[j]), hi.max(p[j])));
            let range = hi - lo;
            hi + 0.1 * if range > 0.0 { range } else { 1.0 }
        })
        .collect()
}

/// Evenness and hypervolume of `points` (raw objectives of the converged
/// samples). Metric failures become notes rather than errors.
pub fn measure(points: &[Vec<f64>], reference: Option<&[f64]>, convention: HvConvention) -> Measured {
    let mut notes = Vec::new();
    let evenness = match evenness(points) {
        Ok(r) => Some(r.e),
        Err(e) => {
            notes.push(format!("evenness unavailable: {e}"));
            None
        }
    };
    let hv_reference = match convention {
        HvConvention::ReferenceDominated => {
            Some(reference.map_or_else(|| default_reference(points), <[f64]>::to_vec))
        }
        HvConvention::OriginAttained => None,
    };
    let hypervolume = if points.is_empty() {
        notes.push("hypervolume unavailable: no converged samples".into());
        None
    } else {
        let req = HypervolumeRequest {
            front: points,
            reference: hv_reference.as_deref().unwrap_or(&[]),
            convention,
        };
        match hypervolume(&req) {
            Ok(v) => Some(v),
            Err(e) => {
                notes.push(format!("hypervolume unavailable: {e}"));
                None
            }
        }
    };
    Measured {
        evenness,
        hypervolume,
        hv_convention: convention.label().to_string(),
        hv_reference,
        notes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub problem: String,
    pub mode: String,
    pub points: usize,
    pub converged: usize,
    pub fe_total: u64,
    pub fe_per_point: f64,
    pub fe_anchors: u64,
    pub fe_sweeps: u64,
    pub fe_baseline: u64,
    pub fe_fd: u64,
    pub sweeps: usize,
    pub evenness: Option<f64>,
    pub hypervolume: Option<f64>,
    pub hv_convention: String,
    pub hv_reference: Option<Vec<f64>>,
    pub residual_max: Option<f64>,
    pub wall_time: f64,
    pub notes: Vec<String>,
}

impl RunReport {
    pub fn new(front: &Front, measured: Measured, wall_time: f64) -> Self {
        let phase = |name: &str| front.fe_per_phase.get(name).copied().unwrap_or(0);
        let points = front.len();
        let mut notes = front.notes.clone();
        notes.extend(measured.notes);
        Self {
            problem: front.problem.clone(),
            mode: front.mode.label().to_string(),
            points,
            converged: front.converged_count(),
            fe_total: front.fe_total,
            fe_per_point: if points == 0 { 0.0 } else { front.fe_total as f64 / points as f64 },
            fe_anchors: phase("anchors"),
            fe_sweeps: phase("sweeps"),
            fe_baseline: phase("baseline"),
            fe_fd: phase("fd"),
            sweeps: if front.mode.is_homotopy() { front.iterations_run } else { 0 },
            evenness: measured.evenness,
            hypervolume: measured.hypervolume,
            hv_convention: measured.hv_convention,
            hv_reference: measured.hv_reference,
            residual_max: front.equispacing_residual(),
            wall_time,
            notes,
        }
    }

    /// Human-readable summary, one `key: value` per line.
    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.6e}"));
        let mut s = format!(
            "problem:      {}\nmode:         {}\npoints:       {} ({} converged)\nsweeps:       {}\n\
             fe_total:     {} (anchors {}, sweeps {}, baseline {}, fd {})\nfe_per_point: {:.2}\n\
             evenness:     {}\nhypervolume:  {} ({})\nresidual_max: {}\nwall_time:    {:.3} s\n",
            self.problem,
            self.mode,
            self.points,
            self.converged,
            self.sweeps,
            self.fe_total,
            self.fe_anchors,
            self.fe_sweeps,
            self.fe_baseline,
            self.fe_fd,
            self.fe_per_point,
            opt(self.evenness),
            opt(self.hypervolume),
            self.hv_convention,
            opt(self.residual_max),
            self.wall_time,
        );
        for note in &self.notes {
            s.push_str(&format!("note:         {note}\n"));
        }
        s
    }
}

/// Output of the `metrics` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub points: usize,
    pub converged: usize,
    pub evenness: Option<f64>,
    pub hypervolume: Option<f64>,
    pub hv_convention: String,
    pub hv_reference: Option<Vec<f64>>,
    pub residual_max: Option<f64>,
    pub notes: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_reference_pads_the_range() {
        let r = default_reference(&[vec![0.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(r, vec![1.1, 2.1]);
    }

    #[test]
    fn origin_convention_has_no_reference() {
        let m = measure(&[vec![1.0, 1.0]], Some(&[5.0, 5.0]), HvConvention::OriginAttained);
        assert_eq!(m.hv_reference, None);
        assert_eq!(m.hypervolume, Some(1.0));
        assert!(m.evenness.is_none());
    }

    #[test]
    fn undominated_reference_becomes_a_note() {
        let m = measure(&[vec![2.0, 0.0]], Some(&[1.0, 1.0]), HvConvention::ReferenceDominated);
        assert_eq!(m.hypervolume, None);
        assert!(m.notes.iter().any(|n| n.contains("hypervolume")));
    }
}
