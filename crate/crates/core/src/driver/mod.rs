//! Front construction: anchors, per-node scalarized subproblems and the
//! sweeps that iterate them, plus the serial marching and weighted-sum
//! baselines.

mod anchors;
mod baselines;
mod homotopy;
mod subproblem;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{AnsatzMesh, MeshError, NeighborRef};
use crate::metrics;
use crate::nlp::{NlpStatus, SolverError};
use crate::problem::{AnchorSet, ProblemError};

pub use anchors::compute_anchors;
pub use baselines::{march_biobjective, ws_scan};
pub use homotopy::{run_homotopy, HomotopyRun};
pub use subproblem::{assemble_subproblem, Subproblem};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DriverError {
    #[error("minimization of objective {objective} failed ({status})")]
    Anchor { objective: usize, status: &'static str },
    #[error("individual minimizers do not span objective axis {axis}")]
    DegenerateAnchors { axis: usize },
    #[error("no position supplied for neighbor {0}")]
    MissingNeighbor(NeighborRef),
    #[error("invalid run options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    #[default]
    Jacobi,
    GaussSeidel,
    SerialMarch,
    WsScan,
}

impl RunMode {
    pub fn label(self) -> &'static str {
        match self {
            RunMode::Jacobi => "jacobi",
            RunMode::GaussSeidel => "gauss-seidel",
            RunMode::SerialMarch => "serial-march",
            RunMode::WsScan => "ws-scan",
        }
    }

    pub fn is_homotopy(self) -> bool {
        matches!(self, RunMode::Jacobi | RunMode::GaussSeidel)
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jacobi" => Ok(Self::Jacobi),
            "gauss-seidel" => Ok(Self::GaussSeidel),
            "serial-march" => Ok(Self::SerialMarch),
            "ws-scan" => Ok(Self::WsScan),
            other => Err(format!(
                "unknown mode `{other}` (use jacobi, gauss-seidel, serial-march or ws-scan)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Lattice subdivision `m`.
    pub resolution: usize,
    pub max_sweeps: usize,
    /// Stop once no node moves farther than this (normalized space).
    pub move_tol: f64,
    pub mode: RunMode,
    /// Marching step.
    pub gamma: Option<f64>,
    /// Sample count for the baselines.
    pub points: Option<usize>,
    /// Unused: every run is deterministic.
    pub seed: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            resolution: 14,
            max_sweeps: 10,
            move_tol: 1e-4,
            mode: RunMode::Jacobi,
            gamma: None,
            points: None,
            seed: 0,
        }
    }
}

impl RunOptions {
    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |msg: String| Err(DriverError::InvalidOptions(msg));
        if !(self.move_tol > 0.0) {
            return bad(format!("move_tol must be positive, got {}", self.move_tol));
        }
        match self.mode {
            RunMode::Jacobi | RunMode::GaussSeidel => {
                if self.resolution == 0 {
                    return bad("resolution must be at least 1".into());
                }
                if self.max_sweeps == 0 {
                    return bad("max_sweeps must be at least 1".into());
                }
            }
            RunMode::SerialMarch => match self.gamma {
                Some(g) if g > 0.0 && g.is_finite() => {}
                Some(g) => return bad(format!("gamma must be positive, got {g}")),
                None => return bad("serial-march needs a step gamma".into()),
            },
            RunMode::WsScan => {
                if self.points.is_none_or(|p| p < 2) {
                    return bad("ws-scan needs at least 2 points".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleStatus {
    /// Simplex vertex fixed at an individual minimizer.
    Anchor,
    Converged,
    MaxIterations,
    Infeasible,
    NumericalFailure,
    /// Not solved yet.
    Pending,
}

impl SampleStatus {
    pub fn label(self) -> &'static str {
        match self {
            SampleStatus::Anchor => "anchor",
            SampleStatus::Converged => "converged",
            SampleStatus::MaxIterations => "max-iterations",
            SampleStatus::Infeasible => "infeasible",
            SampleStatus::NumericalFailure => "numerical-failure",
            SampleStatus::Pending => "pending",
        }
    }

    pub fn is_converged(self) -> bool {
        matches!(self, SampleStatus::Anchor | SampleStatus::Converged)
    }
}

impl From<NlpStatus> for SampleStatus {
    fn from(s: NlpStatus) -> Self {
        match s {
            NlpStatus::Converged => SampleStatus::Converged,
            NlpStatus::MaxIterations => SampleStatus::MaxIterations,
            NlpStatus::Infeasible => SampleStatus::Infeasible,
            NlpStatus::NumericalFailure => SampleStatus::NumericalFailure,
        }
    }
}

impl std::str::FromStr for SampleStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [
            SampleStatus::Anchor,
            SampleStatus::Converged,
            SampleStatus::MaxIterations,
            SampleStatus::Infeasible,
            SampleStatus::NumericalFailure,
            SampleStatus::Pending,
        ]
        .into_iter()
        .find(|st| st.label() == s)
        .ok_or_else(|| format!("unknown sample status `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: usize,
    /// Lattice multi-index (homotopy, weighted sum) or marching step.
    pub index: Vec<u32>,
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub fnorm: Vec<f64>,
    pub status: SampleStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub max_move: f64,
    pub converged: usize,
    pub fe_total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Front {
    pub problem: String,
    pub mode: RunMode,
    pub samples: Vec<Sample>,
    pub anchors: AnchorSet,
    /// Sweeps for the homotopy modes, subproblem solves otherwise.
    pub iterations_run: usize,
    pub fe_total: u64,
    pub fe_per_phase: BTreeMap<String, u64>,
    pub history: Vec<SweepRecord>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub mesh: Option<AnsatzMesh>,
}

impl Front {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn objectives(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.f.clone()).collect()
    }

    pub fn normalized(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.fnorm.clone()).collect()
    }

    pub fn converged_mask(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.status.is_converged()).collect()
    }

    pub fn converged_count(&self) -> usize {
        self.samples.iter().filter(|s| s.status.is_converged()).count()
    }

    /// Largest equispacing residual over converged non-vertex nodes, when
    /// the front came from a mesh.
    pub fn equispacing_residual(&self) -> Option<f64> {
        let mesh = self.mesh.as_ref()?;
        let counted: Vec<bool> = self
            .samples
            .iter()
            .map(|s| s.status == SampleStatus::Converged)
            .collect();
        Some(metrics::equispacing_residual(&self.normalized(), mesh, &counted))
    }
}
