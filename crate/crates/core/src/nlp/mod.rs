//! Local constrained nonlinear optimization with finite-difference
//! derivatives.
//!
//! Problems have the form
//!
//! ```text
//!     minimize    f(v)
//!     subject to  c_eq(v)   = 0
//!                 c_ineq(v) <= 0
//!                 lower <= v <= upper
//! ```
//!
//! and are solved by a line-search SQP method (damped BFGS Lagrangian
//! Hessian, L1 merit function with second-order correction). All
//! derivatives come from finite differences of the model.

mod fd;
mod qp;
mod sqp;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fd::fd_gradient;
pub use sqp::{solve_nlp, solve_nlp_warm};

pub type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("non-finite function value while differencing{}", match .component { Some(i) => format!(" component {i}"), None => " at the base point".to_string() })]
    NonFiniteGradient { component: Option<usize> },
    #[error("start point has length {got}, model dimension is {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid solver option: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    #[default]
    Forward,
    Central,
}

impl std::str::FromStr for FdScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Self::Forward),
            "central" => Ok(Self::Central),
            other => Err(format!("unknown finite-difference scheme `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    pub max_iters: usize,
    pub fd_step: f64,
    pub fd_scheme: FdScheme,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-6,
            opt_tol: 1e-6,
            max_iters: 200,
            fd_step: 1e-6,
            fd_scheme: FdScheme::Forward,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(SolverError::InvalidOptions(format!("{name} must be positive, got {v}")))
            }
        };
        positive("feas_tol", self.feas_tol)?;
        positive("opt_tol", self.opt_tol)?;
        positive("fd_step", self.fd_step)?;
        if self.max_iters == 0 {
            return Err(SolverError::InvalidOptions("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Function values of a model at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NlpValues {
    pub objective: f64,
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
}

impl NlpValues {
    pub(crate) fn zeros(n_eq: usize, n_ineq: usize) -> Self {
        Self {
            objective: 0.0,
            eq: vec![0.0; n_eq],
            ineq: vec![0.0; n_ineq],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.objective.is_finite()
            && self.eq.iter().all(|v| v.is_finite())
            && self.ineq.iter().all(|v| v.is_finite())
    }

    pub fn max_eq_violation(&self) -> f64 {
        self.eq.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn max_ineq_violation(&self) -> f64 {
        self.ineq.iter().fold(0.0, |a, &v| a.max(v))
    }

    pub fn max_violation(&self) -> f64 {
        self.max_eq_violation().max(self.max_ineq_violation())
    }

    pub(crate) fn l1_violation(&self) -> f64 {
        self.eq.iter().map(|v| v.abs()).sum::<f64>()
            + self.ineq.iter().map(|v| v.max(0.0)).sum::<f64>()
    }

    fn difference(&self, other: &NlpValues, step: f64) -> NlpValues {
        let d = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) / step).collect();
        NlpValues {
            objective: (self.objective - other.objective) / step,
            eq: d(&self.eq, &other.eq),
            ineq: d(&self.ineq, &other.ineq),
        }
    }
}

/// A box-bounded smooth problem the SQP solver can work on.
pub trait NlpModel {
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    fn num_eq(&self) -> usize;
    fn num_ineq(&self) -> usize;

    fn dim(&self) -> usize {
        self.lower().len()
    }

    /// Evaluates every function at `v`. `probe` is set for
    /// finite-difference probe points.
    fn evaluate(&self, v: &[f64], probe: bool) -> NlpValues;
}

/// A scalar subproblem assembled from independent closures.
pub struct NlpInstance {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub objective: ScalarFn,
    pub eq_constraints: Vec<ScalarFn>,
    pub ineq_constraints: Vec<ScalarFn>,
}

impl NlpInstance {
    pub fn new(
        lower: Vec<f64>,
        upper: Vec<f64>,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound vectors differ in length");
        assert!(!lower.is_empty(), "instance needs at least one variable");
        Self {
            lower,
            upper,
            objective: Box::new(objective),
            eq_constraints: Vec::new(),
            ineq_constraints: Vec::new(),
        }
    }

    /// Unbounded instance of dimension `dim`.
    pub fn unbounded(
        dim: usize,
        objective: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::new(vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim], objective)
    }

    /// Adds `c(v) = 0`.
    pub fn with_eq(mut self, c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.eq_constraints.push(Box::new(c));
        self
    }

    /// Adds `c(v) <= 0`.
    pub fn with_ineq(mut self, c: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.ineq_constraints.push(Box::new(c));
        self
    }
}

impl NlpModel for NlpInstance {
    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn num_eq(&self) -> usize {
        self.eq_constraints.len()
    }

    fn num_ineq(&self) -> usize {
        self.ineq_constraints.len()
    }

    fn evaluate(&self, v: &[f64], _probe: bool) -> NlpValues {
        NlpValues {
            objective: (self.objective)(v),
            eq: self.eq_constraints.iter().map(|c| c(v)).collect(),
            ineq: self.ineq_constraints.iter().map(|c| c(v)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NlpStatus {
    Converged,
    MaxIterations,
    Infeasible,
    NumericalFailure,
}

impl NlpStatus {
    pub fn label(self) -> &'static str {
        match self {
            NlpStatus::Converged => "converged",
            NlpStatus::MaxIterations => "max-iterations",
            NlpStatus::Infeasible => "infeasible",
            NlpStatus::NumericalFailure => "numerical-failure",
        }
    }
}

/// Solver state carried from one solve to the next on a related problem.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub hessian: DMatrix<f64>,
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct NlpResult {
    pub v_star: Vec<f64>,
    pub objective_value: f64,
    pub max_eq_violation: f64,
    pub max_ineq_violation: f64,
    pub status: NlpStatus,
    /// Model evaluations made by this solve, probes included.
    pub fe_used: usize,
    pub iterations: usize,
    pub warm: WarmStart,
}

impl NlpResult {
    pub fn converged(&self) -> bool {
        self.status == NlpStatus::Converged
    }
}
