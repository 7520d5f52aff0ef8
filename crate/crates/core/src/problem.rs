//! Multi-objective problem definitions, the built-in benchmark set, objective
//! normalization and function-evaluation accounting.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vector-valued evaluator `x -> R^len`.
pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Names accepted by [`builtin_problem`].
pub const BUILTIN_PROBLEMS: [&str; 4] = ["motta1", "motta2", "dtlz2", "biobj-convex"];

/// Points closer than this to a bound (relative) are clamped instead of rejected.
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{name}` (valid: {})", BUILTIN_PROBLEMS.join(", "))]
    UnknownProblem { name: String },
    #[error("invalid problem definition: {0}")]
    InvalidDefinition(String),
    #[error("objective {index} is not finite at x = {x:?}")]
    NonFinite { x: Vec<f64>, index: usize },
    #[error("variable {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },
    #[error("objective axis {axis} is degenerate (nadir equals utopia)")]
    DegenerateAxis { axis: usize },
}

/// A vector minimization problem with inequality (`g <= 0`) and equality
/// (`h = 0`) constraints over a box.
#[derive(Clone)]
pub struct MooProblem {
    name: String,
    num_objectives: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    objectives: VectorFn,
    num_inequalities: usize,
    inequalities: Option<VectorFn>,
    num_equalities: usize,
    equalities: Option<VectorFn>,
}

impl fmt::Debug for MooProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MooProblem")
            .field("name", &self.name)
            .field("k", &self.num_objectives)
            .field("n", &self.lower.len())
            .field("m", &self.num_inequalities)
            .field("e", &self.num_equalities)
            .finish()
    }
}

impl MooProblem {
    pub fn new(
        name: impl Into<String>,
        num_objectives: usize,
        lower: Vec<f64>,
        upper: Vec<f64>,
        objectives: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self, ProblemError> {
        if num_objectives < 2 {
            return Err(ProblemError::InvalidDefinition(format!(
                "need at least two objectives, got {num_objectives}"
            )));
        }
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(ProblemError::InvalidDefinition(format!(
                "bounds must be non-empty and of equal length ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(ProblemError::InvalidDefinition(format!(
                "bound {i} has lower {} > upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self {
            name: name.into(),
            num_objectives,
            lower,
            upper,
            objectives: Arc::new(objectives),
            num_inequalities: 0,
            inequalities: None,
            num_equalities: 0,
            equalities: None,
        })
    }

    pub fn with_inequalities(
        mut self,
        count: usize,
        g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.num_inequalities = count;
        self.inequalities = (count > 0).then(|| Arc::new(g) as VectorFn);
        self
    }

    pub fn with_equalities(
        mut self,
        count: usize,
        h: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        self.num_equalities = count;
        self.equalities = (count > 0).then(|| Arc::new(h) as VectorFn);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Objective count `k`.
    pub fn k(&self) -> usize {
        self.num_objectives
    }

    /// Design-variable count `n`.
    pub fn n(&self) -> usize {
        self.lower.len()
    }

    /// Inequality-constraint count `m`.
    pub fn m(&self) -> usize {
        self.num_inequalities
    }

    /// Equality-constraint count `e`.
    pub fn e(&self) -> usize {
        self.num_equalities
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Raw objective evaluation. Does not touch any counter; use
    /// [`evaluate_counted`] for accounted evaluations.
    pub fn objectives(&self, x: &[f64]) -> Vec<f64> {
        (self.objectives)(x)
    }

    pub fn inequalities(&self, x: &[f64]) -> Vec<f64> {
        match &self.inequalities {
            Some(g) => g(x),
            None => Vec::new(),
        }
    }

    pub fn equalities(&self, x: &[f64]) -> Vec<f64> {
        match &self.equalities {
            Some(h) => h(x),
            None => Vec::new(),
        }
    }

    /// Largest constraint violation at `x`, bounds included.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let g = self.inequalities(x).into_iter().fold(0.0_f64, |a, v| a.max(v));
        let h = self.equalities(x).into_iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let b = x
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .fold(0.0_f64, |a, (&xi, (&l, &u))| a.max(l - xi).max(xi - u));
        g.max(h).max(b)
    }

    /// Clamps `x` into the box when it lies outside by no more than a small
    /// relative slack; larger excursions are reported.
    pub fn clamp_to_bounds(&self, x: &[f64]) -> Result<Vec<f64>, ProblemError> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let (l, u) = (self.lower[i], self.upper[i]);
                let slack = BOUND_SLACK * (1.0 + l.abs().max(u.abs()));
                if xi < l - slack || xi > u + slack || xi.is_nan() {
                    Err(ProblemError::OutOfBounds {
                        index: i,
                        value: xi,
                        lower: l,
                        upper: u,
                    })
                } else {
                    Ok(xi.clamp(l, u))
                }
            })
            .collect()
    }
}

/// Labels under which objective evaluations are accounted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Anchors,
    Sweeps,
    Baseline,
    /// Evaluations made at finite-difference probe points, in any phase.
    FiniteDifference,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::Anchors,
        Phase::Sweeps,
        Phase::Baseline,
        Phase::FiniteDifference,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Anchors => "anchors",
            Phase::Sweeps => "sweeps",
            Phase::Baseline => "baseline",
            Phase::FiniteDifference => "fd",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Thread-safe count of objective-vector evaluations, split by phase.
#[derive(Debug, Default)]
pub struct EvaluationCounter {
    counts: [AtomicU64; 4],
}

impl EvaluationCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, phase: Phase) {
        self.counts[phase.slot()].fetch_add(1, Ordering::Relaxed);
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|c| c.load(Ordering::Relaxed)).sum()
    }

    pub fn phase(&self, phase: Phase) -> u64 {
        self.counts[phase.slot()].load(Ordering::Relaxed)
    }

    pub fn per_phase(&self) -> BTreeMap<String, u64> {
        Phase::ALL
            .iter()
            .map(|&p| (p.label().to_string(), self.phase(p)))
            .collect()
    }
}

/// Evaluates `F(x)` and records one evaluation under `phase`.
///
/// The counter is incremented even when the evaluation fails.
pub fn evaluate_counted(
    problem: &MooProblem,
    x: &[f64],
    counter: &EvaluationCounter,
    phase: Phase,
) -> Result<Vec<f64>, ProblemError> {
    let x = problem.clamp_to_bounds(x)?;
    counter.record(phase);
    let f = problem.objectives(&x);
    match f.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(ProblemError::NonFinite { x, index }),
        None => Ok(f),
    }
}

/// Individual minimizers and the normalization frame derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub minimizers: Vec<Vec<f64>>,
    pub anchor_objectives: Vec<Vec<f64>>,
    pub utopia: Vec<f64>,
    pub nadir_estimate: Vec<f64>,
}

impl AnchorSet {
    /// Builds the set from the pay-off matrix: utopia and nadir are the
    /// component-wise min and max over the anchor rows.
    pub fn from_payoff(minimizers: Vec<Vec<f64>>, anchor_objectives: Vec<Vec<f64>>) -> Self {
        let k = anchor_objectives.first().map_or(0, Vec::len);
        let utopia = (0..k)
            .map(|j| anchor_objectives.iter().map(|f| f[j]).fold(f64::INFINITY, f64::min))
            .collect();
        let nadir_estimate = (0..k)
            .map(|j| {
                anchor_objectives
                    .iter()
                    .map(|f| f[j])
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        Self {
            minimizers,
            anchor_objectives,
            utopia,
            nadir_estimate,
        }
    }

    pub fn k(&self) -> usize {
        self.utopia.len()
    }

    /// First axis whose range is (numerically) zero, if any.
    pub fn degenerate_axis(&self) -> Option<usize> {
        (0..self.k()).find(|&i| {
            let range = self.nadir_estimate[i] - self.utopia[i];
            range <= 1e-12 * (1.0 + self.utopia[i].abs().max(self.nadir_estimate[i].abs()))
        })
    }

    pub fn normalized_anchor(&self, i: usize) -> Vec<f64> {
        normalize_unchecked(&self.anchor_objectives[i], self)
    }
}

/// Maps `F` into the unit frame spanned by utopia and nadir estimate.
pub fn normalize(f: &[f64], anchors: &AnchorSet) -> Result<Vec<f64>, ProblemError> {
    if let Some(axis) = anchors.degenerate_axis() {
        return Err(ProblemError::DegenerateAxis { axis });
    }
    Ok(normalize_unchecked(f, anchors))
}

pub(crate) fn normalize_unchecked(f: &[f64], anchors: &AnchorSet) -> Vec<f64> {
    f.iter()
        .zip(anchors.utopia.iter().zip(&anchors.nadir_estimate))
        .map(|(&v, (&lo, &hi))| (v - lo) / (hi - lo))
        .collect()
}

pub fn denormalize(f: &[f64], anchors: &AnchorSet) -> Vec<f64> {
    f.iter()
        .zip(anchors.utopia.iter().zip(&anchors.nadir_estimate))
        .map(|(&v, (&lo, &hi))| lo + v * (hi - lo))
        .collect()
}

/// Looks up one of the built-in benchmark problems by name.
pub fn builtin_problem(name: &str) -> Result<MooProblem, ProblemError> {
    match name {
        "motta1" => motta(3),
        "motta2" => motta(4),
        "dtlz2" => dtlz2(10),
        "biobj-convex" => biobj_convex(),
        _ => Err(ProblemError::UnknownProblem {
            name: name.to_string(),
        }),
    }
}

/// `min x_i` subject to `-x_i + sum_{j != i} 1/x_j <= 0`, `0.2 <= x <= 10`.
fn motta(k: usize) -> Result<MooProblem, ProblemError> {
    let name = if k == 3 { "motta1" } else { "motta2" };
    let problem = MooProblem::new(name, k, vec![0.2; k], vec![10.0; k], |x| x.to_vec())?;
    Ok(problem.with_inequalities(k, move |x| {
        let inv_sum: f64 = x.iter().map(|v| 1.0 / v).sum();
        x.iter().map(|&xi| inv_sum - 1.0 / xi - xi).collect()
    }))
}

/// Three-objective DTLZ2: position variables `x_1, x_2`, distance
/// variables `x_3..x_n` entering `g`.
fn dtlz2(n: usize) -> Result<MooProblem, ProblemError> {
    MooProblem::new("dtlz2", 3, vec![0.0; n], vec![1.0; n], |x| {
        let g: f64 = x[2..].iter().map(|v| (v - 0.5).powi(2)).sum();
        let (a, b) = (x[0] * FRAC_PI_2, x[1] * FRAC_PI_2);
        let r = 1.0 + g;
        vec![r * a.cos() * b.cos(), r * a.cos() * b.sin(), r * a.sin()]
    })
}

fn biobj_convex() -> Result<MooProblem, ProblemError> {
    MooProblem::new("biobj-convex", 2, vec![-1.0], vec![3.0], |x| {
        vec![x[0] * x[0], (x[0] - 2.0).powi(2)]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn motta1_shape_and_identity_objectives() {
        let p = builtin_problem("motta1").unwrap();
        assert_eq!((p.k(), p.n(), p.m(), p.e()), (3, 3, 3, 0));
        assert_eq!(p.lower(), &[0.2; 3]);
        assert_eq!(p.upper(), &[10.0; 3]);
        let counter = EvaluationCounter::new();
        let f = evaluate_counted(&p, &[1.0, 1.0, 1.0], &counter, Phase::Anchors).unwrap();
        assert_eq!(f, vec![1.0, 1.0, 1.0]);
        assert_eq!(counter.total(), 1);
    }

    #[test]
    fn motta2_shape() {
        let p = builtin_problem("motta2").unwrap();
        assert_eq!((p.k(), p.n(), p.m(), p.e()), (4, 4, 4, 0));
    }

    #[test]
    fn dtlz2_shape_and_corner_value() {
        let p = builtin_problem("dtlz2").unwrap();
        assert_eq!((p.k(), p.n()), (3, 10));
        let mut x = vec![0.5; 10];
        x[0] = 0.0;
        x[1] = 0.0;
        let f = p.objectives(&x);
        assert_abs_diff_eq!(f[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dtlz2_distance_variables_at_half_lie_on_sphere() {
        let p = builtin_problem("dtlz2").unwrap();
        for (a, b) in [(0.1, 0.9), (0.33, 0.5), (0.77, 0.12)] {
            let mut x = vec![0.5; 10];
            x[0] = a;
            x[1] = b;
            let f = p.objectives(&x);
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn motta1_analytic_anchor_is_feasible_and_active() {
        let p = builtin_problem("motta1").unwrap();
        let g = p.inequalities(&[0.2, 10.0, 10.0]);
        assert_abs_diff_eq!(g[0], 0.0, epsilon = 1e-12);
        assert!(g.iter().all(|&v| v <= 1e-8));
    }

    #[test]
    fn unknown_problem_lists_valid_names() {
        let err = builtin_problem("zdt1").unwrap_err();
        let msg = err.to_string();
        for name in BUILTIN_PROBLEMS {
            assert!(msg.contains(name), "{msg}");
        }
    }

    #[test]
    fn repeated_calls_are_pure_and_counted() {
        let p = builtin_problem("dtlz2").unwrap();
        let counter = EvaluationCounter::new();
        let x = vec![0.3; 10];
        let a = evaluate_counted(&p, &x, &counter, Phase::Sweeps).unwrap();
        let b = evaluate_counted(&p, &x, &counter, Phase::Sweeps).unwrap();
        assert_eq!(a, b);
        assert_eq!(counter.total(), 2);
        assert_eq!(counter.phase(Phase::Sweeps), 2);
    }

    #[test]
    fn non_finite_objective_is_reported_and_counted() {
        let p = MooProblem::new("bad", 2, vec![-1.0], vec![1.0], |x| {
            vec![x[0], 1.0 / x[0]]
        })
        .unwrap();
        let counter = EvaluationCounter::new();
        let err = evaluate_counted(&p, &[0.0], &counter, Phase::Anchors).unwrap_err();
        assert_eq!(
            err,
            ProblemError::NonFinite {
                x: vec![0.0],
                index: 1
            }
        );
        assert_eq!(counter.total(), 1);
    }

    #[test]
    fn slightly_outside_bounds_is_clamped() {
        let p = builtin_problem("motta1").unwrap();
        let counter = EvaluationCounter::new();
        let f = evaluate_counted(&p, &[0.2 - 1e-9, 10.0 + 1e-9, 1.0], &counter, Phase::Anchors)
            .unwrap();
        assert_eq!(f, vec![0.2, 10.0, 1.0]);
        assert!(evaluate_counted(&p, &[0.0, 1.0, 1.0], &counter, Phase::Anchors).is_err());
    }

    #[test]
    fn invalid_definitions_are_rejected() {
        assert!(MooProblem::new("a", 1, vec![0.0], vec![1.0], |x| x.to_vec()).is_err());
        assert!(MooProblem::new("a", 2, vec![1.0], vec![0.0], |x| x.to_vec()).is_err());
        assert!(MooProblem::new("a", 2, vec![], vec![], |x| x.to_vec()).is_err());
    }

    fn sample_anchors() -> AnchorSet {
        AnchorSet::from_payoff(
            vec![vec![0.0]; 3],
            vec![vec![0.2, 10.0, 4.0], vec![3.0, 0.5, 9.0], vec![7.0, 2.0, 1.0]],
        )
    }

    #[test]
    fn payoff_frame() {
        let a = sample_anchors();
        assert_eq!(a.utopia, vec![0.2, 0.5, 1.0]);
        assert_eq!(a.nadir_estimate, vec![7.0, 10.0, 9.0]);
    }

    #[test]
    fn normalize_maps_utopia_and_nadir_to_unit_corners() {
        let a = sample_anchors();
        assert_eq!(normalize(&a.utopia, &a).unwrap(), vec![0.0; 3]);
        let one = normalize(&a.nadir_estimate, &a).unwrap();
        for v in one {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_round_trip() {
        let a = sample_anchors();
        let f = [3.3, 7.1, 2.2];
        let back = denormalize(&normalize(&f, &a).unwrap(), &a);
        for (x, y) in f.iter().zip(back) {
            assert_abs_diff_eq!(*x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_axis_is_named() {
        let a = AnchorSet::from_payoff(
            vec![vec![0.0]; 2],
            vec![vec![0.0, 1.0], vec![1.0, 1.0]],
        );
        assert_eq!(
            normalize(&[0.5, 1.0], &a).unwrap_err(),
            ProblemError::DegenerateAxis { axis: 1 }
        );
    }
}
