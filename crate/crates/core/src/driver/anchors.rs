//! Individual minimizers.
//!
//! Anchor `i` minimizes `F_i`. Individual minima need not be unique
//! (DTLZ2: `F_1 = 0` on a whole face), so ties are broken lexicographically
//! by the following objectives in cyclic order, each later stage capping the
//! earlier objectives at their optimum.

use std::cmp::Ordering;

use super::DriverError;
use crate::nlp::{solve_nlp, NlpModel, NlpValues, SolverOptions};
use crate::problem::{evaluate_counted, AnchorSet, EvaluationCounter, MooProblem, Phase};

struct StageModel<'a> {
    problem: &'a MooProblem,
    counter: &'a EvaluationCounter,
    target: usize,
    caps: &'a [(usize, f64)],
}

impl NlpModel for StageModel<'_> {
    fn lower(&self) -> &[f64] {
        self.problem.lower()
    }

    fn upper(&self) -> &[f64] {
        self.problem.upper()
    }

    fn num_eq(&self) -> usize {
        self.problem.e()
    }

    fn num_ineq(&self) -> usize {
        self.problem.m() + self.caps.len()
    }

    fn evaluate(&self, x: &[f64], probe: bool) -> NlpValues {
        let phase = if probe { Phase::FiniteDifference } else { Phase::Anchors };
        let f = evaluate_counted(self.problem, x, self.counter, phase)
            .unwrap_or_else(|_| vec![f64::NAN; self.problem.k()]);
        let mut ineq = self.problem.inequalities(x);
        ineq.extend(self.caps.iter().map(|&(j, cap)| f[j] - cap));
        NlpValues {
            objective: f[self.target],
            eq: self.problem.equalities(x),
            ineq,
        }
    }
}

/// Objective order of the cascade for anchor `i`.
fn order(i: usize, k: usize) -> impl Iterator<Item = usize> {
    (0..k).map(move |s| (i + s) % k)
}

/// Slack granted to the objectives capped by later cascade stages.
const CAP_SLACK: f64 = 1e-8;
/// Relative improvement a later stage must achieve to replace the point.
/// Genuine ties gain O(1); smooth unique minima gain only what the cap slack
/// allows, O(sqrt(CAP_SLACK)).
const TIE_GAIN: f64 = 1e-3;
/// Anchors must satisfy the constraints well below the sweep tolerance.
const ANCHOR_FEAS_TOL: f64 = 1e-10;

/// Minimizer and objectives, or the status of a failed first stage.
type CascadeOutcome = Result<(Vec<f64>, Vec<f64>), &'static str>;

/// Runs the cascade for anchor `i` from `start`.
fn cascade(
    problem: &MooProblem,
    opts: &SolverOptions,
    counter: &EvaluationCounter,
    i: usize,
    start: &[f64],
) -> Result<CascadeOutcome, DriverError> {
    let mut x = start.to_vec();
    let mut f = Vec::new();
    let mut caps: Vec<(usize, f64)> = Vec::new();
    for (stage, target) in order(i, problem.k()).enumerate() {
        let model = StageModel {
            problem,
            counter,
            target,
            caps: &caps,
        };
        let result = solve_nlp(&model, &x, opts)?;
        if stage == 0 {
            if !result.converged() {
                return Ok(Err(result.status.label()));
            }
            x = problem.clamp_to_bounds(&result.v_star)?;
            f = evaluate_counted(problem, &x, counter, Phase::Anchors)?;
        } else if result.converged() {
            let candidate = problem.clamp_to_bounds(&result.v_star)?;
            let fc = evaluate_counted(problem, &candidate, counter, Phase::Anchors)?;
            if f[target] - fc[target] > TIE_GAIN * (1.0 + f[target].abs()) {
                x = candidate;
                f = fc;
            }
        }
        caps.push((target, f[target] + CAP_SLACK * (1.0 + f[target].abs())));
    }
    Ok(Ok((x, f)))
}

fn lexicographic(a: &[f64], b: &[f64], i: usize, tol: f64) -> Ordering {
    for j in order(i, a.len()) {
        let scale = tol * (1.0 + a[j].abs().max(b[j].abs()));
        if (a[j] - b[j]).abs() > scale {
            return a[j].total_cmp(&b[j]);
        }
    }
    Ordering::Equal
}

fn starts(problem: &MooProblem, spread: bool) -> Vec<Vec<f64>> {
    let center = problem.center();
    let mut out = vec![center.clone()];
    if spread {
        let shifted = |sign: f64, only: Option<usize>| -> Vec<f64> {
            center
                .iter()
                .enumerate()
                .map(|(j, &c)| {
                    let width = problem.upper()[j] - problem.lower()[j];
                    if only.is_none_or(|o| o == j) && width.is_finite() {
                        c + sign * 0.25 * width
                    } else {
                        c
                    }
                })
                .collect()
        };
        for sign in [-1.0, 1.0] {
            out.push(shifted(sign, None));
        }
        for j in 0..problem.n() {
            for sign in [-1.0, 1.0] {
                out.push(shifted(sign, Some(j)));
            }
        }
    }
    out
}

fn anchors_from(
    problem: &MooProblem,
    opts: &SolverOptions,
    counter: &EvaluationCounter,
    spread: bool,
) -> Result<AnchorSet, DriverError> {
    let mut minimizers = Vec::with_capacity(problem.k());
    let mut objectives = Vec::with_capacity(problem.k());
    for i in 0..problem.k() {
        let mut best: Option<(Vec<f64>, Vec<f64>)> = None;
        let mut failure = "not run";
        for start in starts(problem, spread) {
            match cascade(problem, opts, counter, i, &start)? {
                Ok((x, f)) => {
                    let better = best
                        .as_ref()
                        .is_none_or(|(_, bf)| lexicographic(&f, bf, i, 1e-6) == Ordering::Less);
                    if better {
                        best = Some((x, f));
                    }
                }
                Err(status) => failure = status,
            }
        }
        let (x, f) = best.ok_or(DriverError::Anchor {
            objective: i,
            status: failure,
        })?;
        minimizers.push(x);
        objectives.push(f);
    }
    Ok(AnchorSet::from_payoff(minimizers, objectives))
}

/// Computes the `k` individual minimizers and the pay-off frame.
///
/// Starts from the box center; when the resulting anchors fail to span
/// every objective axis the cascades are repeated from a spread of start
/// points and the lexicographically best result is kept.
pub fn compute_anchors(
    problem: &MooProblem,
    opts: &SolverOptions,
    counter: &EvaluationCounter,
) -> Result<AnchorSet, DriverError> {
    let opts = &SolverOptions {
        feas_tol: opts.feas_tol.min(ANCHOR_FEAS_TOL),
        ..*opts
    };
    let set = anchors_from(problem, opts, counter, false)?;
    if set.degenerate_axis().is_none() {
        return Ok(set);
    }
    let set = anchors_from(problem, opts, counter, true)?;
    match set.degenerate_axis() {
        Some(axis) => Err(DriverError::DegenerateAnchors { axis }),
        None => Ok(set),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::builtin_problem;
    use approx::assert_abs_diff_eq;

    fn anchors(name: &str) -> (AnchorSet, EvaluationCounter) {
        let counter = EvaluationCounter::new();
        let set = compute_anchors(&builtin_problem(name).unwrap(), &SolverOptions::default(), &counter).unwrap();
        (set, counter)
    }

    #[test]
    fn motta1_first_anchor() {
        let (set, counter) = anchors("motta1");
        assert_abs_diff_eq!(set.anchor_objectives[0][0], 0.2, epsilon = 1e-4);
        for (got, want) in set.minimizers[0].iter().zip([0.2, 10.0, 10.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-4);
        }
        assert!(counter.phase(Phase::Anchors) > 0);
        assert!(counter.phase(Phase::FiniteDifference) > 0);
    }

    #[test]
    fn anchors_are_feasible() {
        for name in ["motta1", "motta2", "dtlz2", "biobj-convex"] {
            let problem = builtin_problem(name).unwrap();
            let (set, _) = anchors(name);
            for x in &set.minimizers {
                assert!(problem.max_violation(x) <= 1e-8, "{name}: {x:?}");
            }
            for (x, f) in set.minimizers.iter().zip(&set.anchor_objectives) {
                assert_eq!(&problem.objectives(x), f);
            }
        }
    }

    #[test]
    fn biobj_anchors() {
        let (set, _) = anchors("biobj-convex");
        assert_abs_diff_eq!(set.anchor_objectives[0][0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(set.anchor_objectives[0][1], 4.0, epsilon = 1e-4);
        assert_abs_diff_eq!(set.anchor_objectives[1][0], 4.0, epsilon = 1e-4);
        assert_abs_diff_eq!(set.anchor_objectives[1][1], 0.0, epsilon = 1e-6);
    }

    /// Grid over the position variables with the distance variables at 0.5.
    fn dtlz2_grid_min(objective: usize) -> f64 {
        let problem = builtin_problem("dtlz2").unwrap();
        let mut best = f64::INFINITY;
        for a in 0..=10 {
            for b in 0..=10 {
                let mut x = vec![0.5; 10];
                x[0] = a as f64 / 10.0;
                x[1] = b as f64 / 10.0;
                best = best.min(problem.objectives(&x)[objective]);
            }
        }
        best
    }

    #[test]
    fn dtlz2_anchors_span_the_octant() {
        let (set, _) = anchors("dtlz2");
        assert!(set.degenerate_axis().is_none());
        assert_abs_diff_eq!(set.anchor_objectives[2][2], dtlz2_grid_min(2), epsilon = 1e-5);
        for f in &set.anchor_objectives {
            let norm: f64 = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-4);
        }
        for axis in 0..3 {
            assert_abs_diff_eq!(set.utopia[axis], 0.0, epsilon = 1e-6);
            assert_abs_diff_eq!(set.nadir_estimate[axis], 1.0, epsilon = 1e-4);
        }
    }
}
