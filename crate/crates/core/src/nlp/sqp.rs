use nalgebra::{DMatrix, DVector};

use super::fd::{linearize, Linearization};
use super::qp::{solve_qp, LinearConstraint, QpError};
use super::{NlpModel, NlpResult, NlpStatus, NlpValues, SolverError, SolverOptions, WarmStart};

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
/// Minimum cosine between `s` and `y` for the initial Hessian scaling.
const CURVATURE_ANGLE: f64 = 0.1;
/// Relaxation factors tried on the linearized constraints when the QP is
/// inconsistent. The last one always admits `d = 0`.
const RELAXATIONS: [f64; 5] = [1.0, 0.5, 0.1, 0.01, 0.0];

/// Solves `model` from `v0` with a cold start.
pub fn solve_nlp<M: NlpModel + ?Sized>(
    model: &M,
    v0: &[f64],
    opts: &SolverOptions,
) -> Result<NlpResult, SolverError> {
    solve_nlp_warm(model, v0, opts, None)
}

/// Solves `model` from `v0`, reusing the Hessian approximation and
/// multiplier estimates of a previous related solve when given.
pub fn solve_nlp_warm<M: NlpModel + ?Sized>(
    model: &M,
    v0: &[f64],
    opts: &SolverOptions,
    warm: Option<&WarmStart>,
) -> Result<NlpResult, SolverError> {
    opts.validate()?;
    let dim = model.dim();
    if v0.len() != dim {
        return Err(SolverError::DimensionMismatch {
            expected: dim,
            got: v0.len(),
        });
    }
    let warm = warm.filter(|w| {
        w.hessian.nrows() == dim
            && w.eq_multipliers.len() == model.num_eq()
            && w.ineq_multipliers.len() == model.num_ineq()
    });
    Ok(Sqp::new(model, opts, warm).run(v0))
}

struct Sqp<'a, M: NlpModel + ?Sized> {
    model: &'a M,
    opts: &'a SolverOptions,
    evaluations: usize,
    hessian: DMatrix<f64>,
    fresh_hessian: bool,
    lambda_eq: Vec<f64>,
    lambda_ineq: Vec<f64>,
    penalty: f64,
}

struct Step {
    d: DVector<f64>,
    theta: f64,
    lambda_eq: Vec<f64>,
    lambda_ineq: Vec<f64>,
}

impl<'a, M: NlpModel + ?Sized> Sqp<'a, M> {
    fn new(model: &'a M, opts: &'a SolverOptions, warm: Option<&WarmStart>) -> Self {
        let dim = model.dim();
        match warm {
            Some(w) => Self {
                model,
                opts,
                evaluations: 0,
                hessian: w.hessian.clone(),
                fresh_hessian: false,
                lambda_eq: w.eq_multipliers.clone(),
                lambda_ineq: w.ineq_multipliers.clone(),
                penalty: w.penalty,
            },
            None => Self {
                model,
                opts,
                evaluations: 0,
                hessian: DMatrix::identity(dim, dim),
                fresh_hessian: true,
                lambda_eq: vec![0.0; model.num_eq()],
                lambda_ineq: vec![0.0; model.num_ineq()],
                penalty: 1.0,
            },
        }
    }

    fn evaluate(&mut self, v: &[f64]) -> Option<NlpValues> {
        self.evaluations += 1;
        let values = self.model.evaluate(v, false);
        values.is_finite().then_some(values)
    }

    fn linearize(&mut self, v: &[f64], values: &NlpValues) -> Option<Linearization> {
        linearize(self.model, v, values, self.opts, &mut self.evaluations)
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.model.lower().iter().zip(self.model.upper()))
            .map(|(&x, (&l, &u))| x.clamp(l, u))
            .collect()
    }

    fn merit(&self, values: &NlpValues) -> f64 {
        values.objective + self.penalty * values.l1_violation()
    }

    fn finish(&self, v: Vec<f64>, values: Option<NlpValues>, status: NlpStatus, iterations: usize) -> NlpResult {
        let (objective_value, max_eq_violation, max_ineq_violation) = match &values {
            Some(vals) => (vals.objective, vals.max_eq_violation(), vals.max_ineq_violation()),
            None => (f64::NAN, f64::NAN, f64::NAN),
        };
        NlpResult {
            v_star: v,
            objective_value,
            max_eq_violation,
            max_ineq_violation,
            status,
            fe_used: self.evaluations,
            iterations,
            warm: WarmStart {
                hessian: self.hessian.clone(),
                eq_multipliers: self.lambda_eq.clone(),
                ineq_multipliers: self.lambda_ineq.clone(),
                penalty: self.penalty,
            },
        }
    }

    fn run(mut self, v0: &[f64]) -> NlpResult {
        let mut v = self.project(v0);
        let Some(mut values) = self.evaluate(&v) else {
            return self.finish(v, None, NlpStatus::NumericalFailure, 0);
        };
        let Some(mut lin) = self.linearize(&v, &values) else {
            return self.finish(v, Some(values), NlpStatus::NumericalFailure, 0);
        };
        let feas_tol = self.opts.feas_tol;
        let step_tol = |v: &[f64], opt_tol: f64| opt_tol * (1.0 + v.iter().fold(0.0_f64, |a, x| a.max(x.abs())));
        let mut reset_in_a_row = false;

        for iter in 0..self.opts.max_iters {
            let violation = values.max_violation();
            let Some(step) = self.qp_step(&v, &values, &lin) else {
                if !self.fresh_hessian {
                    self.reset_hessian();
                    continue;
                }
                return self.finish(v, Some(values), NlpStatus::NumericalFailure, iter);
            };
            self.lambda_eq.clone_from(&step.lambda_eq);
            self.lambda_ineq.clone_from(&step.lambda_ineq);

            let d_norm = step.d.amax();
            if violation <= feas_tol && d_norm <= step_tol(&v, self.opts.opt_tol) {
                return self.finish(v, Some(values), NlpStatus::Converged, iter);
            }

            let grad = DVector::from_column_slice(&lin.grad);
            let gtd = grad.dot(&step.d);
            let dbd = step.d.dot(&(&self.hessian * &step.d));
            let l1 = values.l1_violation();
            let lambda_max = step
                .lambda_eq
                .iter()
                .chain(&step.lambda_ineq)
                .fold(0.0_f64, |a, l| a.max(l.abs()));
            self.penalty = self.penalty.max(1.1 * lambda_max);
            if step.theta * l1 > 0.0 {
                let needed = (gtd + 0.5 * dbd.max(0.0)) / (0.5 * step.theta * l1);
                self.penalty = self.penalty.max(needed);
            }
            let slope = gtd - self.penalty * step.theta * l1;

            let Some((v_new, values_new)) = self.line_search(&v, &values, &lin, &step, slope) else {
                if !reset_in_a_row {
                    reset_in_a_row = true;
                    self.reset_hessian();
                    continue;
                }
                let status = if violation > feas_tol {
                    NlpStatus::Infeasible
                } else {
                    NlpStatus::NumericalFailure
                };
                return self.finish(v, Some(values), status, iter);
            };
            reset_in_a_row = false;

            // Only the undamped step length signals stationarity; a short
            // backtracked step does not.
            if values_new.max_violation() <= feas_tol && d_norm <= step_tol(&v_new, self.opts.opt_tol) {
                return self.finish(v_new, Some(values_new), NlpStatus::Converged, iter + 1);
            }

            let Some(lin_new) = self.linearize(&v_new, &values_new) else {
                return self.finish(v_new, Some(values_new), NlpStatus::NumericalFailure, iter + 1);
            };
            self.update_hessian(&v, &v_new, &lin, &lin_new);
            v = v_new;
            values = values_new;
            lin = lin_new;
        }

        let status = if values.max_violation() > feas_tol {
            NlpStatus::Infeasible
        } else {
            NlpStatus::MaxIterations
        };
        let iters = self.opts.max_iters;
        self.finish(v, Some(values), status, iters)
    }

    fn reset_hessian(&mut self) {
        let dim = self.model.dim();
        self.hessian = DMatrix::identity(dim, dim);
        self.fresh_hessian = true;
    }

    /// Solves the QP subproblem, relaxing the linearized constraints if
    /// they are inconsistent with the box.
    fn qp_step(&self, v: &[f64], values: &NlpValues, lin: &Linearization) -> Option<Step> {
        let dim = v.len();
        let grad = DVector::from_column_slice(&lin.grad);
        let (lower, upper) = (self.model.lower(), self.model.upper());
        let n_eq = values.eq.len();

        for theta in RELAXATIONS {
            let mut cons = Vec::with_capacity(n_eq + values.ineq.len() + 2 * dim);
            for (row, &c) in lin.jac_eq.iter().zip(&values.eq) {
                cons.push(LinearConstraint::equal(DVector::from_column_slice(row), -theta * c));
            }
            for (row, &c) in lin.jac_ineq.iter().zip(&values.ineq) {
                // c + J d <= 0  ->  -J d >= c
                let rhs = if c > 0.0 { theta * c } else { c };
                cons.push(LinearConstraint::at_least(-DVector::from_column_slice(row), rhs));
            }
            for i in 0..dim {
                if lower[i].is_finite() {
                    let mut e = DVector::zeros(dim);
                    e[i] = 1.0;
                    cons.push(LinearConstraint::at_least(e, lower[i] - v[i]));
                }
                if upper[i].is_finite() {
                    let mut e = DVector::zeros(dim);
                    e[i] = -1.0;
                    cons.push(LinearConstraint::at_least(e, v[i] - upper[i]));
                }
            }
            match solve_qp(&self.hessian, &grad, &cons) {
                Ok(sol) => {
                    // Stationarity B d + g = sum mu_i n_i maps to
                    // g + B d + J_eq' l_eq + J_ineq' l_ineq - (bound terms) = 0.
                    let lambda_eq = sol.multipliers[..n_eq].iter().map(|m| -m).collect();
                    let lambda_ineq = sol.multipliers[n_eq..n_eq + values.ineq.len()].to_vec();
                    return Some(Step {
                        d: sol.x,
                        theta,
                        lambda_eq,
                        lambda_ineq,
                    });
                }
                Err(QpError::NotPositiveDefinite) => return None,
                Err(QpError::Infeasible | QpError::IterationLimit) => continue,
            }
        }
        None
    }

    fn line_search(
        &mut self,
        v: &[f64],
        values: &NlpValues,
        lin: &Linearization,
        step: &Step,
        slope: f64,
    ) -> Option<(Vec<f64>, NlpValues)> {
        let phi0 = self.merit(values);
        // A non-negative slope means the merit cannot be trusted to decrease;
        // still accept small sufficient-decrease failures from rounding.
        let slope = slope.min(0.0);
        let mut alpha = 1.0;
        for attempt in 0..MAX_BACKTRACKS {
            let trial_v: Vec<f64> = self.project(
                &v.iter()
                    .zip(step.d.iter())
                    .map(|(x, d)| x + alpha * d)
                    .collect::<Vec<_>>(),
            );
            let trial = self.evaluate(&trial_v);
            let phi = trial.as_ref().map_or(f64::INFINITY, |t| self.merit(t));
            let tol = 1e-14 * (1.0 + phi0.abs());
            if phi <= phi0 + ARMIJO * alpha * slope + tol {
                return trial.map(|t| (trial_v, t));
            }
            if attempt == 0 {
                if let Some(t) = &trial {
                    if let Some(accepted) = self.second_order_correction(&trial_v, t, lin, phi0, slope) {
                        return Some(accepted);
                    }
                }
            }
            alpha *= if phi.is_finite() { 0.5 } else { 0.1 };
        }
        None
    }

    /// Projects the full step back toward the constraint manifold using the
    /// Jacobian at the base point, which counters the Maratos effect.
    fn second_order_correction(
        &mut self,
        trial_v: &[f64],
        trial: &NlpValues,
        lin: &Linearization,
        phi0: f64,
        slope: f64,
    ) -> Option<(Vec<f64>, NlpValues)> {
        let rows: Vec<(&[f64], f64)> = lin
            .jac_eq
            .iter()
            .zip(&trial.eq)
            .chain(lin.jac_ineq.iter().zip(&trial.ineq).filter(|(_, &c)| c > 0.0))
            .map(|(row, &c)| (row.as_slice(), c))
            .collect();
        if rows.is_empty() {
            return None;
        }
        let m = rows.len();
        let dim = trial_v.len();
        let jac = DMatrix::from_fn(m, dim, |i, j| rows[i].0[j]);
        let c = DVector::from_fn(m, |i, _| rows[i].1);
        let jjt = &jac * jac.transpose() + DMatrix::identity(m, m) * 1e-12;
        let y = jjt.lu().solve(&c)?;
        let correction = jac.transpose() * y;
        let corrected: Vec<f64> = self.project(
            &trial_v
                .iter()
                .zip(correction.iter())
                .map(|(x, d)| x - d)
                .collect::<Vec<_>>(),
        );
        let values = self.evaluate(&corrected)?;
        (self.merit(&values) <= phi0 + ARMIJO * slope).then_some((corrected, values))
    }

    fn update_hessian(&mut self, v: &[f64], v_new: &[f64], lin: &Linearization, lin_new: &Linearization) {
        let s = DVector::from_iterator(v.len(), v_new.iter().zip(v).map(|(a, b)| a - b));
        let lag = |l: &Linearization| {
            let mut g = DVector::from_column_slice(&l.grad);
            for (row, lam) in l.jac_eq.iter().zip(&self.lambda_eq) {
                g += DVector::from_column_slice(row) * *lam;
            }
            for (row, lam) in l.jac_ineq.iter().zip(&self.lambda_ineq) {
                g += DVector::from_column_slice(row) * *lam;
            }
            g
        };
        let mut y = lag(lin_new) - lag(lin);
        let sy = s.dot(&y);
        let ss = s.dot(&s);
        if ss <= f64::MIN_POSITIVE {
            return;
        }
        // Scale the initial identity only from a well-conditioned pair. Near
        // orthogonal s and y (bilinear terms) give a meaningless ratio.
        if self.fresh_hessian && sy > CURVATURE_ANGLE * ss.sqrt() * y.norm() {
            let scale = (y.dot(&y) / sy).clamp(1e-6, 1e6);
            self.hessian = DMatrix::identity(v.len(), v.len()) * scale;
        }
        self.fresh_hessian = false;

        let bs = &self.hessian * &s;
        let sbs = s.dot(&bs);
        if sbs <= 0.0 {
            return;
        }
        // Powell damping keeps the update positive definite.
        if sy < 0.2 * sbs {
            let theta = 0.8 * sbs / (sbs - sy);
            y = &y * theta + &bs * (1.0 - theta);
        }
        let sy = s.dot(&y);
        if sy <= 1e-16 * ss.sqrt() * y.norm() {
            return;
        }
        self.hessian += &y * y.transpose() / sy - &bs * bs.transpose() / sbs;
        // Symmetrize to suppress drift.
        self.hessian = (&self.hessian + self.hessian.transpose()) * 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nlp::{FdScheme, NlpInstance};
    use approx::assert_abs_diff_eq;

    #[test]
    fn equality_constrained_quadratic() {
        let inst = NlpInstance::unbounded(2, |v| v[0] * v[0] + v[1] * v[1])
            .with_eq(|v| v[0] + v[1] - 1.0);
        let res = solve_nlp(&inst, &[0.0, 0.0], &SolverOptions::default()).unwrap();
        assert_eq!(res.status, NlpStatus::Converged);
        assert_abs_diff_eq!(res.v_star[0], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(res.v_star[1], 0.5, epsilon = 1e-6);
        assert_abs_diff_eq!(res.objective_value, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn active_inequality() {
        let inst = NlpInstance::unbounded(1, |v| v[0] * v[0]).with_ineq(|v| -v[0] + 1.0);
        let res = solve_nlp(&inst, &[3.0], &SolverOptions::default()).unwrap();
        assert_eq!(res.status, NlpStatus::Converged);
        assert_abs_diff_eq!(res.v_star[0], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn rosenbrock_central() {
        let inst = NlpInstance::unbounded(2, |v| {
            (1.0 - v[0]).powi(2) + 100.0 * (v[1] - v[0] * v[0]).powi(2)
        });
        let opts = SolverOptions {
            fd_scheme: FdScheme::Central,
            ..SolverOptions::default()
        };
        let res = solve_nlp(&inst, &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(res.status, NlpStatus::Converged, "{res:?}");
        assert_abs_diff_eq!(res.v_star[0], 1.0, epsilon = 1e-4);
        assert_abs_diff_eq!(res.v_star[1], 1.0, epsilon = 1e-4);
    }
}
