//! Finite-difference derivatives.

use super::{FdScheme, NlpModel, NlpValues, SolverError, SolverOptions};

/// Finite-difference gradient of a scalar function.
///
/// Forward: `(f(x + h e_i) - f(x)) / h`; central:
/// `(f(x + h e_i) - f(x - h e_i)) / 2h`.
pub fn fd_gradient<F>(f: F, x: &[f64], opts: &SolverOptions) -> Result<Vec<f64>, SolverError>
where
    F: Fn(&[f64]) -> f64,
{
    let h = opts.fd_step;
    let base = match opts.fd_scheme {
        FdScheme::Forward => {
            let v = f(x);
            if !v.is_finite() {
                return Err(SolverError::NonFiniteGradient { component: None });
            }
            v
        }
        FdScheme::Central => 0.0,
    };
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let finite = |v: f64| {
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(SolverError::NonFiniteGradient { component: Some(i) })
                }
            };
            probe[i] = x[i] + h;
            let up = probe[i] - x[i];
            let plus = finite(f(&probe))?;
            let d = match opts.fd_scheme {
                FdScheme::Forward => (plus - base) / up,
                FdScheme::Central => {
                    probe[i] = x[i] - h;
                    let down = x[i] - probe[i];
                    let minus = finite(f(&probe))?;
                    (plus - minus) / (up + down)
                }
            };
            probe[i] = x[i];
            Ok(d)
        })
        .collect()
}

/// Objective gradient and constraint Jacobians at one point.
#[derive(Debug, Clone)]
pub(crate) struct Linearization {
    pub grad: Vec<f64>,
    pub jac_eq: Vec<Vec<f64>>,
    pub jac_ineq: Vec<Vec<f64>>,
}

/// Differentiates every function of `model` at `v` with one model
/// evaluation per probe point. Probes stay inside the box: a forward step
/// that would leave it is taken backwards, a central pair that would leave
/// it degrades to the one-sided difference.
pub(crate) fn linearize<M: NlpModel + ?Sized>(
    model: &M,
    v: &[f64],
    base: &NlpValues,
    opts: &SolverOptions,
    evaluations: &mut usize,
) -> Option<Linearization> {
    let dim = v.len();
    let (lower, upper) = (model.lower(), model.upper());
    let mut lin = Linearization {
        grad: vec![0.0; dim],
        jac_eq: vec![vec![0.0; dim]; base.eq.len()],
        jac_ineq: vec![vec![0.0; dim]; base.ineq.len()],
    };
    let mut probe = v.to_vec();
    let mut eval = |p: &[f64]| {
        *evaluations += 1;
        let values = model.evaluate(p, true);
        values.is_finite().then_some(values)
    };
    for i in 0..dim {
        let h = opts.fd_step;
        let can_up = v[i] + h <= upper[i];
        let can_down = v[i] - h >= lower[i];
        let column = if opts.fd_scheme == FdScheme::Central && can_up && can_down {
            probe[i] = v[i] + h;
            let up = probe[i] - v[i];
            let plus = eval(&probe)?;
            probe[i] = v[i] - h;
            let down = v[i] - probe[i];
            let minus = eval(&probe)?;
            plus.difference(&minus, up + down)
        } else if can_up || can_down {
            probe[i] = if can_up { v[i] + h } else { v[i] - h };
            let step = probe[i] - v[i];
            let shifted = eval(&probe)?;
            shifted.difference(base, step)
        } else {
            // Box narrower than the step: use the full width.
            let (a, b) = (lower[i], upper[i]);
            if b > a {
                probe[i] = if upper[i] - v[i] >= v[i] - lower[i] { b } else { a };
                let step = probe[i] - v[i];
                let shifted = eval(&probe)?;
                shifted.difference(base, step)
            } else {
                NlpValues::zeros(base.eq.len(), base.ineq.len())
            }
        };
        probe[i] = v[i];
        lin.grad[i] = column.objective;
        for (row, d) in lin.jac_eq.iter_mut().zip(&column.eq) {
            row[i] = *d;
        }
        for (row, d) in lin.jac_ineq.iter_mut().zip(&column.ineq) {
            row[i] = *d;
        }
    }
    Some(lin)
}
