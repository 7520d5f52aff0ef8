//! Dense strictly convex quadratic programs by the Goldfarb-Idnani dual
//! active-set method.
//!
//! Solves `min 1/2 x'Gx + c'x` subject to `n_i'x >= b_i` (inequalities) and
//! `n_i'x = b_i` (equalities). `G` must be positive definite. Problem sizes
//! here are tiny, so the projections are recomputed from scratch at every step
//! instead of being maintained by factorization updates.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct LinearConstraint {
    pub normal: DVector<f64>,
    pub rhs: f64,
    pub equality: bool,
}

impl LinearConstraint {
    pub fn at_least(normal: DVector<f64>, rhs: f64) -> Self {
        Self {
            normal,
            rhs,
            equality: false,
        }
    }

    pub fn equal(normal: DVector<f64>, rhs: f64) -> Self {
        Self {
            normal,
            rhs,
            equality: true,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: DVector<f64>,
    /// One multiplier per constraint: `G x + c = sum_i mult_i n_i`.
    /// Non-negative for inequalities, zero for inactive constraints.
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QpError {
    NotPositiveDefinite,
    Infeasible,
    IterationLimit,
}

struct Active {
    index: usize,
    /// +1 or -1; equalities may enter with a flipped normal.
    sign: f64,
    equality: bool,
    multiplier: f64,
}

pub(crate) fn solve_qp(
    hessian: &DMatrix<f64>,
    linear: &DVector<f64>,
    constraints: &[LinearConstraint],
) -> Result<QpSolution, QpError> {
    let chol = hessian
        .clone()
        .cholesky()
        .ok_or(QpError::NotPositiveDefinite)?;
    let ginv = chol.inverse();
    let mut x = -(&ginv * linear);
    let mut active: Vec<Active> = Vec::new();

    let n_cons = constraints.len();
    let max_steps = 10 * (n_cons + x.len()) + 50;
    let mut steps = 0;

    while let Some((p, sign)) = pick_violated(&x, constraints, &active) {
        let np = &constraints[p].normal * sign;
        let bp = constraints[p].rhs * sign;
        let ginv_np = &ginv * &np;
        let unconstrained_curv = np.dot(&ginv_np).max(f64::MIN_POSITIVE);
        let mut added_multiplier = 0.0;

        loop {
            steps += 1;
            if steps > max_steps {
                return Err(QpError::IterationLimit);
            }
            let (z, r) = step_directions(&ginv, &ginv_np, constraints, &active);

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, a) in active.iter().enumerate() {
                if !a.equality && r[j] > 1e-14 {
                    let ratio = a.multiplier / r[j];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            let zn = z.dot(&np);
            let slack = np.dot(&x) - bp;
            let t2 = if zn > 1e-11 * unconstrained_curv {
                (-slack / zn).max(0.0)
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(QpError::Infeasible);
            }
            for (a, rj) in active.iter_mut().zip(r.iter()) {
                a.multiplier -= t * rj;
            }
            added_multiplier += t;
            if t2.is_finite() {
                x += &z * t;
            }
            if t2 <= t1 {
                active.push(Active {
                    index: p,
                    sign,
                    equality: constraints[p].equality,
                    multiplier: added_multiplier,
                });
                break;
            }
            // Partial (or purely dual) step: release the blocking constraint.
            if let Some(j) = drop {
                active.remove(j);
            }
        }
    }

    let mut multipliers = vec![0.0; n_cons];
    for a in &active {
        multipliers[a.index] = a.sign * a.multiplier;
    }
    Ok(QpSolution { x, multipliers })
}

fn pick_violated(
    x: &DVector<f64>,
    constraints: &[LinearConstraint],
    active: &[Active],
) -> Option<(usize, f64)> {
    let is_active = |i: usize| active.iter().any(|a| a.index == i);
    let tol = |c: &LinearConstraint| 1e-10 * (1.0 + c.rhs.abs() + c.normal.amax() * x.amax());

    for (i, c) in constraints.iter().enumerate() {
        if c.equality && !is_active(i) {
            let s = c.normal.dot(x) - c.rhs;
            if s.abs() > tol(c) {
                return Some((i, if s < 0.0 { 1.0 } else { -1.0 }));
            }
        }
    }
    let mut worst: Option<(usize, f64)> = None;
    for (i, c) in constraints.iter().enumerate() {
        if c.equality || is_active(i) {
            continue;
        }
        let s = c.normal.dot(x) - c.rhs;
        if s < -tol(c) {
            let scaled = s / c.normal.norm().max(f64::MIN_POSITIVE);
            if worst.is_none_or(|(_, w)| scaled < w) {
                worst = Some((i, scaled));
            }
        }
    }
    worst.map(|(i, _)| (i, 1.0))
}

/// Primal direction `z = H n+` and dual direction `r = N* n+` for the
/// current active set.
fn step_directions(
    ginv: &DMatrix<f64>,
    ginv_np: &DVector<f64>,
    constraints: &[LinearConstraint],
    active: &[Active],
) -> (DVector<f64>, DVector<f64>) {
    let q = active.len();
    if q == 0 {
        return (ginv_np.clone(), DVector::zeros(0));
    }
    let dim = ginv_np.len();
    let mut normals = DMatrix::zeros(dim, q);
    for (j, a) in active.iter().enumerate() {
        normals.set_column(j, &(&constraints[a.index].normal * a.sign));
    }
    let g_n = ginv * &normals;
    let m = normals.transpose() * &g_n;
    let rhs = normals.transpose() * ginv_np;
    let r = match m.clone().cholesky() {
        Some(c) => c.solve(&rhs),
        None => m.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(q)),
    };
    let z = ginv_np - &g_n * &r;
    (z, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn unconstrained_minimum() {
        let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let sol = solve_qp(&g, &v(&[-2.0, -4.0]), &[]).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn single_inequality_matches_hand_solution() {
        // min 1/2 x^2 + 1/2 y^2 + x s.t. x + 2y >= 1 -> (-0.6, 0.8)
        let g = DMatrix::identity(2, 2);
        let cons = [LinearConstraint::at_least(v(&[1.0, 2.0]), 1.0)];
        let sol = solve_qp(&g, &v(&[1.0, 0.0]), &cons).unwrap();
        assert_abs_diff_eq!(sol.x[0], -0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.multipliers[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn equality_with_flipped_sign() {
        // min x^2 + y^2 s.t. x + y = -2 -> (-1, -1)
        let g = DMatrix::identity(2, 2) * 2.0;
        let cons = [LinearConstraint::equal(v(&[1.0, 1.0]), -2.0)];
        let sol = solve_qp(&g, &v(&[0.0, 0.0]), &cons).unwrap();
        assert_abs_diff_eq!(sol.x[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], -1.0, epsilon = 1e-12);
        // G x + c = mult * n  ->  -2 = mult
        assert_abs_diff_eq!(sol.multipliers[0], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn constraint_dropped_when_it_stops_binding() {
        // min (x-2)^2 + (y-1)^2 with x <= 1 (as -x >= -1), y >= 0, x + y <= 3.
        let g = DMatrix::identity(2, 2) * 2.0;
        let c = v(&[-4.0, -2.0]);
        let cons = [
            LinearConstraint::at_least(v(&[-1.0, 0.0]), -1.0),
            LinearConstraint::at_least(v(&[0.0, 1.0]), 0.0),
            LinearConstraint::at_least(v(&[-1.0, -1.0]), -3.0),
        ];
        let sol = solve_qp(&g, &c, &cons).unwrap();
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 1.0, epsilon = 1e-12);
        assert_eq!(sol.multipliers[1], 0.0);
        assert_eq!(sol.multipliers[2], 0.0);
    }

    #[test]
    fn infeasible_box_detected() {
        let g = DMatrix::identity(1, 1);
        let cons = [
            LinearConstraint::at_least(v(&[1.0]), 2.0),
            LinearConstraint::at_least(v(&[-1.0]), -1.0),
        ];
        assert_eq!(
            solve_qp(&g, &v(&[0.0]), &cons).unwrap_err(),
            QpError::Infeasible
        );
    }

    #[test]
    fn indefinite_hessian_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(
            solve_qp(&g, &v(&[0.0, 0.0]), &[]).unwrap_err(),
            QpError::NotPositiveDefinite
        );
    }

    #[test]
    fn kkt_conditions_hold_on_random_boxes() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let g = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
            let c = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
            let mut cons = Vec::new();
            for i in 0..n {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                cons.push(LinearConstraint::at_least(e.clone(), -1.0));
                cons.push(LinearConstraint::at_least(-e, -1.0));
            }
            let row = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let inside = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let rhs = row.dot(&inside);
            cons.push(LinearConstraint::equal(row, rhs));
            let sol = solve_qp(&g, &c, &cons).unwrap();
            let grad = &g * &sol.x + &c;
            let mut combo = DVector::zeros(n);
            for (cst, &mu) in cons.iter().zip(&sol.multipliers) {
                let s = cst.normal.dot(&sol.x) - cst.rhs;
                if cst.equality {
                    assert!(s.abs() < 1e-9);
                } else {
                    assert!(s > -1e-9);
                    assert!(mu >= -1e-12);
                    assert!((mu * s).abs() < 1e-9);
                }
                combo += &cst.normal * mu;
            }
            assert!((grad - combo).amax() < 1e-8);
        }
    }
}
