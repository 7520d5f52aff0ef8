//! Reference methods: serial marching with a fixed step and a plain
//! weighted-sum scan.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::subproblem::Subproblem;
use super::{compute_anchors, DriverError, Front, RunMode, RunOptions, Sample, SampleStatus};
use crate::mesh::{lattice_indices, lattice_size};
use crate::nlp::{solve_nlp, solve_nlp_warm, SolverOptions};
use crate::problem::{AnchorSet, EvaluationCounter, MooProblem, Phase};

/// Steps taken when no point count is given.
const MARCH_STEP_LIMIT: usize = 10_000;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn anchor_sample(anchors: &AnchorSet, i: usize, id: usize, index: Vec<u32>) -> Sample {
    let k = anchors.k();
    Sample {
        id,
        index,
        lambda: (0..k).map(|j| if j == i { 1.0 } else { 0.0 }).collect(),
        x: anchors.minimizers[i].clone(),
        f: anchors.anchor_objectives[i].clone(),
        fnorm: anchors.normalized_anchor(i),
        status: SampleStatus::Anchor,
    }
}

fn finish(
    problem: &MooProblem,
    mode: RunMode,
    samples: Vec<Sample>,
    anchors: AnchorSet,
    iterations_run: usize,
    counter: &EvaluationCounter,
    notes: Vec<String>,
) -> Front {
    Front {
        problem: problem.name().to_string(),
        mode,
        samples,
        anchors,
        iterations_run,
        fe_total: counter.total(),
        fe_per_phase: counter.per_phase(),
        history: Vec::new(),
        notes,
        mesh: None,
    }
}

/// Marches from the minimizer of `F_1` toward that of `F_2`, each step
/// minimizing the weighted sum (weights free) at raw distance `gamma` from
/// the previous sample. Produces the seed plus up to `points` steps; stops
/// early once the opposite anchor is within one step or a step fails.
pub fn march_biobjective(problem: &MooProblem, options: &RunOptions, solver: &SolverOptions) -> Result<Front, DriverError> {
    options.validate()?;
    solver.validate()?;
    if problem.k() != 2 {
        return Err(DriverError::InvalidOptions(format!(
            "serial marching needs two objectives, {} has {}",
            problem.name(),
            problem.k()
        )));
    }
    let gamma = options
        .gamma
        .ok_or_else(|| DriverError::InvalidOptions("serial-march needs a step gamma".into()))?;
    let steps = options.points.unwrap_or(MARCH_STEP_LIMIT);
    let counter = EvaluationCounter::new();
    let anchors = compute_anchors(problem, solver, &counter)?;
    let end_f = anchors.anchor_objectives[1].clone();
    let end_x = anchors.minimizers[1].clone();

    let mut samples = vec![anchor_sample(&anchors, 0, 0, vec![0])];
    let mut notes = Vec::new();
    let mut warm = None;
    let mut solves = 0;
    for p in 1..=steps {
        let prev = samples.last().expect("seed sample");
        let remaining = distance(&prev.f, &end_f);
        if remaining < gamma {
            notes.push(format!(
                "stopped after {} steps: opposite anchor within one step ({remaining:.3e} < gamma)",
                p - 1
            ));
            break;
        }
        let guess: Vec<f64> = match samples.len() {
            1 => {
                let t = gamma / remaining;
                prev.x.iter().zip(&end_x).map(|(a, b)| a + t * (b - a)).collect()
            }
            n => {
                let before = &samples[n - 2];
                prev.x.iter().zip(&before.x).map(|(a, b)| 2.0 * a - b).collect()
            }
        };
        let guess = problem.clamp_to_bounds(&clamp(problem, guess))?;
        let v0: Vec<f64> = guess.iter().chain(&prev.lambda).copied().collect();
        let sub = Subproblem::new(problem, &anchors, &counter, Phase::Baseline, None).with_step(prev.f.clone(), gamma);
        let result = solve_nlp_warm(&sub, &v0, solver, warm.as_ref())?;
        solves += 1;
        if !result.converged() {
            notes.push(format!("truncated at step {p}: subproblem {}", result.status.label()));
            break;
        }
        let x = problem.clamp_to_bounds(sub.design(&result.v_star))?;
        let Some((f, fnorm)) = sub.objectives_at(&x) else {
            notes.push(format!("truncated at step {p}: non-finite objectives"));
            break;
        };
        if distance(&f, &end_f) >= remaining {
            notes.push(format!("truncated at step {p}: no progress toward the opposite anchor"));
            break;
        }
        let prev_lambda = sub.weights(&result.v_star);
        warm = Some(result.warm);
        samples.push(Sample {
            id: p,
            index: vec![p as u32],
            lambda: prev_lambda,
            x,
            f,
            fnorm,
            status: SampleStatus::Converged,
        });
    }
    Ok(finish(problem, RunMode::SerialMarch, samples, anchors, solves, &counter, notes))
}

fn clamp(problem: &MooProblem, x: Vec<f64>) -> Vec<f64> {
    x.into_iter()
        .zip(problem.lower().iter().zip(problem.upper()))
        .map(|(v, (&l, &u))| v.clamp(l, u))
        .collect()
}

/// Minimizes `sum_i w_i Fnorm_i` for every weight vector `w` of the simplex
/// lattice with `points` entries.
pub fn ws_scan(problem: &MooProblem, options: &RunOptions, solver: &SolverOptions) -> Result<Front, DriverError> {
    options.validate()?;
    solver.validate()?;
    let points = options
        .points
        .ok_or_else(|| DriverError::InvalidOptions("ws-scan needs a point count".into()))?;
    let k = problem.k();
    let m = (1..=points)
        .find(|&m| lattice_size(k, m) >= points)
        .filter(|&m| lattice_size(k, m) == points)
        .ok_or_else(|| {
            DriverError::InvalidOptions(format!(
                "{points} points do not form a simplex lattice for {k} objectives"
            ))
        })?;
    let counter = EvaluationCounter::new();
    let anchors = compute_anchors(problem, solver, &counter)?;
    let indices = lattice_indices(k, m)?;

    let solve = |(id, index): (usize, &Vec<u32>)| -> Result<Sample, DriverError> {
        let weights: Vec<f64> = index.iter().map(|&i| i as f64 / m as f64).collect();
        let x0: Vec<f64> = (0..problem.n())
            .map(|j| weights.iter().zip(&anchors.minimizers).map(|(w, xm)| w * xm[j]).sum())
            .collect();
        let sub = Subproblem::new(problem, &anchors, &counter, Phase::Baseline, Some(weights.clone()));
        let result = solve_nlp(&sub, &x0, solver)?;
        let x = problem.clamp_to_bounds(&result.v_star)?;
        let (f, fnorm) = sub.objectives_at(&x).unwrap_or_else(|| {
            let nan = vec![f64::NAN; k];
            (nan.clone(), nan)
        });
        let status = if f.iter().all(|v| v.is_finite()) {
            result.status.into()
        } else {
            SampleStatus::NumericalFailure
        };
        Ok(Sample {
            id,
            index: index.clone(),
            lambda: weights,
            x,
            f,
            fnorm,
            status,
        })
    };
    #[cfg(feature = "parallel")]
    let iter = indices.par_iter().enumerate();
    #[cfg(not(feature = "parallel"))]
    let iter = indices.iter().enumerate();
    let samples: Vec<Sample> = iter.map(solve).collect::<Result<_, _>>()?;
    Ok(finish(problem, RunMode::WsScan, samples, anchors, points, &counter, Vec::new()))
}
