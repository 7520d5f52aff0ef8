//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns flat `Float64Array`s: `k` consecutive numbers per
//! point. The plain Rust functions underneath are what the native tests use.

use homotopy_moo::driver::{ws_scan, HomotopyRun, RunMode, RunOptions};
use homotopy_moo::mesh::{lattice_size, simplex_lattice};
use homotopy_moo::metrics::evenness;
use homotopy_moo::nlp::SolverOptions;
use homotopy_moo::problem::builtin_problem;
use wasm_bindgen::prelude::*;

fn flatten(points: impl IntoIterator<Item = Vec<f64>>) -> Vec<f64> {
    points.into_iter().flatten().collect()
}

/// Weights of the simplex lattice with `k` components and subdivision `m`.
pub fn lattice_weights(k: usize, m: usize) -> Result<Vec<f64>, String> {
    simplex_lattice(k, m).map(flatten).map_err(|e| e.to_string())
}

/// Sweep-by-sweep homotopy run on a built-in problem.
pub struct Session {
    run: HomotopyRun,
    k: usize,
}

impl Session {
    pub fn start(problem: &str, resolution: usize) -> Result<Self, String> {
        let problem = builtin_problem(problem).map_err(|e| e.to_string())?;
        let k = problem.k();
        let options = RunOptions {
            resolution,
            max_sweeps: usize::MAX,
            mode: RunMode::Jacobi,
            ..RunOptions::default()
        };
        let run = HomotopyRun::new(problem, options, SolverOptions::default()).map_err(|e| e.to_string())?;
        Ok(Self { run, k })
    }

    /// One sweep; returns the largest node move.
    pub fn step(&mut self) -> Result<f64, String> {
        self.run.step().map(|r| r.max_move).map_err(|e| e.to_string())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sweeps(&self) -> usize {
        self.run.sweeps_run()
    }

    pub fn fe_total(&self) -> u64 {
        self.run.counter().total()
    }

    /// Normalized objective vectors of every node.
    pub fn positions(&self) -> Vec<f64> {
        flatten(self.run.positions())
    }

    /// Evenness of the converged nodes in normalized space.
    pub fn evenness(&self) -> Option<f64> {
        let front = self.run.front();
        let pts: Vec<Vec<f64>> = front
            .samples
            .iter()
            .filter(|s| s.status.is_converged())
            .map(|s| s.fnorm.clone())
            .collect();
        evenness(&pts).ok().map(|r| r.e)
    }
}

/// Weighted-sum scan with as many points as the lattice of `resolution`,
/// as normalized objective vectors followed by their evenness.
pub fn weighted_sum_scan(problem: &str, resolution: usize) -> Result<(Vec<f64>, Option<f64>), String> {
    let problem = builtin_problem(problem).map_err(|e| e.to_string())?;
    let options = RunOptions {
        mode: RunMode::WsScan,
        points: Some(lattice_size(problem.k(), resolution)),
        ..RunOptions::default()
    };
    let front = ws_scan(&problem, &options, &SolverOptions::default()).map_err(|e| e.to_string())?;
    let pts: Vec<Vec<f64>> = front
        .samples
        .iter()
        .filter(|s| s.status.is_converged())
        .map(|s| s.fnorm.clone())
        .collect();
    let e = evenness(&pts).ok().map(|r| r.e);
    Ok((flatten(pts), e))
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen(js_name = ansatzMesh)]
pub fn ansatz_mesh(k: usize, m: usize) -> Result<Vec<f64>, JsError> {
    lattice_weights(k, m).map_err(js)
}

#[wasm_bindgen]
pub struct Demo {
    inner: Session,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(problem: &str, resolution: usize) -> Result<Demo, JsError> {
        Session::start(problem, resolution).map(|inner| Demo { inner }).map_err(js)
    }

    pub fn step(&mut self) -> Result<f64, JsError> {
        self.inner.step().map_err(js)
    }

    #[wasm_bindgen(getter)]
    pub fn k(&self) -> usize {
        self.inner.k()
    }

    #[wasm_bindgen(getter)]
    pub fn sweeps(&self) -> usize {
        self.inner.sweeps()
    }

    #[wasm_bindgen(getter, js_name = feTotal)]
    pub fn fe_total(&self) -> f64 {
        self.inner.fe_total() as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        self.inner.positions()
    }

    /// NaN when fewer than three nodes have converged.
    pub fn evenness(&self) -> f64 {
        self.inner.evenness().unwrap_or(f64::NAN)
    }
}

/// Normalized weighted-sum front; the last entry is its evenness.
#[wasm_bindgen(js_name = wsFront)]
pub fn ws_front(problem: &str, resolution: usize) -> Result<Vec<f64>, JsError> {
    let (mut pts, e) = weighted_sum_scan(problem, resolution).map_err(js)?;
    pts.push(e.unwrap_or(f64::NAN));
    Ok(pts)
}
