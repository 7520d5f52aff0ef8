use std::collections::HashMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::subproblem::assemble_subproblem;
use super::{compute_anchors, DriverError, Front, RunMode, RunOptions, Sample, SampleStatus, SweepRecord};
use crate::mesh::{initial_positions, AnsatzMesh};
use crate::nlp::{solve_nlp_warm, SolverOptions, WarmStart};
use crate::problem::{AnchorSet, EvaluationCounter, MooProblem};

// Each node is solved twice. The free weights make the scalarization
// degenerate wherever a face of the front is only weakly optimal, so a
// guiding solve first picks the solution nearest the previous position
// among properly optimal points; the plain subproblem then polishes it.
const PROXIMAL_WEIGHT: f64 = 0.5;
const AUGMENT_WEIGHT: f64 = 0.01;

#[derive(Debug, Clone)]
struct NodeState {
    x: Vec<f64>,
    lambda: Vec<f64>,
    f: Vec<f64>,
    fnorm: Vec<f64>,
    status: SampleStatus,
    warm: Option<WarmStart>,
}

struct NodeUpdate {
    id: usize,
    state: NodeState,
    moved: f64,
}

/// An in-progress homotopy run that can be advanced one sweep at a time.
pub struct HomotopyRun {
    problem: MooProblem,
    options: RunOptions,
    solver: SolverOptions,
    anchors: AnchorSet,
    mesh: AnsatzMesh,
    states: Vec<NodeState>,
    counter: EvaluationCounter,
    history: Vec<SweepRecord>,
}

impl HomotopyRun {
    /// Computes the anchors and lays out the ansatz mesh.
    pub fn new(problem: MooProblem, options: RunOptions, solver: SolverOptions) -> Result<Self, DriverError> {
        options.validate()?;
        solver.validate()?;
        if !options.mode.is_homotopy() {
            return Err(DriverError::InvalidOptions(format!(
                "mode {} is not a homotopy mode",
                options.mode.label()
            )));
        }
        let counter = EvaluationCounter::new();
        let anchors = compute_anchors(&problem, &solver, &counter)?;
        let mesh = initial_positions(AnsatzMesh::new(problem.k(), options.resolution)?, &anchors)?;
        let states = mesh
            .nodes
            .iter()
            .map(|node| match node.vertex_of {
                Some(v) => NodeState {
                    x: anchors.minimizers[v].clone(),
                    lambda: node.weights.clone(),
                    f: anchors.anchor_objectives[v].clone(),
                    fnorm: node.position.clone(),
                    status: SampleStatus::Anchor,
                    warm: None,
                },
                None => {
                    let x = (0..problem.n())
                        .map(|j| {
                            node.weights
                                .iter()
                                .zip(&anchors.minimizers)
                                .map(|(w, xm)| w * xm[j])
                                .sum()
                        })
                        .collect();
                    NodeState {
                        x,
                        lambda: node.weights.clone(),
                        f: crate::problem::denormalize(&node.position, &anchors),
                        fnorm: node.position.clone(),
                        status: SampleStatus::Pending,
                        warm: None,
                    }
                }
            })
            .collect();
        Ok(Self {
            problem,
            options,
            solver,
            anchors,
            mesh,
            states,
            counter,
            history: Vec::new(),
        })
    }

    pub fn anchors(&self) -> &AnchorSet {
        &self.anchors
    }

    pub fn counter(&self) -> &EvaluationCounter {
        &self.counter
    }

    pub fn history(&self) -> &[SweepRecord] {
        &self.history
    }

    pub fn sweeps_run(&self) -> usize {
        self.history.len()
    }

    /// True once the last sweep moved no node farther than `move_tol`.
    pub fn settled(&self) -> bool {
        self.history
            .last()
            .is_some_and(|r| r.max_move < self.options.move_tol)
    }

    pub fn finished(&self) -> bool {
        self.settled() || self.sweeps_run() >= self.options.max_sweeps
    }

    /// Current normalized positions, indexed by node id.
    pub fn positions(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.fnorm.clone()).collect()
    }

    fn solve_node(&self, id: usize, positions: &[Vec<f64>]) -> Result<NodeUpdate, DriverError> {
        let node = &self.mesh.nodes[id];
        let prior = &self.states[id];
        let neighbors: HashMap<_, _> = node
            .neighbors()
            .map(|r| (r, positions[self.mesh.resolve(r)].clone()))
            .collect();
        let sub = assemble_subproblem(&self.problem, &self.anchors, node, &neighbors, &self.counter)?
            .with_guide(prior.fnorm.clone(), PROXIMAL_WEIGHT, AUGMENT_WEIGHT);
        let v0: Vec<f64> = prior.x.iter().chain(&prior.lambda).copied().collect();
        let guided = solve_nlp_warm(&sub, &v0, &self.solver, prior.warm.as_ref())?;
        let sub = sub.without_guide();
        let result = if guided.converged() {
            solve_nlp_warm(&sub, &guided.v_star, &self.solver, Some(&guided.warm))?
        } else {
            solve_nlp_warm(&sub, &v0, &self.solver, prior.warm.as_ref())?
        };
        let mut state = prior.clone();
        state.status = result.status.into();
        if result.converged() {
            let x = self.problem.clamp_to_bounds(sub.design(&result.v_star))?;
            if let Some((f, fnorm)) = sub.objectives_at(&x) {
                state.lambda = sub.weights(&result.v_star);
                state.x = x;
                state.f = f;
                state.fnorm = fnorm;
                state.warm = Some(result.warm);
            } else {
                state.status = SampleStatus::NumericalFailure;
            }
        } else {
            state.warm = None;
        }
        let moved = state
            .fnorm
            .iter()
            .zip(&prior.fnorm)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Ok(NodeUpdate { id, state, moved })
    }

    fn free_nodes(&self) -> Vec<usize> {
        self.mesh
            .nodes
            .iter()
            .filter(|n| !n.is_vertex())
            .map(|n| n.id)
            .collect()
    }

    /// Runs one sweep over every non-vertex node.
    ///
    /// Gauss-Seidel runs still project the ansatz with a Jacobi sweep first:
    /// pairing a node against one projected and one unprojected neighbor
    /// yields equispacing lines that graze the front.
    pub fn step(&mut self) -> Result<SweepRecord, DriverError> {
        let ids = self.free_nodes();
        let mut max_move = 0.0f64;
        match self.options.mode {
            RunMode::GaussSeidel if !self.history.is_empty() => {
                let mut positions = self.positions();
                for id in ids {
                    let update = self.solve_node(id, &positions)?;
                    positions[id] = update.state.fnorm.clone();
                    max_move = max_move.max(update.moved);
                    self.states[id] = update.state;
                }
            }
            _ => {
                let snapshot = self.positions();
                #[cfg(feature = "parallel")]
                let iter = ids.par_iter();
                #[cfg(not(feature = "parallel"))]
                let iter = ids.iter();
                let updates: Vec<NodeUpdate> = iter
                    .map(|&id| self.solve_node(id, &snapshot))
                    .collect::<Result<_, _>>()?;
                for update in updates {
                    max_move = max_move.max(update.moved);
                    self.states[update.id] = update.state;
                }
            }
        }
        let record = SweepRecord {
            sweep: self.history.len() + 1,
            max_move,
            converged: self.states.iter().filter(|s| s.status.is_converged()).count(),
            fe_total: self.counter.total(),
        };
        self.history.push(record);
        Ok(record)
    }

    /// Sweeps until settled or out of sweeps.
    pub fn run_to_end(&mut self) -> Result<(), DriverError> {
        while !self.finished() {
            self.step()?;
        }
        Ok(())
    }

    /// Snapshot of the current front.
    pub fn front(&self) -> Front {
        let mut mesh = self.mesh.clone();
        for (node, state) in mesh.nodes.iter_mut().zip(&self.states) {
            node.position = state.fnorm.clone();
        }
        let samples = mesh
            .nodes
            .iter()
            .zip(&self.states)
            .map(|(node, s)| Sample {
                id: node.id,
                index: node.index.clone(),
                lambda: s.lambda.clone(),
                x: s.x.clone(),
                f: s.f.clone(),
                fnorm: s.fnorm.clone(),
                status: s.status,
            })
            .collect();
        Front {
            problem: self.problem.name().to_string(),
            mode: self.options.mode,
            samples,
            anchors: self.anchors.clone(),
            iterations_run: self.history.len(),
            fe_total: self.counter.total(),
            fe_per_phase: self.counter.per_phase(),
            history: self.history.clone(),
            notes: Vec::new(),
            mesh: Some(mesh),
        }
    }
}

/// Computes anchors, builds the mesh and sweeps until every node moves less
/// than `move_tol` or `max_sweeps` is reached.
pub fn run_homotopy(problem: &MooProblem, options: &RunOptions, solver: &SolverOptions) -> Result<Front, DriverError> {
    let mut run = HomotopyRun::new(problem.clone(), options.clone(), *solver)?;
    run.run_to_end()?;
    Ok(run.front())
}
