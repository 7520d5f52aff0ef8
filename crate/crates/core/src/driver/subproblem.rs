use std::cell::RefCell;
use std::collections::HashMap;

use super::DriverError;
use crate::mesh::{MeshNode, NeighborRef};
use crate::nlp::{NlpModel, NlpValues};
use crate::problem::{normalize_unchecked, AnchorSet, EvaluationCounter, MooProblem, Phase};

/// `F`, `g` and `h` at one design point.
#[derive(Debug, Clone)]
struct Evaluated {
    key: Vec<u64>,
    f: Option<Vec<f64>>,
    fnorm: Vec<f64>,
    g: Vec<f64>,
    h: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Guide {
    center: Vec<f64>,
    proximal: f64,
    augment: f64,
}

/// A scalarized subproblem over `v = (x, lambda)`, or over `x` alone when
/// the weights are fixed.
///
/// Objective: `sum_i lambda_i Fnorm_i(x)`. Equalities: `h(x)`, then (free
/// weights only) `sum lambda - 1`, then one balance constraint
/// `|Fnorm - P_l|^2 - |Fnorm - P_r|^2` per adjacency pair, then the optional
/// raw-space step constraint `|F - F_prev|^2 - gamma^2`. Inequalities: `g(x)`.
///
/// Objective vectors are cached per design point, so probes that only move
/// the weights cost no evaluation.
pub struct Subproblem<'a> {
    problem: &'a MooProblem,
    anchors: &'a AnchorSet,
    counter: &'a EvaluationCounter,
    phase: Phase,
    fixed_weights: Option<Vec<f64>>,
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    step: Option<(Vec<f64>, f64)>,
    guide: Option<Guide>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    // Last base point and last probe point.
    cache: RefCell<[Option<Evaluated>; 2]>,
}

impl<'a> Subproblem<'a> {
    pub(crate) fn new(
        problem: &'a MooProblem,
        anchors: &'a AnchorSet,
        counter: &'a EvaluationCounter,
        phase: Phase,
        fixed_weights: Option<Vec<f64>>,
    ) -> Self {
        let mut lower = problem.lower().to_vec();
        let mut upper = problem.upper().to_vec();
        if fixed_weights.is_none() {
            lower.extend(std::iter::repeat_n(0.0, problem.k()));
            upper.extend(std::iter::repeat_n(1.0, problem.k()));
        }
        Self {
            problem,
            anchors,
            counter,
            phase,
            fixed_weights,
            pairs: Vec::new(),
            step: None,
            guide: None,
            lower,
            upper,
            cache: RefCell::new([None, None]),
        }
    }

    /// Adds `|Fnorm - left|^2 = |Fnorm - right|^2`.
    pub(crate) fn with_pair(mut self, left: Vec<f64>, right: Vec<f64>) -> Self {
        self.pairs.push((left, right));
        self
    }

    /// Adds `|F - previous|^2 = gamma^2` in raw objective space.
    pub(crate) fn with_step(mut self, previous: Vec<f64>, gamma: f64) -> Self {
        self.step = Some((previous, gamma));
        self
    }

    /// Adds `proximal * |Fnorm - center|^2 + augment * sum_i Fnorm_i` to the
    /// objective. The proximal part favors the local solution nearest
    /// `center`; the augmented part rules out dominated points that a zero
    /// weight would leave undetermined.
    pub fn with_guide(mut self, center: Vec<f64>, proximal: f64, augment: f64) -> Self {
        self.guide = Some(Guide {
            center,
            proximal,
            augment,
        });
        self
    }

    /// The same subproblem without the guiding terms.
    pub fn without_guide(mut self) -> Self {
        self.guide = None;
        self
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Design part of `v`.
    pub fn design<'v>(&self, v: &'v [f64]) -> &'v [f64] {
        &v[..self.problem.n()]
    }

    /// Weights encoded by `v`.
    pub fn weights(&self, v: &[f64]) -> Vec<f64> {
        match &self.fixed_weights {
            Some(w) => w.clone(),
            None => v[self.problem.n()..].to_vec(),
        }
    }

    fn lookup(&self, x: &[f64], probe: bool) -> Evaluated {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        {
            let cache = self.cache.borrow();
            if let Some(hit) = cache.iter().flatten().find(|e| e.key == key) {
                return hit.clone();
            }
        }
        let phase = if probe { Phase::FiniteDifference } else { self.phase };
        self.counter.record(phase);
        let f = self.problem.objectives(x);
        let finite = f.iter().all(|v| v.is_finite());
        let entry = Evaluated {
            key,
            fnorm: if finite {
                normalize_unchecked(&f, self.anchors)
            } else {
                vec![f64::NAN; f.len()]
            },
            f: finite.then_some(f),
            g: self.problem.inequalities(x),
            h: self.problem.equalities(x),
        };
        self.cache.borrow_mut()[usize::from(probe)] = Some(entry.clone());
        entry
    }

    /// Raw and normalized objectives at `x`, from the cache when possible.
    pub fn objectives_at(&self, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let e = self.lookup(x, false);
        e.f.map(|f| (f, e.fnorm))
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl NlpModel for Subproblem<'_> {
    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn num_eq(&self) -> usize {
        self.problem.e()
            + usize::from(self.fixed_weights.is_none())
            + self.pairs.len()
            + usize::from(self.step.is_some())
    }

    fn num_ineq(&self) -> usize {
        self.problem.m()
    }

    fn evaluate(&self, v: &[f64], probe: bool) -> NlpValues {
        let x = self.design(v);
        let e = self.lookup(x, probe);
        let weights = self.weights(v);
        let mut objective: f64 = weights.iter().zip(&e.fnorm).map(|(w, f)| w * f).sum();
        if let Some(g) = &self.guide {
            objective += g.proximal * dist2(&e.fnorm, &g.center) + g.augment * e.fnorm.iter().sum::<f64>();
        }
        let mut eq = e.h;
        if self.fixed_weights.is_none() {
            eq.push(weights.iter().sum::<f64>() - 1.0);
        }
        for (left, right) in &self.pairs {
            eq.push(dist2(&e.fnorm, left) - dist2(&e.fnorm, right));
        }
        if let Some((previous, gamma)) = &self.step {
            let d = e.f.as_ref().map_or(f64::NAN, |f| dist2(f, previous));
            eq.push(d - gamma * gamma);
        }
        NlpValues {
            objective,
            eq,
            ineq: e.g,
        }
    }
}

/// Builds the subproblem of `node` from the positions of exactly the
/// neighbors its adjacency pairs reference.
pub fn assemble_subproblem<'a>(
    problem: &'a MooProblem,
    anchors: &'a AnchorSet,
    node: &MeshNode,
    neighbor_positions: &HashMap<NeighborRef, Vec<f64>>,
    counter: &'a EvaluationCounter,
) -> Result<Subproblem<'a>, DriverError> {
    let fetch = |r: NeighborRef| {
        neighbor_positions
            .get(&r)
            .cloned()
            .ok_or(DriverError::MissingNeighbor(r))
    };
    let mut sub = Subproblem::new(problem, anchors, counter, Phase::Sweeps, None);
    for pair in &node.adjacency {
        sub = sub.with_pair(fetch(pair.left)?, fetch(pair.right)?);
    }
    Ok(sub)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::AnsatzMesh;
    use crate::problem::builtin_problem;

    fn unit_anchors(k: usize) -> AnchorSet {
        let objs = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
            .collect();
        AnchorSet::from_payoff(vec![vec![0.0]; k], objs)
    }

    fn positions_for(mesh: &AnsatzMesh, node: &MeshNode) -> HashMap<NeighborRef, Vec<f64>> {
        node.neighbors()
            .map(|r| (r, mesh.nodes[mesh.resolve(r)].weights.clone()))
            .collect()
    }

    #[test]
    fn constraint_counts_for_interior_and_edge_nodes() {
        let problem = builtin_problem("motta1").unwrap();
        let anchors = unit_anchors(3);
        let counter = EvaluationCounter::new();
        let mesh = AnsatzMesh::new(3, 4).unwrap();
        let interior = &mesh.nodes[crate::mesh::lattice_rank(&[1, 2, 1])];
        let sub = assemble_subproblem(&problem, &anchors, interior, &positions_for(&mesh, interior), &counter).unwrap();
        assert_eq!(sub.num_eq(), problem.e() + 1 + 2);
        assert_eq!(sub.dim(), problem.n() + 3);
        let edge = &mesh.nodes[crate::mesh::lattice_rank(&[2, 2, 0])];
        let sub = assemble_subproblem(&problem, &anchors, edge, &positions_for(&mesh, edge), &counter).unwrap();
        assert_eq!(sub.num_eq(), problem.e() + 1 + 1);
    }

    #[test]
    fn missing_neighbor_is_named() {
        let problem = builtin_problem("biobj-convex").unwrap();
        let anchors = unit_anchors(2);
        let counter = EvaluationCounter::new();
        let mesh = AnsatzMesh::new(2, 4).unwrap();
        let node = &mesh.nodes[1];
        let mut map = positions_for(&mesh, node);
        map.remove(&NeighborRef::Anchor(1));
        match assemble_subproblem(&problem, &anchors, node, &map, &counter) {
            Err(DriverError::MissingNeighbor(r)) => assert_eq!(r, NeighborRef::Anchor(1)),
            Err(e) => panic!("unexpected error {e}"),
            Ok(_) => panic!("assembly should fail"),
        }
    }

    #[test]
    fn balance_vanishes_on_the_bisector() {
        let problem = builtin_problem("biobj-convex").unwrap();
        let anchors = AnchorSet::from_payoff(vec![vec![0.0], vec![2.0]], vec![vec![0.0, 4.0], vec![4.0, 0.0]]);
        let counter = EvaluationCounter::new();
        let sub = Subproblem::new(&problem, &anchors, &counter, Phase::Sweeps, None)
            .with_pair(vec![0.0, 1.0], vec![1.0, 0.0]);
        // x = 1 gives F = (1, 1), on the line f1 = f2.
        let values = sub.evaluate(&[1.0, 0.5, 0.5], false);
        assert_eq!(values.eq, vec![0.0, 0.0]);
        let off = sub.evaluate(&[0.5, 0.5, 0.5], false);
        assert!(off.eq[1].abs() > 0.1);
    }

    #[test]
    fn guide_terms_add_to_the_objective() {
        let problem = builtin_problem("biobj-convex").unwrap();
        let anchors = AnchorSet::from_payoff(vec![vec![0.0], vec![2.0]], vec![vec![0.0, 4.0], vec![4.0, 0.0]]);
        let counter = EvaluationCounter::new();
        let plain = Subproblem::new(&problem, &anchors, &counter, Phase::Sweeps, None);
        let v = [1.0, 0.25, 0.75];
        let base = plain.evaluate(&v, false).objective;
        // Fnorm at x = 1 is (0.25, 0.25).
        let guided = plain.with_guide(vec![0.25, 0.75], 2.0, 0.1);
        let with = guided.evaluate(&v, false).objective;
        assert!((with - base - (2.0 * 0.25 + 0.1 * 0.5)).abs() < 1e-12);
        let back = guided.without_guide().evaluate(&v, false).objective;
        assert_eq!(back, base);
    }

    #[test]
    fn weight_probes_reuse_the_cached_objectives() {
        let problem = builtin_problem("motta1").unwrap();
        let anchors = unit_anchors(3);
        let counter = EvaluationCounter::new();
        let sub = Subproblem::new(&problem, &anchors, &counter, Phase::Sweeps, None);
        sub.evaluate(&[1.0, 1.0, 1.0, 0.2, 0.3, 0.5], false);
        sub.evaluate(&[1.0, 1.0, 1.0, 0.3, 0.3, 0.4], true);
        assert_eq!(counter.total(), 1);
        sub.evaluate(&[1.0, 1.0, 1.000001, 0.2, 0.3, 0.5], true);
        assert_eq!(counter.phase(Phase::Sweeps), 1);
        assert_eq!(counter.phase(Phase::FiniteDifference), 1);
    }
}
