//! Simplex-lattice ansatz meshes.
//!
//! Nodes are the points `(i_1/m, ..., i_k/m)` with non-negative integers
//! summing to `m`, numbered in lexicographic order of their multi-index.
//! A node whose non-zero components form the set `S` lives in the face of
//! the simplex spanned by `S`; its adjacency pairs run along the grid axes of
//! that face: for every `j` in `S` except the last element `d`, the two
//! neighbors `index -/+ (e_j - e_d)`. Both always exist, so interior nodes of
//! a k-simplex carry `k - 1` pairs, nodes on an edge of a triangle carry one,
//! and the simplex vertices carry none. A neighbor that is itself a vertex
//! is referenced as the corresponding anchor.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::AnchorSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("lattice needs k >= 2 and m >= 1 (got k = {k}, m = {m})")]
    InvalidShape { k: usize, m: usize },
    #[error("weight vector {row} is not on the lattice of resolution {m}")]
    OffLattice { row: usize, m: usize },
    #[error("anchor set has {got} objectives, mesh has {expected}")]
    AnchorMismatch { expected: usize, got: usize },
    #[error("mesh dump line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Reference to a neighbor: another lattice node or one of the anchors
/// (simplex vertices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NeighborRef {
    Node(usize),
    Anchor(usize),
}

impl std::fmt::Display for NeighborRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NeighborRef::Node(id) => write!(f, "n{id}"),
            NeighborRef::Anchor(i) => write!(f, "a{i}"),
        }
    }
}

impl std::str::FromStr for NeighborRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.parse::<usize>().map_err(|e| format!("bad reference `{s}`: {e}"));
        match s.split_at_checked(1) {
            Some(("n", rest)) => parse(rest).map(NeighborRef::Node),
            Some(("a", rest)) => parse(rest).map(NeighborRef::Anchor),
            _ => Err(format!("bad reference `{s}`")),
        }
    }
}

/// Grid direction `e_component - e_dependent` in multi-index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeAxis {
    pub component: usize,
    pub dependent: usize,
}

/// Opposing neighbors along one axis: `left` is one step against the axis,
/// `right` one step along it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyPair {
    pub axis: LatticeAxis,
    pub left: NeighborRef,
    pub right: NeighborRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshNode {
    pub id: usize,
    pub index: Vec<u32>,
    pub weights: Vec<f64>,
    /// Normalized objective-space estimate.
    pub position: Vec<f64>,
    pub adjacency: Vec<AdjacencyPair>,
    /// `Some(i)` for the vertex pinned to anchor `i`.
    pub vertex_of: Option<usize>,
}

impl MeshNode {
    pub fn is_vertex(&self) -> bool {
        self.vertex_of.is_some()
    }

    /// Number of distinct neighbor references.
    pub fn degree(&self) -> usize {
        let mut refs: Vec<NeighborRef> = self
            .adjacency
            .iter()
            .flat_map(|p| [p.left, p.right])
            .collect();
        refs.sort();
        refs.dedup();
        refs.len()
    }

    /// Every neighbor reference, in pair order.
    pub fn neighbors(&self) -> impl Iterator<Item = NeighborRef> + '_ {
        self.adjacency.iter().flat_map(|p| [p.left, p.right])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnsatzMesh {
    pub k: usize,
    pub resolution: usize,
    pub nodes: Vec<MeshNode>,
    /// Node id of the vertex pinned to each anchor.
    pub anchors: Vec<usize>,
}

/// `C(n, r)` in exact integer arithmetic.
pub fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of lattice points, `C(m + k - 1, k - 1)`.
pub fn lattice_size(k: usize, m: usize) -> usize {
    binomial((m + k - 1) as u64, (k - 1) as u64) as usize
}

fn check_shape(k: usize, m: usize) -> Result<(), MeshError> {
    if k < 2 || m < 1 {
        return Err(MeshError::InvalidShape { k, m });
    }
    Ok(())
}

/// All multi-indices with `k` non-negative parts summing to `m`, in
/// lexicographic order.
pub fn lattice_indices(k: usize, m: usize) -> Result<Vec<Vec<u32>>, MeshError> {
    check_shape(k, m)?;
    let mut out = Vec::with_capacity(lattice_size(k, m));
    let mut current = vec![0u32; k];
    fill(&mut current, 0, m as u32, &mut out);
    Ok(out)
}

fn fill(current: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(current.clone());
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        fill(current, pos + 1, remaining - v, out);
    }
}

/// Barycentric weights of every lattice point, lexicographic order.
pub fn simplex_lattice(k: usize, m: usize) -> Result<Vec<Vec<f64>>, MeshError> {
    Ok(lattice_indices(k, m)?
        .into_iter()
        .map(|idx| weights_of(&idx, m))
        .collect())
}

fn weights_of(index: &[u32], m: usize) -> Vec<f64> {
    index.iter().map(|&i| i as f64 / m as f64).collect()
}

/// Position of `index` in the lexicographic enumeration.
pub fn lattice_rank(index: &[u32]) -> usize {
    let k = index.len();
    let mut remaining: u64 = index.iter().map(|&i| i as u64).sum();
    let mut rank = 0u64;
    for (pos, &value) in index.iter().enumerate().take(k - 1) {
        let parts_after = (k - pos - 1) as u64;
        // Compositions with a smaller value at `pos` and the same prefix.
        for smaller in 0..value as u64 {
            let rest = remaining - smaller;
            rank += binomial(rest + parts_after - 1, parts_after - 1);
        }
        remaining -= value as u64;
    }
    rank as usize
}

/// Builds one node, weights and adjacency included, from its multi-index
/// alone. Positions are left empty.
pub fn node_at(index: &[u32], m: usize) -> MeshNode {
    let support: Vec<usize> = (0..index.len()).filter(|&i| index[i] > 0).collect();
    let vertex_of = (support.len() == 1).then(|| support[0]);
    let mut adjacency = Vec::new();
    if let Some((&dependent, free)) = support.split_last() {
        for &component in free {
            let mut left = index.to_vec();
            left[component] -= 1;
            left[dependent] += 1;
            let mut right = index.to_vec();
            right[component] += 1;
            right[dependent] -= 1;
            adjacency.push(AdjacencyPair {
                axis: LatticeAxis {
                    component,
                    dependent,
                },
                left: reference_of(&left, m),
                right: reference_of(&right, m),
            });
        }
    }
    MeshNode {
        id: lattice_rank(index),
        index: index.to_vec(),
        weights: weights_of(index, m),
        position: Vec::new(),
        adjacency,
        vertex_of,
    }
}

fn reference_of(index: &[u32], m: usize) -> NeighborRef {
    match index.iter().position(|&i| i as usize == m) {
        Some(vertex) => NeighborRef::Anchor(vertex),
        None => NeighborRef::Node(lattice_rank(index)),
    }
}

/// Derives the mesh (adjacency included) from a lattice produced by
/// [`simplex_lattice`].
pub fn build_adjacency(lattice: &[Vec<f64>], k: usize, m: usize) -> Result<AnsatzMesh, MeshError> {
    check_shape(k, m)?;
    let indices = lattice
        .iter()
        .enumerate()
        .map(|(row, w)| {
            let idx: Vec<u32> = w.iter().map(|&wi| (wi * m as f64).round() as u32).collect();
            let exact = w.len() == k
                && idx.iter().map(|&i| i as usize).sum::<usize>() == m
                && idx
                    .iter()
                    .zip(w)
                    .all(|(&i, &wi)| (i as f64 - wi * m as f64).abs() < 1e-9);
            if exact {
                Ok(idx)
            } else {
                Err(MeshError::OffLattice { row, m })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let nodes: Vec<MeshNode> = indices.iter().map(|idx| node_at(idx, m)).collect();
    let mut anchors = vec![usize::MAX; k];
    for (pos, node) in nodes.iter().enumerate() {
        if let Some(v) = node.vertex_of {
            anchors[v] = pos;
        }
    }
    Ok(AnsatzMesh {
        k,
        resolution: m,
        nodes,
        anchors,
    })
}

impl AnsatzMesh {
    pub fn new(k: usize, m: usize) -> Result<Self, MeshError> {
        build_adjacency(&simplex_lattice(k, m)?, k, m)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node id a reference points at (anchors resolve to their vertex node).
    pub fn resolve(&self, r: NeighborRef) -> usize {
        match r {
            NeighborRef::Node(id) => id,
            NeighborRef::Anchor(i) => self.anchors[i],
        }
    }

    /// One line per node: id, multi-index, weights and adjacency pairs
    /// (`component-dependent:left,right`).
    pub fn dump(&self) -> String {
        let mut out = format!("# ansatz mesh k={} m={} nodes={}\n", self.k, self.resolution, self.len());
        for node in &self.nodes {
            let index: Vec<String> = node.index.iter().map(u32::to_string).collect();
            let weights: Vec<String> = node.weights.iter().map(|w| format!("{w:.16e}")).collect();
            let pairs: Vec<String> = node
                .adjacency
                .iter()
                .map(|p| format!("{}-{}:{},{}", p.axis.component, p.axis.dependent, p.left, p.right))
                .collect();
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}",
                node.id,
                index.join(" "),
                weights.join(" "),
                if pairs.is_empty() { "-".to_string() } else { pairs.join(" ") }
            );
        }
        out
    }

    /// Reads a mesh written by [`AnsatzMesh::dump`].
    pub fn parse_dump(text: &str) -> Result<Self, MeshError> {
        let err = |line: usize, message: String| MeshError::Parse { line, message };
        let mut nodes = Vec::new();
        let mut shape = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let field = |key: &str| {
                    header
                        .split_whitespace()
                        .find_map(|t| t.strip_prefix(key))
                        .and_then(|v| v.parse::<usize>().ok())
                };
                if let (Some(k), Some(m)) = (field("k="), field("m=")) {
                    shape = Some((k, m));
                }
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(line_no, format!("expected 4 tab-separated columns, got {}", cols.len())));
            }
            let id = cols[0].parse::<usize>().map_err(|e| err(line_no, e.to_string()))?;
            let index = cols[1]
                .split_whitespace()
                .map(|t| t.parse::<u32>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(line_no, e.to_string()))?;
            let weights = cols[2]
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(line_no, e.to_string()))?;
            let mut adjacency = Vec::new();
            if cols[3] != "-" {
                for token in cols[3].split_whitespace() {
                    let (axis, refs) = token
                        .split_once(':')
                        .ok_or_else(|| err(line_no, format!("bad pair `{token}`")))?;
                    let (c, d) = axis
                        .split_once('-')
                        .ok_or_else(|| err(line_no, format!("bad axis `{axis}`")))?;
                    let (l, r) = refs
                        .split_once(',')
                        .ok_or_else(|| err(line_no, format!("bad pair `{token}`")))?;
                    adjacency.push(AdjacencyPair {
                        axis: LatticeAxis {
                            component: c.parse().map_err(|_| err(line_no, format!("bad axis `{axis}`")))?,
                            dependent: d.parse().map_err(|_| err(line_no, format!("bad axis `{axis}`")))?,
                        },
                        left: l.parse().map_err(|e| err(line_no, e))?,
                        right: r.parse().map_err(|e| err(line_no, e))?,
                    });
                }
            }
            let support = index.iter().filter(|&&i| i > 0).count();
            let vertex_of = (support == 1).then(|| index.iter().position(|&i| i > 0).unwrap_or(0));
            nodes.push(MeshNode {
                id,
                index,
                weights,
                position: Vec::new(),
                adjacency,
                vertex_of,
            });
        }
        let (k, m) = shape.ok_or_else(|| err(1, "missing `# ... k=.. m=..` header".into()))?;
        let mut anchors = vec![usize::MAX; k];
        for (pos, node) in nodes.iter().enumerate() {
            if node.id != pos {
                return Err(err(pos + 2, format!("node ids must be consecutive, found {}", node.id)));
            }
            if let Some(v) = node.vertex_of {
                if v < k {
                    anchors[v] = pos;
                }
            }
        }
        Ok(Self {
            k,
            resolution: m,
            nodes,
            anchors,
        })
    }
}

/// Places every node at the barycentric combination of the normalized
/// anchor objectives.
pub fn initial_positions(mut mesh: AnsatzMesh, anchors: &AnchorSet) -> Result<AnsatzMesh, MeshError> {
    if anchors.k() != mesh.k {
        return Err(MeshError::AnchorMismatch {
            expected: mesh.k,
            got: anchors.k(),
        });
    }
    let corners: Vec<Vec<f64>> = (0..mesh.k).map(|i| anchors.normalized_anchor(i)).collect();
    for node in &mut mesh.nodes {
        node.position = match node.vertex_of {
            Some(v) => corners[v].clone(),
            None => (0..mesh.k)
                .map(|j| node.weights.iter().zip(&corners).map(|(w, c)| w * c[j]).sum())
                .collect(),
        };
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn lattice_counts_match_figures() {
        assert_eq!(simplex_lattice(3, 14).unwrap().len(), 120);
        assert_eq!(simplex_lattice(4, 9).unwrap().len(), 220);
    }

    #[test]
    fn one_simplex_subdivision() {
        let w = simplex_lattice(2, 4).unwrap();
        let expected = [[0.0, 1.0], [0.25, 0.75], [0.5, 0.5], [0.75, 0.25], [1.0, 0.0]];
        assert_eq!(w.len(), 5);
        for (got, want) in w.iter().zip(expected) {
            assert_eq!(got.as_slice(), want.as_slice());
        }
    }

    #[test]
    fn rejects_degenerate_shapes() {
        assert!(simplex_lattice(1, 4).is_err());
        assert!(simplex_lattice(3, 0).is_err());
    }

    #[test]
    fn chain_middle_node_pairs_its_two_neighbors() {
        let mesh = AnsatzMesh::new(2, 4).unwrap();
        let middle = &mesh.nodes[2];
        assert_eq!(middle.weights, vec![0.5, 0.5]);
        assert_eq!(middle.adjacency.len(), 1);
        let pair = middle.adjacency[0];
        assert_eq!(mesh.nodes[mesh.resolve(pair.left)].weights, vec![0.25, 0.75]);
        assert_eq!(mesh.nodes[mesh.resolve(pair.right)].weights, vec![0.75, 0.25]);
    }

    #[test]
    fn chain_end_nodes_reference_anchors() {
        let mesh = AnsatzMesh::new(2, 4).unwrap();
        let first = &mesh.nodes[1];
        assert_eq!(first.adjacency[0].left, NeighborRef::Anchor(1));
        assert_eq!(first.adjacency[0].right, NeighborRef::Node(2));
        assert!(mesh.nodes[0].is_vertex() && mesh.nodes[0].adjacency.is_empty());
        assert_eq!(mesh.anchors, vec![4, 0]);
    }

    #[test]
    fn triangle_interior_and_edge_pair_counts() {
        let mesh = AnsatzMesh::new(3, 14).unwrap();
        for node in &mesh.nodes {
            let zeros = node.index.iter().filter(|&&i| i == 0).count();
            let expected = match zeros {
                0 => 2,
                1 => 1,
                _ => 0,
            };
            assert_eq!(node.adjacency.len(), expected, "node {:?}", node.index);
        }
    }

    #[test]
    fn edge_node_next_to_vertex_pairs_with_anchor() {
        // Edge i3 = 0, one step from vertex 1: neighbors are the vertex and
        // the next edge node.
        let mesh = AnsatzMesh::new(3, 4).unwrap();
        let id = lattice_rank(&[3, 1, 0]);
        let node = &mesh.nodes[id];
        assert_eq!(node.adjacency.len(), 1);
        let pair = node.adjacency[0];
        assert_eq!(pair.right, NeighborRef::Anchor(0));
        assert_eq!(pair.left, NeighborRef::Node(lattice_rank(&[2, 2, 0])));
    }

    #[test]
    fn initial_positions_are_barycentric() {
        let anchors = AnchorSet::from_payoff(
            vec![vec![0.0]; 3],
            vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]],
        );
        let mesh = initial_positions(AnsatzMesh::new(3, 3).unwrap(), &anchors).unwrap();
        let centroid = &mesh.nodes[lattice_rank(&[1, 1, 1])];
        for v in &centroid.position {
            assert_abs_diff_eq!(*v, 2.0 / 3.0, epsilon = 1e-15);
        }
        let vertex = &mesh.nodes[mesh.anchors[0]];
        assert_eq!(vertex.position, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn centroid_of_unit_vertices() {
        let anchors = AnchorSet::from_payoff(
            vec![vec![0.0]; 3],
            vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        );
        let mesh = initial_positions(AnsatzMesh::new(3, 3).unwrap(), &anchors).unwrap();
        let centroid = &mesh.nodes[lattice_rank(&[1, 1, 1])];
        for v in &centroid.position {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn two_objective_midpoint() {
        let anchors = AnchorSet::from_payoff(vec![vec![0.0]; 2], vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let mesh = initial_positions(AnsatzMesh::new(2, 2).unwrap(), &anchors).unwrap();
        assert_eq!(mesh.nodes[1].position, vec![0.5, 0.5]);
    }

    #[test]
    fn dump_round_trip() {
        let mesh = AnsatzMesh::new(4, 3).unwrap();
        let parsed = AnsatzMesh::parse_dump(&mesh.dump()).unwrap();
        assert_eq!(parsed, mesh);
    }

    #[test]
    fn dump_parse_error_has_line_number() {
        let text = "# ansatz mesh k=2 m=2 nodes=3\n0\t0 2\t0 1\t-\n1\t1 1\tx y\t-\n";
        match AnsatzMesh::parse_dump(text) {
            Err(MeshError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn off_lattice_weights_rejected() {
        assert!(build_adjacency(&[vec![0.3, 0.7]], 2, 4).is_err());
    }

    proptest! {
        #[test]
        fn cardinality_and_degree(k in 2usize..=5, m in 1usize..=20) {
            let mesh = AnsatzMesh::new(k, m).unwrap();
            prop_assert_eq!(mesh.len(), lattice_size(k, m));
            for (pos, node) in mesh.nodes.iter().enumerate() {
                prop_assert_eq!(node.id, pos);
                let sum: f64 = node.weights.iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(node.weights.iter().all(|&w| (0.0..=1.0).contains(&w)));
                prop_assert!(node.adjacency.len() < k);
                prop_assert!(node.degree() <= 2 * (k - 1));
                prop_assert_eq!(node.adjacency.is_empty(), node.is_vertex());
                for pair in &node.adjacency {
                    prop_assert_ne!(pair.left, pair.right);
                    prop_assert_ne!(mesh.resolve(pair.left), pos);
                    prop_assert_ne!(mesh.resolve(pair.right), pos);
                }
            }
        }

        #[test]
        fn node_generation_is_local(k in 2usize..=5, m in 1usize..=12, pick in 0usize..10_000) {
            let mesh = AnsatzMesh::new(k, m).unwrap();
            let node = &mesh.nodes[pick % mesh.len()];
            prop_assert_eq!(&node_at(&node.index, m), node);
        }

        #[test]
        fn same_face_adjacency_is_symmetric(k in 2usize..=4, m in 1usize..=10) {
            let mesh = AnsatzMesh::new(k, m).unwrap();
            let support = |n: &MeshNode| n.index.iter().map(|&i| i > 0).collect::<Vec<_>>();
            for node in &mesh.nodes {
                for r in node.neighbors() {
                    let other = &mesh.nodes[mesh.resolve(r)];
                    if support(other) == support(node) {
                        prop_assert!(other.neighbors().any(|b| mesh.resolve(b) == node.id));
                    }
                }
            }
        }

        #[test]
        fn ansatz_lies_in_anchor_hull(k in 2usize..=4, m in 1usize..=8, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let objs: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
            let anchors = AnchorSet::from_payoff(vec![vec![0.0]; k], objs);
            prop_assume!(anchors.degenerate_axis().is_none());
            let mesh = initial_positions(AnsatzMesh::new(k, m).unwrap(), &anchors).unwrap();
            let corners: Vec<Vec<f64>> = (0..k).map(|i| anchors.normalized_anchor(i)).collect();
            for node in &mesh.nodes {
                for j in 0..k {
                    let lo = corners.iter().map(|c| c[j]).fold(f64::INFINITY, f64::min);
                    let hi = corners.iter().map(|c| c[j]).fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(node.position[j] >= lo - 1e-12 && node.position[j] <= hi + 1e-12);
                    let combo: f64 = node.weights.iter().zip(&corners).map(|(w, c)| w * c[j]).sum();
                    prop_assert!((combo - node.position[j]).abs() < 1e-12);
                }
            }
        }
    }
}
