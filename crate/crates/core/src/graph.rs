//! Undirected unit-weight graphs, leader/follower partitions and the
//! matrices of the semi-autonomous consensus loop.
//!
//! With leaders `V_l` receiving constant inputs `y`, the closed loop reads
//!
//! ```text
//! d/dt [x; y] = -[L11 L12; 0 0] [x; y]
//! L11 = L(G) + diag(1 on leader rows)     (grounded Laplacian)
//! L12 = -I on leader rows, 0 on follower rows
//! ```
//!
//! Node indices are 0-based here; files use 1-based labels (see [`GraphFile`]).

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }

    /// 1-based label used in files and CLI output.
    pub fn label(self) -> usize {
        self.0 + 1
    }

    pub fn from_label(label: usize) -> Option<Self> {
        label.checked_sub(1).map(NodeId)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Simple undirected graph with unit edge weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph from an edge list. Pairs are unordered; `(i, j)` and
    /// `(j, i)` count as the same edge.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            for index in [a, b] {
                if index >= n {
                    return Err(Error::IndexOutOfRange { index, n });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges: seen.into_iter().collect(),
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Canonical edge list, each pair `(min, max)`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    /// True iff a breadth-first search from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }

    /// Component label per node, numbered in order of first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in &self.adjacency[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Standard Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = -self.adjacency_matrix();
        for i in 0..self.n {
            l[(i, i)] = self.degree(i) as f64;
        }
        l
    }
}

/// Disjoint leader/follower split of a graph's nodes. Both sides are nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    is_leader: Vec<bool>,
    leaders: Vec<NodeId>,
    followers: Vec<NodeId>,
}

impl Partition {
    pub fn new(n: usize, leaders: &[usize]) -> Result<Self> {
        let mut is_leader = vec![false; n];
        for &l in leaders {
            if l >= n {
                return Err(Error::IndexOutOfRange { index: l, n });
            }
            if is_leader[l] {
                return Err(Error::DuplicateLeader(l));
            }
            is_leader[l] = true;
        }
        if leaders.is_empty() {
            return Err(Error::EmptyLeaderSet);
        }
        if leaders.len() == n {
            return Err(Error::EmptyFollowerSet);
        }
        let (leaders, followers) = (0..n).map(NodeId).partition(|id| is_leader[id.0]);
        Ok(Self {
            is_leader,
            leaders,
            followers,
        })
    }

    pub fn n(&self) -> usize {
        self.is_leader.len()
    }

    /// Leaders in ascending index order; the k-th leader owns input column k.
    pub fn leaders(&self) -> &[NodeId] {
        &self.leaders
    }

    pub fn followers(&self) -> &[NodeId] {
        &self.followers
    }

    pub fn is_leader(&self, i: usize) -> bool {
        self.is_leader[i]
    }

    /// 1 for leaders, 0 for followers.
    pub fn delta(&self, i: usize) -> f64 {
        if self.is_leader[i] {
            1.0
        } else {
            0.0
        }
    }

    pub(crate) fn check_against(&self, g: &Graph) -> Result<()> {
        if self.n() != g.n() {
            return Err(Error::PartitionMismatch {
                partition: self.n(),
                graph: g.n(),
            });
        }
        Ok(())
    }
}

/// Number of follower neighbors of `j`.
pub fn follower_degree(g: &Graph, p: &Partition, j: NodeId) -> usize {
    g.neighbors(j.0)
        .iter()
        .filter(|&&k| !p.is_leader(k))
        .count()
}

/// Number of leader neighbors of `j`.
pub fn leader_degree(g: &Graph, p: &Partition, j: NodeId) -> usize {
    g.neighbors(j.0).iter().filter(|&&k| p.is_leader(k)).count()
}

/// Minimum follower-follower degree over all followers.
pub fn min_follower_degree(g: &Graph, p: &Partition) -> usize {
    p.followers()
        .iter()
        .map(|&j| follower_degree(g, p, j))
        .min()
        .unwrap_or(0)
}

/// True iff no edge joins two leaders.
pub fn leaders_nonadjacent(g: &Graph, p: &Partition) -> bool {
    p.leaders().iter().all(|&j| leader_degree(g, p, j) == 0)
}

/// Every component holds at least one leader, i.e. the grounded Laplacian is
/// nonsingular.
pub fn every_component_grounded(g: &Graph, p: &Partition) -> bool {
    let comps = g.components();
    let count = comps.iter().max().map_or(0, |m| m + 1);
    let mut grounded = vec![false; count];
    for l in p.leaders() {
        grounded[comps[l.0]] = true;
    }
    grounded.into_iter().all(|x| x)
}

/// `L(G) + diag(delta)`, symmetric and positive definite when every component
/// holds a leader.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundedLaplacian {
    pub matrix: DMatrix<f64>,
    pub partition: Partition,
}

pub fn grounded_laplacian(g: &Graph, p: &Partition) -> Result<GroundedLaplacian> {
    p.check_against(g)?;
    let mut matrix = g.laplacian();
    for l in p.leaders() {
        matrix[(l.0, l.0)] += 1.0;
    }
    Ok(GroundedLaplacian {
        matrix,
        partition: p.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub l11: GroundedLaplacian,
    /// `n x |V_l|`; column k holds -1 in the row of the k-th leader.
    pub l12: DMatrix<f64>,
}

pub fn augmented_system(g: &Graph, p: &Partition) -> Result<AugmentedSystem> {
    let l11 = grounded_laplacian(g, p)?;
    let mut l12 = DMatrix::zeros(g.n(), p.leaders().len());
    for (k, l) in p.leaders().iter().enumerate() {
        l12[(l.0, k)] = -1.0;
    }
    Ok(AugmentedSystem { l11, l12 })
}

/// On-disk graph: `{"n": int, "edges": [[i,j],...], "leaders": [int,...]}`
/// with 1-based node labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
    pub leaders: Vec<usize>,
}

impl GraphFile {
    pub fn from_parts(g: &Graph, p: &Partition) -> Self {
        Self {
            n: g.n(),
            edges: g.edges().iter().map(|&(a, b)| [a + 1, b + 1]).collect(),
            leaders: p.leaders().iter().map(|l| l.label()).collect(),
        }
    }

    pub fn to_parts(&self) -> Result<(Graph, Partition)> {
        let zero_based = |label: usize| {
            NodeId::from_label(label)
                .map(NodeId::index)
                .ok_or(Error::IndexOutOfRange {
                    index: label,
                    n: self.n,
                })
        };
        let edges = self
            .edges
            .iter()
            .map(|&[a, b]| Ok((zero_based(a)?, zero_based(b)?)))
            .collect::<Result<Vec<_>>>()?;
        let leaders = self
            .leaders
            .iter()
            .map(|&l| zero_based(l))
            .collect::<Result<Vec<_>>>()?;
        let g = Graph::new(self.n, &edges)?;
        let p = Partition::new(self.n, &leaders)?;
        Ok((g, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p2() -> Graph {
        Graph::new(2, &[(0, 1)]).unwrap()
    }

    fn k3() -> Graph {
        Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn dm(rows: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
    }

    #[test]
    fn build_rejects_invalid_edges() {
        assert_eq!(
            Graph::new(3, &[(0, 1), (0, 1)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert_eq!(
            Graph::new(3, &[(0, 1), (1, 0)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert_eq!(Graph::new(3, &[(2, 2)]), Err(Error::SelfLoop(2)));
        assert_eq!(
            Graph::new(3, &[(0, 3)]),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        );
        assert_eq!(Graph::new(1, &[]), Err(Error::TooFewNodes(1)));
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = k3();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (1, 2)]);
        for i in 0..3 {
            assert_eq!(g.degree(i), 2);
            for &j in g.neighbors(i) {
                assert!(g.has_edge(j, i));
            }
        }
        assert_eq!(p2().neighbors(0), &[1]);
    }

    #[test]
    fn connectivity() {
        assert!(p2().is_connected());
        assert!(k3().is_connected());
        let split = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
        assert_eq!(split.components(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn grounded_laplacian_small_cases() {
        let p = Partition::new(2, &[0]).unwrap();
        let l = grounded_laplacian(&p2(), &p).unwrap();
        assert_eq!(l.matrix, dm(&[&[2.0, -1.0], &[-1.0, 1.0]]));

        let p = Partition::new(3, &[0]).unwrap();
        let l = grounded_laplacian(&k3(), &p).unwrap();
        assert_eq!(
            l.matrix,
            dm(&[&[3.0, -1.0, -1.0], &[-1.0, 2.0, -1.0], &[-1.0, -1.0, 2.0]])
        );

        assert_eq!(Partition::new(3, &[0, 1, 2]), Err(Error::EmptyFollowerSet));
        assert_eq!(Partition::new(3, &[]), Err(Error::EmptyLeaderSet));
        assert_eq!(Partition::new(3, &[1, 1]), Err(Error::DuplicateLeader(1)));
    }

    #[test]
    fn grounded_laplacian_row_sums_and_trace() {
        let g = Graph::new(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (1, 3)]).unwrap();
        let p = Partition::new(5, &[1, 4]).unwrap();
        let l = grounded_laplacian(&g, &p).unwrap();
        for i in 0..5 {
            let row: f64 = l.matrix.row(i).sum();
            assert_eq!(row, p.delta(i));
        }
        let diff = &l.matrix - g.laplacian();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    assert_eq!(diff[(i, j)], 0.0);
                }
            }
        }
        assert_eq!(diff.trace(), 2.0);
        assert_eq!(l.matrix, l.matrix.transpose());
    }

    #[test]
    fn partition_size_must_match() {
        let p = Partition::new(4, &[0]).unwrap();
        assert_eq!(
            grounded_laplacian(&k3(), &p),
            Err(Error::PartitionMismatch {
                partition: 4,
                graph: 3
            })
        );
    }

    #[test]
    fn degree_bookkeeping() {
        let g = k3();
        let p = Partition::new(3, &[0]).unwrap();
        assert_eq!(follower_degree(&g, &p, NodeId(1)), 1);
        assert_eq!(leader_degree(&g, &p, NodeId(1)), 1);
        assert_eq!(follower_degree(&g, &p, NodeId(0)), 2);
        assert_eq!(min_follower_degree(&g, &p), 1);

        let p = Partition::new(2, &[0]).unwrap();
        assert_eq!(min_follower_degree(&p2(), &p), 0);
    }

    #[test]
    fn augmented_injection_matrix() {
        let p = Partition::new(2, &[0]).unwrap();
        let sys = augmented_system(&p2(), &p).unwrap();
        assert_eq!(sys.l12, dm(&[&[-1.0], &[0.0]]));

        let p = Partition::new(3, &[0, 1]).unwrap();
        let sys = augmented_system(&k3(), &p).unwrap();
        assert_eq!(sys.l12, dm(&[&[-1.0, 0.0], &[0.0, -1.0], &[0.0, 0.0]]));
        for col in sys.l12.column_iter() {
            assert_eq!(col.iter().filter(|&&x| x != 0.0).count(), 1);
        }
    }

    #[test]
    fn leaders_adjacency_and_grounding() {
        let g = k3();
        assert!(leaders_nonadjacent(&g, &Partition::new(3, &[0]).unwrap()));
        assert!(!leaders_nonadjacent(
            &g,
            &Partition::new(3, &[0, 1]).unwrap()
        ));

        let split = Graph::new(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(!every_component_grounded(
            &split,
            &Partition::new(4, &[0]).unwrap()
        ));
        assert!(every_component_grounded(
            &split,
            &Partition::new(4, &[0, 3]).unwrap()
        ));
    }

    #[test]
    fn graph_file_uses_one_based_labels() {
        let text = r#"{"n": 3, "edges": [[1,2],[2,3],[1,3]], "leaders": [1]}"#;
        let file: GraphFile = serde_json::from_str(text).unwrap();
        let (g, p) = file.to_parts().unwrap();
        assert_eq!(g, k3());
        assert_eq!(p.leaders(), &[NodeId(0)]);
        assert_eq!(GraphFile::from_parts(&g, &p).leaders, vec![1]);

        let bad: GraphFile =
            serde_json::from_str(r#"{"n": 2, "edges": [[0,1]], "leaders": [1]}"#).unwrap();
        assert!(matches!(bad.to_parts(), Err(Error::IndexOutOfRange { .. })));
    }
}
