//! Finite prefixes of densifying graph sequences.
//!
//! Every element shares one leader set; leaders keep their degree and never
//! touch each other, while the minimum follower-follower degree strictly
//! increases from one element to the next.
//!
//! Randomness comes from Xoshiro256++ seeded through SplitMix64
//! (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`), so a config and seed
//! fix the output bit for bit on every platform.

use std::collections::BTreeSet;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{leader_degree, min_follower_degree, Graph, GraphFile, NodeId, Partition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    DensifyEdges,
    /// One new follower per step, attached to one existing follower, before
    /// densifying.
    AddNodesAndEdges,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub leader_degrees: Vec<usize>,
    pub initial_followers: usize,
    pub steps: usize,
    pub growth: Growth,
    pub rng_seed: u64,
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InfeasibleConfig(msg));
        if self.leader_degrees.is_empty() {
            return bad("at least one leader is required".into());
        }
        if self.initial_followers == 0 {
            return bad("at least one follower is required".into());
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        for (k, &d) in self.leader_degrees.iter().enumerate() {
            if d == 0 {
                return bad(format!("leader {k} has degree 0"));
            }
            if d > self.initial_followers {
                return bad(format!(
                    "leader {k} needs {d} follower neighbors but only {} followers exist",
                    self.initial_followers
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceElement {
    pub graph: Graph,
    pub partition: Partition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphSequence {
    pub elements: Vec<SequenceElement>,
    /// The follower subgraph became complete before `steps` elements could
    /// be produced; `elements` is the shorter prefix.
    pub saturated: bool,
}

struct Builder {
    n: usize,
    leaders: Vec<usize>,
    followers: Vec<usize>,
    edges: BTreeSet<(usize, usize)>,
}

impl Builder {
    fn connect(&mut self, a: usize, b: usize) {
        self.edges.insert((a.min(b), a.max(b)));
    }

    fn snapshot(&self) -> Result<SequenceElement> {
        let edges: Vec<_> = self.edges.iter().copied().collect();
        Ok(SequenceElement {
            graph: Graph::new(self.n, &edges)?,
            partition: Partition::new(self.n, &self.leaders)?,
        })
    }

    fn absent_follower_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (x, &a) in self.followers.iter().enumerate() {
            for &b in &self.followers[x + 1..] {
                let key = (a.min(b), a.max(b));
                if !self.edges.contains(&key) {
                    out.push(key);
                }
            }
        }
        out
    }

    fn min_follower_degree(&self) -> usize {
        let mut deg = vec![0usize; self.n];
        let mut is_follower = vec![false; self.n];
        for &f in &self.followers {
            is_follower[f] = true;
        }
        for &(a, b) in &self.edges {
            if is_follower[a] && is_follower[b] {
                deg[a] += 1;
                deg[b] += 1;
            }
        }
        self.followers.iter().map(|&f| deg[f]).min().unwrap_or(0)
    }
}

pub fn generate_sequence(cfg: &SequenceConfig) -> Result<GraphSequence> {
    cfg.validate()?;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.rng_seed);
    let n_leaders = cfg.leader_degrees.len();
    let n0 = n_leaders + cfg.initial_followers;

    let mut leaders: Vec<usize> = index::sample(&mut rng, n0, n_leaders).into_vec();
    leaders.sort_unstable();
    let followers: Vec<usize> = (0..n0)
        .filter(|i| leaders.binary_search(i).is_err())
        .collect();
    let mut b = Builder {
        n: n0,
        leaders,
        followers,
        edges: BTreeSet::new(),
    };

    // random recursive tree over the followers
    let mut order = b.followers.clone();
    order.shuffle(&mut rng);
    for k in 1..order.len() {
        let parent = order[rng.random_range(0..k)];
        b.connect(order[k], parent);
    }
    for (k, &d) in cfg.leader_degrees.iter().enumerate() {
        let leader = b.leaders[k];
        for pick in index::sample(&mut rng, b.followers.len(), d) {
            let f = b.followers[pick];
            b.connect(leader, f);
        }
    }

    let mut elements = vec![b.snapshot()?];
    let mut saturated = false;
    let mut prev_min = b.min_follower_degree();
    'steps: for _ in 1..cfg.steps {
        if cfg.growth == Growth::AddNodesAndEdges {
            let new = b.n;
            let anchor = b.followers[rng.random_range(0..b.followers.len())];
            b.n += 1;
            b.followers.push(new);
            b.connect(new, anchor);
        }
        let mut absent = b.absent_follower_pairs();
        while b.min_follower_degree() <= prev_min {
            if absent.is_empty() {
                saturated = true;
                break 'steps;
            }
            let (x, y) = absent.swap_remove(rng.random_range(0..absent.len()));
            b.connect(x, y);
        }
        prev_min = b.min_follower_degree();
        elements.push(b.snapshot()?);
    }
    if saturated {
        warn!(
            "follower subgraph saturated after {} of {} elements",
            elements.len(),
            cfg.steps
        );
    }
    Ok(GraphSequence {
        elements,
        saturated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub holds: bool,
    pub first_violation: Option<usize>,
}

impl PropertyCheck {
    fn from_violation(first_violation: Option<usize>) -> Self {
        Self {
            holds: first_violation.is_none(),
            first_violation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceValidation {
    pub connected: PropertyCheck,
    pub leaders_fixed: PropertyCheck,
    pub leader_degrees_constant: PropertyCheck,
    pub leaders_nonadjacent: PropertyCheck,
    pub min_follower_degree_increasing: PropertyCheck,
}

impl SequenceValidation {
    pub fn all_hold(&self) -> bool {
        [
            self.connected,
            self.leaders_fixed,
            self.leader_degrees_constant,
            self.leaders_nonadjacent,
            self.min_follower_degree_increasing,
        ]
        .iter()
        .all(|c| c.holds)
    }
}

pub fn validate_sequence(elements: &[SequenceElement]) -> SequenceValidation {
    let first = elements.first();
    let leader_set = |e: &SequenceElement| e.partition.leaders().to_vec();
    let degrees = |e: &SequenceElement| -> Vec<usize> {
        e.partition
            .leaders()
            .iter()
            .map(|l| e.graph.degree(l.index()))
            .collect()
    };

    let connected = elements.iter().position(|e| !e.graph.is_connected());
    let leaders_fixed = first.and_then(|f| {
        let base = leader_set(f);
        elements.iter().position(|e| leader_set(e) != base)
    });
    let leader_degrees_constant = first.and_then(|f| {
        let (base_set, base) = (leader_set(f), degrees(f));
        elements
            .iter()
            .position(|e| leader_set(e) == base_set && degrees(e) != base)
    });
    let leaders_nonadjacent = elements.iter().position(|e| {
        e.partition
            .leaders()
            .iter()
            .any(|&l| leader_degree(&e.graph, &e.partition, l) > 0)
    });
    let min_follower_degree_increasing = elements
        .windows(2)
        .position(|w| {
            min_follower_degree(&w[1].graph, &w[1].partition)
                <= min_follower_degree(&w[0].graph, &w[0].partition)
        })
        .map(|i| i + 1);

    SequenceValidation {
        connected: PropertyCheck::from_violation(connected),
        leaders_fixed: PropertyCheck::from_violation(leaders_fixed),
        leader_degrees_constant: PropertyCheck::from_violation(leader_degrees_constant),
        leaders_nonadjacent: PropertyCheck::from_violation(leaders_nonadjacent),
        min_follower_degree_increasing: PropertyCheck::from_violation(
            min_follower_degree_increasing,
        ),
    }
}

/// On-disk sequence: the config used plus one graph object per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceFile {
    pub config: SequenceConfig,
    pub saturated: bool,
    pub graphs: Vec<GraphFile>,
}

impl SequenceFile {
    pub fn new(config: &SequenceConfig, seq: &GraphSequence) -> Self {
        Self {
            config: config.clone(),
            saturated: seq.saturated,
            graphs: seq
                .elements
                .iter()
                .map(|e| GraphFile::from_parts(&e.graph, &e.partition))
                .collect(),
        }
    }

    pub fn elements(&self) -> Result<Vec<SequenceElement>> {
        self.graphs
            .iter()
            .map(|g| {
                let (graph, partition) = g.to_parts()?;
                Ok(SequenceElement { graph, partition })
            })
            .collect()
    }
}

/// Leaders that sit on a leader-leader edge, for diagnostics.
pub fn adjacent_leaders(e: &SequenceElement) -> Vec<NodeId> {
    e.partition
        .leaders()
        .iter()
        .copied()
        .filter(|&l| leader_degree(&e.graph, &e.partition, l) > 0)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::follower_degree;

    fn cfg(leader_degrees: Vec<usize>, initial_followers: usize, steps: usize) -> SequenceConfig {
        SequenceConfig {
            leader_degrees,
            initial_followers,
            steps,
            growth: Growth::DensifyEdges,
            rng_seed: 7,
        }
    }

    #[test]
    fn first_element_contract() {
        let seq = generate_sequence(&cfg(vec![2, 2], 4, 1)).unwrap();
        assert_eq!(seq.elements.len(), 1);
        let e = &seq.elements[0];
        assert!(e.graph.is_connected());
        assert_eq!(e.graph.n(), 6);
        for &l in e.partition.leaders() {
            assert_eq!(e.graph.degree(l.index()), 2);
            assert_eq!(follower_degree(&e.graph, &e.partition, l), 2);
        }
        // spanning tree on 4 followers
        let ff = e
            .graph
            .edges()
            .iter()
            .filter(|&&(a, b)| !e.partition.is_leader(a) && !e.partition.is_leader(b))
            .count();
        assert_eq!(ff, 3);
        assert!(validate_sequence(&seq.elements).all_hold());
    }

    #[test]
    fn min_follower_degree_strictly_increases() {
        // four followers cap the follower-follower degree at 3, so densifying
        // alone stops after three elements
        let seq = generate_sequence(&cfg(vec![2, 2], 4, 4)).unwrap();
        assert!(seq.saturated);
        assert_eq!(seq.elements.len(), 3);

        let mut c = cfg(vec![2, 2], 4, 4);
        c.growth = Growth::AddNodesAndEdges;
        let seq = generate_sequence(&c).unwrap();
        assert!(!seq.saturated);
        assert_eq!(seq.elements.len(), 4);
        let mins: Vec<usize> = seq
            .elements
            .iter()
            .map(|e| min_follower_degree(&e.graph, &e.partition))
            .collect();
        assert!(mins.windows(2).all(|w| w[0] < w[1]), "{mins:?}");
        assert!(validate_sequence(&seq.elements).all_hold());
    }

    #[test]
    fn infeasible_degree() {
        assert!(matches!(
            generate_sequence(&cfg(vec![5], 3, 1)),
            Err(Error::InfeasibleConfig(_))
        ));
        assert!(matches!(
            generate_sequence(&cfg(vec![], 3, 1)),
            Err(Error::InfeasibleConfig(_))
        ));
        assert!(matches!(
            generate_sequence(&cfg(vec![0], 3, 1)),
            Err(Error::InfeasibleConfig(_))
        ));
    }

    #[test]
    fn saturation_returns_short_prefix() {
        let seq = generate_sequence(&cfg(vec![1], 4, 10)).unwrap();
        assert!(seq.saturated);
        assert!(seq.elements.len() < 10);
        assert!(validate_sequence(&seq.elements).all_hold());
    }

    #[test]
    fn node_growth_keeps_properties() {
        let mut c = cfg(vec![2, 3, 1], 6, 6);
        c.growth = Growth::AddNodesAndEdges;
        let seq = generate_sequence(&c).unwrap();
        assert_eq!(seq.elements.len(), 6);
        for (k, e) in seq.elements.iter().enumerate() {
            assert_eq!(e.graph.n(), 9 + k);
        }
        assert!(validate_sequence(&seq.elements).all_hold());
    }

    #[test]
    fn deterministic_for_a_seed() {
        let c = cfg(vec![2, 3], 10, 5);
        assert_eq!(
            generate_sequence(&c).unwrap(),
            generate_sequence(&c).unwrap()
        );
        let mut other = c.clone();
        other.rng_seed = 8;
        assert_ne!(
            generate_sequence(&c).unwrap(),
            generate_sequence(&other).unwrap()
        );
    }

    #[test]
    fn validation_flags_leader_edge_at_index() {
        let mut seq = generate_sequence(&cfg(vec![2, 2], 6, 3)).unwrap().elements;
        let e = &seq[1];
        let (a, b) = (
            e.partition.leaders()[0].index(),
            e.partition.leaders()[1].index(),
        );
        let mut edges = e.graph.edges().to_vec();
        edges.push((a, b));
        seq[1].graph = Graph::new(e.graph.n(), &edges).unwrap();
        let v = validate_sequence(&seq);
        assert!(!v.leaders_nonadjacent.holds);
        assert_eq!(v.leaders_nonadjacent.first_violation, Some(1));
        assert_eq!(adjacent_leaders(&seq[1]).len(), 2);
        assert!(!v.leader_degrees_constant.holds);
    }

    #[test]
    fn single_graph_is_vacuously_valid() {
        let seq = generate_sequence(&cfg(vec![1], 3, 1)).unwrap();
        let v = validate_sequence(&seq.elements);
        assert!(v.leaders_fixed.holds);
        assert!(v.leader_degrees_constant.holds);
        assert!(v.min_follower_degree_increasing.holds);
    }

    #[test]
    fn sequence_file_round_trip() {
        let c = cfg(vec![2, 2], 5, 3);
        let seq = generate_sequence(&c).unwrap();
        let file = SequenceFile::new(&c, &seq);
        let text = serde_json::to_string(&file).unwrap();
        let back: SequenceFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.elements().unwrap(), seq.elements);
        assert!(text.contains("\"densify_edges\""));
    }
}
