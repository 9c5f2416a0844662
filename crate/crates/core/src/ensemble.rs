//! Seeded random instances: connected graphs with random leader sets, and
//! identifiability-certified instances drawn from densifying sequences.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::dynamics::ExternalInput;
use crate::error::Result;
use crate::graph::{Graph, Partition};
use crate::identifiability::{check_conditions, IdentifiabilityReport};
use crate::sequence::{generate_sequence, Growth, SequenceConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: Graph,
    pub partition: Partition,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_min: usize,
    pub n_max: usize,
    /// Upper bound on the probability of each extra edge beyond the
    /// spanning tree; each graph draws its own density below it.
    pub max_density: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            n_min: 3,
            n_max: 40,
            max_density: 0.5,
        }
    }
}

/// Random recursive spanning tree over a shuffled labelling, extra edges
/// with a per-graph density, and a uniformly sized random leader set.
pub fn random_instance(cfg: &EnsembleConfig, seed: u64) -> Result<Instance> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = rng.random_range(cfg.n_min.max(2)..=cfg.n_max.max(cfg.n_min.max(2)));
    let order = sample(&mut rng, n, n).into_vec();

    let mut edges = Vec::new();
    for k in 1..n {
        let parent = order[rng.random_range(0..k)];
        edges.push((order[k], parent));
    }
    let density = rng.random_range(0.0..=cfg.max_density);
    let graph = Graph::new(n, &edges)?;
    for i in 0..n {
        for j in i + 1..n {
            if !graph.has_edge(i, j) && rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, &edges)?;

    let n_leaders = rng.random_range(1..n);
    let leaders = sample(&mut rng, n, n_leaders).into_vec();
    let partition = Partition::new(n, &leaders)?;
    Ok(Instance {
        graph,
        partition,
        seed,
    })
}

/// `count` instances with seeds `base_seed, base_seed + 1, ...`.
pub fn random_ensemble(
    cfg: &EnsembleConfig,
    base_seed: u64,
    count: usize,
) -> Result<Vec<Instance>> {
    (0..count as u64)
        .map(|k| random_instance(cfg, base_seed.wrapping_add(k)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct CertifiedInstance {
    pub instance: Instance,
    pub report: IdentifiabilityReport,
    /// Position of the element within its generating sequence.
    pub element: usize,
}

/// Walks a two-leader densifying sequence and returns its first element on
/// which every identifiability condition holds, or `None` if no element
/// qualifies.
pub fn certified_from_sequence(seed: u64) -> Result<Option<CertifiedInstance>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let followers = rng.random_range(12..=24);
    let cfg = SequenceConfig {
        leader_degrees: vec![rng.random_range(2..=3), rng.random_range(2..=3)],
        initial_followers: followers,
        // the follower subgraph is complete by then
        steps: followers - 1,
        growth: Growth::DensifyEdges,
        rng_seed: rng.random(),
    };
    let seq = generate_sequence(&cfg)?;
    for (element, e) in seq.elements.into_iter().enumerate() {
        let report = check_conditions(&e.graph, &e.partition)?;
        if report.conditions_hold() {
            return Ok(Some(CertifiedInstance {
                instance: Instance {
                    graph: e.graph,
                    partition: e.partition,
                    seed,
                },
                report,
                element,
            }));
        }
    }
    Ok(None)
}

/// First `count` certified instances from seeds counting up from
/// `base_seed`.
pub fn certified_ensemble(base_seed: u64, count: usize) -> Result<Vec<CertifiedInstance>> {
    let mut out = Vec::with_capacity(count);
    let mut seed = base_seed;
    while out.len() < count {
        if let Some(c) = certified_from_sequence(seed)? {
            out.push(c);
        }
        seed = seed.wrapping_add(1);
    }
    Ok(out)
}

/// Constant leader inputs and initial states, uniform in `[-scale, scale]`.
pub fn random_drive(
    p: &Partition,
    dim: usize,
    scale: f64,
    seed: u64,
) -> Result<(ExternalInput, DMatrix<f64>)> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut draw = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..=scale));
    let u = ExternalInput::from_matrix(p, draw(p.leaders().len(), dim))?;
    let x0 = draw(p.n(), dim);
    Ok((u, x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ensemble_is_reproducible_and_in_range() {
        let cfg = EnsembleConfig::default();
        let a = random_ensemble(&cfg, 7, 50).unwrap();
        let b = random_ensemble(&cfg, 7, 50).unwrap();
        assert_eq!(a, b);
        for inst in &a {
            let n = inst.graph.n();
            assert!((3..=40).contains(&n));
            assert!(inst.graph.is_connected());
            let nl = inst.partition.leaders().len();
            assert!(nl >= 1 && nl < n);
        }
    }

    #[test]
    fn certified_instances_satisfy_conditions() {
        let c = certified_ensemble(100, 3).unwrap();
        assert_eq!(c.len(), 3);
        for ci in &c {
            assert!(ci.report.conditions_hold());
            assert_eq!(ci.instance.partition.leaders().len(), 2);
        }
    }

    #[test]
    fn drive_shapes() {
        let p = Partition::new(5, &[1, 3]).unwrap();
        let (u, x0) = random_drive(&p, 2, 1.0, 3).unwrap();
        assert_eq!(u.values().shape(), (2, 2));
        assert_eq!(x0.shape(), (5, 2));
        assert!(x0.iter().all(|x| x.abs() <= 1.0));
    }
}
