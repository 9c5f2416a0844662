//! Leader/follower separation certificate for the Fiedler vector.
//!
//! With `phi(j) = deg(j) / (deg(j) + 1 - lambda_F)`, the limiting vector of a
//! densifying graph sequence is 1 on followers and `phi(j)` on leaders. The
//! margin
//!
//! ```text
//! eps_d = 1 - max_l phi(l) - max_j min_k |phi(j) - phi(k)|
//! ```
//!
//! together with a distance `eps < eps_d / 4` between that limit and the true
//! Fiedler vector certifies
//! `min_f v_F - max_l v_F > max_j min_k |v_F[j] - v_F[k]|`.
//!
//! The inner minimum ranges over all leaders including `k = j`, which makes it
//! zero. Reports also carry the `k != j` reading under `*_excluding_self`
//! (zero when there is a single leader).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    grounded_laplacian, leaders_nonadjacent, min_follower_degree, Graph, Partition,
};
use crate::spectral::{fiedler_pair, semi_normalized_adjacency};

pub fn phi(degree: usize, lambda_f: f64) -> f64 {
    let d = degree as f64;
    d / (d + 1.0 - lambda_f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitingVector {
    pub entries: DVector<f64>,
}

pub fn limiting_fiedler(g: &Graph, p: &Partition, lambda_f: f64) -> Result<LimitingVector> {
    p.check_against(g)?;
    let mut entries = DVector::from_element(g.n(), 1.0);
    for l in p.leaders() {
        let d = g.degree(l.index());
        if d == 0 {
            return Err(Error::IsolatedLeader(l.index()));
        }
        entries[l.index()] = phi(d, lambda_f);
    }
    Ok(LimitingVector { entries })
}

/// `|| A_hat vbar - vbar ||_inf`: how far the limiting vector is from being
/// the Perron vector of this particular graph. Vanishes along a densifying
/// sequence.
pub fn limiting_residual(g: &Graph, p: &Partition, lambda_f: f64) -> Result<f64> {
    let vbar = limiting_fiedler(g, p, lambda_f)?;
    let a = semi_normalized_adjacency(g, p, lambda_f)?;
    Ok((&a.matrix * &vbar.entries - &vbar.entries).amax())
}

/// `max_j min_k |x_j - x_k|` over the given values, with `k` either ranging
/// over all entries or excluding `j`. Empty inner sets contribute 0.
fn max_min_spread(values: &[f64], exclude_self: bool) -> f64 {
    let mut worst = 0.0_f64;
    for (j, &xj) in values.iter().enumerate() {
        let nearest = values
            .iter()
            .enumerate()
            .filter(|&(k, _)| !(exclude_self && k == j))
            .map(|(_, &xk)| (xj - xk).abs())
            .fold(f64::INFINITY, f64::min);
        if nearest.is_finite() {
            worst = worst.max(nearest);
        }
    }
    worst
}

fn leader_phis(g: &Graph, p: &Partition, lambda_f: f64) -> Vec<f64> {
    p.leaders()
        .iter()
        .map(|l| phi(g.degree(l.index()), lambda_f))
        .collect()
}

fn margin(phis: &[f64], exclude_self: bool) -> f64 {
    let max_phi = phis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    1.0 - max_phi - max_min_spread(phis, exclude_self)
}

pub fn epsilon_d(g: &Graph, p: &Partition, lambda_f: f64) -> f64 {
    margin(&leader_phis(g, p, lambda_f), false)
}

pub fn epsilon_d_excluding_self(g: &Graph, p: &Partition, lambda_f: f64) -> f64 {
    margin(&leader_phis(g, p, lambda_f), true)
}

/// Least-squares scale `<vbar, v> / <v, v>` that maps `v` closest to `vbar`.
pub fn optimal_scale(v_f: &DVector<f64>, vbar: &LimitingVector) -> f64 {
    vbar.entries.dot(v_f) / v_f.norm_squared()
}

/// `min_{c > 0} || vbar - c v_F ||_2`.
pub fn epsilon_distance(v_f: &DVector<f64>, vbar: &LimitingVector) -> Result<f64> {
    if v_f.len() != vbar.entries.len() {
        return Err(Error::LengthMismatch {
            expected: vbar.entries.len(),
            got: v_f.len(),
        });
    }
    let c = optimal_scale(v_f, vbar).max(0.0);
    Ok((&vbar.entries - v_f * c).norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    /// `min_f v - max_l v`.
    pub lhs: f64,
    /// `max_j min_k |v_j - v_k|` over leaders, `k` including `j`.
    pub rhs: f64,
    pub rhs_excluding_self: f64,
}

impl Separation {
    pub fn separated(&self) -> bool {
        self.lhs > self.rhs
    }
}

pub fn separation_quantities(v_f: &[f64], p: &Partition) -> Separation {
    let min_f = p
        .followers()
        .iter()
        .map(|f| v_f[f.index()])
        .fold(f64::INFINITY, f64::min);
    let leader_values: Vec<f64> = p.leaders().iter().map(|l| v_f[l.index()]).collect();
    let max_l = leader_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Separation {
        lhs: min_f - max_l,
        rhs: max_min_spread(&leader_values, false),
        rhs_excluding_self: max_min_spread(&leader_values, true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub connected: bool,
    pub leaders_nonadjacent: bool,
    #[serde(rename = "lambda_F")]
    pub lambda_f: f64,
    pub epsilon_d: f64,
    pub epsilon_d_excluding_self: f64,
    pub epsilon: f64,
    /// `epsilon_d > 0`.
    pub condition_iii_holds: bool,
    /// `epsilon < epsilon_d / 4`.
    pub condition_iv_holds: bool,
    pub separation_lhs: f64,
    pub separation_rhs: f64,
    pub separation_rhs_excluding_self: f64,
    pub separated: bool,
    pub min_follower_degree: usize,
}

impl IdentifiabilityReport {
    /// All four sufficient conditions hold.
    pub fn conditions_hold(&self) -> bool {
        self.connected
            && self.leaders_nonadjacent
            && self.condition_iii_holds
            && self.condition_iv_holds
    }
}

pub fn check_conditions(g: &Graph, p: &Partition) -> Result<IdentifiabilityReport> {
    let spectral = fiedler_pair(&grounded_laplacian(g, p)?)?;
    assess(g, p, spectral.lambda_f, &spectral.v_f_vector())
}

/// Builds the report from a given Fiedler pair. `v_f` may carry any positive
/// scale; separation values are reported in that scale.
pub fn assess(
    g: &Graph,
    p: &Partition,
    lambda_f: f64,
    v_f: &DVector<f64>,
) -> Result<IdentifiabilityReport> {
    let vbar = limiting_fiedler(g, p, lambda_f)?;
    let eps_d = epsilon_d(g, p, lambda_f);
    let epsilon = epsilon_distance(v_f, &vbar)?;
    let sep = separation_quantities(v_f.as_slice(), p);
    Ok(IdentifiabilityReport {
        connected: g.is_connected(),
        leaders_nonadjacent: leaders_nonadjacent(g, p),
        lambda_f,
        epsilon_d: eps_d,
        epsilon_d_excluding_self: epsilon_d_excluding_self(g, p, lambda_f),
        epsilon,
        condition_iii_holds: eps_d > 0.0,
        condition_iv_holds: epsilon < eps_d / 4.0,
        separation_lhs: sep.lhs,
        separation_rhs: sep.rhs,
        separation_rhs_excluding_self: sep.rhs_excluding_self,
        separated: sep.separated(),
        min_follower_degree: min_follower_degree(g, p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn k3(leaders: &[usize]) -> (Graph, Partition) {
        (
            Graph::new(3, &[(0, 1), (1, 2), (0, 2)]).unwrap(),
            Partition::new(3, leaders).unwrap(),
        )
    }

    #[test]
    fn phi_values() {
        assert_abs_diff_eq!(phi(2, 0.5), 0.8, epsilon = 1e-15);
        let r3 = 3f64.sqrt();
        assert_abs_diff_eq!(phi(2, 2.0 - r3), 2.0 / (1.0 + r3), epsilon = 1e-15);
        assert_abs_diff_eq!(phi(2, 2.0 - r3), 0.7321, epsilon = 1e-4);
        let mut last = 0.0;
        for d in 1..2000 {
            let v = phi(d, 0.3);
            assert!(v > last && v < 1.0);
            last = v;
        }
        assert!(1.0 - last < 1e-3);
    }

    #[test]
    fn limiting_vector_k3() {
        let (g, p) = k3(&[0]);
        let lf = 2.0 - 3f64.sqrt();
        let vbar = limiting_fiedler(&g, &p, lf).unwrap();
        assert_abs_diff_eq!(vbar.entries[0], 3f64.sqrt() - 1.0, epsilon = 1e-15);
        assert_eq!(vbar.entries[1], 1.0);
        assert_eq!(vbar.entries[2], 1.0);
    }

    #[test]
    fn limiting_vector_unit_degree_leaders() {
        // star: center follower 0, leaves 1..4 are leaders of degree 1
        let g = Graph::new(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let p = Partition::new(5, &[1, 2, 3]).unwrap();
        let vbar = limiting_fiedler(&g, &p, 0.5).unwrap();
        for l in 1..4 {
            assert_abs_diff_eq!(vbar.entries[l], 1.0 / 1.5, epsilon = 1e-15);
        }
        assert_eq!(vbar.entries[0], 1.0);
        assert_eq!(vbar.entries[4], 1.0);
    }

    #[test]
    fn isolated_leader_rejected() {
        let g = Graph::new(3, &[(0, 1)]).unwrap();
        let p = Partition::new(3, &[2]).unwrap();
        assert_eq!(limiting_fiedler(&g, &p, 0.5), Err(Error::IsolatedLeader(2)));
    }

    #[test]
    fn epsilon_d_single_and_equal_degree_leaders() {
        let (g, p) = k3(&[0]);
        let lf = 2.0 - 3f64.sqrt();
        assert_abs_diff_eq!(
            epsilon_d(&g, &p, lf),
            1.0 - (3f64.sqrt() - 1.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(epsilon_d(&g, &p, lf), 0.2679, epsilon = 1e-4);
        assert_eq!(epsilon_d_excluding_self(&g, &p, lf), epsilon_d(&g, &p, lf));

        // 4-cycle, opposite corners lead with degree 2 each
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let p = Partition::new(4, &[0, 2]).unwrap();
        assert_abs_diff_eq!(epsilon_d(&g, &p, 0.4), 1.0 - phi(2, 0.4), epsilon = 1e-15);
        assert_abs_diff_eq!(
            epsilon_d_excluding_self(&g, &p, 0.4),
            1.0 - phi(2, 0.4),
            epsilon = 1e-15
        );
    }

    #[test]
    fn epsilon_d_readings_differ_for_unequal_degrees() {
        // path 0-1-2-3-4-5 plus chord (1,3); leaders 0 (deg 1) and 4 (deg 2)
        let g = Graph::new(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (1, 3)]).unwrap();
        let p = Partition::new(6, &[0, 4]).unwrap();
        let lf = 0.2;
        let (a, b) = (phi(1, lf), phi(2, lf));
        assert_abs_diff_eq!(epsilon_d(&g, &p, lf), 1.0 - b, epsilon = 1e-15);
        assert_abs_diff_eq!(
            epsilon_d_excluding_self(&g, &p, lf),
            1.0 - b - (b - a),
            epsilon = 1e-15
        );
    }

    #[test]
    fn epsilon_collinear_is_zero() {
        let vbar = LimitingVector {
            entries: DVector::from_vec(vec![0.7, 1.0, 1.0, 1.0]),
        };
        let v = &vbar.entries * 0.37;
        assert!(epsilon_distance(&v, &vbar).unwrap() < 1e-15);
    }

    #[test]
    fn epsilon_matches_scan_oracle_on_k3() {
        let (g, p) = k3(&[0]);
        let s = fiedler_pair(&grounded_laplacian(&g, &p).unwrap()).unwrap();
        let v = s.v_f_vector();
        let vbar = limiting_fiedler(&g, &p, s.lambda_f).unwrap();
        let closed = epsilon_distance(&v, &vbar).unwrap();

        // 1-D scan over c in [0, 3], step 1e-6
        let (mut best, mut best_c) = (f64::INFINITY, 0.0);
        for k in 0..=3_000_000u32 {
            let c = f64::from(k) * 1e-6;
            let d = (&vbar.entries - &v * c).norm();
            if d < best {
                best = d;
                best_c = c;
            }
        }
        assert_abs_diff_eq!(closed, best, epsilon = 1e-6);
        assert_abs_diff_eq!(optimal_scale(&v, &vbar), best_c, epsilon = 1e-6);
    }

    #[test]
    fn epsilon_length_mismatch() {
        let vbar = LimitingVector {
            entries: DVector::from_vec(vec![1.0, 1.0]),
        };
        let v = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert_eq!(
            epsilon_distance(&v, &vbar),
            Err(Error::LengthMismatch {
                expected: 2,
                got: 3
            })
        );
    }

    #[test]
    fn separation_examples() {
        let p = Partition::new(3, &[0]).unwrap();
        let s = separation_quantities(&[0.7, 1.0, 1.0], &p);
        assert_abs_diff_eq!(s.lhs, 0.3, epsilon = 1e-15);
        assert_eq!(s.rhs, 0.0);

        let p = Partition::new(4, &[0, 1]).unwrap();
        let s = separation_quantities(&[0.7, 0.72, 1.0, 1.0], &p);
        assert_abs_diff_eq!(s.lhs, 0.28, epsilon = 1e-15);
        assert_eq!(s.rhs, 0.0);
        assert_abs_diff_eq!(s.rhs_excluding_self, 0.02, epsilon = 1e-15);
    }

    #[test]
    fn check_conditions_k3() {
        let (g, p) = k3(&[0]);
        let r = check_conditions(&g, &p).unwrap();
        assert!(r.connected && r.leaders_nonadjacent);
        assert_eq!(r.separation_rhs, 0.0);
        assert!(r.separated);
        assert!(r.epsilon < 1e-12);
        assert!(r.conditions_hold());

        let (g, p) = k3(&[0, 1]);
        let r = check_conditions(&g, &p).unwrap();
        assert!(!r.leaders_nonadjacent);
        assert!(!r.conditions_hold());
    }

    /// Two non-adjacent degree-2 leaders hanging off a complete follower
    /// graph on 10 nodes.
    fn dense_follower_instance() -> (Graph, Partition) {
        let mut edges = Vec::new();
        for i in 2..12 {
            for j in (i + 1)..12 {
                edges.push((i, j));
            }
        }
        edges.extend([(0, 2), (0, 3), (1, 4), (1, 5)]);
        (
            Graph::new(12, &edges).unwrap(),
            Partition::new(12, &[0, 1]).unwrap(),
        )
    }

    #[test]
    fn dense_follower_instance_is_separated() {
        let (g, p) = dense_follower_instance();
        let r = check_conditions(&g, &p).unwrap();
        assert!(r.separated, "{r:?}");
        assert!(r.conditions_hold(), "{r:?}");
        assert_eq!(r.min_follower_degree, 9);
    }

    #[test]
    fn report_booleans_are_scale_invariant() {
        let (g, p) = dense_follower_instance();
        let s = fiedler_pair(&grounded_laplacian(&g, &p).unwrap()).unwrap();
        let v = s.v_f_vector();
        let a = assess(&g, &p, s.lambda_f, &v).unwrap();
        let b = assess(&g, &p, s.lambda_f, &(&v * 7.3)).unwrap();
        assert_eq!(a.separated, b.separated);
        assert_eq!(a.condition_iv_holds, b.condition_iv_holds);
        assert_abs_diff_eq!(a.epsilon, b.epsilon, epsilon = 1e-12);
        assert_abs_diff_eq!(a.separation_lhs * 7.3, b.separation_lhs, epsilon = 1e-12);
    }
}
