//! Fiedler-vector estimation from late-time velocities and sorted-gap
//! leader detection.
//!
//! Once the slowest mode dominates, every agent's velocity is proportional
//! to its Fiedler entry, so the relative tempo `tau_ij = x_i' / x_j'`
//! approaches `v_F[i] / v_F[j]`. Fixing one reference agent turns the tempos
//! into an estimate of `v_F` up to scale. Leaders own the smallest entries;
//! the largest gap in the sorted estimate marks where they end.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    measure_velocities, measurement_time, simulate, ExternalInput, Integrator, SimConfig,
    Trajectory,
};
use crate::error::{Error, Result};
use crate::graph::{grounded_laplacian, Graph, NodeId, Partition};
use crate::spectral::{fiedler_pair, orient_unit};

/// Velocities with a smaller norm count as zero.
pub const VELOCITY_FLOOR: f64 = 1e-300;
/// Estimates whose entries all lie within this range carry no gap.
pub const DEGENERATE_TOL: f64 = 1e-12;

/// `<x_i', x_j'> / <x_j', x_j'>`; the plain ratio when `d = 1`.
pub fn relative_tempo(velocities: &DMatrix<f64>, i: NodeId, j: NodeId) -> Result<f64> {
    let vj = velocities.row(j.index());
    let denom = vj.norm_squared();
    if !(vj.norm() > VELOCITY_FLOOR) {
        return Err(Error::ZeroReferenceVelocity(j.index()));
    }
    Ok(velocities.row(i.index()).dot(&vj) / denom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TempoVector {
    pub reference: NodeId,
    /// Entry i is `tau_{i, reference}`.
    pub values: Vec<f64>,
    pub measurement_time: f64,
}

/// Agent with the largest velocity norm (lowest index on ties).
pub fn reference_agent(velocities: &DMatrix<f64>) -> Result<NodeId> {
    let mut best = (0, 0.0_f64);
    for (i, row) in velocities.row_iter().enumerate() {
        let norm = row.norm();
        if norm > best.1 {
            best = (i, norm);
        }
    }
    if !(best.1 > VELOCITY_FLOOR) {
        return Err(Error::AllVelocitiesZero);
    }
    Ok(NodeId(best.0))
}

pub fn tempo_vector(
    velocities: &DMatrix<f64>,
    reference: NodeId,
    measurement_time: f64,
) -> Result<TempoVector> {
    let values = (0..velocities.nrows())
        .map(|i| relative_tempo(velocities, NodeId(i), reference))
        .collect::<Result<Vec<_>>>()?;
    Ok(TempoVector {
        reference,
        values,
        measurement_time,
    })
}

/// Tempo vector against the fastest agent and its unit-norm, positively
/// oriented rescaling.
pub fn estimate_fiedler(
    velocities: &DMatrix<f64>,
    measurement_time: f64,
) -> Result<(TempoVector, DVector<f64>)> {
    let reference = reference_agent(velocities)?;
    let tempo = tempo_vector(velocities, reference, measurement_time)?;
    let mut estimate = DVector::from_column_slice(&tempo.values);
    orient_unit(&mut estimate);
    Ok((tempo, estimate))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderEstimate {
    pub n_leaders: usize,
    /// Ascending node order.
    pub leader_set: Vec<NodeId>,
    pub sorted_values: Vec<f64>,
    /// Node owning each entry of `sorted_values`.
    pub sorted_nodes: Vec<NodeId>,
    /// 1-based position j of the chosen gap `sorted[j] - sorted[j-1]`
    /// (0-based indexing into `sorted_values`); equals `n_leaders`.
    pub gap_index: usize,
    pub gap_size: f64,
    /// The chosen gap is itself below [`DEGENERATE_TOL`]: the cut split
    /// numerically equal values and fell back on index order.
    pub tie_at_cut: bool,
}

/// Wire form with 1-based leader labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderEstimateFile {
    pub n_leaders: usize,
    pub leaders: Vec<usize>,
    pub sorted_values: Vec<f64>,
    pub gap_index: usize,
    pub gap_size: f64,
}

impl From<&LeaderEstimate> for LeaderEstimateFile {
    fn from(e: &LeaderEstimate) -> Self {
        Self {
            n_leaders: e.n_leaders,
            leaders: e.leader_set.iter().map(|l| l.label()).collect(),
            sorted_values: e.sorted_values.clone(),
            gap_index: e.gap_index,
            gap_size: e.gap_size,
        }
    }
}

pub fn identify_leaders(estimate: &[f64]) -> Result<LeaderEstimate> {
    let n = estimate.len();
    if n < 2 {
        return Err(Error::DegenerateEstimate);
    }
    if let Some(i) = estimate.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEstimate(i));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values stay in index order
    order.sort_by(|&a, &b| estimate[a].total_cmp(&estimate[b]));
    let sorted_values: Vec<f64> = order.iter().map(|&i| estimate[i]).collect();
    if sorted_values[n - 1] - sorted_values[0] <= DEGENERATE_TOL {
        return Err(Error::DegenerateEstimate);
    }

    let (mut gap_index, mut gap_size) = (1, f64::NEG_INFINITY);
    for j in 1..n {
        let gap = sorted_values[j] - sorted_values[j - 1];
        // strict: ties keep the smaller j
        if gap > gap_size {
            gap_index = j;
            gap_size = gap;
        }
    }
    let mut leader_set: Vec<NodeId> = order[..gap_index].iter().map(|&i| NodeId(i)).collect();
    leader_set.sort_unstable();
    Ok(LeaderEstimate {
        n_leaders: gap_index,
        leader_set,
        sorted_values,
        sorted_nodes: order.into_iter().map(NodeId).collect(),
        gap_index,
        gap_size,
        tie_at_cut: gap_size <= DEGENERATE_TOL,
    })
}

/// Angle between two directions, robust for tiny angles.
pub fn angle_between(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (a, b) = (a.normalize(), b.normalize());
    let chord = (&a - &b).norm();
    2.0 * (0.5 * chord).min(1.0).asin()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub integrator: Integrator,
    /// Step size; `None` picks `t_meas / record_points`, further limited to
    /// `0.1 / lambda_max` for RK4.
    pub dt: Option<f64>,
    /// Approximate number of recorded samples.
    pub record_points: usize,
    /// Overrides the dominance-certified measurement time.
    pub measurement_time: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            integrator: Integrator::Exact,
            dt: None,
            record_points: 200,
            measurement_time: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineDiagnostics {
    #[serde(rename = "lambda_F")]
    pub lambda_f: f64,
    pub lambda_2: f64,
    pub measurement_time: f64,
    /// `exp(-(lambda_2 - lambda_F) t_meas)`.
    pub dominance_bound: f64,
    pub dominance_certified: bool,
    /// Second-slowest over slowest modal velocity amplitude at `t_meas`.
    pub dominance_ratio: f64,
    pub off_fiedler_ratio: f64,
    pub non_generic_initial_condition: bool,
    /// Angle (rad) between the estimate and the true Fiedler vector.
    pub fiedler_angle: f64,
    /// 1-based.
    pub true_leaders: Vec<usize>,
    pub recovered: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub estimate: LeaderEstimate,
    pub tempo: TempoVector,
    pub fiedler_estimate: DVector<f64>,
    pub true_fiedler: DVector<f64>,
    pub trajectory: Trajectory,
    pub diagnostics: PipelineDiagnostics,
}

/// Simulate, sample velocities once the Fiedler mode dominates, estimate
/// `v_F` from tempos and split by the largest gap.
///
/// `p_true` defines the simulated system and feeds the diagnostics; the
/// estimate itself sees nothing but the velocity snapshot.
pub fn run_pipeline(
    g: &Graph,
    p_true: &Partition,
    u: &ExternalInput,
    x0: &DMatrix<f64>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome> {
    let spectral = fiedler_pair(&grounded_laplacian(g, p_true)?)?;
    let lambda_2 = spectral
        .spectrum
        .get(1)
        .copied()
        .unwrap_or(spectral.lambda_f);
    let lambda_max = spectral
        .spectrum
        .last()
        .copied()
        .unwrap_or(spectral.lambda_f);
    let plan = measurement_time(spectral.lambda_f, lambda_2);
    let t_meas = cfg.measurement_time.unwrap_or(plan.time);
    let points = cfg.record_points.max(1);

    let mut dt = cfg.dt.unwrap_or(t_meas / points as f64);
    if cfg.dt.is_none() && cfg.integrator == Integrator::Rk4 {
        dt = dt.min(0.1 / lambda_max);
    }
    let mut sim = SimConfig {
        dim: u.dim(),
        dt,
        t_final: t_meas,
        record_every: 1,
        integrator: cfg.integrator,
    };
    sim.record_every = (sim.grid().0 / points).max(1);
    let trajectory = simulate(g, p_true, u, x0, &sim)?;

    let snapshot = measure_velocities(&trajectory, t_meas)?;
    let (tempo, fiedler_estimate) = estimate_fiedler(&snapshot.velocities, snapshot.time)?;
    let estimate = identify_leaders(fiedler_estimate.as_slice())?;

    let true_fiedler = spectral.v_f_vector();
    let diagnostics = PipelineDiagnostics {
        lambda_f: spectral.lambda_f,
        lambda_2,
        measurement_time: snapshot.time,
        dominance_bound: (-(lambda_2 - spectral.lambda_f) * snapshot.time).exp(),
        dominance_certified: cfg.measurement_time.is_none() && plan.certified,
        dominance_ratio: snapshot.dominance_ratio,
        off_fiedler_ratio: trajectory.modal.off_fiedler_ratio(snapshot.time),
        non_generic_initial_condition: trajectory.non_generic_initial_condition,
        fiedler_angle: angle_between(&fiedler_estimate, &true_fiedler),
        true_leaders: p_true.leaders().iter().map(|l| l.label()).collect(),
        recovered: estimate.leader_set == p_true.leaders(),
    };
    Ok(PipelineOutcome {
        estimate,
        tempo,
        fiedler_estimate,
        true_fiedler,
        trajectory,
        diagnostics,
    })
}

/// Per recorded time: `t,tau<i>...,est<i>...` against a fixed reference
/// agent, with the unit-norm estimate alongside the raw tempos. Rows where
/// the reference is at rest leave the value cells empty.
pub fn write_tempo_csv<W: Write>(traj: &Trajectory, reference: NodeId, mut w: W) -> io::Result<()> {
    let n = traj.states[0].nrows();
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("tau{i}")));
    header.extend((1..=n).map(|i| format!("est{i}")));
    writeln!(w, "{}", header.join(","))?;
    for (t, v) in traj.times.iter().zip(&traj.velocities) {
        let mut row = vec![t.to_string()];
        match tempo_vector(v, reference, *t) {
            Ok(tempo) => {
                let mut est = DVector::from_column_slice(&tempo.values);
                orient_unit(&mut est);
                row.extend(tempo.values.iter().map(f64::to_string));
                row.extend(est.iter().map(f64::to_string));
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 2 * n)),
        }
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
