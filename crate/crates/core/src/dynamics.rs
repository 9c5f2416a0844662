//! Closed-loop consensus with constant leader inputs.
//!
//! Per spatial dimension the state obeys `x' = -L11 x - L12 y`, the same
//! matrix acting on every coordinate, so a `d`-dimensional run is `d`
//! independent scalar systems sharing one eigendecomposition. States are
//! stored as `n x d` matrices (row = agent, column = dimension).
//!
//! Writing `x* ` for the equilibrium and `(lambda_k, q_k)` for the
//! eigenpairs of `L11`,
//!
//! ```text
//! x(t)  = x* + sum_k exp(-lambda_k t) q_k <q_k, x0 - x*>
//! x'(t) =    - sum_k lambda_k exp(-lambda_k t) q_k <q_k, x0 - x*>
//! ```
//!
//! The `Exact` integrator evaluates these sums directly; `Rk4` steps the ODE
//! with classical fixed-step Runge-Kutta. Velocities are always the
//! right-hand side evaluated at the state, never differences of states.

use std::collections::BTreeMap;
use std::io::{self, Write};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::eig_symmetric;
use crate::error::{Error, Result};
use crate::graph::{augmented_system, every_component_grounded, Graph, NodeId, Partition};

/// Real-axis stability limit of classical RK4: `|h lambda| < 2.785`.
pub const RK4_STABILITY: f64 = 2.785;
/// Fiedler excitation below this fraction of `|x0 - x*|` in every
/// dimension is flagged as non-generic.
pub const EXCITATION_TOL: f64 = 1e-8;
/// Target for `exp(-(lambda_2 - lambda_F) t)` at the measurement time.
pub const DOMINANCE_TARGET: f64 = 1e-6;
/// Upper limit on `lambda_F t` at the measurement time, keeping velocities
/// far from underflow.
pub const MAX_DECAY_EXPONENT: f64 = 30.0;

/// Constant inputs, one `d`-vector per leader. Row k belongs to the k-th
/// leader of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalInput {
    values: DMatrix<f64>,
}

impl ExternalInput {
    pub fn new(p: &Partition, per_leader: &BTreeMap<NodeId, Vec<f64>>) -> Result<Self> {
        if let Some(extra) = per_leader.keys().find(|id| !p.leaders().contains(id)) {
            return Err(Error::InputMismatch(format!(
                "node {extra} is not a leader"
            )));
        }
        let dim = per_leader.values().next().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InputMismatch(
                "inputs must have dimension >= 1".into(),
            ));
        }
        let mut values = DMatrix::zeros(p.leaders().len(), dim);
        for (k, l) in p.leaders().iter().enumerate() {
            let u = per_leader
                .get(l)
                .ok_or_else(|| Error::InputMismatch(format!("leader {l} has no input")))?;
            if u.len() != dim {
                return Err(Error::InputMismatch(format!(
                    "leader {l} input has dimension {} instead of {dim}",
                    u.len()
                )));
            }
            for (c, &x) in u.iter().enumerate() {
                values[(k, c)] = x;
            }
        }
        Ok(Self { values })
    }

    /// `values` is `|V_l| x d`, rows in leader order.
    pub fn from_matrix(p: &Partition, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != p.leaders().len() || values.ncols() == 0 {
            return Err(Error::InputMismatch(format!(
                "expected {} rows and >= 1 column, got {}x{}",
                p.leaders().len(),
                values.nrows(),
                values.ncols()
            )));
        }
        Ok(Self { values })
    }

    /// The same input vector on every leader.
    pub fn uniform(p: &Partition, u: &[f64]) -> Result<Self> {
        let rows = p.leaders().len();
        Self::from_matrix(p, DMatrix::from_fn(rows, u.len(), |_, c| u[c]))
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dim: usize,
    pub dt: f64,
    pub t_final: f64,
    pub record_every: usize,
    pub integrator: Integrator,
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive and finite");
        }
        if !(self.t_final >= self.dt && self.t_final.is_finite()) {
            return bad("t_final must be finite and >= dt");
        }
        if self.record_every == 0 {
            return bad("record_every must be >= 1");
        }
        Ok(())
    }

    /// Number of steps and the step actually taken; the grid lands on
    /// `t_final` exactly, so the step may be slightly shorter than `dt`.
    pub fn grid(&self) -> (usize, f64) {
        let steps = ((self.t_final / self.dt) - 1e-9).ceil().max(1.0) as usize;
        (steps, self.t_final / steps as f64)
    }
}

/// Eigen-expansion of one run: everything needed to evaluate the exact
/// solution and the mode-dominance diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    /// Ascending eigenvalues of `L11`.
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// `n x d` equilibrium.
    pub steady: DMatrix<f64>,
    /// `coefficients[(k, c)] = <q_k, x0 - x*>` in dimension `c`.
    pub coefficients: DMatrix<f64>,
}

impl ModalState {
    fn decay(&self, t: f64, with_rate: bool) -> DMatrix<f64> {
        let mut scaled = self.coefficients.clone();
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let f = if with_rate { -lambda } else { 1.0 } * (-lambda * t).exp();
            scaled.row_mut(k).scale_mut(f);
        }
        scaled
    }

    pub fn state_at(&self, t: f64) -> DMatrix<f64> {
        &self.steady + &self.eigenvectors * self.decay(t, false)
    }

    pub fn velocity_at(&self, t: f64) -> DMatrix<f64> {
        &self.eigenvectors * self.decay(t, true)
    }

    fn mode_speed(&self, k: usize, t: f64) -> f64 {
        let lambda = self.eigenvalues[k];
        lambda * (-lambda * t).exp() * self.coefficients.row(k).norm()
    }

    /// Velocity amplitude of the second-slowest mode over that of the slowest.
    pub fn dominance_ratio(&self, t: f64) -> f64 {
        if self.eigenvalues.len() < 2 {
            return 0.0;
        }
        self.mode_speed(1, t) / self.mode_speed(0, t)
    }

    /// Velocity amplitude of all non-Fiedler modes together over that of the
    /// Fiedler mode; bounds the tangent of the velocity/Fiedler angle.
    pub fn off_fiedler_ratio(&self, t: f64) -> f64 {
        let rest: f64 = (1..self.eigenvalues.len())
            .map(|k| self.mode_speed(k, t).powi(2))
            .sum();
        rest.sqrt() / self.mode_speed(0, t)
    }

    /// `|<v_F, x0 - x*>| / |x0 - x*|` per dimension (0 when `x0 = x*`).
    pub fn fiedler_excitation(&self) -> Vec<f64> {
        (0..self.coefficients.ncols())
            .map(|c| {
                let total = self.coefficients.column(c).norm();
                if total > 0.0 {
                    self.coefficients[(0, c)].abs() / total
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DMatrix<f64>>,
    pub velocities: Vec<DMatrix<f64>>,
    pub integrator: Integrator,
    pub modal: ModalState,
    pub non_generic_initial_condition: bool,
}

impl Trajectory {
    pub fn t_final(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least one sample")
    }

    /// `t,x<node>_<dim>...,v<node>_<dim>...` with 1-based node and dimension
    /// labels, one row per recorded time.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let (n, d) = self.states[0].shape();
        let mut header = vec!["t".to_string()];
        for prefix in ["x", "v"] {
            for i in 1..=n {
                for c in 1..=d {
                    header.push(format!("{prefix}{i}_{c}"));
                }
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for ((t, x), v) in self.times.iter().zip(&self.states).zip(&self.velocities) {
            let mut row = vec![t.to_string()];
            for m in [x, v] {
                for i in 0..n {
                    for c in 0..d {
                        row.push(m[(i, c)].to_string());
                    }
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Equilibrium `x*` with `L11 x* = -L12 y`.
pub fn steady_state(g: &Graph, p: &Partition, u: &ExternalInput) -> Result<DMatrix<f64>> {
    let sys = augmented_system(g, p)?;
    if !every_component_grounded(g, p) {
        return Err(Error::SingularSystem);
    }
    let rhs = -(&sys.l12 * u.values());
    let chol = sys
        .l11
        .matrix
        .clone()
        .cholesky()
        .ok_or(Error::SingularSystem)?;
    Ok(chol.solve(&rhs))
}

pub fn simulate(
    g: &Graph,
    p: &Partition,
    u: &ExternalInput,
    x0: &DMatrix<f64>,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    if u.dim() != cfg.dim {
        return Err(Error::InputMismatch(format!(
            "inputs have dimension {} but the config asks for {}",
            u.dim(),
            cfg.dim
        )));
    }
    if x0.shape() != (g.n(), cfg.dim) {
        return Err(Error::InvalidConfig(format!(
            "x0 must be {}x{}, got {}x{}",
            g.n(),
            cfg.dim,
            x0.nrows(),
            x0.ncols()
        )));
    }
    let sys = augmented_system(g, p)?;
    let l11 = &sys.l11.matrix;
    let forcing = -(&sys.l12 * u.values());
    let steady = steady_state(g, p, u)?;
    let eig = eig_symmetric(l11)?;
    let coefficients = eig.eigenvectors.transpose() * (x0 - &steady);
    let modal = ModalState {
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        steady,
        coefficients,
    };

    let excitation = modal.fiedler_excitation();
    let non_generic = excitation.iter().all(|&e| e < EXCITATION_TOL);
    if non_generic {
        warn!("NonGenericInitialCondition: Fiedler excitation {excitation:?} below {EXCITATION_TOL:e}");
    }

    let (steps, h) = cfg.grid();
    if cfg.integrator == Integrator::Rk4 {
        let lambda_max = modal.eigenvalues.iter().copied().fold(0.0, f64::max);
        let bound = RK4_STABILITY / lambda_max;
        if cfg.dt >= bound {
            return Err(Error::UnstableStep { dt: cfg.dt, bound });
        }
    }

    let rhs = |x: &DMatrix<f64>| -(l11 * x) + &forcing;
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        velocities: Vec::new(),
        integrator: cfg.integrator,
        modal,
        non_generic_initial_condition: non_generic,
    };
    let mut x = x0.clone();
    for k in 0..=steps {
        let t = if k == steps {
            cfg.t_final
        } else {
            k as f64 * h
        };
        if cfg.integrator == Integrator::Rk4 && k > 0 {
            let k1 = rhs(&x);
            let k2 = rhs(&(&x + &k1 * (0.5 * h)));
            let k3 = rhs(&(&x + &k2 * (0.5 * h)));
            let k4 = rhs(&(&x + &k3 * h));
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState(t));
            }
        }
        if k % cfg.record_every == 0 || k == steps {
            let (state, velocity) = match cfg.integrator {
                Integrator::Rk4 => (x.clone(), rhs(&x)),
                Integrator::Exact => (traj.modal.state_at(t), traj.modal.velocity_at(t)),
            };
            if state.iter().chain(velocity.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState(t));
            }
            traj.times.push(t);
            traj.states.push(state);
            traj.velocities.push(velocity);
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelocitySnapshot {
    pub time: f64,
    pub velocities: DMatrix<f64>,
    pub dominance_ratio: f64,
}

/// Velocities at the recorded time nearest to `t`.
pub fn measure_velocities(traj: &Trajectory, t: f64) -> Result<VelocitySnapshot> {
    let t_final = traj.t_final();
    if !(t >= 0.0 && t <= t_final * (1.0 + 1e-12)) {
        return Err(Error::TimeOutOfRange { t, t_final });
    }
    let idx = match traj.times.binary_search_by(|s| s.total_cmp(&t)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i == traj.times.len() => i - 1,
        Err(i) => {
            if t - traj.times[i - 1] <= traj.times[i] - t {
                i - 1
            } else {
                i
            }
        }
    };
    let time = traj.times[idx];
    Ok(VelocitySnapshot {
        time,
        velocities: traj.velocities[idx].clone(),
        dominance_ratio: traj.modal.dominance_ratio(time),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementPlan {
    pub time: f64,
    /// `exp(-(lambda_2 - lambda_F) time)`.
    pub dominance_bound: f64,
    /// The bound reached [`DOMINANCE_TARGET`] without exceeding
    /// [`MAX_DECAY_EXPONENT`].
    pub certified: bool,
}

/// Earliest time at which the second mode has decayed by
/// [`DOMINANCE_TARGET`] relative to the Fiedler mode, capped so that
/// `lambda_F t <= MAX_DECAY_EXPONENT`.
pub fn measurement_time(lambda_f: f64, lambda_2: f64) -> MeasurementPlan {
    let gap = lambda_2 - lambda_f;
    let wanted = if gap > 0.0 {
        -DOMINANCE_TARGET.ln() / gap
    } else {
        f64::INFINITY
    };
    let cap = MAX_DECAY_EXPONENT / lambda_f;
    let time = wanted.min(cap);
    let dominance_bound = (-gap * time).exp();
    if wanted > cap {
        warn!(
            "spectral gap {gap:e} too small: dominance bound {dominance_bound:e} at capped time {time}"
        );
    }
    MeasurementPlan {
        time,
        dominance_bound,
        certified: wanted <= cap,
    }
}
