//! Fiedler eigenpair of the grounded Laplacian and the semi-normalized
//! adjacency matrix whose Perron pair is `(1, v_F)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::eigen::eig_symmetric;
use crate::error::{Error, Result};
use crate::graph::{Graph, GroundedLaplacian, Partition};

/// Entries of the oriented Fiedler vector may dip this far below zero before
/// the pair is rejected.
pub const SIGN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    #[serde(rename = "lambda_F")]
    pub lambda_f: f64,
    /// Unit norm, positive orientation.
    #[serde(rename = "v_F")]
    pub v_f: Vec<f64>,
    /// All eigenvalues of the grounded Laplacian, ascending.
    pub spectrum: Vec<f64>,
}

impl SpectralResult {
    /// `lambda_2 - lambda_F`; zero for 1x1 spectra.
    pub fn spectral_gap(&self) -> f64 {
        self.spectrum.get(1).map_or(0.0, |l2| l2 - self.lambda_f)
    }

    pub fn v_f_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.v_f)
    }
}

/// Flips `v` so its largest-magnitude entry is positive and scales it to
/// unit Euclidean norm.
pub fn orient_unit(v: &mut DVector<f64>) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m });
    let norm = v.norm();
    if norm > 0.0 {
        *v /= norm.copysign(pivot);
    }
}

pub fn fiedler_pair(l: &GroundedLaplacian) -> Result<SpectralResult> {
    let eig = eig_symmetric(&l.matrix)?;
    let lambda_f = eig.eigenvalues[0];
    if !(lambda_f > 0.0 && lambda_f < 1.0) {
        return Err(Error::FiedlerOutOfRange(lambda_f));
    }
    let mut v = eig.eigenvectors.column(0).into_owned();
    orient_unit(&mut v);
    let most_negative = v.min();
    if most_negative < -SIGN_TOL {
        return Err(Error::SignIndefinite(most_negative));
    }
    Ok(SpectralResult {
        lambda_f,
        v_f: v.iter().copied().collect(),
        spectrum: eig.eigenvalues.iter().copied().collect(),
    })
}

/// `A_hat = D_hat^{-1} A` with `D_hat_ii = deg(i) + delta_i - lambda_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiNormalizedAdjacency {
    pub matrix: DMatrix<f64>,
    /// Diagonal of `D_hat`.
    pub scaling: DVector<f64>,
}

impl SemiNormalizedAdjacency {
    /// `D_hat^{1/2} A_hat D_hat^{-1/2} = D_hat^{-1/2} A D_hat^{-1/2}`, symmetric
    /// and similar to `A_hat`.
    pub fn symmetrized(&self) -> DMatrix<f64> {
        let n = self.matrix.nrows();
        DMatrix::from_fn(n, n, |i, j| {
            self.matrix[(i, j)] * (self.scaling[i] / self.scaling[j]).sqrt()
        })
    }
}

pub fn semi_normalized_adjacency(
    g: &Graph,
    p: &Partition,
    lambda_f: f64,
) -> Result<SemiNormalizedAdjacency> {
    p.check_against(g)?;
    let n = g.n();
    let scaling = DVector::from_fn(n, |i, _| g.degree(i) as f64 + p.delta(i) - lambda_f);
    if let Some((node, &value)) = scaling.iter().enumerate().find(|(_, &d)| !(d > 0.0)) {
        return Err(Error::SingularScaling { node, value });
    }
    let mut matrix = g.adjacency_matrix();
    for i in 0..n {
        matrix.row_mut(i).scale_mut(1.0 / scaling[i]);
    }
    Ok(SemiNormalizedAdjacency { matrix, scaling })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerronReport {
    /// Largest eigenvalue magnitude of `A_hat`.
    pub spectral_radius: f64,
    pub radius_error: f64,
    /// `1 - |cos(A_hat v, v)|`.
    pub alignment: f64,
    /// `|| A_hat v - v ||_inf`.
    pub fixed_point_residual: f64,
    /// Largest minus second-largest eigenvalue of `A_hat`.
    pub spectral_gap: f64,
}

pub fn verify_perron(a: &SemiNormalizedAdjacency, v_f: &DVector<f64>) -> Result<PerronReport> {
    let eig = eig_symmetric(&a.symmetrized())?;
    let ev = &eig.eigenvalues;
    let n = ev.len();
    let spectral_radius = ev.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let spectral_gap = if n >= 2 { ev[n - 1] - ev[n - 2] } else { 0.0 };

    let av = &a.matrix * v_f;
    let denom = av.norm() * v_f.norm();
    let cos = if denom > 0.0 {
        av.dot(v_f) / denom
    } else {
        0.0
    };
    Ok(PerronReport {
        spectral_radius,
        radius_error: (spectral_radius - 1.0).abs(),
        alignment: 1.0 - cos.abs(),
        fixed_point_residual: (av - v_f).amax(),
        spectral_gap,
    })
}
