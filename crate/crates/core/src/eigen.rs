//! Cyclic Jacobi eigensolver for small dense symmetric matrices.
//!
//! Each rotation zeroes one off-diagonal pair `(p, q)`; sweeps visit every
//! pair in row order. Rotations are accumulated into `V`, so on exit
//! `A = V diag(lambda) V^T` with orthonormal columns in `V`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;
/// Allowed asymmetry, relative to the largest absolute entry.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    /// Ascending.
    pub eigenvalues: DVector<f64>,
    /// Column k pairs with `eigenvalues[k]`.
    pub eigenvectors: DMatrix<f64>,
    pub sweeps: usize,
}

impl SymmetricEigen {
    /// `max_k || m q_k - lambda_k q_k ||_inf`.
    pub fn max_residual(&self, m: &DMatrix<f64>) -> f64 {
        let mq = m * &self.eigenvectors;
        let mut worst = 0.0_f64;
        for (k, &lambda) in self.eigenvalues.iter().enumerate() {
            let r = mq.column(k) - self.eigenvectors.column(k) * lambda;
            worst = worst.max(r.amax());
        }
        worst
    }
}

/// Max-row-sum norm.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn eig_symmetric(m: &DMatrix<f64>) -> Result<SymmetricEigen> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::NotSquare(n, m.ncols()));
    }
    let scale = m.amax();
    let mut asym = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }

    // symmetrize so rounding in the input cannot bias one triangle
    let mut a = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let mut v = DMatrix::identity(n, n);
    let frob = a.norm();

    let mut sweeps = 0;
    loop {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off == 0.0 || off.sqrt() <= f64::EPSILON * 1e-3 * frob {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q, sweeps > 3);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&k| a[(k, k)]));
    let eigenvectors = DMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SymmetricEigen {
        eigenvalues,
        eigenvectors,
        sweeps,
    })
}

fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize, late: bool) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    // negligible next to both diagonals: drop it instead of rotating
    if late && app.abs() + 1e2 * apq.abs() == app.abs() && aqq.abs() + 1e2 * apq.abs() == aqq.abs()
    {
        a[(p, q)] = 0.0;
        a[(q, p)] = 0.0;
        return;
    }

    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    let n = a.nrows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn identity_and_diagonal() {
        let e = eig_symmetric(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[1.0, 1.0, 1.0]);

        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![5.0, 2.0, 9.0]));
        let e = eig_symmetric(&d).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[2.0, 5.0, 9.0]);
        assert_eq!(e.eigenvectors.column(0).amax(), 1.0);
        assert_eq!(e.eigenvectors[(1, 0)].abs(), 1.0);
    }

    #[test]
    fn two_by_two_closed_form() {
        // lambda^2 - 3 lambda + 1 = 0
        let m = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 1.0]);
        let e = eig_symmetric(&m).unwrap();
        let r5 = 5f64.sqrt();
        assert_abs_diff_eq!(e.eigenvalues[0], (3.0 - r5) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], (3.0 + r5) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[0], 0.381966, epsilon = 1e-6);
        assert!(e.max_residual(&m) <= 1e-10 * inf_norm(&m));
    }

    #[test]
    fn rejects_bad_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.5, 1.0]);
        assert!(matches!(eig_symmetric(&m), Err(Error::NotSymmetric(_))));
        let m = DMatrix::<f64>::zeros(2, 3);
        assert_eq!(eig_symmetric(&m), Err(Error::NotSquare(2, 3)));
    }

    #[test]
    fn zero_and_empty_matrices() {
        let e = eig_symmetric(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[0.0; 3]);
        let e = eig_symmetric(&DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(e.eigenvalues.len(), 0);
    }

    fn symmetric(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n * n).prop_map(move |xs| {
            let m = DMatrix::from_vec(n, n, xs);
            (&m + m.transpose()) * 0.5
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn decomposition_matches_independent_solver(m in (1usize..16).prop_flat_map(symmetric)) {
            let e = eig_symmetric(&m).unwrap();
            let n = m.nrows();
            let norm = inf_norm(&m).max(1.0);
            prop_assert!(e.max_residual(&m) <= 1e-10 * norm);

            let vtv = e.eigenvectors.transpose() * &e.eigenvectors;
            prop_assert!((vtv - DMatrix::<f64>::identity(n, n)).amax() <= 1e-12);

            let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(f64::total_cmp);
            for (a, b) in e.eigenvalues.iter().zip(&reference) {
                prop_assert!((a - b).abs() <= 1e-10 * norm);
            }
            for w in e.eigenvalues.as_slice().windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }
    }
}
