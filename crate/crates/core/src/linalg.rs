//! Cyclic Jacobi eigen-decomposition for real symmetric 3×3 matrices.

use nalgebra::{Matrix3, Vector3};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues (unsorted) and eigenvectors stored as columns.
#[derive(Debug, Clone, Copy)]
pub struct SymmetricEigen3 {
    pub values: Vector3<f64>,
    pub vectors: Matrix3<f64>,
}

impl SymmetricEigen3 {
    /// Reorders eigenpairs by the given key, ascending.
    pub fn sorted_by<F: Fn(f64) -> f64>(self, key: F) -> Self {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| key(self.values[i]).total_cmp(&key(self.values[j])));
        let values = Vector3::new(
            self.values[idx[0]],
            self.values[idx[1]],
            self.values[idx[2]],
        );
        let vectors = Matrix3::from_columns(&[
            self.vectors.column(idx[0]).into_owned(),
            self.vectors.column(idx[1]).into_owned(),
            self.vectors.column(idx[2]).into_owned(),
        ]);
        Self { values, vectors }
    }
}

/// Symmetrizes `m` as (m + mᵀ)/2 and diagonalizes it with cyclic Jacobi rotations.
pub fn symmetric_eigen(m: &Matrix3<f64>) -> SymmetricEigen3 {
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = Matrix3::identity();
    let scale = a.norm();
    if scale == 0.0 {
        return SymmetricEigen3 {
            values: Vector3::zeros(),
            vectors: v,
        };
    }

    for _ in 0..MAX_SWEEPS {
        let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;

            // A ← Jᵀ A J with the rotation acting on rows/columns p and q.
            for k in 0..3 {
                let akp = a[(k, p)];
                let akq = a[(k, q)];
                a[(k, p)] = c * akp - s * akq;
                a[(k, q)] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[(p, k)];
                let aqk = a[(q, k)];
                a[(p, k)] = c * apk - s * aqk;
                a[(q, k)] = s * apk + c * aqk;
            }
            a[(p, q)] = 0.0;
            a[(q, p)] = 0.0;

            for k in 0..3 {
                let vkp = v[(k, p)];
                let vkq = v[(k, q)];
                v[(k, p)] = c * vkp - s * vkq;
                v[(k, q)] = s * vkp + c * vkq;
            }
        }
    }

    SymmetricEigen3 {
        values: Vector3::new(a[(0, 0)], a[(1, 1)], a[(2, 2)]),
        vectors: v,
    }
}
