//! Small dense linear-algebra kernels: symmetric eigendecomposition,
//! Cholesky, and orthonormal initialization. Self-contained so the crate
//! does not need a system BLAS/LAPACK.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

/// Eigendecomposition of a symmetric matrix via cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvectors are the columns of the returned matrix.
pub fn symmetric_eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].partial_cmp(&m[[i, i]]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| m[[i, i]]).collect();
    let mut vectors = Array2::<f64>::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors[[r, new_col]] = v[[r, old_col]];
        }
    }
    (eigenvalues, vectors)
}

/// Lower-triangular Cholesky factor. Returns `None` when the matrix is not
/// positive semidefinite (within a small tolerance used for PSD boundaries).
pub fn cholesky_psd(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if sum < -1e-10 {
                    return None;
                }
                l[[i, j]] = sum.max(0.0).sqrt();
            } else if l[[j, j]].abs() < 1e-12 {
                if sum.abs() > 1e-8 {
                    return None;
                }
                l[[i, j]] = 0.0;
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Gaussian matrix with orthonormalized columns (modified Gram-Schmidt).
/// Requires `cols <= rows`.
pub fn orthonormal_columns<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    assert!(cols <= rows, "cannot orthonormalize more columns than rows");
    let mut m = Array2::<f64>::zeros((rows, cols));
    for v in m.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for j in 0..cols {
        for k in 0..j {
            let dot: f64 = (0..rows).map(|r| m[[r, j]] * m[[r, k]]).sum();
            for r in 0..rows {
                m[[r, j]] -= dot * m[[r, k]];
            }
        }
        let norm: f64 = (0..rows).map(|r| m[[r, j]] * m[[r, j]]).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for r in 0..rows {
                m[[r, j]] /= norm;
            }
        } else {
            // Degenerate draw; fall back to a unit basis vector.
            for r in 0..rows {
                m[[r, j]] = if r == j { 1.0 } else { 0.0 };
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn eigh_reconstructs_matrix() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, -0.2], [0.5, -0.2, 1.0]];
        let (vals, vecs) = symmetric_eigh(&a);
        let mut recon = Array2::<f64>::zeros((3, 3));
        for k in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    recon[[i, j]] += vals[k] * vecs[[i, k]] * vecs[[j, k]];
                }
            }
        }
        assert!((&recon - &a).iter().all(|v| v.abs() < 1e-10));
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cholesky_recovers_factor() {
        let a = array![[2.0, 0.5], [0.5, 1.0]];
        let l = cholesky_psd(&a).unwrap();
        let recon = l.dot(&l.t());
        assert!((&recon - &a).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky_psd(&a).is_none());
    }

    #[test]
    fn orthonormal_columns_are_orthonormal() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let q = orthonormal_columns(6, 4, &mut rng);
        let gram = q.t().dot(&q);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-10);
            }
        }
    }
}
