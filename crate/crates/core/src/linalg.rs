//! Dense symmetric eigendecomposition via cyclic Jacobi rotations.
//!
//! Matrices are stored row-major in a flat `Vec<f64>`. The solver is
//! deterministic: a fixed sweep order and a fixed post-processing pass
//! (ascending eigenvalue sort, sign normalization) produce the same
//! decomposition on every run and every thread count.

/// Row-major dense symmetric matrix view helpers.
#[inline]
pub(crate) fn at(m: &[f64], n: usize, i: usize, j: usize) -> f64 {
    m[i * n + j]
}

/// Eigendecomposition of a symmetric matrix.
///
/// Returns eigenvalues in ascending order and the matching orthonormal
/// eigenvectors as columns of a row-major `n x n` matrix. Eigenvalues are
/// polished with a Rayleigh-quotient pass so that well-separated small
/// eigenvalues keep close to full relative accuracy.
pub(crate) fn sym_eigen(matrix: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(matrix.len(), n * n);
    let mut a = matrix.to_vec();
    // V starts as identity; columns accumulate the rotations.
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let fro: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = 1e-15 * fro.max(f64::MIN_POSITIVE);

    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    // Rayleigh-quotient polish against the original matrix.
    let mut eig: Vec<f64> = (0..n)
        .map(|j| {
            let mut num = 0.0;
            for i in 0..n {
                let mut mv = 0.0;
                for k in 0..n {
                    mv += at(matrix, n, i, k) * v[k * n + j];
                }
                num += v[i * n + j] * mv;
            }
            num
        })
        .collect();

    // Ascending sort, applied to eigenvector columns as well.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig[i].partial_cmp(&eig[j]).unwrap());
    let sorted_eig: Vec<f64> = order.iter().map(|&i| eig[i]).collect();
    let mut sorted_v = vec![0.0; n * n];
    for (new_j, &old_j) in order.iter().enumerate() {
        for i in 0..n {
            sorted_v[i * n + new_j] = v[i * n + old_j];
        }
    }
    eig = sorted_eig;

    // Sign convention: the first entry of each column with magnitude
    // above 1e-12 is made positive.
    for j in 0..n {
        let lead = (0..n).find(|&i| sorted_v[i * n + j].abs() > 1e-12);
        if let Some(i0) = lead {
            if sorted_v[i0 * n + j] < 0.0 {
                for i in 0..n {
                    sorted_v[i * n + j] = -sorted_v[i * n + j];
                }
            }
        }
    }

    (eig, sorted_v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_is_its_own_decomposition() {
        let m = vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        let (eig, v) = sym_eigen(&m, 3);
        assert!((eig[0] - 1.0).abs() < 1e-14);
        assert!((eig[1] - 2.0).abs() < 1e-14);
        assert!((eig[2] - 3.0).abs() < 1e-14);
        // Columns are signed unit vectors.
        for j in 0..3 {
            let norm: f64 = (0..3).map(|i| v[i * 3 + j] * v[i * 3 + j]).sum();
            assert!((norm - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn reconstructs_random_symmetric_matrix() {
        // Fixed arbitrary symmetric matrix.
        let n = 5;
        let mut m = vec![0.0; n * n];
        let mut val = 0.37f64;
        for i in 0..n {
            for j in i..n {
                val = (val * 7.13 + 0.19).fract();
                m[i * n + j] = val - 0.5;
                m[j * n + i] = val - 0.5;
            }
        }
        let (eig, v) = sym_eigen(&m, n);
        // Q Lambda Q^T == M
        let mut recon = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += v[i * n + k] * eig[k] * v[j * n + k];
                }
                recon[i * n + j] = s;
            }
        }
        let scale: f64 = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        for (r, orig) in recon.iter().zip(m.iter()) {
            assert!((r - orig).abs() <= 1e-12 * scale.max(1.0));
        }
        // Ascending order.
        for w in eig.windows(2) {
            assert!(w[0] <= w[1] + 1e-14);
        }
    }
}
