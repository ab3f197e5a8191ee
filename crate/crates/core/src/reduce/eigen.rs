//! Cyclic Jacobi eigendecomposition for small dense symmetric matrices.

/// Eigenvalues (descending) and matching eigenvectors (rows) of a symmetric
/// matrix. Panics if the matrix is not square.
pub fn symmetric_eigen(matrix: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = matrix.len();
    assert!(matrix.iter().all(|r| r.len() == n), "matrix not square");
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let off = |a: &[Vec<f64>]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i][j] * a[i][j];
                }
            }
        }
        s
    };
    let scale: f64 = matrix
        .iter()
        .flatten()
        .map(|x| x * x)
        .sum::<f64>()
        .max(1e-300);
    let tol = 1e-28 * scale;
    for _sweep in 0..100 {
        if off(&a) <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i][i]).collect();
    let eigenvectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (eigenvalues, eigenvectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_by_two_known_spectrum() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (vals, vecs) = symmetric_eigen(&m);
        assert_relative_eq!(vals[0], 3.0, epsilon = 1e-12);
        assert_relative_eq!(vals[1], 1.0, epsilon = 1e-12);
        // eigenvector of 3 is (1,1)/sqrt(2) up to sign
        assert_relative_eq!(vecs[0][0].abs(), 1.0 / 2f64.sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let n = rng.gen_range(2..8);
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-2.0..2.0);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let (vals, vecs) = symmetric_eigen(&m);
            // orthonormal
            for i in 0..n {
                for j in 0..n {
                    let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_relative_eq!(dot, expect, epsilon = 1e-9);
                }
            }
            // A v = lambda v
            for k in 0..n {
                for i in 0..n {
                    let av: f64 = (0..n).map(|j| m[i][j] * vecs[k][j]).sum();
                    assert_relative_eq!(av, vals[k] * vecs[k][i], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn spectrum_matches_nalgebra() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let n = rng.gen_range(2..9);
            let mut m = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let v = rng.gen_range(-2.0..2.0);
                    m[i][j] = v;
                    m[j][i] = v;
                }
            }
            let (vals, _) = symmetric_eigen(&m);
            let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
            let mut reference: Vec<f64> =
                dm.symmetric_eigen().eigenvalues.iter().copied().collect();
            reference.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(vals.len(), reference.len());
            for (ours, theirs) in vals.iter().zip(&reference) {
                assert_relative_eq!(ours, theirs, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }
}
