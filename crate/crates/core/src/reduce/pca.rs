//! PCA on standardized rows. When the feature count exceeds the row count
//! the decomposition runs on the n x n gram matrix X X^T / n and the
//! feature-space components are recovered as X^T u / sqrt(n * eigenvalue);
//! otherwise the p x p covariance X^T X / n is decomposed directly.
//! Sign convention: the largest-magnitude entry of each component is
//! positive.

use crate::error::{Error, Result};
use crate::reduce::eigen::symmetric_eigen;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PcaSelection {
    /// Keep exactly k components.
    Count(usize),
    /// Keep the smallest prefix explaining at least this variance fraction.
    VarianceFraction(f64),
}

#[derive(Debug, Clone)]
pub struct PcaFit {
    /// components[i] is the i-th principal axis in feature space.
    pub components: Vec<Vec<f64>>,
    /// Explained-variance fraction per kept component, nonincreasing.
    pub explained_variance: Vec<f64>,
}

const EIG_FLOOR: f64 = 1e-12;

pub fn pca_fit(z: &[Vec<f64>], selection: PcaSelection) -> Result<PcaFit> {
    let n = z.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "pca needs >= 2 rows, got {n}"
        )));
    }
    let p = z[0].len();
    let max_rank = (n - 1).min(p);
    if let PcaSelection::Count(k) = selection {
        if k == 0 || k > max_rank {
            return Err(Error::InvalidArgument(format!(
                "k = {k} outside [1, {max_rank}]"
            )));
        }
    }
    let nf = n as f64;
    let (eigvals, axes): (Vec<f64>, Vec<Vec<f64>>) = if p > n {
        // dual: gram matrix in sample space
        let mut gram = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let dot: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| a * b).sum();
                gram[i][j] = dot / nf;
                gram[j][i] = gram[i][j];
            }
        }
        let (vals, vecs) = symmetric_eigen(&gram);
        let axes: Vec<Vec<f64>> = vals
            .iter()
            .zip(&vecs)
            .filter(|(&l, _)| l > EIG_FLOOR)
            .map(|(&l, u)| {
                let norm = (nf * l).sqrt();
                let mut axis = vec![0.0; p];
                for (row, &ui) in z.iter().zip(u) {
                    for (a, &v) in axis.iter_mut().zip(row) {
                        *a += ui * v / norm;
                    }
                }
                axis
            })
            .collect();
        let vals: Vec<f64> = vals.into_iter().filter(|&l| l > EIG_FLOOR).collect();
        (vals, axes)
    } else {
        let mut cov = vec![vec![0.0; p]; p];
        for row in z {
            for i in 0..p {
                for j in 0..=i {
                    cov[i][j] += row[i] * row[j] / nf;
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                cov[j][i] = cov[i][j];
            }
        }
        let (vals, vecs) = symmetric_eigen(&cov);
        let keep: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > EIG_FLOOR).collect();
        (
            keep.iter().map(|&i| vals[i]).collect(),
            keep.iter().map(|&i| vecs[i].clone()).collect(),
        )
    };
    // total variance = trace of the covariance = sum of per-column variances
    let total: f64 = (0..p)
        .map(|j| z.iter().map(|row| row[j] * row[j]).sum::<f64>() / nf)
        .sum();
    let fractions: Vec<f64> = eigvals.iter().map(|&l| l / total.max(1e-300)).collect();
    let k = match selection {
        PcaSelection::Count(k) => k.min(axes.len()),
        PcaSelection::VarianceFraction(f) => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::InvalidArgument(format!(
                    "variance fraction {f} outside [0, 1]"
                )));
            }
            let mut acc = 0.0;
            let mut k = axes.len();
            for (i, &fr) in fractions.iter().enumerate() {
                acc += fr;
                if acc >= f - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k.max(1)
        }
    };
    let mut components: Vec<Vec<f64>> = axes.into_iter().take(k).collect();
    for axis in components.iter_mut() {
        let (best, _) = axis
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().total_cmp(&b.abs()))
            .expect("non-empty axis");
        if axis[best] < 0.0 {
            for v in axis.iter_mut() {
                *v = -*v;
            }
        }
    }
    Ok(PcaFit {
        components,
        explained_variance: fractions.into_iter().take(k).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn standardize(rows: &mut [Vec<f64>]) {
        let n = rows.len() as f64;
        let p = rows[0].len();
        for j in 0..p {
            let mean: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var: f64 = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt().max(1e-12);
            for r in rows.iter_mut() {
                r[j] = (r[j] - mean) / std;
            }
        }
    }

    #[test]
    fn collinear_points_one_component() {
        let mut rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, 2.0 * i as f64])
            .collect();
        standardize(&mut rows);
        let fit = pca_fit(&rows, PcaSelection::VarianceFraction(0.99)).unwrap();
        assert_eq!(fit.components.len(), 1);
        assert_relative_eq!(fit.explained_variance[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn full_rank_reconstruction() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        let n = 12;
        let p = 5;
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut rows);
        let fit = pca_fit(&rows, PcaSelection::Count(p)).unwrap();
        assert_eq!(fit.components.len(), p);
        for row in &rows {
            let scores: Vec<f64> = fit
                .components
                .iter()
                .map(|c| c.iter().zip(row).map(|(a, b)| a * b).sum::<f64>())
                .collect();
            for j in 0..p {
                let recon: f64 = fit
                    .components
                    .iter()
                    .zip(&scores)
                    .map(|(c, s)| c[j] * s)
                    .sum();
                assert_relative_eq!(recon, row[j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn wide_matrix_scores_have_diagonal_covariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20;
        let p = 50;
        let mut rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut rows);
        let fit = pca_fit(&rows, PcaSelection::Count(6)).unwrap();
        // orthonormal components
        for i in 0..6 {
            for j in 0..6 {
                let dot: f64 = fit.components[i]
                    .iter()
                    .zip(&fit.components[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(dot, expect, epsilon = 1e-8);
            }
        }
        let scores: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| {
                fit.components
                    .iter()
                    .map(|c| c.iter().zip(row).map(|(a, b)| a * b).sum::<f64>())
                    .collect()
            })
            .collect();
        let mut last = f64::INFINITY;
        for i in 0..6 {
            for j in 0..6 {
                let cov: f64 =
                    scores.iter().map(|s| s[i] * s[j]).sum::<f64>() / n as f64;
                if i == j {
                    assert!(cov <= last + 1e-9, "variances not decreasing");
                    last = cov;
                } else {
                    assert_relative_eq!(cov, 0.0, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn explained_variance_bounded_and_nonincreasing() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        let mut rows: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut rows);
        let fit = pca_fit(&rows, PcaSelection::Count(7)).unwrap();
        let sum: f64 = fit.explained_variance.iter().sum();
        assert!(sum <= 1.0 + 1e-10, "sum {sum}");
        for w in fit.explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-12);
        }
    }

    #[test]
    fn k_out_of_range_rejected() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 0.5]];
        assert!(pca_fit(&rows, PcaSelection::Count(0)).is_err());
        assert!(pca_fit(&rows, PcaSelection::Count(3)).is_err());
    }
}
