//! LASSO by cyclic coordinate descent on standardized columns:
//! min (1/2n) ||y - X b||^2 + lambda ||b||_1, squared loss on the centered
//! 0/1 label. With unit-variance columns the coordinate update is a plain
//! soft threshold of the partial residual correlation.

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 10_000;
const TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct LassoFit {
    /// Indices of nonzero coefficients, ascending.
    pub selected: Vec<usize>,
    /// Coefficients for the selected indices, same order.
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    /// Full coefficient vector.
    pub beta: Vec<f64>,
    pub sweeps: usize,
}

fn soft_threshold(v: f64, lambda: f64) -> f64 {
    if v > lambda {
        v - lambda
    } else if v < -lambda {
        v + lambda
    } else {
        0.0
    }
}

fn center(y: &[f64]) -> Vec<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|&v| v - mean).collect()
}

/// Smallest lambda at which all coefficients are zero: max |X^T y_c| / n.
pub fn lasso_max_lambda(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let p = x[0].len();
    let yc = center(y);
    (0..p)
        .map(|j| {
            let dot: f64 = x.iter().zip(&yc).map(|(row, &v)| row[j] * v).sum();
            (dot / n).abs()
        })
        .fold(0.0, f64::max)
}

/// Coordinate-descent solve at a fixed lambda. `x` rows must be
/// standardized (the per-coordinate curvature x_j.x_j / n is computed, not
/// assumed 1, so mildly off-unit columns still converge correctly).
pub fn lasso_fit(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<LassoFit> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!("lambda {lambda} < 0")));
    }
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("lasso input".into()));
    }
    let n = x.len();
    let p = x[0].len();
    let nf = n as f64;
    let yc = center(y);
    let mut beta = vec![0.0f64; p];
    let mut residual = yc.clone();
    // per-column curvature
    let curv: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|row| row[j] * row[j]).sum::<f64>() / nf)
        .collect();
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..p {
            if curv[j] <= 0.0 {
                continue; // constant column
            }
            let old = beta[j];
            let rho: f64 =
                x.iter().zip(&residual).map(|(row, &r)| row[j] * r).sum::<f64>() / nf
                    + curv[j] * old;
            let new = soft_threshold(rho, lambda) / curv[j];
            if new != old {
                let delta = new - old;
                for (row, r) in x.iter().zip(residual.iter_mut()) {
                    *r -= delta * row[j];
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < TOL || sweeps >= MAX_SWEEPS {
            break;
        }
    }
    let selected: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let coefficients: Vec<f64> = selected.iter().map(|&j| beta[j]).collect();
    Ok(LassoFit {
        selected,
        coefficients,
        lambda,
        beta,
        sweeps,
    })
}

/// Fit at the given lambda, or pick lambda by deterministic inner 3-fold
/// cross-validation over a log grid from lambda_max down three decades.
pub fn lasso_path_fit(x: &[Vec<f64>], y: &[f64], lambda: Option<f64>) -> Result<LassoFit> {
    match lambda {
        Some(l) => lasso_fit(x, y, l),
        None => {
            let lmax = lasso_max_lambda(x, y).max(1e-12);
            let grid: Vec<f64> = (0..30)
                .map(|i| lmax * 10f64.powf(-3.0 * i as f64 / 29.0))
                .collect();
            let n = x.len();
            if n < 6 {
                // too few rows for inner CV; take a mid-path lambda
                return lasso_fit(x, y, lmax * 0.1);
            }
            let mut best = (f64::INFINITY, grid[0]);
            for &l in &grid {
                let mut sse = 0.0;
                for fold in 0..3 {
                    let test: Vec<usize> = (0..n).filter(|i| i % 3 == fold).collect();
                    let train: Vec<usize> = (0..n).filter(|i| i % 3 != fold).collect();
                    let xt: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
                    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                    let fit = lasso_fit(&xt, &yt, l)?;
                    let intercept = yt.iter().sum::<f64>() / yt.len() as f64;
                    for &i in &test {
                        let pred: f64 = intercept
                            + fit
                                .beta
                                .iter()
                                .zip(&x[i])
                                .map(|(b, v)| b * v)
                                .sum::<f64>();
                        sse += (pred - y[i]).powi(2);
                    }
                }
                // ties prefer the larger (earlier) lambda
                if sse < best.0 - 1e-12 {
                    best = (sse, l);
                }
            }
            lasso_fit(x, y, best.1)
        }
    }
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
    fn lambda_zero_equals_least_squares() {
        // small full-rank problem; compare against normal equations solved
        // by Gaussian elimination
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let n = 20;
        let p = 3;
        let mut x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut x);
        let y: Vec<f64> = x
            .iter()
            .map(|r| 0.5 * r[0] - 0.3 * r[1] + 0.1 * r[2] + 0.01 * rng.gen_range(-1.0..1.0))
            .collect();
        let fit = lasso_fit(&x, &y, 0.0).unwrap();
        // normal equations on centered y
        let yc = super::center(&y);
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..p {
            for j in 0..p {
                a[i][j] = x.iter().map(|r| r[i] * r[j]).sum::<f64>();
            }
            a[i][p] = x.iter().zip(&yc).map(|(r, &v)| r[i] * v).sum::<f64>();
        }
        for col in 0..p {
            let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, pivot);
            let div = a[col][col];
            for v in a[col].iter_mut() {
                *v /= div;
            }
            for row in 0..p {
                if row != col {
                    let f = a[row][col];
                    for k in 0..=p {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
        for j in 0..p {
            assert_relative_eq!(fit.beta[j], a[j][p], epsilon = 1e-6);
        }
    }

    #[test]
    fn lambda_above_max_shuts_everything_off() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut x: Vec<Vec<f64>> = (0..15)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut x);
        let y: Vec<f64> = (0..15).map(|i| (i % 2) as f64).collect();
        let lmax = lasso_max_lambda(&x, &y);
        let fit = lasso_fit(&x, &y, lmax * 1.0001).unwrap();
        assert!(fit.selected.is_empty(), "beta = {:?}", fit.beta);
    }

    #[test]
    fn orthonormal_design_soft_threshold_closed_form() {
        // columns of an identity-like design scaled so x_j.x_j / n = 1
        let n = 4;
        let scale = (n as f64).sqrt();
        let mut x = vec![vec![0.0; 3]; n];
        for j in 0..3 {
            x[j][j] = scale;
        }
        let y = vec![0.8, 0.1, 0.6, 0.0];
        let lambda = 0.15;
        let fit = lasso_fit(&x, &y, lambda).unwrap();
        let yc = super::center(&y);
        for j in 0..3 {
            let corr: f64 =
                x.iter().zip(&yc).map(|(r, &v)| r[j] * v).sum::<f64>() / n as f64;
            let expect = soft_threshold(corr, lambda);
            assert_relative_eq!(fit.beta[j], expect, epsilon = 1e-8);
        }
    }

    fn kkt_residuals(x: &[Vec<f64>], y: &[f64], fit: &LassoFit) -> (f64, f64) {
        let n = x.len() as f64;
        let yc = super::center(y);
        let residual: Vec<f64> = x
            .iter()
            .zip(&yc)
            .map(|(r, &v)| v - r.iter().zip(&fit.beta).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let mut worst_zero = 0.0f64;
        let mut worst_active = 0.0f64;
        for j in 0..fit.beta.len() {
            let g: f64 = x.iter().zip(&residual).map(|(r, &v)| r[j] * v).sum::<f64>() / n;
            if fit.beta[j] == 0.0 {
                worst_zero = worst_zero.max(g.abs() - fit.lambda);
            } else {
                worst_active = worst_active.max((g - fit.lambda * fit.beta[j].signum()).abs());
            }
        }
        (worst_zero, worst_active)
    }

    #[test]
    fn kkt_conditions_hold_on_random_problems() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..20 {
            let n = rng.gen_range(10..30);
            let p = rng.gen_range(3..12);
            let mut x: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            standardize(&mut x);
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let lambda = rng.gen_range(0.0..0.3);
            let fit = lasso_fit(&x, &y, lambda).unwrap();
            let (z, a) = kkt_residuals(&x, &y, &fit);
            assert!(z <= 1e-6, "trial {trial}: zero-set KKT {z}");
            assert!(a <= 1e-6, "trial {trial}: active-set KKT {a}");
        }
    }

    #[test]
    fn l1_norm_nonincreasing_in_lambda() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
        let mut x: Vec<Vec<f64>> = (0..25)
            .map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut x);
        let y: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..1.0)).collect();
        let lmax = lasso_max_lambda(&x, &y);
        let mut last = f64::INFINITY;
        for i in 0..12 {
            let lambda = lmax * i as f64 / 11.0;
            let norm: f64 = lasso_fit(&x, &y, lambda)
                .unwrap()
                .beta
                .iter()
                .map(|b| b.abs())
                .sum();
            assert!(
                norm <= last + 1e-9,
                "l1 norm grew from {last} to {norm} at lambda {lambda}"
            );
            last = norm;
        }
    }

    #[test]
    fn auto_lambda_recovers_sparse_signal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let n = 40;
        let p = 10;
        let mut x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        standardize(&mut x);
        let y: Vec<f64> = x
            .iter()
            .map(|r| if r[2] + 0.8 * r[7] > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let fit = lasso_path_fit(&x, &y, None).unwrap();
        assert!(fit.selected.contains(&2), "selected {:?}", fit.selected);
        assert!(fit.selected.contains(&7), "selected {:?}", fit.selected);
    }
}
