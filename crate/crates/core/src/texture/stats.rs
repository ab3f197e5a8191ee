//! Statistic vectors over normalized texture matrices.
//!
//! All statistics are computed on the probability-normalized matrix p(r, c)
//! with 1-based level r and 1-based length/size c. Conventions:
//! - entropy is log base 2 with 0*log(0) = 0
//! - marginal mean/variance/skewness/kurtosis are over the row marginal
//!   p_r = sum_c p(r, c); skewness and kurtosis (excess) are 0 when the
//!   variance is 0
//! - nonuniformity statistics use the normalized marginals: sum of squared
//!   marginal probabilities
//! - run/zone percentage divides the matrix total by the in-mask voxel count
//!
//! A zero-total matrix yields NaN sentinels for every statistic; the catalog
//! layer replaces them with 0 and logs a warning.

use crate::texture::matrices::{MatrixKind, TextureMatrix};

/// GLCM statistic names, in output order.
pub const GLCM_STATS: [&str; 9] = [
    "energy",
    "entropy",
    "contrast",
    "correlation",
    "variance",
    "mean",
    "skewness",
    "kurtosis",
    "homogeneity",
];

/// GLRLM statistic names, in output order.
pub const GLRLM_STATS: [&str; 5] = [
    "short_run_emphasis",
    "long_run_emphasis",
    "gray_level_nonuniformity",
    "run_length_nonuniformity",
    "run_percentage",
];

/// GLSZM / MGLSZM statistic names, in output order.
pub const GLSZM_STATS: [&str; 5] = [
    "small_zone_emphasis",
    "large_zone_emphasis",
    "gray_level_nonuniformity",
    "zone_size_nonuniformity",
    "zone_percentage",
];

pub fn stat_names(kind: MatrixKind) -> &'static [&'static str] {
    match kind {
        MatrixKind::Glcm => &GLCM_STATS,
        MatrixKind::Glrlm => &GLRLM_STATS,
        MatrixKind::Glszm | MatrixKind::Mglszm => &GLSZM_STATS,
    }
}

/// Statistic vector for a texture matrix. `voxel_count` is the in-mask voxel
/// count of the source region (denominator of run/zone percentage).
pub fn texture_statistics(matrix: &TextureMatrix, voxel_count: usize) -> Vec<(String, f64)> {
    let names = stat_names(matrix.kind);
    let total = matrix.total();
    if total <= 0.0 {
        return names
            .iter()
            .map(|&n| (n.to_string(), f64::NAN))
            .collect();
    }
    let values = match matrix.kind {
        MatrixKind::Glcm => glcm_stats(matrix),
        MatrixKind::Glrlm => emphasis_stats(matrix, voxel_count),
        MatrixKind::Glszm | MatrixKind::Mglszm => emphasis_stats(matrix, voxel_count),
    };
    names
        .iter()
        .zip(values)
        .map(|(&n, v)| (n.to_string(), v))
        .collect()
}

fn glcm_stats(matrix: &TextureMatrix) -> Vec<f64> {
    let p = matrix.normalized();
    let (rows, cols) = (p.rows(), p.cols());
    let mut energy = 0.0;
    let mut entropy = 0.0;
    let mut contrast = 0.0;
    let mut homogeneity = 0.0;
    let mut cross = 0.0;
    let mut row_marginal = vec![0.0; rows];
    let mut col_marginal = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = p.at(r, c);
            if v > 0.0 {
                energy += v * v;
                entropy -= v * v.log2();
            }
            let (ri, ci) = ((r + 1) as f64, (c + 1) as f64);
            contrast += (ri - ci) * (ri - ci) * v;
            homogeneity += v / (1.0 + (ri - ci).abs());
            cross += ri * ci * v;
            row_marginal[r] += v;
            col_marginal[c] += v;
        }
    }
    let moments = |marginal: &[f64]| -> (f64, f64, f64, f64) {
        let mean: f64 = marginal
            .iter()
            .enumerate()
            .map(|(i, &m)| (i + 1) as f64 * m)
            .sum();
        let mut var = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for (i, &m) in marginal.iter().enumerate() {
            let d = (i + 1) as f64 - mean;
            var += d * d * m;
            m3 += d * d * d * m;
            m4 += d * d * d * d * m;
        }
        let (skew, kurt) = if var > 0.0 {
            (m3 / var.powf(1.5), m4 / (var * var) - 3.0)
        } else {
            (0.0, 0.0)
        };
        (mean, var, skew, kurt)
    };
    let (mean_r, var_r, skew, kurt) = moments(&row_marginal);
    let (mean_c, var_c, _, _) = moments(&col_marginal);
    let correlation = if var_r > 0.0 && var_c > 0.0 {
        (cross - mean_r * mean_c) / (var_r.sqrt() * var_c.sqrt())
    } else {
        0.0
    };
    vec![
        energy,
        entropy,
        contrast,
        correlation,
        var_r,
        mean_r,
        skew,
        kurt,
        homogeneity,
    ]
}

/// Shared statistic set for run-length and size-zone matrices: columns index
/// run length or zone size.
fn emphasis_stats(matrix: &TextureMatrix, voxel_count: usize) -> Vec<f64> {
    let total = matrix.total();
    let (rows, cols) = (matrix.rows(), matrix.cols());
    let mut short = 0.0;
    let mut long = 0.0;
    let mut row_sums = vec![0.0; rows];
    let mut col_sums = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            let n = matrix.at(r, c);
            let len = (c + 1) as f64;
            short += n / (len * len);
            long += n * len * len;
            row_sums[r] += n;
            col_sums[c] += n;
        }
    }
    let gln: f64 = row_sums.iter().map(|&s| (s / total) * (s / total)).sum();
    let nun: f64 = col_sums.iter().map(|&s| (s / total) * (s / total)).sum();
    let pct = if voxel_count > 0 {
        total / voxel_count as f64
    } else {
        f64::NAN
    };
    vec![short / total, long / total, gln, nun, pct]
}
