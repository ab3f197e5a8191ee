//! Intensity histogram statistics, spatial-context variants and shape
//! volume.
//!
//! Moments use the population convention. Degenerate ratios (0/0) are
//! defined as 0. Empty masks yield NaN sentinels; the catalog layer
//! zero-fills them with a warning.

use crate::error::Result;
use crate::volume::{masked_voxels, AnatomyMask, Volume};

pub const INTENSITY_STATS: [&str; 8] = [
    "mean",
    "median",
    "range",
    "variance",
    "skewness",
    "kurtosis",
    "hist_energy",
    "hist_entropy",
];

pub const DEFAULT_HIST_BINS: usize = 64;

/// Population moments of a sample: (mean, variance, skewness, excess kurtosis).
pub fn moments(values: &[f64]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 > 0.0 {
        (mean, m2, m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (mean, 0.0, 0.0, 0.0)
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Histogram statistics over the in-mask HU values: moments on raw values,
/// energy/entropy on an `h_bins` equal-width histogram spanning the in-mask
/// (min, max).
pub fn intensity_statistics(
    volume: &Volume,
    mask: &AnatomyMask,
    h_bins: usize,
) -> Result<Vec<(String, f64)>> {
    let mut values: Vec<f64> = masked_voxels(volume, mask)?
        .map(|(_, v)| v as f64)
        .collect();
    let names = INTENSITY_STATS.iter().map(|s| s.to_string());
    if values.is_empty() {
        return Ok(names.map(|n| (n, f64::NAN)).collect());
    }
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite HU"));
    let (mean, variance, skewness, kurtosis) = moments(&values);
    let lo = values[0];
    let hi = *values.last().expect("non-empty");
    let range = hi - lo;
    let med = median(&values);

    let mut hist = vec![0usize; h_bins.max(1)];
    let width = if range > 0.0 { range } else { 1.0 };
    for &v in &values {
        let bin = (((v - lo) / width) * h_bins as f64).floor() as usize;
        hist[bin.min(h_bins - 1)] += 1;
    }
    let total = values.len() as f64;
    let mut energy = 0.0;
    let mut entropy = 0.0;
    for &count in &hist {
        if count > 0 {
            let p = count as f64 / total;
            energy += p * p;
            entropy -= p * p.log2();
        }
    }
    let vals = [mean, med, range, variance, skewness, kurtosis, energy, entropy];
    Ok(names.zip(vals).collect())
}

pub const SPATIAL_STATS_LEN: usize = 15;

/// Spatial-context features: per-axis intensity-weighted centroid normalized
/// by the mask bounding box (3 values), and per-axis mean HU over the four
/// coordinate-quartile slabs of the in-mask voxels (12 values).
///
/// Weights are HU shifted to be nonnegative (w = HU - min in-mask); a
/// constant region falls back to uniform weights. A degenerate bounding-box
/// axis yields centroid 0.5. Empty quartile slabs take the overall in-mask
/// mean.
pub fn spatial_context(volume: &Volume, mask: &AnatomyMask) -> Result<Vec<(String, f64)>> {
    let voxels: Vec<((usize, usize, usize), f64)> = masked_voxels(volume, mask)?
        .map(|(c, v)| (c, v as f64))
        .collect();
    let mut out: Vec<(String, f64)> = Vec::with_capacity(SPATIAL_STATS_LEN);
    if voxels.is_empty() {
        for axis in ["x", "y", "z"] {
            out.push((format!("centroid_{axis}"), f64::NAN));
        }
        for axis in ["x", "y", "z"] {
            for q in 1..=4 {
                out.push((format!("qmean_{axis}{q}"), f64::NAN));
            }
        }
        return Ok(out);
    }
    let min_hu = voxels
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::INFINITY, f64::min);
    let wsum: f64 = voxels.iter().map(|&(_, v)| v - min_hu).sum();
    let uniform = wsum <= 0.0;
    let overall_mean: f64 =
        voxels.iter().map(|&(_, v)| v).sum::<f64>() / voxels.len() as f64;

    let coord = |c: &(usize, usize, usize), axis: usize| match axis {
        0 => c.0,
        1 => c.1,
        _ => c.2,
    };
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let min_c = voxels.iter().map(|(c, _)| coord(c, axis)).min().unwrap();
        let max_c = voxels.iter().map(|(c, _)| coord(c, axis)).max().unwrap();
        let centroid = if max_c == min_c {
            0.5
        } else {
            let num: f64 = voxels
                .iter()
                .map(|(c, v)| {
                    let w = if uniform { 1.0 } else { v - min_hu };
                    w * coord(c, axis) as f64
                })
                .sum();
            let den: f64 = if uniform {
                voxels.len() as f64
            } else {
                wsum
            };
            (num / den - min_c as f64) / (max_c - min_c) as f64
        };
        out.push((format!("centroid_{name}"), centroid));
    }
    for (axis, name) in ["x", "y", "z"].iter().enumerate() {
        let mut order: Vec<usize> = (0..voxels.len()).collect();
        order.sort_by_key(|&i| (coord(&voxels[i].0, axis), i));
        let n = voxels.len();
        for q in 0..4 {
            let start = q * n / 4;
            let end = (q + 1) * n / 4;
            let mean = if start == end {
                overall_mean
            } else {
                order[start..end]
                    .iter()
                    .map(|&i| voxels[i].1)
                    .sum::<f64>()
                    / (end - start) as f64
            };
            out.push((format!("qmean_{name}{}", q + 1), mean));
        }
    }
    Ok(out)
}

/// Mask volume in milliliters: popcount * voxel volume (mm^3) / 1000.
pub fn anatomy_volume(mask: &AnatomyMask, spacing: (f64, f64, f64)) -> f64 {
    mask.popcount() as f64 * spacing.0 * spacing.1 * spacing.2 / 1000.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Anatomy;
    use approx::assert_relative_eq;

    fn setup(data: Vec<i16>, bits: Vec<u8>, dims: (usize, usize, usize)) -> (Volume, AnatomyMask) {
        (
            Volume::new(dims, (1.0, 1.0, 1.0), data).unwrap(),
            AnatomyMask::new(Anatomy::Muscle, dims, bits).unwrap(),
        )
    }

    fn get(stats: &[(String, f64)], name: &str) -> f64 {
        stats.iter().find(|(n, _)| n == name).unwrap().1
    }

    #[test]
    fn constant_region() {
        let (v, m) = setup(vec![100; 8], vec![1; 8], (2, 2, 2));
        let s = intensity_statistics(&v, &m, 64).unwrap();
        assert_relative_eq!(get(&s, "mean"), 100.0);
        assert_relative_eq!(get(&s, "range"), 0.0);
        assert_relative_eq!(get(&s, "variance"), 0.0);
        assert_relative_eq!(get(&s, "skewness"), 0.0);
        assert_relative_eq!(get(&s, "kurtosis"), 0.0);
        assert_relative_eq!(get(&s, "hist_energy"), 1.0);
        assert_relative_eq!(get(&s, "hist_entropy"), 0.0);
    }

    #[test]
    fn two_voxel_hand_computation() {
        let (v, m) = setup(vec![0, 10], vec![1, 1], (2, 1, 1));
        let s = intensity_statistics(&v, &m, 4).unwrap();
        assert_relative_eq!(get(&s, "mean"), 5.0);
        assert_relative_eq!(get(&s, "median"), 5.0);
        assert_relative_eq!(get(&s, "range"), 10.0);
        assert_relative_eq!(get(&s, "variance"), 25.0);
    }

    #[test]
    fn random_region_matches_recomputation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let n = 4 * 4 * 2;
        let data: Vec<i16> = (0..n).map(|_| rng.gen_range(-200..200)).collect();
        let (v, m) = setup(data.clone(), vec![1; n], (4, 4, 2));
        let s = intensity_statistics(&v, &m, 16).unwrap();
        let vals: Vec<f64> = data.iter().map(|&x| x as f64).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert_relative_eq!(get(&s, "mean"), mean, max_relative = 1e-10);
        assert_relative_eq!(get(&s, "variance"), var, max_relative = 1e-10);
    }

    #[test]
    fn symmetric_uniform_mask_centroid_half() {
        let (v, m) = setup(vec![50; 27], vec![1; 27], (3, 3, 3));
        let s = spatial_context(&v, &m).unwrap();
        for axis in ["x", "y", "z"] {
            assert_relative_eq!(get(&s, &format!("centroid_{axis}")), 0.5);
        }
    }

    #[test]
    fn rising_intensity_shifts_centroid_and_quartiles() {
        // intensity rises linearly along x
        let dims = (8, 2, 2);
        let mut data = vec![0i16; 32];
        for z in 0..2 {
            for y in 0..2 {
                for x in 0..8 {
                    data[x + 8 * (y + 2 * z)] = (x * 100) as i16;
                }
            }
        }
        let (v, m) = setup(data, vec![1; 32], dims);
        let s = spatial_context(&v, &m).unwrap();
        assert!(get(&s, "centroid_x") > 0.5);
        let q: Vec<f64> = (1..=4).map(|i| get(&s, &format!("qmean_x{i}"))).collect();
        assert!(q.windows(2).all(|w| w[0] < w[1]), "{q:?}");
    }

    #[test]
    fn single_voxel_quartiles_equal_value() {
        let mut bits = vec![0u8; 27];
        bits[13] = 1;
        let mut data = vec![0i16; 27];
        data[13] = 77;
        let (v, m) = setup(data, bits, (3, 3, 3));
        let s = spatial_context(&v, &m).unwrap();
        for axis in ["x", "y", "z"] {
            for q in 1..=4 {
                assert_relative_eq!(get(&s, &format!("qmean_{axis}{q}")), 77.0);
            }
            assert_relative_eq!(get(&s, &format!("centroid_{axis}")), 0.5);
        }
    }

    #[test]
    fn volume_in_ml() {
        let m = AnatomyMask::new(Anatomy::Heart, (10, 10, 10), vec![1; 1000]).unwrap();
        assert_relative_eq!(anatomy_volume(&m, (1.0, 1.0, 1.0)), 1.0);
        let empty = AnatomyMask::new(Anatomy::Heart, (10, 10, 10), vec![0; 1000]).unwrap();
        assert_relative_eq!(anatomy_volume(&empty, (1.0, 1.0, 1.0)), 0.0);
    }
}
