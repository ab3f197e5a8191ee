//! Chronic-disease-burden scores: bone-density proxy, emphysema fraction and
//! the Agatston-style calcification score.

use crate::error::Result;
use crate::volume::{masked_voxels, AnatomyMask, Volume};

#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalScoreConfig {
    /// HU below which a lung voxel counts as emphysematous.
    pub emphysema_threshold: f64,
    /// HU at or above which a voxel can belong to a calcified lesion.
    pub calcium_threshold: f64,
    /// Peak-HU cutpoints mapping a lesion to weights 1..4.
    pub calcium_weight_bands: (f64, f64, f64),
    /// Minimum in-slice lesion area, mm^2.
    pub min_lesion_area: f64,
}

impl Default for ClinicalScoreConfig {
    fn default() -> Self {
        ClinicalScoreConfig {
            emphysema_threshold: -950.0,
            calcium_threshold: 130.0,
            calcium_weight_bands: (200.0, 300.0, 400.0),
            min_lesion_area: 1.0,
        }
    }
}

impl ClinicalScoreConfig {
    pub fn validate(&self) -> bool {
        let (a, b, c) = self.calcium_weight_bands;
        self.calcium_threshold < a && a < b && b < c
    }

    fn weight(&self, peak: f64) -> f64 {
        let (a, b, c) = self.calcium_weight_bands;
        if peak >= c {
            4.0
        } else if peak >= b {
            3.0
        } else if peak >= a {
            2.0
        } else {
            1.0
        }
    }
}

/// Mean HU over the spinal-column mask (trabecular proxy). NaN on empty.
pub fn bmd_score(volume: &Volume, mask: &AnatomyMask) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (_, v) in masked_voxels(volume, mask)? {
        sum += v as f64;
        count += 1;
    }
    Ok(if count == 0 {
        f64::NAN
    } else {
        sum / count as f64
    })
}

/// Low-attenuation area fraction: share of in-mask voxels below the
/// emphysema threshold. NaN on empty.
pub fn emphysema_score(
    volume: &Volume,
    mask: &AnatomyMask,
    cfg: &ClinicalScoreConfig,
) -> Result<f64> {
    let mut below = 0usize;
    let mut total = 0usize;
    for (_, v) in masked_voxels(volume, mask)? {
        total += 1;
        if (v as f64) < cfg.emphysema_threshold {
            below += 1;
        }
    }
    Ok(if total == 0 {
        f64::NAN
    } else {
        below as f64 / total as f64
    })
}

/// Agatston-style calcification score: per axial slice, 8-connected
/// components of in-mask voxels at or above the calcium threshold; each
/// lesion of sufficient area contributes area(mm^2) * weight(peak HU);
/// summed over slices. NaN on empty mask.
pub fn calcium_score(
    volume: &Volume,
    mask: &AnatomyMask,
    spacing: (f64, f64, f64),
    cfg: &ClinicalScoreConfig,
) -> Result<f64> {
    if volume.dims() != mask.dims() {
        return Err(crate::error::Error::DimMismatch {
            volume: volume.dims(),
            mask: mask.dims(),
        });
    }
    if mask.popcount() == 0 {
        return Ok(f64::NAN);
    }
    let (w, h, d) = volume.dims();
    let pixel_area = spacing.0 * spacing.1;
    let mut score = 0.0;
    let mut visited = vec![false; w * h];
    let mut stack = Vec::new();
    for z in 0..d {
        visited.fill(false);
        for y0 in 0..h {
            for x0 in 0..w {
                let i0 = x0 + w * y0;
                if visited[i0] {
                    continue;
                }
                let hot = |x: usize, y: usize| {
                    mask.is_set(x, y, z) && volume.at(x, y, z) as f64 >= cfg.calcium_threshold
                };
                if !hot(x0, y0) {
                    continue;
                }
                visited[i0] = true;
                stack.clear();
                stack.push((x0, y0));
                let mut count = 0usize;
                let mut peak = f64::NEG_INFINITY;
                while let Some((x, y)) = stack.pop() {
                    count += 1;
                    peak = peak.max(volume.at(x, y, z) as f64);
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dx == 0 && dy == 0 {
                                continue;
                            }
                            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            let ni = nx + w * ny;
                            if !visited[ni] && hot(nx, ny) {
                                visited[ni] = true;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
                let area = count as f64 * pixel_area;
                if area >= cfg.min_lesion_area {
                    score += area * cfg.weight(peak);
                }
            }
        }
    }
    Ok(score)
}
