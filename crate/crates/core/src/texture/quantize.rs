use crate::error::{Error, Result};
use crate::volume::{AnatomyMask, Volume};

/// Integer gray levels in [1, G] where the mask is set, 0 elsewhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedRegion {
    dims: (usize, usize, usize),
    levels: Vec<u16>,
    g: usize,
    voxel_count: usize,
}

impl QuantizedRegion {
    pub fn from_levels(dims: (usize, usize, usize), levels: Vec<u16>, g: usize) -> Result<Self> {
        let (w, h, d) = dims;
        if levels.len() != w * h * d {
            return Err(Error::InvalidArgument(format!(
                "levels length {} != {w}x{h}x{d}",
                levels.len()
            )));
        }
        if let Some(&bad) = levels.iter().find(|&&l| l as usize > g) {
            return Err(Error::InvalidArgument(format!(
                "level {bad} above G={g}"
            )));
        }
        let voxel_count = levels.iter().filter(|&&l| l > 0).count();
        Ok(QuantizedRegion {
            dims,
            levels,
            g,
            voxel_count,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn levels(&self) -> &[u16] {
        &self.levels
    }

    pub fn g(&self) -> usize {
        self.g
    }

    /// Number of in-mask voxels.
    pub fn voxel_count(&self) -> usize {
        self.voxel_count
    }

    pub fn is_empty(&self) -> bool {
        self.voxel_count == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    /// Level at a voxel; 0 means out of mask.
    #[inline]
    pub fn level_at(&self, x: usize, y: usize, z: usize) -> u16 {
        self.levels[self.index(x, y, z)]
    }
}

/// Equal-width binning of windowed HU into [1, G]:
/// level = 1 + floor((clamp(v, lo, hi) - lo) * G / (hi - lo)), with v = hi
/// mapping to G. An empty mask yields an empty region; downstream features
/// take the sentinel path.
pub fn quantize(
    volume: &Volume,
    mask: &AnatomyMask,
    g: usize,
    hu_window: (f64, f64),
) -> Result<QuantizedRegion> {
    if volume.dims() != mask.dims() {
        return Err(Error::DimMismatch {
            volume: volume.dims(),
            mask: mask.dims(),
        });
    }
    if g < 2 {
        return Err(Error::InvalidArgument(format!("G = {g} must be >= 2")));
    }
    let (lo, hi) = hu_window;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "hu_window ({lo}, {hi}) needs lo < hi"
        )));
    }
    let width = hi - lo;
    let levels: Vec<u16> = volume
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &b)| {
            if b == 0 {
                0
            } else {
                let v = (v as f64).clamp(lo, hi);
                let level = 1 + ((v - lo) * g as f64 / width).floor() as usize;
                level.min(g) as u16
            }
        })
        .collect();
    QuantizedRegion::from_levels(volume.dims(), levels, g)
}

/// The in-mask (min, max) HU window, widened by 1 when degenerate.
/// Returns None for an empty mask.
pub fn in_mask_window(volume: &Volume, mask: &AnatomyMask) -> Option<(f64, f64)> {
    let mut lo = i16::MAX;
    let mut hi = i16::MIN;
    for (&v, &b) in volume.data().iter().zip(mask.bits()) {
        if b == 1 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if lo > hi {
        None
    } else if lo == hi {
        Some((lo as f64, lo as f64 + 1.0))
    } else {
        Some((lo as f64, hi as f64))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Anatomy;
    use rand::{Rng, SeedableRng};

    fn setup(data: Vec<i16>, bits: Vec<u8>, dims: (usize, usize, usize)) -> (Volume, AnatomyMask) {
        (
            Volume::new(dims, (1.0, 1.0, 1.0), data).unwrap(),
            AnatomyMask::new(Anatomy::Heart, dims, bits).unwrap(),
        )
    }

    #[test]
    fn constant_region_single_level() {
        let (v, m) = setup(vec![100; 8], vec![1; 8], (2, 2, 2));
        let q = quantize(&v, &m, 8, (0.0, 200.0)).unwrap();
        assert!(q.levels().iter().all(|&l| l == 5));
    }

    #[test]
    fn boundary_values_map_to_extremes() {
        let (v, m) = setup(vec![0, 100], vec![1, 1], (2, 1, 1));
        let q = quantize(&v, &m, 2, (0.0, 100.0)).unwrap();
        assert_eq!(q.levels(), &[1, 2]);
    }

    #[test]
    fn histogram_matches_per_voxel_formula() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 4 * 4 * 4;
        let data: Vec<i16> = (0..n).map(|_| rng.gen_range(-500..500)).collect();
        let bits: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let (v, m) = setup(data.clone(), bits.clone(), (4, 4, 4));
        let g = 8;
        let (lo, hi) = (-500.0, 500.0);
        let q = quantize(&v, &m, g, (lo, hi)).unwrap();
        let mut hist = vec![0usize; g + 1];
        for &l in q.levels() {
            hist[l as usize] += 1;
        }
        // independent per-voxel recomputation
        let mut expect = vec![0usize; g + 1];
        for i in 0..n as usize {
            if bits[i] == 1 {
                let val = (data[i] as f64).clamp(lo, hi);
                let lvl = (1 + ((val - lo) * g as f64 / (hi - lo)).floor() as usize).min(g);
                expect[lvl] += 1;
            } else {
                expect[0] += 1;
            }
        }
        assert_eq!(hist, expect);
    }

    #[test]
    fn empty_mask_gives_empty_region() {
        let (v, m) = setup(vec![0; 8], vec![0; 8], (2, 2, 2));
        let q = quantize(&v, &m, 4, (0.0, 1.0)).unwrap();
        assert!(q.is_empty());
    }
}
