//! The four texture matrices. Level r maps to row r-1, size/length c to
//! column c-1.

use crate::error::{Error, Result};
use crate::texture::quantize::{quantize, QuantizedRegion};
use crate::volume::{AnatomyMask, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Glcm,
    Glrlm,
    Glszm,
    Mglszm,
}

/// Zone connectivity for GLSZM. `Slice8` follows the 2D reading (8-connected
/// within each axial slice); `Full26` is the 3D alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Connectivity {
    #[default]
    Slice8,
    Full26,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureMatrix {
    pub kind: MatrixKind,
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl TextureMatrix {
    pub fn zeros(kind: MatrixKind, rows: usize, cols: usize) -> TextureMatrix {
        TextureMatrix {
            kind,
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn from_parts(
        kind: MatrixKind,
        rows: usize,
        cols: usize,
        entries: Vec<f64>,
    ) -> TextureMatrix {
        assert_eq!(entries.len(), rows * cols);
        TextureMatrix {
            kind,
            rows,
            cols,
            entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    #[inline]
    fn add(&mut self, r: usize, c: usize, v: f64) {
        self.entries[r * self.cols + c] += v;
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Entries scaled to sum to 1 (unchanged when the total is 0).
    pub fn normalized(&self) -> TextureMatrix {
        let total = self.total();
        if total <= 0.0 {
            return self.clone();
        }
        TextureMatrix {
            kind: self.kind,
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e / total).collect(),
        }
    }
}

#[inline]
fn offset_voxel(
    dims: (usize, usize, usize),
    x: usize,
    y: usize,
    z: usize,
    a: (i32, i32, i32),
    steps: i32,
) -> Option<(usize, usize, usize)> {
    let nx = x as i64 + (a.0 * steps) as i64;
    let ny = y as i64 + (a.1 * steps) as i64;
    let nz = z as i64 + (a.2 * steps) as i64;
    if nx < 0 || ny < 0 || nz < 0 {
        return None;
    }
    let (nx, ny, nz) = (nx as usize, ny as usize, nz as usize);
    if nx >= dims.0 || ny >= dims.1 || nz >= dims.2 {
        return None;
    }
    Some((nx, ny, nz))
}

/// Co-occurrence counts of level pairs at offset `d * a`, both voxels
/// in-mask, accumulated symmetrically.
pub fn glcm(region: &QuantizedRegion, d: i32, a: (i32, i32, i32)) -> Result<TextureMatrix> {
    if d < 1 {
        return Err(Error::InvalidArgument(format!("distance {d} must be >= 1")));
    }
    if a == (0, 0, 0) {
        return Err(Error::InvalidArgument("zero direction".into()));
    }
    let g = region.g();
    let dims = region.dims();
    let mut m = TextureMatrix::zeros(MatrixKind::Glcm, g, g);
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                let r = region.level_at(x, y, z);
                if r == 0 {
                    continue;
                }
                if let Some((nx, ny, nz)) = offset_voxel(dims, x, y, z, a, d) {
                    let c = region.level_at(nx, ny, nz);
                    if c == 0 {
                        continue;
                    }
                    m.add(r as usize - 1, c as usize - 1, 1.0);
                    m.add(c as usize - 1, r as usize - 1, 1.0);
                }
            }
        }
    }
    Ok(m)
}

/// Run-length counts: maximal in-mask streaks of equal level along `a`.
pub fn glrlm(region: &QuantizedRegion, a: (i32, i32, i32)) -> Result<TextureMatrix> {
    if a == (0, 0, 0) {
        return Err(Error::InvalidArgument("zero direction".into()));
    }
    let g = region.g();
    let dims = region.dims();
    // Longest possible run along a is bounded by the extent of every axis
    // the direction moves through.
    let mut lmax = usize::MAX;
    for (comp, extent) in [(a.0, dims.0), (a.1, dims.1), (a.2, dims.2)] {
        if comp != 0 {
            lmax = lmax.min(extent);
        }
    }
    let mut m = TextureMatrix::zeros(MatrixKind::Glrlm, g, lmax);
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                let level = region.level_at(x, y, z);
                if level == 0 {
                    continue;
                }
                // run start: predecessor out of lattice, out of mask, or a
                // different level
                if let Some((px, py, pz)) = offset_voxel(dims, x, y, z, a, -1) {
                    if region.level_at(px, py, pz) == level {
                        continue;
                    }
                }
                let mut len = 1usize;
                let (mut cx, mut cy, mut cz) = (x, y, z);
                while let Some((nx, ny, nz)) = offset_voxel(dims, cx, cy, cz, a, 1) {
                    if region.level_at(nx, ny, nz) != level {
                        break;
                    }
                    len += 1;
                    (cx, cy, cz) = (nx, ny, nz);
                }
                m.add(level as usize - 1, len - 1, 1.0);
            }
        }
    }
    Ok(m)
}

/// Size-zone counts: connected components of equal level, by level and size.
pub fn glszm(region: &QuantizedRegion, connectivity: Connectivity) -> Result<TextureMatrix> {
    let g = region.g();
    let dims = region.dims();
    let n = dims.0 * dims.1 * dims.2;
    let mut visited = vec![false; n];
    let mut zones: Vec<(u16, usize)> = Vec::new();
    let mut queue = Vec::new();
    let neighbors: Vec<(i32, i32, i32)> = match connectivity {
        Connectivity::Slice8 => {
            let mut v = Vec::new();
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if (dx, dy) != (0, 0) {
                        v.push((dx, dy, 0));
                    }
                }
            }
            v
        }
        Connectivity::Full26 => {
            let mut v = Vec::new();
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if (dx, dy, dz) != (0, 0, 0) {
                            v.push((dx, dy, dz));
                        }
                    }
                }
            }
            v
        }
    };
    for z in 0..dims.2 {
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                let i = region.index(x, y, z);
                let level = region.levels()[i];
                if level == 0 || visited[i] {
                    continue;
                }
                visited[i] = true;
                queue.clear();
                queue.push((x, y, z));
                let mut size = 0usize;
                while let Some((cx, cy, cz)) = queue.pop() {
                    size += 1;
                    for &a in &neighbors {
                        if let Some((nx, ny, nz)) = offset_voxel(dims, cx, cy, cz, a, 1) {
                            let j = region.index(nx, ny, nz);
                            if !visited[j] && region.levels()[j] == level {
                                visited[j] = true;
                                queue.push((nx, ny, nz));
                            }
                        }
                    }
                }
                zones.push((level, size));
            }
        }
    }
    let zmax = zones.iter().map(|&(_, s)| s).max().unwrap_or(1);
    let mut m = TextureMatrix::zeros(MatrixKind::Glszm, g, zmax);
    for (level, size) in zones {
        m.add(level as usize - 1, size - 1, 1.0);
    }
    Ok(m)
}

/// Weighted average of normalized GLSZMs quantized at several level counts,
/// zero-padded to a common shape.
pub fn mglszm(
    volume: &Volume,
    mask: &AnatomyMask,
    hu_window: (f64, f64),
    level_set: &[usize],
    weights: &[f64],
    connectivity: Connectivity,
) -> Result<TextureMatrix> {
    if level_set.is_empty() {
        return Err(Error::InvalidArgument("empty level_set".into()));
    }
    if level_set.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "{} levels but {} weights",
            level_set.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::InvalidArgument("negative weight".into()));
    }
    let wsum: f64 = weights.iter().sum();
    if (wsum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "weights sum to {wsum}, expected 1"
        )));
    }
    let components: Vec<TextureMatrix> = level_set
        .iter()
        .map(|&g| {
            let region = quantize(volume, mask, g, hu_window)?;
            Ok(glszm(&region, connectivity)?.normalized())
        })
        .collect::<Result<_>>()?;
    let rows = components.iter().map(TextureMatrix::rows).max().unwrap();
    let cols = components.iter().map(TextureMatrix::cols).max().unwrap();
    let mut m = TextureMatrix::zeros(MatrixKind::Mglszm, rows, cols);
    for (comp, &w) in components.iter().zip(weights) {
        for r in 0..comp.rows() {
            for c in 0..comp.cols() {
                m.add(r, c, w * comp.at(r, c));
            }
        }
    }
    Ok(m)
}
