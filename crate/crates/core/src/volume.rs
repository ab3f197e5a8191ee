//! Core data model: volumes in Hounsfield units, per-anatomy binary masks,
//! study records and feature tables.
//!
//! Voxel order is x-fastest row-major everywhere: index = x + w * (y + h * z).
//! All types are immutable after construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_HU_CLAMP: (i16, i16) = (-1024, 3071);

/// The fixed 7-anatomy set carried by every study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anatomy {
    Muscle,
    BodyFat,
    Aorta,
    SpinalColumn,
    EpicardialFat,
    Heart,
    Lungs,
}

pub const ALL_ANATOMIES: [Anatomy; 7] = [
    Anatomy::Muscle,
    Anatomy::BodyFat,
    Anatomy::Aorta,
    Anatomy::SpinalColumn,
    Anatomy::EpicardialFat,
    Anatomy::Heart,
    Anatomy::Lungs,
];

impl Anatomy {
    pub fn name(&self) -> &'static str {
        match self {
            Anatomy::Muscle => "muscle",
            Anatomy::BodyFat => "body_fat",
            Anatomy::Aorta => "aorta",
            Anatomy::SpinalColumn => "spinal_column",
            Anatomy::EpicardialFat => "epicardial_fat",
            Anatomy::Heart => "heart",
            Anatomy::Lungs => "lungs",
        }
    }

    pub fn from_name(name: &str) -> Option<Anatomy> {
        ALL_ANATOMIES.iter().copied().find(|a| a.name() == name)
    }
}

impl std::fmt::Display for Anatomy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Dense 3D attenuation grid. HU values are clamped to `hu_clamp` once at
/// construction; data is stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    hu_clamp: (i16, i16),
    data: Vec<i16>,
}

impl Volume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        data: Vec<i16>,
    ) -> Result<Volume> {
        Volume::with_clamp(dims, spacing, data, DEFAULT_HU_CLAMP)
    }

    pub fn with_clamp(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        mut data: Vec<i16>,
        hu_clamp: (i16, i16),
    ) -> Result<Volume> {
        let (w, h, d) = dims;
        if w == 0 || h == 0 || d == 0 {
            return Err(Error::InvalidVolume(format!("zero dimension: {dims:?}")));
        }
        if data.len() != w * h * d {
            return Err(Error::InvalidVolume(format!(
                "data length {} does not equal {w}x{h}x{d}",
                data.len()
            )));
        }
        if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
            return Err(Error::InvalidVolume(format!(
                "non-positive spacing: {spacing:?}"
            )));
        }
        if hu_clamp.0 >= hu_clamp.1 {
            return Err(Error::InvalidVolume(format!(
                "invalid clamp range: {hu_clamp:?}"
            )));
        }
        for v in &mut data {
            *v = (*v).clamp(hu_clamp.0, hu_clamp.1);
        }
        Ok(Volume {
            dims,
            spacing,
            hu_clamp,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn spacing(&self) -> (f64, f64, f64) {
        self.spacing
    }

    pub fn hu_clamp(&self) -> (i16, i16) {
        self.hu_clamp
    }

    pub fn data(&self) -> &[i16] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> i16 {
        self.data[self.index(x, y, z)]
    }
}

/// Binary segmentation grid aligned to a [`Volume`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnatomyMask {
    anatomy: Anatomy,
    dims: (usize, usize, usize),
    bits: Vec<u8>,
}

impl AnatomyMask {
    pub fn new(anatomy: Anatomy, dims: (usize, usize, usize), bits: Vec<u8>) -> Result<AnatomyMask> {
        let (w, h, d) = dims;
        if bits.len() != w * h * d {
            return Err(Error::InvalidVolume(format!(
                "mask length {} does not equal {w}x{h}x{d}",
                bits.len()
            )));
        }
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidVolume(format!(
                "mask value {bad} outside {{0,1}}"
            )));
        }
        Ok(AnatomyMask {
            anatomy,
            dims,
            bits,
        })
    }

    pub fn anatomy(&self) -> Anatomy {
        self.anatomy
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn is_set(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.index(x, y, z)] == 1
    }

    /// Number of set voxels.
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }
}

/// One subject: volume, all 7 masks, binary mortality label and matching metadata.
#[derive(Debug, Clone)]
pub struct StudyRecord {
    pub id: String,
    pub volume: Volume,
    masks: Vec<AnatomyMask>,
    pub label: u8,
    pub censor_days: u32,
    pub match_group: u32,
}

impl StudyRecord {
    pub fn new(
        id: String,
        volume: Volume,
        masks: Vec<AnatomyMask>,
        label: u8,
        censor_days: u32,
        match_group: u32,
    ) -> Result<StudyRecord> {
        if label > 1 {
            return Err(Error::Manifest {
                study: id,
                reason: format!("label {label} outside {{0,1}}"),
            });
        }
        for anatomy in ALL_ANATOMIES {
            let count = masks.iter().filter(|m| m.anatomy() == anatomy).count();
            if count != 1 {
                return Err(Error::Manifest {
                    study: id,
                    reason: format!("anatomy {anatomy} present {count} times, expected 1"),
                });
            }
        }
        for m in &masks {
            if m.dims() != volume.dims() {
                return Err(Error::DimMismatch {
                    volume: volume.dims(),
                    mask: m.dims(),
                });
            }
        }
        let mut masks = masks;
        masks.sort_by_key(|m| m.anatomy());
        Ok(StudyRecord {
            id,
            volume,
            masks,
            label,
            censor_days,
            match_group,
        })
    }

    pub fn mask(&self, anatomy: Anatomy) -> &AnatomyMask {
        self.masks
            .iter()
            .find(|m| m.anatomy() == anatomy)
            .expect("constructor guarantees all anatomies present")
    }

    pub fn masks(&self) -> &[AnatomyMask] {
        &self.masks
    }
}

/// Named real-valued feature matrix, rows = studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    column_names: Vec<String>,
    study_ids: Vec<String>,
    /// Row-major: values[row * ncols + col].
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(
        column_names: Vec<String>,
        study_ids: Vec<String>,
        values: Vec<f64>,
    ) -> Result<FeatureTable> {
        let ncols = column_names.len();
        let nrows = study_ids.len();
        if values.len() != nrows * ncols {
            return Err(Error::InvalidArgument(format!(
                "feature matrix has {} values, expected {nrows}x{ncols}",
                values.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &column_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate column name '{name}'"
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature value {v}")));
        }
        Ok(FeatureTable {
            column_names,
            study_ids,
            values,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn study_ids(&self) -> &[String] {
        &self.study_ids
    }

    pub fn nrows(&self) -> usize {
        self.study_ids.len()
    }

    pub fn ncols(&self) -> usize {
        self.column_names.len()
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.ncols();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows for the given indices, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Vec<Vec<f64>> {
        indices.iter().map(|&i| self.row(i).to_vec()).collect()
    }
}

/// All voxels where the mask is set, in x-fastest scan order.
pub fn masked_voxels<'a>(
    volume: &'a Volume,
    mask: &'a AnatomyMask,
) -> Result<impl Iterator<Item = ((usize, usize, usize), i16)> + 'a> {
    if volume.dims() != mask.dims() {
        return Err(Error::DimMismatch {
            volume: volume.dims(),
            mask: mask.dims(),
        });
    }
    let (w, h, d) = volume.dims();
    Ok((0..d).flat_map(move |z| {
        (0..h).flat_map(move |y| {
            (0..w).filter_map(move |x| {
                if mask.is_set(x, y, z) {
                    Some(((x, y, z), volume.at(x, y, z)))
                } else {
                    None
                }
            })
        })
    }))
}

/// In-mask HU values as f64, x-fastest order.
pub fn masked_values(volume: &Volume, mask: &AnatomyMask) -> Result<Vec<f64>> {
    Ok(masked_voxels(volume, mask)?.map(|(_, v)| v as f64).collect())
}
