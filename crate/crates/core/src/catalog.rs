//! Feature-catalog assembly: the ordered, versioned list of every feature
//! the extractor emits, and the extraction driver that turns studies into
//! feature tables.
//!
//! Per anatomy the catalog holds: intensity histogram statistics, spatial
//! context, direction-averaged GLCM and GLRLM statistics, GLSZM and MGLSZM
//! statistics, the shape volume, and the applicable clinical scores.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clinical::{bmd_score, calcium_score, emphysema_score, ClinicalScoreConfig};
use crate::error::{Error, Result};
use crate::intensity::{anatomy_volume, intensity_statistics, spatial_context, INTENSITY_STATS};
use crate::texture::{
    glcm, glrlm, glszm, mglszm, quantize, texture_statistics, Connectivity, DIRECTIONS_13,
};
use crate::texture::{GLCM_STATS, GLRLM_STATS, GLSZM_STATS};
use crate::volume::{Anatomy, FeatureTable, StudyRecord, ALL_ANATOMIES};

pub use crate::texture::in_mask_window;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    /// Quantization level count for GLCM/GLRLM/GLSZM.
    pub levels: usize,
    /// Fixed HU window for quantization; None uses the per-anatomy in-mask
    /// (min, max).
    pub hu_window: Option<(f64, f64)>,
    /// Histogram bin count for intensity energy/entropy.
    pub hist_bins: usize,
    /// GLCM co-occurrence distance.
    pub glcm_distance: i32,
    /// MGLSZM component level counts (equal weights).
    pub mglszm_levels: Vec<usize>,
    /// Zone connectivity for GLSZM/MGLSZM.
    pub slice_connectivity: bool,
    pub clinical: ClinicalConfigSerde,
}

/// Serializable mirror of [`ClinicalScoreConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClinicalConfigSerde {
    pub emphysema_threshold: f64,
    pub calcium_threshold: f64,
    pub calcium_weight_bands: (f64, f64, f64),
    pub min_lesion_area: f64,
}

impl From<&ClinicalConfigSerde> for ClinicalScoreConfig {
    fn from(c: &ClinicalConfigSerde) -> Self {
        ClinicalScoreConfig {
            emphysema_threshold: c.emphysema_threshold,
            calcium_threshold: c.calcium_threshold,
            calcium_weight_bands: c.calcium_weight_bands,
            min_lesion_area: c.min_lesion_area,
        }
    }
}

impl Default for CatalogConfig {
    fn default() -> Self {
        let c = ClinicalScoreConfig::default();
        CatalogConfig {
            levels: 32,
            hu_window: None,
            hist_bins: 64,
            glcm_distance: 1,
            mglszm_levels: vec![8, 16, 32, 64],
            slice_connectivity: true,
            clinical: ClinicalConfigSerde {
                emphysema_threshold: c.emphysema_threshold,
                calcium_threshold: c.calcium_threshold,
                calcium_weight_bands: c.calcium_weight_bands,
                min_lesion_area: c.min_lesion_area,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCatalog {
    pub version: String,
    pub config: CatalogConfig,
    names: Vec<String>,
}

impl FeatureCatalog {
    pub fn new(config: CatalogConfig) -> FeatureCatalog {
        let mut names = Vec::new();
        for anatomy in ALL_ANATOMIES {
            let a = anatomy.name();
            for s in INTENSITY_STATS {
                names.push(format!("{a}.intensity.{s}"));
            }
            for axis in ["x", "y", "z"] {
                names.push(format!("{a}.spatial.centroid_{axis}"));
            }
            for axis in ["x", "y", "z"] {
                for q in 1..=4 {
                    names.push(format!("{a}.spatial.qmean_{axis}{q}"));
                }
            }
            for s in GLCM_STATS {
                names.push(format!("{a}.glcm.{s}"));
            }
            for s in GLRLM_STATS {
                names.push(format!("{a}.glrlm.{s}"));
            }
            for s in GLSZM_STATS {
                names.push(format!("{a}.glszm.{s}"));
            }
            for s in GLSZM_STATS {
                names.push(format!("{a}.mglszm.{s}"));
            }
            names.push(format!("{a}.shape.volume_ml"));
            match anatomy {
                Anatomy::SpinalColumn => names.push(format!("clinical.{a}.bmd_mean_hu")),
                Anatomy::Lungs => names.push(format!("clinical.{a}.emphysema_laa")),
                Anatomy::Aorta | Anatomy::Heart => {
                    names.push(format!("clinical.{a}.calcium_agatston"))
                }
                _ => {}
            }
        }
        // Version is tied to the name list and the parameters that change
        // feature values.
        let version = format!(
            "v1-g{}-h{}-d{}-{}-n{}",
            config.levels,
            config.hist_bins,
            config.glcm_distance,
            if config.slice_connectivity { "s8" } else { "c26" },
            names.len()
        );
        FeatureCatalog {
            version,
            config,
            names,
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

impl Default for FeatureCatalog {
    fn default() -> Self {
        FeatureCatalog::new(CatalogConfig::default())
    }
}

fn mean_of(stat_sets: &[Vec<(String, f64)>]) -> Vec<(String, f64)> {
    let n = stat_sets.len() as f64;
    let mut out: Vec<(String, f64)> = stat_sets[0]
        .iter()
        .map(|(name, _)| (name.clone(), 0.0))
        .collect();
    for set in stat_sets {
        for (acc, (_, v)) in out.iter_mut().zip(set) {
            acc.1 += v / n;
        }
    }
    out
}

/// One feature row for a study, in catalog order. Non-finite sentinel values
/// (empty masks, zero-total matrices) are replaced with 0 and logged.
pub fn extract_features(study: &StudyRecord, catalog: &FeatureCatalog) -> Result<Vec<f64>> {
    let cfg = &catalog.config;
    let conn = if cfg.slice_connectivity {
        Connectivity::Slice8
    } else {
        Connectivity::Full26
    };
    let clinical: ClinicalScoreConfig = (&cfg.clinical).into();
    let mglszm_weights = vec![1.0 / cfg.mglszm_levels.len() as f64; cfg.mglszm_levels.len()];
    let volume = &study.volume;
    let mut pairs: Vec<(String, f64)> = Vec::with_capacity(catalog.len());
    for anatomy in ALL_ANATOMIES {
        let a = anatomy.name();
        let mask = study.mask(anatomy);
        let prefix = |set: Vec<(String, f64)>, family: &str| {
            set.into_iter()
                .map(|(n, v)| (format!("{a}.{family}.{n}"), v))
                .collect::<Vec<_>>()
        };
        pairs.extend(prefix(
            intensity_statistics(volume, mask, cfg.hist_bins)?,
            "intensity",
        ));
        pairs.extend(prefix(spatial_context(volume, mask)?, "spatial"));

        let window = cfg
            .hu_window
            .or_else(|| in_mask_window(volume, mask))
            .unwrap_or((0.0, 1.0));
        let region = quantize(volume, mask, cfg.levels, window)?;
        let vc = region.voxel_count();

        let glcm_sets: Vec<_> = DIRECTIONS_13
            .iter()
            .map(|&dir| Ok(texture_statistics(&glcm(&region, cfg.glcm_distance, dir)?, vc)))
            .collect::<Result<_>>()?;
        pairs.extend(prefix(mean_of(&glcm_sets), "glcm"));

        let glrlm_sets: Vec<_> = DIRECTIONS_13
            .iter()
            .map(|&dir| Ok(texture_statistics(&glrlm(&region, dir)?, vc)))
            .collect::<Result<_>>()?;
        pairs.extend(prefix(mean_of(&glrlm_sets), "glrlm"));

        pairs.extend(prefix(texture_statistics(&glszm(&region, conn)?, vc), "glszm"));

        let mg = mglszm(
            volume,
            mask,
            window,
            &cfg.mglszm_levels,
            &mglszm_weights,
            conn,
        )?;
        pairs.extend(prefix(texture_statistics(&mg, vc), "mglszm"));

        pairs.push((
            format!("{a}.shape.volume_ml"),
            anatomy_volume(mask, volume.spacing()),
        ));
        match anatomy {
            Anatomy::SpinalColumn => pairs.push((
                format!("clinical.{a}.bmd_mean_hu"),
                bmd_score(volume, mask)?,
            )),
            Anatomy::Lungs => pairs.push((
                format!("clinical.{a}.emphysema_laa"),
                emphysema_score(volume, mask, &clinical)?,
            )),
            Anatomy::Aorta | Anatomy::Heart => pairs.push((
                format!("clinical.{a}.calcium_agatston"),
                calcium_score(volume, mask, volume.spacing(), &clinical)?,
            )),
            _ => {}
        }
    }
    if pairs.len() != catalog.len() {
        return Err(Error::FeatureExtraction {
            study: study.id.clone(),
            feature: "<catalog>".into(),
            reason: format!("row length {} != catalog {}", pairs.len(), catalog.len()),
        });
    }
    let mut row = Vec::with_capacity(pairs.len());
    for ((name, value), expected) in pairs.into_iter().zip(catalog.names()) {
        if &name != expected {
            return Err(Error::FeatureExtraction {
                study: study.id.clone(),
                feature: name.clone(),
                reason: format!("catalog order mismatch, expected '{expected}'"),
            });
        }
        if value.is_finite() {
            row.push(value);
        } else {
            log::warn!(
                "study '{}': feature '{}' is {value}; substituting 0",
                study.id,
                name
            );
            row.push(0.0);
        }
    }
    Ok(row)
}

/// Feature table for a set of studies; rows extracted in parallel, assembled
/// in study order.
pub fn extract_table(studies: &[StudyRecord], catalog: &FeatureCatalog) -> Result<FeatureTable> {
    let rows: Vec<Vec<f64>> = studies
        .par_iter()
        .map(|s| extract_features(s, catalog))
        .collect::<Result<_>>()?;
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    FeatureTable::new(
        catalog.names().to_vec(),
        studies.iter().map(|s| s.id.clone()).collect(),
        values,
    )
}

/// CSV export: first column `study_id`, then catalog names. A JSON sidecar
/// `<path>.meta.json` records the catalog version and parameters.
pub fn write_feature_csv(
    table: &FeatureTable,
    catalog: &FeatureCatalog,
    path: &Path,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("study_id");
    for name in table.column_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, id) in table.study_ids().iter().enumerate() {
        out.push_str(id);
        for v in table.row(i) {
            out.push(',');
            // round-trippable float formatting
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let meta_path = path.with_extension("meta.json");
    let meta = serde_json::json!({
        "catalog_version": catalog.version,
        "config": catalog.config,
    });
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n").map_err(
        |source| Error::Io {
            path: meta_path.clone(),
            source,
        },
    )?;
    Ok(())
}

pub fn read_feature_csv(path: &Path) -> Result<FeatureTable> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty feature CSV".into()))?;
    let columns: Vec<String> = header.split(',').skip(1).map(String::from).collect();
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let id = fields
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("CSV line {} empty", lineno + 2)))?;
        ids.push(id.to_string());
        for f in fields {
            values.push(f.parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("CSV line {}: bad float '{f}'", lineno + 2))
            })?);
        }
    }
    FeatureTable::new(columns, ids, values)
}
