//! JSON study manifest: one entry per study with paths to the volume and the
//! seven mask files, relative to the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthio::format::{read_mask, read_volume, write_mask, write_volume};
use crate::volume::{Anatomy, StudyRecord, ALL_ANATOMIES};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub volume: PathBuf,
    /// Keyed by anatomy name; exactly the 7-name set.
    pub masks: BTreeMap<String, PathBuf>,
    pub label: u8,
    pub censor_days: u32,
    pub match_group: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyManifest {
    pub studies: Vec<ManifestEntry>,
}

/// Write every study's volume and masks under `dir` and a `manifest.json`
/// referencing them. Returns the manifest path.
pub fn write_manifest(records: &[StudyRecord], dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut entries = Vec::with_capacity(records.len());
    for rec in records {
        let vol_rel = PathBuf::from(format!("{}.vol", rec.id));
        write_volume(&rec.volume, &dir.join(&vol_rel))?;
        let mut masks = BTreeMap::new();
        for mask in rec.masks() {
            let rel = PathBuf::from(format!("{}.{}.msk", rec.id, mask.anatomy().name()));
            write_mask(mask, &dir.join(&rel))?;
            masks.insert(mask.anatomy().name().to_string(), rel);
        }
        entries.push(ManifestEntry {
            id: rec.id.clone(),
            volume: vol_rel,
            masks,
            label: rec.label,
            censor_days: rec.censor_days,
            match_group: rec.match_group,
        });
    }
    let manifest = StudyManifest { studies: entries };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&path, json + "\n").map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// Load a manifest and every file it references, validating all invariants.
pub fn load_manifest(path: &Path) -> Result<Vec<StudyRecord>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let manifest: StudyManifest = serde_json::from_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut records = Vec::with_capacity(manifest.studies.len());
    for entry in &manifest.studies {
        records.push(load_entry(base, entry)?);
    }
    Ok(records)
}

fn load_entry(base: &Path, entry: &ManifestEntry) -> Result<StudyRecord> {
    let err = |reason: String| Error::Manifest {
        study: entry.id.clone(),
        reason,
    };
    let keys: Vec<&str> = entry.masks.keys().map(String::as_str).collect();
    let expected: Vec<&str> = ALL_ANATOMIES.iter().map(Anatomy::name).collect();
    let mut sorted = expected.clone();
    sorted.sort_unstable();
    if keys != sorted {
        return Err(err(format!(
            "mask keys {keys:?} are not exactly the anatomy set {expected:?}"
        )));
    }
    let volume = read_volume(&base.join(&entry.volume))
        .map_err(|e| err(format!("volume: {e}")))?;
    let mut masks = Vec::with_capacity(7);
    for (name, rel) in &entry.masks {
        let mask = read_mask(&base.join(rel))
            .map_err(|e| err(format!("mask '{name}': {e}")))?;
        if mask.anatomy().name() != name {
            return Err(err(format!(
                "mask file declares anatomy '{}' under key '{name}'",
                mask.anatomy().name()
            )));
        }
        masks.push(mask);
    }
    StudyRecord::new(
        entry.id.clone(),
        volume,
        masks,
        entry.label,
        entry.censor_days,
        entry.match_group,
    )
}
