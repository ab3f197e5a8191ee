//! File formats for volumes, masks and study manifests, plus the
//! deterministic synthetic phantom generator.

mod format;
mod manifest;
mod phantom;

pub use format::{read_mask, read_volume, write_mask, write_volume};
pub use manifest::{load_manifest, write_manifest, ManifestEntry, StudyManifest};
pub use phantom::{generate_cohort, generate_phantom, PhantomSpec};
