use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::NoiseSpec;
use crate::dataset::{self, COHORT_MANIFEST, DATASET_MANIFEST};
use crate::error::{Error, Result};
use crate::volume::{load_volume, save_volume, VolumeFormat};

/// `dataset.json`, written next to the corrupted volumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub spec: NoiseSpec,
    pub source: String,
    pub base_seed: u64,
    pub files: Vec<String>,
    #[serde(default)]
    pub labels: Vec<String>,
    #[serde(default)]
    pub content_hash: String,
}

impl DatasetManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        dataset::read_json(&dir.join(DATASET_MANIFEST))
    }

    /// True when the manifest parses, matches `spec`, and the files on disk
    /// still hash to the recorded value.
    pub fn verify(dir: &Path, spec: &NoiseSpec) -> bool {
        let Ok(m) = Self::load(dir) else {
            return false;
        };
        if &m.spec != spec {
            return false;
        }
        let names: Vec<String> = m.files.iter().chain(&m.labels).cloned().collect();
        matches!(dataset::content_hash(dir, &names), Ok(h) if h == m.content_hash)
    }
}

fn copy_member_files(input_dir: &Path, output_dir: &Path, name: &str) -> Result<()> {
    for src in dataset::member_files(input_dir, name) {
        let dst = output_dir.join(src.file_name().unwrap_or_default());
        fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
    }
    Ok(())
}

/// Corrupts every volume of `input_dir` into `output_dir` under the same
/// file name, copies label maps and the split manifest verbatim, and writes
/// `dataset.json`. Volume `i` (in name order) of a salt-and-pepper spec uses
/// seed `spec.seed + i`. Returns the number of volumes written.
pub fn corrupt_dataset(input_dir: &Path, spec: &NoiseSpec, output_dir: &Path) -> Result<usize> {
    spec.validate()?;
    let listing = dataset::scan(input_dir)?;
    if listing.volumes.is_empty() {
        return Err(Error::Dataset(format!(
            "no volumes found in {}",
            input_dir.display()
        )));
    }
    dataset::ensure_dir(output_dir)?;
    let base_seed = spec.seed().unwrap_or(0);

    listing
        .volumes
        .par_iter()
        .enumerate()
        .try_for_each(|(i, name)| -> Result<()> {
            if *spec == NoiseSpec::Identity {
                return copy_member_files(input_dir, output_dir, name);
            }
            let unit_spec = spec.with_seed(base_seed.wrapping_add(i as u64));
            let src = input_dir.join(name);
            let dst = output_dir.join(name);
            let vol = load_volume(&src)?;
            let out = unit_spec.apply(&vol)?;
            save_volume(&out, &dst, VolumeFormat::from_path(&dst))
        })?;

    for name in &listing.labels {
        copy_member_files(input_dir, output_dir, name)?;
    }
    let cohort = input_dir.join(COHORT_MANIFEST);
    if cohort.exists() {
        let dst = output_dir.join(COHORT_MANIFEST);
        fs::copy(&cohort, &dst).map_err(|e| Error::io(&dst, e))?;
    }

    let names: Vec<String> = listing
        .volumes
        .iter()
        .chain(&listing.labels)
        .cloned()
        .collect();
    let manifest = DatasetManifest {
        name: spec.name(),
        spec: spec.clone(),
        source: input_dir.display().to_string(),
        base_seed,
        files: listing.volumes.clone(),
        labels: listing.labels.clone(),
        content_hash: dataset::content_hash(output_dir, &names)?,
    };
    dataset::write_json(&output_dir.join(DATASET_MANIFEST), &manifest)?;
    Ok(listing.volumes.len())
}
