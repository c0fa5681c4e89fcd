//! On-disk dataset layout shared by the phantom generator, the corruption
//! stage, training and evaluation.
//!
//! A dataset directory holds one intensity volume per subject
//! (`<id>.nii`, `<id>.nii.gz` or `<id>.vol.json`), its ground truth next to
//! it (`<id>_seg.<ext>`), and a `cohort.json` split manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::volume::raw;

pub const COHORT_MANIFEST: &str = "cohort.json";
pub const DATASET_MANIFEST: &str = "dataset.json";
pub const LABEL_SUFFIX: &str = "_seg";

const EXTENSIONS: [&str; 3] = [".nii.gz", ".nii", raw::SIDECAR_SUFFIX];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub id: String,
    pub volume: String,
    pub labels: String,
    pub split: Split,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub retries: u32,
}

/// Subjects with their split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub num_classes: usize,
    pub subjects: Vec<SubjectEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<[usize; 3]>,
}

impl CohortManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(COHORT_MANIFEST))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        write_json(&dir.join(COHORT_MANIFEST), self)
    }

    /// Subjects of one split, sorted by id.
    pub fn split(&self, split: Split) -> Vec<&SubjectEntry> {
        let mut out: Vec<_> = self.subjects.iter().filter(|s| s.split == split).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }
}

/// 70/15/15 split with floor rounding, at least one subject in each part.
pub fn split_counts(n: usize) -> Result<(usize, usize, usize)> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!(
            "a cohort needs at least 3 subjects, got {n}"
        )));
    }
    let mut val = (n * 15 / 100).max(1);
    let mut test = (n * 15 / 100).max(1);
    let mut train = (n * 70 / 100).max(1);
    // Floor rounding leaves remainders; they go to train.
    train += n - (train + val + test).min(n);
    while train + val + test > n {
        if val > 1 {
            val -= 1;
        } else if test > 1 {
            test -= 1;
        } else {
            train -= 1;
        }
    }
    Ok((train, val, test))
}

pub fn split_for_index(i: usize, counts: (usize, usize, usize)) -> Split {
    if i < counts.0 {
        Split::Train
    } else if i < counts.0 + counts.1 {
        Split::Val
    } else {
        Split::Test
    }
}

/// Splits a file name into `(stem, extension)` for the supported formats.
pub fn split_extension(name: &str) -> Option<(&str, &str)> {
    EXTENSIONS
        .iter()
        .find_map(|ext| name.strip_suffix(ext).map(|stem| (stem, *ext)))
}

pub fn label_name_for(volume_name: &str) -> Option<String> {
    split_extension(volume_name).map(|(stem, ext)| format!("{stem}{LABEL_SUFFIX}{ext}"))
}

/// Image and label files found in a dataset directory, sorted by name.
#[derive(Debug, Default, Clone)]
pub struct Listing {
    pub volumes: Vec<String>,
    pub labels: Vec<String>,
}

pub fn scan(dir: &Path) -> Result<Listing> {
    let mut listing = Listing::default();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if !entry.path().is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        if let Some((stem, _)) = split_extension(&name) {
            if stem.ends_with(LABEL_SUFFIX) {
                listing.labels.push(name);
            } else {
                listing.volumes.push(name);
            }
        }
    }
    listing.volumes.sort();
    listing.labels.sort();
    Ok(listing)
}

/// Every file that makes up a stored volume (`.vol.json` carries its
/// payload file along).
pub fn member_files(dir: &Path, name: &str) -> Vec<PathBuf> {
    let path = dir.join(name);
    if raw::is_raw_path(&path) {
        let (sidecar, payload) = raw::paths_for(&path);
        vec![sidecar, payload]
    } else {
        vec![path]
    }
}

/// SHA-256 over `(name, bytes)` of the given files, in the given order.
pub fn content_hash(dir: &Path, names: &[String]) -> Result<String> {
    let mut hasher = Sha256::new();
    for name in names {
        for path in member_files(dir, name) {
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let file = path.file_name().unwrap_or_default().to_string_lossy();
            hasher.update((file.len() as u64).to_le_bytes());
            hasher.update(file.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    }
    Ok(hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::json(path, e))?;
    bytes.push(b'\n');
    crate::volume::write_atomic(path, &bytes)
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_rule() {
        assert_eq!(split_counts(20).unwrap(), (14, 3, 3));
        assert_eq!(split_counts(3).unwrap(), (1, 1, 1));
        assert_eq!(split_counts(70).unwrap(), (50, 10, 10));
        assert_eq!(split_counts(4).unwrap(), (2, 1, 1));
        assert_eq!(split_counts(10).unwrap(), (8, 1, 1));
        assert!(split_counts(2).is_err());
        for n in 3..200 {
            let (a, b, c) = split_counts(n).unwrap();
            assert_eq!(a + b + c, n);
            assert!(a >= 1 && b >= 1 && c >= 1);
        }
    }

    #[test]
    fn names() {
        assert_eq!(split_extension("sub-001.nii.gz"), Some(("sub-001", ".nii.gz")));
        assert_eq!(split_extension("a.vol.json"), Some(("a", ".vol.json")));
        assert_eq!(split_extension("cohort.json"), None);
        assert_eq!(label_name_for("sub-001.nii").unwrap(), "sub-001_seg.nii");
    }
}
