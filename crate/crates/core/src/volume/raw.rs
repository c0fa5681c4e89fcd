//! Sidecar raw format: `<name>.vol.json` describing a little-endian,
//! x-fastest payload stored in `<name>.vol.bin`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::Dims;

pub const SIDECAR_SUFFIX: &str = ".vol.json";
pub const PAYLOAD_SUFFIX: &str = ".vol.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub dims: Dims,
    pub spacing: [f64; 3],
    pub dtype: String,
    pub data_file: String,
}

/// `foo.vol.json` -> (`foo.vol.json`, `foo.vol.bin`); a path without the
/// sidecar suffix gets it appended.
pub fn paths_for(path: &Path) -> (PathBuf, PathBuf) {
    let s = path.to_string_lossy();
    let base = s.strip_suffix(SIDECAR_SUFFIX).unwrap_or(&s).to_string();
    (
        PathBuf::from(format!("{base}{SIDECAR_SUFFIX}")),
        PathBuf::from(format!("{base}{PAYLOAD_SUFFIX}")),
    )
}

pub fn is_raw_path(path: &Path) -> bool {
    path.to_string_lossy().ends_with(SIDECAR_SUFFIX)
}
