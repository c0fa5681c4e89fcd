use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::nifti;
use super::raw::{self, RawSidecar};
use super::{check_dims, Dims, LabelMap, Volume3D};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeFormat {
    Nifti,
    Raw,
}

impl VolumeFormat {
    /// `.vol.json` selects the raw format, anything else NIfTI.
    pub fn from_path(path: &Path) -> Self {
        if raw::is_raw_path(path) {
            VolumeFormat::Raw
        } else {
            VolumeFormat::Nifti
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes through a sibling temp file and renames, so a failed write never
/// leaves a partial file at `path`.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!(".{file_name}.partial"));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

fn is_gz_path(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

struct Decoded {
    dims: Dims,
    spacing: [f64; 3],
    values: Vec<f64>,
}

fn decode_any(path: &Path) -> Result<Decoded> {
    match VolumeFormat::from_path(path) {
        VolumeFormat::Nifti => {
            let mut bytes = read_file(path)?;
            if nifti::is_gzip(&bytes) {
                bytes = nifti::gunzip(&bytes, path)?;
            }
            let (hdr, values) = nifti::decode(&bytes, path)?;
            Ok(Decoded {
                dims: hdr.dims,
                spacing: hdr.spacing,
                values,
            })
        }
        VolumeFormat::Raw => {
            let (sidecar_path, _) = raw::paths_for(path);
            let text = read_file(&sidecar_path)?;
            let sidecar: RawSidecar =
                serde_json::from_slice(&text).map_err(|e| Error::json(&sidecar_path, e))?;
            let data_path = sidecar_path
                .parent()
                .map(|p| p.join(&sidecar.data_file))
                .unwrap_or_else(|| PathBuf::from(&sidecar.data_file));
            let payload = read_file(&data_path)?;
            let n = check_dims(sidecar.dims)?;
            let (width, values): (usize, Box<dyn Fn(&[u8]) -> Vec<f64>>) =
                match sidecar.dtype.as_str() {
                    "f32" => (
                        4,
                        Box::new(|p: &[u8]| {
                            p.chunks_exact(4)
                                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                                .collect()
                        }),
                    ),
                    "u8" => (1, Box::new(|p: &[u8]| p.iter().map(|&b| b as f64).collect())),
                    other => return Err(Error::UnsupportedRawDtype(other.to_string())),
                };
            if payload.len() != n * width {
                return Err(Error::Truncated {
                    declared: n * width,
                    available: payload.len(),
                });
            }
            Ok(Decoded {
                dims: sidecar.dims,
                spacing: sidecar.spacing,
                values: values(&payload),
            })
        }
    }
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume3D> {
    let d = decode_any(path.as_ref())?;
    Volume3D::new(d.dims, d.spacing, d.values)
}

pub fn save_volume(vol: &Volume3D, path: impl AsRef<Path>, format: VolumeFormat) -> Result<()> {
    let path = path.as_ref();
    match format {
        VolumeFormat::Nifti => {
            let bytes = nifti::encode_f32(vol.dims(), vol.spacing(), vol.data());
            let bytes = if is_gz_path(path) {
                nifti::gzip(&bytes, path)?
            } else {
                bytes
            };
            write_atomic(path, &bytes)
        }
        VolumeFormat::Raw => {
            let payload: Vec<u8> = vol
                .data()
                .iter()
                .flat_map(|&v| (v as f32).to_le_bytes())
                .collect();
            write_raw(vol.dims(), vol.spacing(), "f32", &payload, path)
        }
    }
}

fn write_raw(dims: Dims, spacing: [f64; 3], dtype: &str, payload: &[u8], path: &Path) -> Result<()> {
    let (sidecar_path, data_path) = raw::paths_for(path);
    let sidecar = RawSidecar {
        dims,
        spacing,
        dtype: dtype.to_string(),
        data_file: data_path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    write_atomic(&data_path, payload)?;
    let text = serde_json::to_vec_pretty(&sidecar).map_err(|e| Error::json(&sidecar_path, e))?;
    write_atomic(&sidecar_path, &text)
}

/// Loads a label map. `num_classes = None` infers `max + 1`.
pub fn load_labelmap(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<LabelMap> {
    let d = decode_any(path.as_ref())?;
    let mut labels = Vec::with_capacity(d.values.len());
    for (index, &value) in d.values.iter().enumerate() {
        if value.fract() != 0.0 || !value.is_finite() {
            return Err(Error::NonIntegralLabel { index, value });
        }
        if value < 0.0 || value > u16::MAX as f64 {
            return Err(Error::LabelOutOfRange {
                index,
                label: value as i64,
                num_classes: num_classes.unwrap_or(0),
            });
        }
        labels.push(value as u16);
    }
    match num_classes {
        Some(c) => LabelMap::new(d.dims, labels, c),
        None => LabelMap::with_inferred_classes(d.dims, labels),
    }
}

pub fn save_labelmap(lm: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(lm.len());
    for &l in lm.labels() {
        if l >= 255 {
            return Err(Error::LabelOverflow(l as u32));
        }
        bytes.push(l as u8);
    }
    match VolumeFormat::from_path(path) {
        VolumeFormat::Nifti => {
            let out = nifti::encode_u8(lm.dims(), [1.0; 3], &bytes);
            let out = if is_gz_path(path) {
                nifti::gzip(&out, path)?
            } else {
                out
            };
            write_atomic(path, &out)
        }
        VolumeFormat::Raw => write_raw(lm.dims(), [1.0; 3], "u8", &bytes, path),
    }
}

/// `max(label) + 1`.
pub fn infer_num_classes(labels: &[u16]) -> usize {
    labels.iter().copied().max().map_or(1, |m| m as usize + 1)
}
