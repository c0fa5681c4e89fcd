//! Scalar volumes, label maps, and their on-disk formats.
//!
//! Both grids are stored x-fastest (`index = x + nx * (y + ny * z)`), the
//! same order NIfTI uses on disk, so ingest is a straight copy.

mod io;
pub mod nifti;
mod normalize;
pub mod raw;

pub use io::{
    infer_num_classes, load_labelmap, load_volume, save_labelmap, save_volume, VolumeFormat,
};
pub(crate) use io::write_atomic;
pub use nifti::{Dtype, VolumeHeader};
pub use normalize::{normalize_zmuv, NORMALIZE_EPS};

use crate::error::{Error, Result};

/// Voxel counts along x, y, z.
pub type Dims = [usize; 3];

pub(crate) fn check_dims(dims: Dims) -> Result<usize> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidDims(dims));
    }
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or(Error::InvalidDims(dims))
}

#[inline]
pub fn linear_index(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

#[inline]
pub fn coords(dims: Dims, index: usize) -> (usize, usize, usize) {
    let x = index % dims[0];
    let rest = index / dims[0];
    (x, rest % dims[1], rest / dims[1])
}

/// A 3D intensity grid with voxel spacing in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: Dims,
    spacing: [f64; 3],
    data: Vec<f64>,
}

impl Volume3D {
    /// Builds a volume, rejecting length mismatches and non-finite values.
    pub fn new(dims: Dims, spacing: [f64; 3], data: Vec<f64>) -> Result<Self> {
        let n = check_dims(dims)?;
        if data.len() != n {
            return Err(Error::LengthMismatch {
                dims,
                len: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            dims,
            spacing,
            data,
        })
    }

    pub fn filled(dims: Dims, value: f64) -> Result<Self> {
        let n = check_dims(dims)?;
        Self::new(dims, [1.0; 3], vec![value; n])
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let n = check_dims(dims)?;
        let mut data = Vec::with_capacity(n);
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Self::new(dims, [1.0; 3], data)
    }

    /// Same geometry as `self`, new data. Used by filters that compute into
    /// a fresh buffer.
    pub(crate) fn with_data(&self, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), self.data.len());
        debug_assert!(data.iter().all(|v| v.is_finite()));
        Self {
            dims: self.dims,
            spacing: self.spacing,
            data,
        }
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[linear_index(self.dims, x, y, z)]
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// Integer class grid. Every label is below `num_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    dims: Dims,
    labels: Vec<u16>,
    num_classes: usize,
}

impl LabelMap {
    pub fn new(dims: Dims, labels: Vec<u16>, num_classes: usize) -> Result<Self> {
        let n = check_dims(dims)?;
        if labels.len() != n {
            return Err(Error::LengthMismatch {
                dims,
                len: labels.len(),
            });
        }
        if num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be positive".into()));
        }
        if let Some(i) = labels.iter().position(|&l| l as usize >= num_classes) {
            return Err(Error::LabelOutOfRange {
                index: i,
                label: labels[i] as i64,
                num_classes,
            });
        }
        Ok(Self {
            dims,
            labels,
            num_classes,
        })
    }

    /// Builds a map whose class count is `max(label) + 1`.
    pub fn with_inferred_classes(dims: Dims, labels: Vec<u16>) -> Result<Self> {
        let num_classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
        Self::new(dims, labels, num_classes)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.labels[linear_index(self.dims, x, y, z)]
    }

    /// Voxel count per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}
