//! Minimal single-file NIfTI-1 support: 3D, u8/i16/f32, slope/intercept,
//! optional gzip. Orientation fields are written as identity and ignored on
//! read.

use std::io::{Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{check_dims, Dims};
use crate::error::{Error, Result};

pub const HEADER_SIZE: usize = 348;
/// Header plus the 4-byte extension flag.
pub const DATA_OFFSET: usize = 352;
pub const MAGIC: &[u8; 4] = b"n+1\0";

const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_PIXDIM: usize = 76;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_XYZT_UNITS: usize = 123;
const OFF_DESCRIP: usize = 148;
const OFF_QFORM_CODE: usize = 252;
const OFF_SFORM_CODE: usize = 254;
const OFF_SROW_X: usize = 280;
const OFF_MAGIC: usize = 344;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    U8,
    I16,
    F32,
}

impl Dtype {
    pub fn code(self) -> i16 {
        match self {
            Dtype::U8 => 2,
            Dtype::I16 => 4,
            Dtype::F32 => 16,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(Dtype::U8),
            4 => Ok(Dtype::I16),
            16 => Ok(Dtype::F32),
            other => Err(Error::UnsupportedDtype(other)),
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            Dtype::U8 => 1,
            Dtype::I16 => 2,
            Dtype::F32 => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub dims: Dims,
    pub spacing: [f64; 3],
    pub dtype: Dtype,
    pub scl_slope: f64,
    pub scl_inter: f64,
    pub vox_offset: usize,
}

#[derive(Clone, Copy)]
enum Endian {
    Little,
    Big,
}

struct Fields<'a> {
    bytes: &'a [u8],
    endian: Endian,
}

impl Fields<'_> {
    fn i16(&self, off: usize) -> i16 {
        let b = [self.bytes[off], self.bytes[off + 1]];
        match self.endian {
            Endian::Little => i16::from_le_bytes(b),
            Endian::Big => i16::from_be_bytes(b),
        }
    }

    fn f32(&self, off: usize) -> f32 {
        let b = [
            self.bytes[off],
            self.bytes[off + 1],
            self.bytes[off + 2],
            self.bytes[off + 3],
        ];
        match self.endian {
            Endian::Little => f32::from_le_bytes(b),
            Endian::Big => f32::from_be_bytes(b),
        }
    }
}

pub fn is_gzip(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == 0x1F && bytes[1] == 0x8B
}

pub fn gunzip(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    MultiGzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| Error::io(path, e))?;
    Ok(out)
}

pub fn gzip(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes).map_err(|e| Error::io(path, e))?;
    enc.finish().map_err(|e| Error::io(path, e))
}

/// Parses an (already decompressed) NIfTI-1 file and returns its header
/// and the voxel values with slope/intercept applied.
pub fn decode(bytes: &[u8], path: &Path) -> Result<(VolumeHeader, Vec<f64>)> {
    if bytes.len() < HEADER_SIZE {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    let endian = match (
        i32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        i32::from_be_bytes(bytes[0..4].try_into().unwrap()),
    ) {
        (348, _) => Endian::Little,
        (_, 348) => Endian::Big,
        _ => return Err(Error::BadMagic(path.to_path_buf())),
    };
    if &bytes[OFF_MAGIC..OFF_MAGIC + 4] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    let f = Fields { bytes, endian };

    let ndim = f.i16(OFF_DIM);
    if ndim != 3 {
        return Err(Error::NotThreeDimensional(ndim as i64));
    }
    let mut dims = [0usize; 3];
    for (axis, d) in dims.iter_mut().enumerate() {
        let v = f.i16(OFF_DIM + 2 * (axis + 1));
        if v <= 0 {
            return Err(Error::InvalidDims([0; 3]));
        }
        *d = v as usize;
    }
    let n = check_dims(dims)?;
    let dtype = Dtype::from_code(f.i16(OFF_DATATYPE))?;
    let mut spacing = [1.0f64; 3];
    for (axis, s) in spacing.iter_mut().enumerate() {
        *s = f.f32(OFF_PIXDIM + 4 * (axis + 1)) as f64;
    }
    let vox_offset = f.f32(OFF_VOX_OFFSET);
    let vox_offset = if vox_offset.is_finite() && vox_offset >= HEADER_SIZE as f32 {
        vox_offset as usize
    } else {
        DATA_OFFSET
    };
    let scl_slope = f.f32(OFF_SCL_SLOPE) as f64;
    let scl_inter = f.f32(OFF_SCL_INTER) as f64;

    let declared = n * dtype.byte_size();
    let available = bytes.len().saturating_sub(vox_offset);
    if declared != available {
        return Err(Error::Truncated {
            declared,
            available,
        });
    }
    let payload = &bytes[vox_offset..];
    let mut values: Vec<f64> = match (dtype, endian) {
        (Dtype::U8, _) => payload.iter().map(|&b| b as f64).collect(),
        (Dtype::I16, Endian::Little) => payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
        (Dtype::I16, Endian::Big) => payload
            .chunks_exact(2)
            .map(|c| i16::from_be_bytes([c[0], c[1]]) as f64)
            .collect(),
        (Dtype::F32, Endian::Little) => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        (Dtype::F32, Endian::Big) => payload
            .chunks_exact(4)
            .map(|c| f32::from_be_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
    };
    if scl_slope != 0.0 && scl_slope.is_finite() && scl_inter.is_finite() {
        for v in &mut values {
            *v = scl_slope * *v + scl_inter;
        }
    }
    let header = VolumeHeader {
        dims,
        spacing,
        dtype,
        scl_slope,
        scl_inter,
        vox_offset,
    };
    Ok((header, values))
}

/// Builds a little-endian NIfTI-1 header (348 bytes) followed by the empty
/// extension flag. Slope 1, intercept 0, identity sform scaled by spacing.
pub fn encode_header(dims: Dims, spacing: [f64; 3], dtype: Dtype) -> Vec<u8> {
    let mut h = vec![0u8; DATA_OFFSET];
    let put_i16 = |h: &mut [u8], off: usize, v: i16| h[off..off + 2].copy_from_slice(&v.to_le_bytes());
    let put_f32 = |h: &mut [u8], off: usize, v: f32| h[off..off + 4].copy_from_slice(&v.to_le_bytes());

    h[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    h[38] = b'r';
    put_i16(&mut h, OFF_DIM, 3);
    for axis in 0..3 {
        put_i16(&mut h, OFF_DIM + 2 * (axis + 1), dims[axis] as i16);
    }
    for axis in 4..8 {
        put_i16(&mut h, OFF_DIM + 2 * axis, 1);
    }
    put_i16(&mut h, OFF_DATATYPE, dtype.code());
    put_i16(&mut h, OFF_BITPIX, (dtype.byte_size() * 8) as i16);
    put_f32(&mut h, OFF_PIXDIM, 1.0);
    for axis in 0..3 {
        put_f32(&mut h, OFF_PIXDIM + 4 * (axis + 1), spacing[axis] as f32);
    }
    put_f32(&mut h, OFF_VOX_OFFSET, DATA_OFFSET as f32);
    put_f32(&mut h, OFF_SCL_SLOPE, 1.0);
    put_f32(&mut h, OFF_SCL_INTER, 0.0);
    // mm
    h[OFF_XYZT_UNITS] = 2;
    let descrip = b"texbias";
    h[OFF_DESCRIP..OFF_DESCRIP + descrip.len()].copy_from_slice(descrip);
    put_i16(&mut h, OFF_QFORM_CODE, 0);
    put_i16(&mut h, OFF_SFORM_CODE, 1);
    for row in 0..3 {
        put_f32(&mut h, OFF_SROW_X + 16 * row + 4 * row, spacing[row] as f32);
    }
    h[OFF_MAGIC..OFF_MAGIC + 4].copy_from_slice(MAGIC);
    h
}

pub fn encode_f32(dims: Dims, spacing: [f64; 3], values: &[f64]) -> Vec<u8> {
    let mut out = encode_header(dims, spacing, Dtype::F32);
    out.reserve(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn encode_u8(dims: Dims, spacing: [f64; 3], values: &[u8]) -> Vec<u8> {
    let mut out = encode_header(dims, spacing, Dtype::U8);
    out.extend_from_slice(values);
    out
}
