use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::{LabelMap, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SliceAxis {
    /// Fixed z, image spans x (columns) and y (rows).
    Axial,
    /// Fixed y, image spans x and z.
    Coronal,
    /// Fixed x, image spans y and z.
    Sagittal,
}

impl SliceAxis {
    fn fixed_axis(self) -> usize {
        match self {
            SliceAxis::Axial => 2,
            SliceAxis::Coronal => 1,
            SliceAxis::Sagittal => 0,
        }
    }
}

impl FromStr for SliceAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axial" => Ok(SliceAxis::Axial),
            "coronal" => Ok(SliceAxis::Coronal),
            "sagittal" => Ok(SliceAxis::Sagittal),
            other => Err(Error::InvalidParameter(format!("unknown slice axis {other:?}"))),
        }
    }
}

pub enum SliceSource<'a> {
    Volume(&'a Volume3D),
    Labels(&'a LabelMap),
}

/// Categorical colors for label maps, cycled past 16 classes.
pub const PALETTE: [[u8; 3]; 16] = [
    [0, 0, 0],
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [128, 0, 0],
    [170, 255, 195],
];

/// Voxel indices of a slice in image order (row-major, top row first).
fn slice_indices(dims: [usize; 3], axis: SliceAxis, index: usize) -> Result<(usize, usize, Vec<usize>)> {
    let fixed = axis.fixed_axis();
    if index >= dims[fixed] {
        return Err(Error::InvalidParameter(format!(
            "slice index {index} out of range 0..{}",
            dims[fixed]
        )));
    }
    let (col_axis, row_axis) = match axis {
        SliceAxis::Axial => (0, 1),
        SliceAxis::Coronal => (0, 2),
        SliceAxis::Sagittal => (1, 2),
    };
    let (w, h) = (dims[col_axis], dims[row_axis]);
    let mut out = Vec::with_capacity(w * h);
    for r in 0..h {
        for c in 0..w {
            let mut p = [0usize; 3];
            p[fixed] = index;
            p[col_axis] = c;
            p[row_axis] = r;
            out.push(crate::volume::linear_index(dims, p[0], p[1], p[2]));
        }
    }
    Ok((w, h, out))
}

/// Encodes one slice as PNG bytes: 8-bit grayscale windowed to the volume's
/// min/max (mid-gray when constant), or RGB with [`PALETTE`] for labels.
pub fn render_slice(source: &SliceSource<'_>, axis: SliceAxis, index: usize) -> Result<Vec<u8>> {
    let dims = match source {
        SliceSource::Volume(v) => v.dims(),
        SliceSource::Labels(l) => l.dims(),
    };
    let (w, h, idx) = slice_indices(dims, axis, index)?;
    let (color, pixels) = match source {
        SliceSource::Volume(v) => {
            let (lo, hi) = (v.min(), v.max());
            let px: Vec<u8> = idx
                .iter()
                .map(|&i| {
                    if hi > lo {
                        ((v.data()[i] - lo) / (hi - lo) * 255.0).round() as u8
                    } else {
                        128
                    }
                })
                .collect();
            (png::ColorType::Grayscale, px)
        }
        SliceSource::Labels(l) => {
            let px: Vec<u8> = idx
                .iter()
                .flat_map(|&i| PALETTE[l.labels()[i] as usize % PALETTE.len()])
                .collect();
            (png::ColorType::Rgb, px)
        }
    };
    let mut bytes = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut bytes, w as u32, h as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::InvalidParameter(format!("png: {e}")))?;
        writer
            .write_image_data(&pixels)
            .map_err(|e| Error::InvalidParameter(format!("png: {e}")))?;
    }
    Ok(bytes)
}

pub fn export_slice(source: &SliceSource<'_>, axis: SliceAxis, index: usize, path: &Path) -> Result<()> {
    let bytes = render_slice(source, axis, index)?;
    crate::volume::write_atomic(path, &bytes)
}
