use rayon::prelude::*;

use super::kernel::{gaussian_kernel_1d, Kernel1D};
use crate::error::Result;
use crate::volume::{Dims, Volume3D};

/// Isotropic Gaussian blur as three 1D passes (x, then y, then z) with
/// nearest-edge clamping at the borders.
pub fn gaussian_blur(vol: &Volume3D, sigma: f64) -> Result<Volume3D> {
    let kernel = gaussian_kernel_1d(sigma)?;
    let dims = vol.dims();
    let mut data = convolve_axis(vol.data(), dims, 0, &kernel);
    data = convolve_axis(&data, dims, 1, &kernel);
    data = convolve_axis(&data, dims, 2, &kernel);
    Ok(vol.with_data(data))
}

/// One clamped 1D convolution along `axis`. Output slices along z are
/// computed in parallel; every voxel sums its taps in a fixed order.
pub(crate) fn convolve_axis(input: &[f64], dims: Dims, axis: usize, kernel: &Kernel1D) -> Vec<f64> {
    let [nx, ny, _] = dims;
    let n_axis = dims[axis] as isize;
    let stride = match axis {
        0 => 1,
        1 => nx,
        _ => nx * ny,
    } as isize;
    let r = kernel.radius() as isize;
    let w = kernel.weights();
    let slice = nx * ny;
    let mut out = vec![0.0; input.len()];
    out.par_chunks_mut(slice).enumerate().for_each(|(z, plane)| {
        for y in 0..ny {
            for x in 0..nx {
                let pos = [x, y, z][axis] as isize;
                let base = (x + nx * (y + ny * z)) as isize - pos * stride;
                let mut acc = 0.0;
                for (k, &wk) in w.iter().enumerate() {
                    let p = (pos + k as isize - r).clamp(0, n_axis - 1);
                    acc += wk * input[(base + p * stride) as usize];
                }
                plane[x + nx * y] = acc;
            }
        }
    });
    out
}
