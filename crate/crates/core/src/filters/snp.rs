use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume3D;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` for voxel `index`, independent of evaluation order.
#[inline]
pub fn voxel_uniform(seed: u64, index: u64) -> f64 {
    let bits = splitmix64(seed ^ index.wrapping_mul(GOLDEN_GAMMA)) >> 11;
    bits as f64 / (1u64 << 53) as f64
}

/// Salt-and-pepper speckle painting to the volume's own min (black) and
/// max (white).
pub fn salt_pepper(vol: &Volume3D, prob: f64, seed: u64) -> Result<Volume3D> {
    salt_pepper_with_levels(vol, prob, seed, vol.min(), vol.max())
}

/// Voxel `i` draws `u = voxel_uniform(seed, i)`: `u < prob` paints `black`,
/// `u > 1 - prob` paints `white`, anything else is left as is. At
/// `prob = 0.5` a draw of exactly 0.5 is the only untouched case.
pub fn salt_pepper_with_levels(
    vol: &Volume3D,
    prob: f64,
    seed: u64,
    black: f64,
    white: f64,
) -> Result<Volume3D> {
    if !(0.0..=0.5).contains(&prob) {
        return Err(Error::InvalidParameter(format!(
            "salt-and-pepper prob must be in [0, 0.5], got {prob}"
        )));
    }
    if !black.is_finite() || !white.is_finite() {
        return Err(Error::InvalidParameter("paint levels must be finite".into()));
    }
    let upper = 1.0 - prob;
    let data = vol
        .data()
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let u = voxel_uniform(seed, i as u64);
            if u < prob {
                black
            } else if u > upper {
                white
            } else {
                v
            }
        })
        .collect();
    Ok(vol.with_data(data))
}
