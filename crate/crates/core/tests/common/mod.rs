//! Independent reference implementations shared by the integration tests.
//! Everything here is written the slow, obvious way on purpose.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use texbias_core::volume::{Dims, LabelMap, Volume3D};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_volume(dims: Dims, seed: u64) -> Volume3D {
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = dims[0] * dims[1] * dims[2];
    let data = (0..n).map(|_| normal.sample(&mut r)).collect();
    Volume3D::new(dims, [1.0; 3], data).unwrap()
}

/// Values drawn from a handful of levels, so median windows contain ties.
pub fn random_volume_with_ties(dims: Dims, seed: u64) -> Volume3D {
    let mut r = rng(seed);
    let n = dims[0] * dims[1] * dims[2];
    let data = (0..n).map(|_| r.random_range(0..6) as f64 * 0.5).collect();
    Volume3D::new(dims, [1.0; 3], data).unwrap()
}

pub fn random_labels(dims: Dims, classes: usize, seed: u64) -> LabelMap {
    let mut r = rng(seed);
    let n = dims[0] * dims[1] * dims[2];
    let labels = (0..n).map(|_| r.random_range(0..classes) as u16).collect();
    LabelMap::new(dims, labels, classes).unwrap()
}

fn idx(dims: Dims, x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

/// Sampled Gaussian, `exp(-d^2 / 2 sigma^2)` for `|d| <= ceil(4 sigma)`,
/// normalized to unit sum.
pub fn gaussian_weights(sigma: f64) -> Vec<f64> {
    let r = (4.0 * sigma).ceil() as i64;
    let w: Vec<f64> = (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// Direct 3D convolution with the outer-product kernel and clamped borders.
pub fn gaussian_oracle(vol: &Volume3D, sigma: f64) -> Vec<f64> {
    let dims = vol.dims();
    let w = gaussian_weights(sigma);
    let r = (w.len() / 2) as i64;
    let clamp = |p: i64, n: usize| p.clamp(0, n as i64 - 1) as usize;
    let mut out = vec![0.0; vol.len()];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let mut acc = 0.0;
                for (c, wc) in w.iter().enumerate() {
                    let zz = clamp(z as i64 + c as i64 - r, dims[2]);
                    for (b, wb) in w.iter().enumerate() {
                        let yy = clamp(y as i64 + b as i64 - r, dims[1]);
                        for (a, wa) in w.iter().enumerate() {
                            let xx = clamp(x as i64 + a as i64 - r, dims[0]);
                            acc += wa * wb * wc * vol.data()[idx(dims, xx, yy, zz)];
                        }
                    }
                }
                out[idx(dims, x, y, z)] = acc;
            }
        }
    }
    out
}

/// Pads the volume by mirroring (`c b a | a b c | c b a`) far enough for
/// the window, then sorts every window and takes element `n / 2`.
pub fn median_oracle(vol: &Volume3D, size: usize) -> Vec<f64> {
    let dims = vol.dims();
    let before = (size - 1) / 2;
    let after = size / 2;
    let mirror = |i: i64, n: usize| -> usize {
        let n = n as i64;
        let mut i = i;
        loop {
            if i < 0 {
                i = -i - 1;
            } else if i >= n {
                i = 2 * n - i - 1;
            } else {
                return i as usize;
            }
        }
    };
    let pd = [dims[0] + size, dims[1] + size, dims[2] + size];
    let mut padded = vec![0.0; pd[0] * pd[1] * pd[2]];
    for z in 0..pd[2] {
        for y in 0..pd[1] {
            for x in 0..pd[0] {
                let sx = mirror(x as i64 - before as i64, dims[0]);
                let sy = mirror(y as i64 - before as i64, dims[1]);
                let sz = mirror(z as i64 - before as i64, dims[2]);
                padded[idx(pd, x, y, z)] = vol.data()[idx(dims, sx, sy, sz)];
            }
        }
    }
    let mut out = vec![0.0; vol.len()];
    let mut window = Vec::new();
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                window.clear();
                for c in 0..=before + after {
                    for b in 0..=before + after {
                        for a in 0..=before + after {
                            window.push(padded[idx(pd, x + a, y + b, z + c)]);
                        }
                    }
                }
                window.sort_by(|p, q| p.partial_cmp(q).unwrap());
                out[idx(dims, x, y, z)] = window[window.len() / 2];
            }
        }
    }
    out
}

/// Per-class Dice by counting membership separately for each class.
pub fn dice_oracle(pred: &LabelMap, gt: &LabelMap) -> Vec<f64> {
    (0..gt.num_classes())
        .map(|k| {
            let k = k as u16;
            let p = pred.labels().iter().filter(|&&v| v == k).count();
            let g = gt.labels().iter().filter(|&&v| v == k).count();
            let both = pred
                .labels()
                .iter()
                .zip(gt.labels())
                .filter(|&(&a, &b)| a == k && b == k)
                .count();
            if p + g == 0 {
                1.0
            } else {
                2.0 * both as f64 / (p + g) as f64
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Finite-difference check of `loss_and_grad` on one random instance.
/// Returns the largest relative error over all weight entries.
pub fn gradient_check(seed: u64, d: usize, classes: usize, batch: usize, l2: f64) -> f64 {
    use texbias_core::segmenter::softmax::loss_and_grad;
    let mut r = rng(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let cols = d + 1;
    let w: Vec<f64> = (0..classes * cols).map(|_| 0.5 * normal.sample(&mut r)).collect();
    let x: Vec<f64> = (0..batch * d).map(|_| normal.sample(&mut r)).collect();
    let y: Vec<u16> = (0..batch).map(|_| r.random_range(0..classes) as u16).collect();
    let (_, grad) = loss_and_grad(&w, classes, d, &x, &y, l2);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let mut wp = w.clone();
        let mut wm = w.clone();
        wp[i] += h;
        wm[i] -= h;
        let numeric =
            (loss_and_grad(&wp, classes, d, &x, &y, l2).0 - loss_and_grad(&wm, classes, d, &x, &y, l2).0)
                / (2.0 * h);
        let scale = grad[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((grad[i] - numeric).abs() / scale);
    }
    worst
}

/// Little-endian NIfTI-1 header built field by field.
pub fn nifti_header(dims: [i16; 3], datatype: i16, bitpix: i16, pixdim: [f32; 3], slope: f32, inter: f32) -> Vec<u8> {
    let mut h = vec![0u8; 352];
    h[0..4].copy_from_slice(&348i32.to_le_bytes());
    let dim = [3i16, dims[0], dims[1], dims[2], 1, 1, 1, 1];
    for (i, v) in dim.iter().enumerate() {
        h[40 + 2 * i..42 + 2 * i].copy_from_slice(&v.to_le_bytes());
    }
    h[70..72].copy_from_slice(&datatype.to_le_bytes());
    h[72..74].copy_from_slice(&bitpix.to_le_bytes());
    let pix = [1.0f32, pixdim[0], pixdim[1], pixdim[2], 0.0, 0.0, 0.0, 0.0];
    for (i, v) in pix.iter().enumerate() {
        h[76 + 4 * i..80 + 4 * i].copy_from_slice(&v.to_le_bytes());
    }
    h[108..112].copy_from_slice(&352f32.to_le_bytes());
    h[112..116].copy_from_slice(&slope.to_le_bytes());
    h[116..120].copy_from_slice(&inter.to_le_bytes());
    h[344..348].copy_from_slice(b"n+1\0");
    h
}

pub fn gzip(bytes: &[u8]) -> Vec<u8> {
    use std::io::Write;
    let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
    enc.write_all(bytes).unwrap();
    enc.finish().unwrap()
}
