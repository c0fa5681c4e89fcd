use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::Volume3D;

/// Half-sample symmetric reflection (`a b c | c b a`), repeated for offsets
/// larger than the axis.
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Per-axis window offsets `[-(size-1)/2, size/2]` for a cubic window of
/// edge `size`.
pub fn window_offsets(size: usize) -> (isize, isize) {
    (-(((size - 1) / 2) as isize), (size / 2) as isize)
}

/// Cubic-window median with reflect padding. For `n = size^3` samples the
/// output is the element of 0-based rank `n / 2` in sorted order, which is
/// well defined for even windows too.
pub fn median_filter(vol: &Volume3D, size: usize) -> Result<Volume3D> {
    if size < 2 {
        return Err(Error::InvalidParameter(format!(
            "median size must be at least 2, got {size}"
        )));
    }
    let [nx, ny, nz] = vol.dims();
    let (lo, hi) = window_offsets(size);
    let n = size * size * size;
    let rank = n / 2;
    let input = vol.data();

    // Reflected coordinates per axis, one table per output position.
    let table = |len: usize| -> Vec<Vec<usize>> {
        (0..len as isize)
            .map(|p| (lo..=hi).map(|o| reflect(p + o, len)).collect())
            .collect()
    };
    let (tx, ty, tz) = (table(nx), table(ny), table(nz));

    let mut out = vec![0.0; input.len()];
    out.par_chunks_mut(nx * ny)
        .enumerate()
        .for_each_init(
            || Vec::with_capacity(n),
            |window, (z, plane)| {
                for y in 0..ny {
                    for x in 0..nx {
                        window.clear();
                        for &zz in &tz[z] {
                            for &yy in &ty[y] {
                                let row = nx * (yy + ny * zz);
                                window.extend(tx[x].iter().map(|&xx| input[row + xx]));
                            }
                        }
                        let (_, m, _) = window.select_nth_unstable_by(rank, f64::total_cmp);
                        plane[x + nx * y] = *m;
                    }
                }
            },
        );
    Ok(vol.with_data(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Dims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(dims: Dims, seed: u64) -> Volume3D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Volume3D::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    /// Pads explicitly by mirroring, then sorts every full window.
    fn naive_oracle(vol: &Volume3D, size: usize) -> Vec<f64> {
        let [nx, ny, nz] = vol.dims();
        let before = (size - 1) / 2;
        let after = size / 2;
        let mirror = |i: isize, n: usize| -> usize {
            let mut i = i;
            let n = n as isize;
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
        let mut out = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut w = Vec::new();
                    for c in 0..size {
                        for b in 0..size {
                            for a in 0..size {
                                let xx = mirror(x as isize - before as isize + a as isize, nx);
                                let yy = mirror(y as isize - before as isize + b as isize, ny);
                                let zz = mirror(z as isize - before as isize + c as isize, nz);
                                w.push(vol.get(xx, yy, zz));
                            }
                        }
                    }
                    assert_eq!(w.len(), size.pow(3));
                    assert_eq!(before + after + 1, size);
                    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    out.push(w[w.len() / 2]);
                }
            }
        }
        out
    }

    #[test]
    fn reflect_mapping() {
        // a b c | c b a | a b c
        let got: Vec<usize> = (-4..7).map(|i| reflect(i, 3)).collect();
        assert_eq!(got, vec![2, 2, 1, 0, 0, 1, 2, 2, 1, 0, 0]);
        assert_eq!(window_offsets(2), (0, 1));
        assert_eq!(window_offsets(3), (-1, 1));
        assert_eq!(window_offsets(8), (-3, 4));
    }

    #[test]
    fn even_window_rank() {
        // A 2x2x2 volume with values 1..8; with size 2 the window at the
        // origin covers the whole volume, rank 4 of {1..8} is 5.
        let v = Volume3D::new([2, 2, 2], [1.0; 3], (1..=8).map(f64::from).collect()).unwrap();
        let out = median_filter(&v, 2).unwrap();
        assert_eq!(out.get(0, 0, 0), 5.0);
    }

    #[test]
    fn matches_naive_oracle() {
        for (i, size) in [2usize, 3, 5].into_iter().enumerate() {
            let v = random_volume([7, 7, 7], 40 + i as u64);
            let out = median_filter(&v, size).unwrap();
            assert_eq!(out.data(), naive_oracle(&v, size).as_slice(), "size {size}");
        }
    }

    #[test]
    fn window_larger_than_volume() {
        let v = random_volume([3, 2, 4], 5);
        let out = median_filter(&v, 8).unwrap();
        assert_eq!(out.data(), naive_oracle(&v, 8).as_slice());
    }

    #[test]
    fn constant_and_sample_membership() {
        let c = Volume3D::filled([4, 4, 4], -2.0).unwrap();
        assert_eq!(median_filter(&c, 3).unwrap(), c);

        let v = random_volume([6, 5, 4], 9);
        let out = median_filter(&v, 4).unwrap();
        for x in out.data() {
            assert!(v.data().contains(x));
        }
    }

    #[test]
    fn affine_commutation() {
        let v = random_volume([6, 6, 6], 11);
        let (a, b) = (3.0, 1.25);
        let mapped = v.with_data(v.data().iter().map(|x| a * x + b).collect());
        let lhs = median_filter(&mapped, 3).unwrap();
        let rhs = median_filter(&v, 3).unwrap();
        for (l, r) in lhs.data().iter().zip(rhs.data()) {
            assert!((l - (a * r + b)).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_small_size() {
        let v = Volume3D::filled([2, 2, 2], 1.0).unwrap();
        assert!(median_filter(&v, 1).is_err());
        assert!(median_filter(&v, 0).is_err());
    }
}
