use super::Volume3D;
use crate::error::{Error, Result};

/// Minimum population standard deviation accepted by [`normalize_zmuv`].
pub const NORMALIZE_EPS: f64 = 1e-12;

/// Zero-mean, unit-variance rescaling over all voxels, using the population
/// (divide-by-N) standard deviation.
pub fn normalize_zmuv(vol: &Volume3D) -> Result<Volume3D> {
    let n = vol.len();
    if n < 2 {
        return Err(Error::DegenerateVolume(format!(
            "need at least 2 voxels, got {n}"
        )));
    }
    let mean = vol.mean();
    let var = vol.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > NORMALIZE_EPS) {
        return Err(Error::DegenerateVolume(format!(
            "standard deviation {sd:e} is below {NORMALIZE_EPS:e}"
        )));
    }
    let data = vol.data().iter().map(|v| (v - mean) / sd).collect();
    Ok(vol.with_data(data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn moments(v: &Volume3D) -> (f64, f64) {
        let m = v.mean();
        let var = v.data().iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
        (m, var)
    }

    #[test]
    fn three_values() {
        let v = Volume3D::new([3, 1, 1], [1.0; 3], vec![1.0, 2.0, 3.0]).unwrap();
        let out = normalize_zmuv(&v).unwrap();
        // mean 2, population sd sqrt(2/3)
        let expected = [-(1.5f64).sqrt(), 0.0, (1.5f64).sqrt()];
        for (a, b) in out.data().iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((out.data()[2] - 1.224745).abs() < 1e-6);
        assert_eq!(v.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn constant_volume_is_degenerate() {
        let v = Volume3D::filled([3, 3, 3], 7.0).unwrap();
        assert!(matches!(normalize_zmuv(&v), Err(Error::DegenerateVolume(_))));
        let one = Volume3D::filled([1, 1, 1], 1.0).unwrap();
        assert!(matches!(normalize_zmuv(&one), Err(Error::DegenerateVolume(_))));
    }

    proptest! {
        #[test]
        fn moments_idempotence_and_affine_invariance(
            data in proptest::collection::vec(-100.0f64..100.0, 24),
            a in 0.01f64..50.0,
            b in -100.0f64..100.0,
        ) {
            let v = Volume3D::new([2, 3, 4], [1.0; 3], data).unwrap();
            prop_assume!(moments(&v).1 > 1e-6);
            let n1 = normalize_zmuv(&v).unwrap();
            let (m, var) = moments(&n1);
            prop_assert!(m.abs() < 1e-9);
            prop_assert!((var - 1.0).abs() < 1e-9);

            let n2 = normalize_zmuv(&n1).unwrap();
            for (x, y) in n1.data().iter().zip(n2.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }

            let shifted = v.with_data(v.data().iter().map(|x| a * x + b).collect());
            let n3 = normalize_zmuv(&shifted).unwrap();
            for (x, y) in n1.data().iter().zip(n3.data()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
