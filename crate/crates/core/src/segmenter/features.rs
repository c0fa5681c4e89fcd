use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::filters::{gaussian_blur, median_filter};
use crate::volume::{coords, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    Intensity,
    Gaussian { sigma: f64 },
    Median { size: usize },
    /// Central-difference gradient magnitude of the volume blurred with
    /// `sigma`, in intensity units per voxel.
    GradientMagnitude { sigma: f64 },
    /// Voxel coordinate divided by the axis length, in `[0, 1)`.
    Coordinate { axis: usize },
}

/// Ordered list of per-voxel features. Stored with the model so prediction
/// always uses the training recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecipe {
    pub features: Vec<Feature>,
}

impl Default for FeatureRecipe {
    fn default() -> Self {
        Self {
            features: vec![
                Feature::Intensity,
                Feature::Gaussian { sigma: 1.0 },
                Feature::Gaussian { sigma: 2.0 },
                Feature::Gaussian { sigma: 4.0 },
                Feature::Median { size: 3 },
                Feature::GradientMagnitude { sigma: 1.0 },
                Feature::Coordinate { axis: 0 },
                Feature::Coordinate { axis: 1 },
                Feature::Coordinate { axis: 2 },
            ],
        }
    }
}

impl FeatureRecipe {
    pub fn intensity_only() -> Self {
        Self {
            features: vec![Feature::Intensity],
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Row-major `N x D` feature table, one row per voxel in volume order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Column `j` as a fresh vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.data[i * self.cols + j]).collect()
    }
}

fn gradient_magnitude(vol: &Volume3D) -> Vec<f64> {
    let dims = vol.dims();
    let [nx, ny, nz] = dims;
    let d = vol.data();
    (0..d.len())
        .into_par_iter()
        .map(|i| {
            let (x, y, z) = coords(dims, i);
            let p = [x, y, z];
            let n = [nx, ny, nz];
            let stride = [1, nx, nx * ny];
            let mut sq = 0.0;
            for axis in 0..3 {
                if n[axis] < 2 {
                    continue;
                }
                let lo = p[axis].saturating_sub(1);
                let hi = (p[axis] + 1).min(n[axis] - 1);
                let a = d[i - (p[axis] - lo) * stride[axis]];
                let b = d[i + (hi - p[axis]) * stride[axis]];
                let g = (b - a) / (hi - lo) as f64;
                sq += g * g;
            }
            sq.sqrt()
        })
        .collect()
}

/// Computes every feature of `recipe` at every voxel. Smoothed volumes that
/// several features need are computed once.
pub fn extract_features(vol: &Volume3D, recipe: &FeatureRecipe) -> Result<FeatureMatrix> {
    let mut blurred: HashMap<u64, Volume3D> = HashMap::new();
    let mut blur = |sigma: f64| -> Result<Volume3D> {
        if let Some(v) = blurred.get(&sigma.to_bits()) {
            return Ok(v.clone());
        }
        let v = gaussian_blur(vol, sigma)?;
        blurred.insert(sigma.to_bits(), v.clone());
        Ok(v)
    };

    let dims = vol.dims();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(recipe.len());
    for feature in &recipe.features {
        let col = match *feature {
            Feature::Intensity => vol.data().to_vec(),
            Feature::Gaussian { sigma } => blur(sigma)?.into_data(),
            Feature::Median { size } => median_filter(vol, size)?.into_data(),
            Feature::GradientMagnitude { sigma } => gradient_magnitude(&blur(sigma)?),
            Feature::Coordinate { axis } => {
                let len = dims[axis.min(2)] as f64;
                (0..vol.len())
                    .map(|i| {
                        let (x, y, z) = coords(dims, i);
                        [x, y, z][axis.min(2)] as f64 / len
                    })
                    .collect()
            }
        };
        columns.push(col);
    }

    let rows = vol.len();
    let cols = columns.len();
    let mut data = vec![0.0; rows * cols];
    data.par_chunks_mut(cols.max(1)).enumerate().for_each(|(i, row)| {
        for (j, c) in columns.iter().enumerate() {
            row[j] = c[i];
        }
    });
    Ok(FeatureMatrix { rows, cols, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_recipe_has_nine_features() {
        assert_eq!(FeatureRecipe::default().len(), 9);
    }

    #[test]
    fn constant_volume() {
        let v = Volume3D::filled([6, 5, 4], 3.25).unwrap();
        let f = extract_features(&v, &FeatureRecipe::default()).unwrap();
        assert_eq!((f.rows, f.cols), (120, 9));
        for i in 0..f.rows {
            let r = f.row(i);
            for &x in &r[0..5] {
                assert!((x - 3.25).abs() < 1e-9);
            }
            assert!(r[5].abs() < 1e-12);
            for &c in &r[6..9] {
                assert!((0.0..1.0).contains(&c));
            }
        }
    }

    #[test]
    fn intensity_only_recipe() {
        let v = Volume3D::from_fn([3, 4, 5], |x, y, z| (x * 7 + y * 3 + z) as f64).unwrap();
        let f = extract_features(&v, &FeatureRecipe::intensity_only()).unwrap();
        assert_eq!(f.data, v.data());
    }

    #[test]
    fn ramp_gradient_is_one() {
        let v = Volume3D::from_fn([8, 8, 8], |x, _, _| x as f64).unwrap();
        let g = gradient_magnitude(&v);
        for (i, &m) in g.iter().enumerate() {
            let (x, _, _) = coords([8, 8, 8], i);
            if (1..7).contains(&x) {
                assert!((m - 1.0).abs() < 1e-12);
            }
        }
        // after the sigma=1 smoothing a ramp stays a ramp away from the x faces
        let recipe = FeatureRecipe {
            features: vec![Feature::GradientMagnitude { sigma: 1.0 }],
        };
        let v = Volume3D::from_fn([16, 6, 6], |x, _, _| x as f64).unwrap();
        let f = extract_features(&v, &recipe).unwrap();
        for i in 0..f.rows {
            let (x, _, _) = coords([16, 6, 6], i);
            if (5..11).contains(&x) {
                assert!((f.data[i] - 1.0).abs() < 1e-9, "x={x}: {}", f.data[i]);
            }
        }
    }

    #[test]
    fn coordinates() {
        let v = Volume3D::filled([4, 2, 5], 0.0).unwrap();
        let recipe = FeatureRecipe {
            features: (0..3).map(|axis| Feature::Coordinate { axis }).collect(),
        };
        let f = extract_features(&v, &recipe).unwrap();
        let i = crate::volume::linear_index([4, 2, 5], 3, 1, 4);
        assert_eq!(f.row(i), &[0.75, 0.5, 0.8]);
    }
}
