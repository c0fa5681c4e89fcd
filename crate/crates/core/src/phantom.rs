//! Synthetic labeled "brain-like" phantoms.
//!
//! A phantom is a stack of nested, slightly lobed ellipsoidal shells around
//! a jittered center, plus a few small off-center ellipsoids standing in for
//! small deep structures. Shell classes are assigned from the outside in, so
//! class volumes are strongly unequal.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, CohortManifest, SubjectEntry};
use crate::error::{Error, Result};
use crate::filters::splitmix64;
use crate::volume::{
    normalize_zmuv, save_labelmap, save_volume, Dims, LabelMap, Volume3D, VolumeFormat,
};

/// Minimum voxels per class for a valid phantom at the default 64^3 size.
pub const MIN_CLASS_VOXELS: usize = 32;
const REFERENCE_VOXELS: usize = 64 * 64 * 64;
/// Regeneration attempts (seed + 1 each time) before giving up.
pub const MAX_RETRIES: u32 = 16;

/// Pre-normalization class means for the default ten-class phantom. Every
/// class is 0.3 from its nearest neighbour in intensity, and spatial
/// neighbours are far apart in intensity so blurring produces values that
/// look like other classes.
pub const DEFAULT_INTENSITIES: [f64; 10] = [0.0, 2.4, 1.2, 0.6, 1.5, 0.9, 1.8, 2.1, 0.3, 2.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub num_classes: usize,
    pub subject_scale: f64,
    pub intensity_table: Vec<f64>,
    pub intensity_jitter_sd: f64,
    pub acquisition_noise_sd: f64,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            dims: [64, 64, 64],
            num_classes: 10,
            subject_scale: 1.0,
            intensity_table: DEFAULT_INTENSITIES.to_vec(),
            intensity_jitter_sd: 0.05,
            acquisition_noise_sd: 0.1,
            seed: 0,
        }
    }
}

impl PhantomSpec {
    /// Default spec resized to `num_classes`, extending the intensity table
    /// with evenly spaced values when more than ten classes are requested.
    pub fn with_classes(num_classes: usize) -> Self {
        let table = (0..num_classes)
            .map(|c| {
                DEFAULT_INTENSITIES
                    .get(c)
                    .copied()
                    .unwrap_or(0.15 + 0.3 * c as f64)
            })
            .collect();
        Self {
            num_classes,
            intensity_table: table,
            ..Self::default()
        }
    }

    /// Smallest axis length that fits `num_classes` shells.
    pub fn min_axis(num_classes: usize) -> usize {
        (num_classes + 6).max(8)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::InvalidParameter("a phantom needs at least 2 classes".into()));
        }
        if self.num_classes > 255 {
            return Err(Error::InvalidParameter("at most 255 phantom classes".into()));
        }
        if self.intensity_table.len() != self.num_classes {
            return Err(Error::InvalidParameter(format!(
                "intensity table has {} entries for {} classes",
                self.intensity_table.len(),
                self.num_classes
            )));
        }
        if !(self.intensity_jitter_sd >= 0.0) || !(self.acquisition_noise_sd >= 0.0) {
            return Err(Error::InvalidParameter("standard deviations must be >= 0".into()));
        }
        if !(self.subject_scale > 0.0) {
            return Err(Error::InvalidParameter("subject scale must be positive".into()));
        }
        let need = Self::min_axis(self.num_classes);
        if self.dims.iter().any(|&d| d < need) {
            return Err(Error::InvalidParameter(format!(
                "dims {:?} too small for {} classes (need >= {need} per axis)",
                self.dims, self.num_classes
            )));
        }
        Ok(())
    }
}

struct Blob {
    center: [f64; 3],
    axes: [f64; 3],
    class: u16,
}

impl Blob {
    fn contains(&self, p: [f64; 3]) -> bool {
        (0..3)
            .map(|k| ((p[k] - self.center[k]) / self.axes[k]).powi(2))
            .sum::<f64>()
            <= 1.0
    }
}

/// Number of small ellipsoid classes; the rest of the foreground classes
/// are shells.
fn small_class_count(num_classes: usize) -> usize {
    (num_classes - 1) / 3
}

fn build_labels(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Vec<u16> {
    let dims = spec.dims;
    let c = spec.num_classes;
    let n_small = small_class_count(c);
    let n_shell = c - 1 - n_small;

    let center: [f64; 3] = std::array::from_fn(|k| {
        dims[k] as f64 / 2.0 + rng.random_range(-0.05..0.05) * dims[k] as f64
    });
    let base = [0.34, 0.37, 0.31];
    let outer: [f64; 3] = std::array::from_fn(|k| base[k] * spec.subject_scale * dims[k] as f64);
    let radii: Vec<f64> = (0..n_shell)
        .map(|k| 1.0 - 0.78 * (k as f64 / n_shell as f64).powf(0.8))
        .collect();
    // Low-order lobes so subjects differ in shape, not just size.
    let lobe_amp = rng.random_range(0.02..0.06);
    let lobe_phase = rng.random_range(0.0..TAU);
    let lobe_tilt = rng.random_range(0.0..TAU);

    let phase0 = rng.random_range(0.0..TAU);
    let small: Vec<Blob> = (0..n_small)
        .map(|j| {
            let angle = phase0 + TAU * j as f64 / n_small as f64;
            let zsign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let offset = [
                0.5 * angle.cos(),
                0.5 * angle.sin(),
                0.2 * zsign,
            ];
            Blob {
                center: std::array::from_fn(|k| center[k] + offset[k] * outer[k]),
                // At least one voxel across, so tiny volumes still get every class.
                axes: [
                    (0.16 * outer[0]).max(1.0),
                    (0.12 * outer[1]).max(1.0),
                    (0.11 * outer[2]).max(1.0),
                ],
                class: (1 + n_shell + j) as u16,
            }
        })
        .collect();

    let [nx, ny, nz] = dims;
    let mut labels = vec![0u16; nx * ny * nz];
    labels
        .par_chunks_mut(nx * ny)
        .enumerate()
        .for_each(|(z, plane)| {
            for y in 0..ny {
                for x in 0..nx {
                    let p = [x as f64, y as f64, z as f64];
                    let d: [f64; 3] = std::array::from_fn(|k| (p[k] - center[k]) / outer[k]);
                    let rho = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    let theta = d[1].atan2(d[0]);
                    let elev = d[2].atan2((d[0] * d[0] + d[1] * d[1]).sqrt());
                    let wobble = 1.0
                        + lobe_amp * (2.0 * theta + lobe_phase).sin()
                        + 0.5 * lobe_amp * (3.0 * elev + lobe_tilt).cos();
                    let rho = rho / wobble;
                    let mut label = 0u16;
                    for (k, &r) in radii.iter().enumerate() {
                        if rho <= r {
                            label = (k + 1) as u16;
                        } else {
                            break;
                        }
                    }
                    if let Some(b) = small.iter().find(|b| b.contains(p)) {
                        label = b.class;
                    }
                    plane[x + nx * y] = label;
                }
            }
        });
    labels
}

/// Builds one phantom: labels, class means with per-subject jitter, and
/// per-voxel acquisition noise, then zero-mean/unit-variance normalization.
/// Deterministic in `spec.seed`.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<(Volume3D, LabelMap)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = build_labels(spec, &mut rng);

    let means: Vec<f64> = if spec.intensity_jitter_sd > 0.0 {
        let jitter = Normal::new(0.0, spec.intensity_jitter_sd)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        spec.intensity_table
            .iter()
            .map(|m| m + jitter.sample(&mut rng))
            .collect()
    } else {
        spec.intensity_table.clone()
    };
    let mut data: Vec<f64> = labels.iter().map(|&l| means[l as usize]).collect();
    if spec.acquisition_noise_sd > 0.0 {
        let noise = Normal::new(0.0, spec.acquisition_noise_sd)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        for v in &mut data {
            *v += noise.sample(&mut rng);
        }
    }

    let raw = Volume3D::new(spec.dims, [1.0; 3], data)?;
    let vol = normalize_zmuv(&raw)?;
    let lm = LabelMap::new(spec.dims, labels, spec.num_classes)?;
    Ok((vol, lm))
}

/// A phantom that passed the per-class voxel-count check.
#[derive(Debug, Clone)]
pub struct ValidPhantom {
    pub volume: Volume3D,
    pub labels: LabelMap,
    /// Seed that produced the accepted phantom.
    pub seed: u64,
    pub retries: u32,
}

/// Per-class voxel floor for `dims`: [`MIN_CLASS_VOXELS`] at 64^3 and above,
/// shrinking with the voxel count for smaller volumes, never below 1.
pub fn min_class_voxels(dims: Dims) -> usize {
    let n = dims[0] * dims[1] * dims[2];
    (MIN_CLASS_VOXELS * n).div_ceil(REFERENCE_VOXELS).clamp(1, MIN_CLASS_VOXELS)
}

/// Regenerates with `seed + 1` until every class has at least
/// [`min_class_voxels`] voxels.
pub fn generate_valid_phantom(spec: &PhantomSpec) -> Result<ValidPhantom> {
    let floor = min_class_voxels(spec.dims);
    let mut attempt = spec.clone();
    for retries in 0..=MAX_RETRIES {
        let (volume, labels) = generate_phantom(&attempt)?;
        if labels.class_counts().iter().all(|&n| n >= floor) {
            return Ok(ValidPhantom {
                volume,
                labels,
                seed: attempt.seed,
                retries,
            });
        }
        attempt.seed = attempt.seed.wrapping_add(1);
    }
    Err(Error::InvalidParameter(format!(
        "could not fit {} classes with >= {floor} voxels each in {:?}",
        spec.num_classes, spec.dims
    )))
}

pub fn subject_id(i: usize) -> String {
    format!("sub-{i:03}")
}

/// Per-subject scale in [0.75, 1.25], derived from the subject seed.
pub fn subject_scale(subject_seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(subject_seed));
    rng.random_range(0.75..=1.25)
}

/// Writes `n` phantoms (subject `i` seeded with `seed + i`) plus
/// `cohort.json` recording seeds, scales and the 70/15/15 split.
pub fn generate_cohort(
    n: usize,
    spec_base: &PhantomSpec,
    seed: u64,
    out_dir: &Path,
) -> Result<CohortManifest> {
    let counts = dataset::split_counts(n)?;
    spec_base.validate()?;
    dataset::ensure_dir(out_dir)?;

    let subjects: Vec<SubjectEntry> = (0..n)
        .into_par_iter()
        .map(|i| -> Result<SubjectEntry> {
            let subject_seed = seed.wrapping_add(i as u64);
            let scale = subject_scale(subject_seed);
            let spec = PhantomSpec {
                subject_scale: scale,
                seed: subject_seed,
                ..spec_base.clone()
            };
            let p = generate_valid_phantom(&spec)?;
            let id = subject_id(i);
            let volume = format!("{id}.nii");
            let labels = format!("{id}{}.nii", dataset::LABEL_SUFFIX);
            save_volume(&p.volume, out_dir.join(&volume), VolumeFormat::Nifti)?;
            save_labelmap(&p.labels, out_dir.join(&labels))?;
            Ok(SubjectEntry {
                id,
                volume,
                labels,
                split: dataset::split_for_index(i, counts),
                seed: Some(subject_seed),
                scale: Some(scale),
                retries: p.retries,
            })
        })
        .collect::<Result<_>>()?;

    let manifest = CohortManifest {
        num_classes: spec_base.num_classes,
        subjects,
        seed: Some(seed),
        dims: Some(spec_base.dims),
    };
    manifest.save(out_dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Split;
    use crate::volume::{load_labelmap, load_volume};

    #[test]
    fn deterministic_in_seed() {
        let spec = PhantomSpec {
            dims: [32, 32, 32],
            seed: 5,
            ..PhantomSpec::default()
        };
        let (a, la) = generate_phantom(&spec).unwrap();
        let (b, lb) = generate_phantom(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let (c, _) = generate_phantom(&PhantomSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noiseless_regions_are_flat() {
        let spec = PhantomSpec {
            dims: [32, 32, 32],
            intensity_jitter_sd: 0.0,
            acquisition_noise_sd: 0.0,
            seed: 1,
            ..PhantomSpec::default()
        };
        let (vol, lm) = generate_phantom(&spec).unwrap();
        let mut seen: Vec<Option<f64>> = vec![None; spec.num_classes];
        for (&v, &l) in vol.data().iter().zip(lm.labels()) {
            match seen[l as usize] {
                None => seen[l as usize] = Some(v),
                Some(prev) => assert_eq!(prev, v),
            }
        }
    }

    #[test]
    fn default_phantom_populates_every_class() {
        for seed in 0..4 {
            let spec = PhantomSpec {
                seed,
                ..PhantomSpec::default()
            };
            let (vol, lm) = generate_phantom(&spec).unwrap();
            let counts = lm.class_counts();
            assert!(counts.iter().all(|&n| n >= MIN_CLASS_VOXELS), "{counts:?}");
            let m = vol.mean();
            let var = vol.data().iter().map(|x| (x - m).powi(2)).sum::<f64>() / vol.len() as f64;
            assert!(m.abs() < 1e-9 && (var - 1.0).abs() < 1e-9);
        }
        // smallest subjects too
        let spec = PhantomSpec {
            subject_scale: 0.75,
            ..PhantomSpec::default()
        };
        let (_, lm) = generate_phantom(&spec).unwrap();
        assert!(lm.class_counts().iter().all(|&n| n >= MIN_CLASS_VOXELS));
    }

    #[test]
    fn class_floor_scales_with_volume() {
        assert_eq!(min_class_voxels([64, 64, 64]), MIN_CLASS_VOXELS);
        assert_eq!(min_class_voxels([128, 128, 128]), MIN_CLASS_VOXELS);
        assert_eq!(min_class_voxels([32, 32, 32]), 4);
        assert_eq!(min_class_voxels([16, 16, 16]), 1);
        for (dims, classes) in [([16, 16, 16], 10), ([20, 20, 20], 4), ([8, 8, 8], 2)] {
            let spec = PhantomSpec {
                dims,
                ..PhantomSpec::with_classes(classes)
            };
            let p = generate_valid_phantom(&spec).unwrap();
            assert!(p.labels.class_counts().iter().all(|&n| n >= 1), "{dims:?}");
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        let tiny = PhantomSpec {
            dims: [15, 64, 64],
            ..PhantomSpec::default()
        };
        assert!(generate_phantom(&tiny).is_err());
        let short_table = PhantomSpec {
            intensity_table: vec![0.0; 3],
            ..PhantomSpec::default()
        };
        assert!(generate_phantom(&short_table).is_err());
        assert!(PhantomSpec::with_classes(1).validate().is_err());
        assert!(PhantomSpec {
            dims: [16, 16, 16],
            ..PhantomSpec::default()
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn two_class_phantom() {
        let spec = PhantomSpec {
            dims: [16, 16, 16],
            ..PhantomSpec::with_classes(2)
        };
        let p = generate_valid_phantom(&spec).unwrap();
        assert_eq!(p.labels.num_classes(), 2);
    }

    #[test]
    fn cohort_split_and_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = PhantomSpec {
            dims: [64, 64, 64],
            ..PhantomSpec::default()
        };
        let m = generate_cohort(3, &spec, 11, dir.path()).unwrap();
        let splits: Vec<Split> = m.subjects.iter().map(|s| s.split).collect();
        assert_eq!(splits, [Split::Train, Split::Val, Split::Test]);
        for (i, s) in m.subjects.iter().enumerate() {
            assert_eq!(s.seed, Some(11 + i as u64));
            let scale = s.scale.unwrap();
            assert!((0.75..=1.25).contains(&scale));
            let v = load_volume(dir.path().join(&s.volume)).unwrap();
            let l = load_labelmap(dir.path().join(&s.labels), Some(10)).unwrap();
            assert_eq!(v.dims(), l.dims());
        }
        assert_eq!(CohortManifest::load(dir.path()).unwrap(), m);
    }
}
