//! Per-voxel reference segmenter: a linear softmax classifier over a small
//! multi-scale feature recipe, trained with seeded mini-batch SGD on any
//! mixture of corrupted datasets.

mod features;
pub mod softmax;

pub use features::{extract_features, Feature, FeatureMatrix, FeatureRecipe};

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{self, CohortManifest, Split};
use crate::error::{Error, Result};
use crate::seed;
use crate::volume::{load_labelmap, load_volume, LabelMap, Volume3D};

fn default_learning_rate() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    5
}
fn default_batch_size() -> usize {
    256
}
fn default_samples_per_volume() -> usize {
    4096
}
fn default_l2() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Dataset names making up the training combination.
    pub datasets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Class-balanced voxel samples drawn from each volume per epoch.
    #[serde(default = "default_samples_per_volume")]
    pub samples_per_volume: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_l2")]
    pub l2: f64,
    #[serde(default)]
    pub recipe: FeatureRecipe,
}

impl TrainConfig {
    pub fn new(datasets: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            datasets: datasets.into_iter().map(Into::into).collect(),
            name: None,
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            samples_per_volume: default_samples_per_volume(),
            seed: 0,
            l2: default_l2(),
            recipe: FeatureRecipe::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.datasets.is_empty() {
            return bad("a training combination needs at least one dataset");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.samples_per_volume == 0 {
            return bad("epochs, batch_size and samples_per_volume must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        if self.recipe.is_empty() {
            return bad("feature recipe is empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub datasets: Vec<String>,
    pub seed: u64,
    pub volumes: usize,
    /// Classes never seen in training; their weights stay zero.
    pub absent_classes: Vec<usize>,
    /// Sample-weighted mean loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Accuracy on every sampled training voxel after the last epoch.
    pub sample_accuracy: f64,
}

/// Trained weights plus everything needed to reproduce predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `C` rows of `D + 1` values, bias last.
    pub weights: Vec<Vec<f64>>,
    pub recipe: FeatureRecipe,
    pub feature_mean: Vec<f64>,
    pub feature_sd: Vec<f64>,
    pub num_classes: usize,
    pub config: TrainConfig,
    pub metadata: TrainingMetadata,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let d = self.recipe.len();
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.num_classes < 2 || self.weights.len() != self.num_classes {
            return bad(format!(
                "model has {} weight rows for {} classes",
                self.weights.len(),
                self.num_classes
            ));
        }
        if self.weights.iter().any(|r| r.len() != d + 1) {
            return bad(format!("every weight row must have {} columns", d + 1));
        }
        if self.feature_mean.len() != d || self.feature_sd.len() != d {
            return bad("feature statistics do not match the recipe".into());
        }
        let all = self
            .weights
            .iter()
            .flatten()
            .chain(&self.feature_mean)
            .chain(&self.feature_sd);
        if all.clone().any(|v| !v.is_finite()) {
            return bad("model contains non-finite values".into());
        }
        if self.feature_sd.iter().any(|&s| s <= 0.0) {
            return bad("feature standard deviations must be positive".into());
        }
        Ok(())
    }

    pub fn flat_weights(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Self = dataset::read_json(path)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        dataset::write_json(path, self)
    }
}

/// Samples drawn from one volume for one epoch; features are raw until
/// standardized.
struct EpochSamples {
    x: Vec<f64>,
    y: Vec<u16>,
}

struct UnitData {
    sums: Vec<f64>,
    sq_sums: Vec<f64>,
    voxels: usize,
    present: Vec<bool>,
    epochs: Vec<EpochSamples>,
}

/// Class-balanced sampling: an equal share per class present in the
/// volume, the remainder uniform over all voxels. Draws with replacement.
fn sample_voxels(
    class_voxels: &[Vec<u32>],
    total: usize,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let present: Vec<&Vec<u32>> = class_voxels.iter().filter(|v| !v.is_empty()).collect();
    let per_class = count / present.len().max(1);
    let mut out = Vec::with_capacity(count);
    for voxels in &present {
        for _ in 0..per_class {
            out.push(voxels[rng.random_range(0..voxels.len())] as usize);
        }
    }
    while out.len() < count {
        out.push(rng.random_range(0..total));
    }
    out
}

fn prepare_unit(
    config: &TrainConfig,
    num_classes: usize,
    unit: (usize, usize),
    vol: &Volume3D,
    labels: &LabelMap,
) -> Result<UnitData> {
    if vol.dims() != labels.dims() {
        return Err(Error::DimsMismatch {
            left: vol.dims(),
            right: labels.dims(),
        });
    }
    if labels.num_classes() != num_classes {
        return Err(Error::ClassCountMismatch {
            left: labels.num_classes(),
            right: num_classes,
        });
    }
    let feats = extract_features(vol, &config.recipe)?;
    let d = feats.cols;
    let mut sums = vec![0.0; d];
    let mut sq_sums = vec![0.0; d];
    for i in 0..feats.rows {
        for (k, &v) in feats.row(i).iter().enumerate() {
            sums[k] += v;
            sq_sums[k] += v * v;
        }
    }
    let mut class_voxels: Vec<Vec<u32>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.labels().iter().enumerate() {
        class_voxels[l as usize].push(i as u32);
    }
    let present = class_voxels.iter().map(|v| !v.is_empty()).collect();
    let epochs = (0..config.epochs)
        .map(|e| {
            let mut rng = seed::rng(seed::derive(
                config.seed,
                &[seed::tag("sample"), unit.0 as u64, unit.1 as u64, e as u64],
            ));
            let idx = sample_voxels(&class_voxels, feats.rows, config.samples_per_volume, &mut rng);
            let mut x = Vec::with_capacity(idx.len() * d);
            for &i in &idx {
                x.extend_from_slice(feats.row(i));
            }
            let y = idx.iter().map(|&i| labels.labels()[i]).collect();
            EpochSamples { x, y }
        })
        .collect();
    Ok(UnitData {
        sums,
        sq_sums,
        voxels: feats.rows,
        present,
        epochs,
    })
}

/// Trains on in-memory data. `subjects[k]` is the number of training
/// subjects of dataset `k`; `load(k, s)` returns subject `s` of dataset `k`.
///
/// Deterministic in `(config, data)`: volumes are prepared in parallel but
/// all reductions and the SGD sequence run in a fixed order.
pub fn fit<F>(
    config: &TrainConfig,
    num_classes: usize,
    subjects: &[usize],
    load: F,
) -> Result<ModelParams>
where
    F: Fn(usize, usize) -> Result<(Volume3D, LabelMap)> + Sync,
{
    config.validate()?;
    if num_classes < 2 {
        return Err(Error::InvalidParameter("need at least 2 classes".into()));
    }
    if subjects.len() != config.datasets.len() {
        return Err(Error::InvalidParameter(
            "one subject count per dataset is required".into(),
        ));
    }
    if subjects.iter().all(|&n| n == 0) {
        return Err(Error::Dataset("no training volumes".into()));
    }
    let d = config.recipe.len();
    let cols = d + 1;

    let units: Vec<(usize, usize)> = subjects
        .iter()
        .enumerate()
        .flat_map(|(k, &n)| (0..n).map(move |s| (k, s)))
        .collect();
    let prepared: Vec<UnitData> = units
        .par_iter()
        .map(|&(k, s)| {
            let (vol, labels) = load(k, s)?;
            prepare_unit(config, num_classes, (k, s), &vol, &labels)
        })
        .collect::<Result<_>>()?;

    // Standardization over every training voxel.
    let mut total = 0usize;
    let mut sums = vec![0.0; d];
    let mut sq_sums = vec![0.0; d];
    let mut present = vec![false; num_classes];
    for u in &prepared {
        total += u.voxels;
        for k in 0..d {
            sums[k] += u.sums[k];
            sq_sums[k] += u.sq_sums[k];
        }
        for (p, &q) in present.iter_mut().zip(&u.present) {
            *p |= q;
        }
    }
    let feature_mean: Vec<f64> = sums.iter().map(|s| s / total as f64).collect();
    let feature_sd: Vec<f64> = (0..d)
        .map(|k| {
            let var = (sq_sums[k] / total as f64 - feature_mean[k].powi(2)).max(0.0);
            let sd = var.sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let absent_classes: Vec<usize> = (0..num_classes).filter(|&c| !present[c]).collect();
    if !absent_classes.is_empty() {
        log::warn!(
            "classes {absent_classes:?} appear in no training volume; their weights stay zero"
        );
    }

    let mut prepared = prepared;
    for u in &mut prepared {
        for e in &mut u.epochs {
            for row in e.x.chunks_exact_mut(d) {
                for k in 0..d {
                    row[k] = (row[k] - feature_mean[k]) / feature_sd[k];
                }
            }
        }
    }

    let mut weights = vec![0.0; num_classes * cols];
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let max_subjects = subjects.iter().copied().max().unwrap_or(0);
    let unit_index = |k: usize, s: usize| units.iter().position(|&u| u == (k, s));
    let mut bx = Vec::with_capacity(config.batch_size * d);
    let mut by = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        let mut rng = seed::rng(seed::derive(config.seed, &[seed::tag("epoch"), epoch as u64]));
        let mut order: Vec<usize> = (0..max_subjects).collect();
        order.shuffle(&mut rng);
        // Round-robin across datasets, subject by subject.
        let mut pool: Vec<(usize, usize)> = Vec::new();
        for &s in &order {
            for k in 0..subjects.len() {
                if s < subjects[k] {
                    let u = unit_index(k, s).expect("unit exists");
                    pool.extend((0..prepared[u].epochs[epoch].y.len()).map(|i| (u, i)));
                }
            }
        }
        pool.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in pool.chunks(config.batch_size) {
            bx.clear();
            by.clear();
            for &(u, i) in batch {
                let e = &prepared[u].epochs[epoch];
                bx.extend_from_slice(&e.x[i * d..(i + 1) * d]);
                by.push(e.y[i]);
            }
            let (loss, grad) =
                softmax::loss_and_grad(&weights, num_classes, d, &bx, &by, config.l2);
            loss_sum += loss * batch.len() as f64;
            for c in 0..num_classes {
                if !present[c] {
                    continue;
                }
                for j in 0..cols {
                    weights[c * cols + j] -= config.learning_rate * grad[c * cols + j];
                }
            }
        }
        epoch_losses.push(loss_sum / pool.len().max(1) as f64);
    }

    let mut correct = 0usize;
    let mut seen = 0usize;
    let mut scores = vec![0.0; num_classes];
    for u in &prepared {
        for e in &u.epochs {
            for (row, &label) in e.x.chunks_exact(d).zip(&e.y) {
                softmax::scores_into(&weights, num_classes, row, &mut scores);
                correct += (softmax::argmax(&scores) == label as usize) as usize;
                seen += 1;
            }
        }
    }

    let model = ModelParams {
        weights: weights.chunks(cols).map(<[f64]>::to_vec).collect(),
        recipe: config.recipe.clone(),
        feature_mean,
        feature_sd,
        num_classes,
        config: config.clone(),
        metadata: TrainingMetadata {
            datasets: config.datasets.clone(),
            seed: config.seed,
            volumes: units.len(),
            absent_classes,
            epoch_losses,
            sample_accuracy: correct as f64 / seen.max(1) as f64,
        },
    };
    model.validate()?;
    Ok(model)
}

/// Trains on the train split of every named dataset under `data_root`.
pub fn train(config: &TrainConfig, data_root: &Path) -> Result<ModelParams> {
    config.validate()?;
    let mut dirs = Vec::new();
    let mut manifests = Vec::new();
    for name in &config.datasets {
        let dir = data_root.join(name);
        if !dir.is_dir() {
            return Err(Error::Dataset(format!(
                "missing dataset {name:?} under {}",
                data_root.display()
            )));
        }
        manifests.push(CohortManifest::load(&dir)?);
        dirs.push(dir);
    }
    let num_classes = manifests[0].num_classes;
    if let Some(m) = manifests.iter().find(|m| m.num_classes != num_classes) {
        return Err(Error::ClassCountMismatch {
            left: m.num_classes,
            right: num_classes,
        });
    }
    let splits: Vec<Vec<(String, String)>> = manifests
        .iter()
        .map(|m| {
            m.split(Split::Train)
                .into_iter()
                .map(|s| (s.volume.clone(), s.labels.clone()))
                .collect()
        })
        .collect();
    let counts: Vec<usize> = splits.iter().map(Vec::len).collect();
    fit(config, num_classes, &counts, |k, s| {
        let (vol, lab) = &splits[k][s];
        Ok((
            load_volume(dirs[k].join(vol))?,
            load_labelmap(dirs[k].join(lab), Some(num_classes))?,
        ))
    })
}

/// Labels for precomputed (raw, unstandardized) features.
pub fn predict_features(
    model: &ModelParams,
    feats: &FeatureMatrix,
    dims: crate::volume::Dims,
) -> Result<LabelMap> {
    let d = model.recipe.len();
    if feats.cols != d {
        return Err(Error::InvalidParameter(format!(
            "feature matrix has {} columns, model expects {d}",
            feats.cols
        )));
    }
    let weights = model.flat_weights();
    let c = model.num_classes;
    let labels: Vec<u16> = (0..feats.rows)
        .into_par_iter()
        .map_init(
            || (vec![0.0; d], vec![0.0; c]),
            |(x, scores), i| {
                for (k, &v) in feats.row(i).iter().enumerate() {
                    x[k] = (v - model.feature_mean[k]) / model.feature_sd[k];
                }
                softmax::scores_into(&weights, c, x, scores);
                softmax::argmax(scores) as u16
            },
        )
        .collect();
    LabelMap::new(dims, labels, c)
}

/// Per-voxel argmax of the class scores; ties go to the lowest class.
pub fn predict(model: &ModelParams, vol: &Volume3D) -> Result<LabelMap> {
    model.validate()?;
    let feats = extract_features(vol, &model.recipe)?;
    predict_features(model, &feats, vol.dims())
}
