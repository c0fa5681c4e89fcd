//! Per-class Dice and the models x conditions x classes robustness matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{CohortManifest, Split, DATASET_MANIFEST};
use crate::error::{Error, Result};
use crate::segmenter::{extract_features, predict_features, ModelParams};
use crate::volume::{load_labelmap, load_volume, LabelMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiceFlag {
    Normal,
    /// Neither map contains the class; scored 1.0.
    BothEmpty,
    /// Exactly one map contains the class; scored 0.0.
    OneEmpty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiceVector {
    pub values: Vec<f64>,
    pub flags: Vec<DiceFlag>,
}

/// `2 |P ∩ G| / (|P| + |G|)` per class.
pub fn dice_per_class(pred: &LabelMap, gt: &LabelMap) -> Result<DiceVector> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimsMismatch {
            left: pred.dims(),
            right: gt.dims(),
        });
    }
    if pred.num_classes() != gt.num_classes() {
        return Err(Error::ClassCountMismatch {
            left: pred.num_classes(),
            right: gt.num_classes(),
        });
    }
    let c = gt.num_classes();
    let mut pred_n = vec![0usize; c];
    let mut gt_n = vec![0usize; c];
    let mut both = vec![0usize; c];
    for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
        pred_n[p as usize] += 1;
        gt_n[g as usize] += 1;
        if p == g {
            both[p as usize] += 1;
        }
    }
    let mut values = Vec::with_capacity(c);
    let mut flags = Vec::with_capacity(c);
    for k in 0..c {
        let (v, f) = match (pred_n[k], gt_n[k]) {
            (0, 0) => (1.0, DiceFlag::BothEmpty),
            (0, _) | (_, 0) => (0.0, DiceFlag::OneEmpty),
            (a, b) => (2.0 * both[k] as f64 / (a + b) as f64, DiceFlag::Normal),
        };
        values.push(v);
        flags.push(f);
    }
    Ok(DiceVector { values, flags })
}

/// Mean over classes `1..C` (background excluded).
pub fn foreground_mean(per_class: &[f64]) -> f64 {
    let fg = &per_class[1.min(per_class.len())..];
    fg.iter().sum::<f64>() / fg.len().max(1) as f64
}

/// Unweighted per-class mean across subjects, accumulated in the given
/// order.
pub fn mean_dice(vectors: &[DiceVector]) -> Vec<f64> {
    let Some(first) = vectors.first() else {
        return Vec::new();
    };
    let mut out = vec![0.0; first.values.len()];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(&v.values) {
            *o += x;
        }
    }
    out.iter().map(|s| s / vectors.len() as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCell {
    /// Per-class Dice averaged over test subjects.
    pub dice: Vec<f64>,
    pub subjects: usize,
    /// Per class, how many subjects hit the both-empty case.
    pub both_empty: Vec<usize>,
}

impl MatrixCell {
    pub fn from_subjects(vectors: &[DiceVector]) -> Self {
        let c = vectors.first().map_or(0, |v| v.values.len());
        let both_empty = (0..c)
            .map(|k| {
                vectors
                    .iter()
                    .filter(|v| v.flags[k] == DiceFlag::BothEmpty)
                    .count()
            })
            .collect();
        Self {
            dice: mean_dice(vectors),
            subjects: vectors.len(),
            both_empty,
        }
    }

    pub fn foreground_mean(&self) -> f64 {
        foreground_mean(&self.dice)
    }
}

/// Dice for every (model, test condition) pair. `None` marks a skipped cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessMatrix {
    pub models: Vec<String>,
    pub conditions: Vec<String>,
    pub num_classes: usize,
    /// `cells[model][condition]`.
    pub cells: Vec<Vec<Option<MatrixCell>>>,
}

impl RobustnessMatrix {
    pub fn new(models: Vec<String>, conditions: Vec<String>, num_classes: usize) -> Self {
        let cells = vec![vec![None; conditions.len()]; models.len()];
        Self {
            models,
            conditions,
            num_classes,
            cells,
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.models.len(), self.conditions.len(), self.num_classes)
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m == name)
    }

    pub fn condition_index(&self, name: &str) -> Option<usize> {
        self.conditions.iter().position(|c| c == name)
    }

    pub fn set_row(&mut self, model: usize, row: Vec<Option<MatrixCell>>) {
        self.cells[model] = row;
    }

    pub fn cell(&self, model: &str, condition: &str) -> Option<&MatrixCell> {
        let m = self.model_index(model)?;
        let c = self.condition_index(condition)?;
        self.cells[m][c].as_ref()
    }

    /// Foreground-mean Dice of one cell.
    pub fn foreground(&self, model: &str, condition: &str) -> Option<f64> {
        self.cell(model, condition).map(MatrixCell::foreground_mean)
    }

    /// First skipped cell, if any.
    pub fn first_missing(&self) -> Option<(String, String)> {
        for (m, row) in self.cells.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                if cell.is_none() {
                    return Some((self.models[m].clone(), self.conditions[c].clone()));
                }
            }
        }
        None
    }

    pub fn is_complete(&self) -> bool {
        self.first_missing().is_none()
    }
}

/// Name of a condition directory: its `dataset.json` name, else the
/// directory name.
pub fn condition_name(dir: &Path) -> String {
    crate::dataset::read_json::<serde_json::Value>(&dir.join(DATASET_MANIFEST))
        .ok()
        .and_then(|v| v.get("name").and_then(|n| n.as_str()).map(str::to_string))
        .unwrap_or_else(|| {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
}

/// Per-subject Dice vectors on the test split of `dir`, in subject-id
/// order. Every model in `models` is scored against the same features.
pub fn evaluate_condition(models: &[&ModelParams], dir: &Path) -> Result<Vec<Vec<DiceVector>>> {
    let manifest = CohortManifest::load(dir)?;
    let test = manifest.split(Split::Test);
    if test.is_empty() {
        return Err(Error::Dataset(format!(
            "{} has no test-split subjects",
            dir.display()
        )));
    }
    let mut per_model: Vec<Vec<DiceVector>> = vec![Vec::new(); models.len()];
    for subject in test {
        let vol = load_volume(dir.join(&subject.volume))?;
        let gt_path = dir.join(&subject.labels);
        if !gt_path.exists() {
            return Err(Error::Dataset(format!(
                "missing ground truth {}",
                gt_path.display()
            )));
        }
        let gt = load_labelmap(&gt_path, Some(manifest.num_classes))?;
        // Models sharing a recipe share one feature extraction.
        let mut cache: Vec<(usize, crate::segmenter::FeatureMatrix)> = Vec::new();
        for (m, model) in models.iter().enumerate() {
            model.validate()?;
            if model.num_classes != manifest.num_classes {
                return Err(Error::ClassCountMismatch {
                    left: model.num_classes,
                    right: manifest.num_classes,
                });
            }
            let hit = cache
                .iter()
                .position(|(owner, _)| models[*owner].recipe == model.recipe);
            let idx = match hit {
                Some(i) => i,
                None => {
                    cache.push((m, extract_features(&vol, &model.recipe)?));
                    cache.len() - 1
                }
            };
            let pred = predict_features(model, &cache[idx].1, vol.dims())?;
            per_model[m].push(dice_per_class(&pred, &gt)?);
        }
    }
    Ok(per_model)
}

/// One matrix row: for each condition directory, the per-class Dice
/// averaged over its test subjects.
pub fn evaluate_model(model: &ModelParams, conditions: &[&Path]) -> Result<Vec<(String, MatrixCell)>> {
    conditions
        .iter()
        .map(|dir| {
            let vectors = evaluate_condition(&[model], dir)?.remove(0);
            Ok((condition_name(dir), MatrixCell::from_subjects(&vectors)))
        })
        .collect()
}
