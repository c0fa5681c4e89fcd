use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::segmenter::FeatureRecipe;

/// Test conditions in report order.
pub const DEFAULT_CONDITIONS: [&str; 16] = [
    "t2norm", "gaus1", "gaus2", "gaus3", "gaus4", "gaus5", "snp01", "snp03", "snp05", "snp07",
    "snp10", "snp15", "snp20", "median2", "median5", "median8",
];

/// Corruption settings never used by any default training combination.
pub const UNSEEN_CONDITIONS: [&str; 8] = [
    "gaus2", "gaus5", "snp03", "snp07", "snp15", "snp20", "median2", "median8",
];

/// Model names and their training combinations.
pub const DEFAULT_MODELS: [(&str, &[&str]); 11] = [
    ("MODEL_T2Norm", &["t2norm"]),
    ("MODEL_GAUS1", &["gaus1"]),
    ("MODEL_GAUS3", &["gaus3"]),
    ("MODEL_GAUS4", &["gaus4"]),
    ("MODEL_GAUS134", &["gaus1", "gaus3", "gaus4"]),
    ("MODEL_SNP01", &["snp01"]),
    ("MODEL_SNP05", &["snp05"]),
    ("MODEL_SNP10", &["snp10"]),
    ("MODEL_SNP010510", &["snp01", "snp05", "snp10"]),
    (
        "MODEL_GAUS134_SNP010510",
        &["gaus1", "gaus3", "gaus4", "snp01", "snp05", "snp10"],
    ),
    ("MODEL_MEDIAN5", &["median5"]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub datasets: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum CohortSource {
    /// Synthetic phantoms seeded with the master seed.
    Generate {
        count: usize,
        dims: [usize; 3],
        num_classes: usize,
    },
    /// An existing dataset directory with a `cohort.json` split manifest.
    Existing { path: PathBuf },
}

impl Default for CohortSource {
    fn default() -> Self {
        CohortSource::Generate {
            count: 20,
            dims: [64, 64, 64],
            num_classes: 10,
        }
    }
}

fn d_lr() -> f64 {
    0.05
}
/// More epochs than a one-off `train` call: the grid's single-dataset
/// models are still clearly improving after five passes, while the mixed
/// ones see several times as many samples per epoch.
pub const GRID_EPOCHS: usize = 20;

fn d_epochs() -> usize {
    GRID_EPOCHS
}
fn d_batch() -> usize {
    256
}
fn d_spv() -> usize {
    4096
}
fn d_l2() -> f64 {
    1e-4
}

/// Hyperparameters shared by every model in the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    #[serde(default = "d_lr")]
    pub learning_rate: f64,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_spv")]
    pub samples_per_volume: usize,
    #[serde(default = "d_l2")]
    pub l2: f64,
    #[serde(default)]
    pub recipe: FeatureRecipe,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            learning_rate: d_lr(),
            epochs: d_epochs(),
            batch_size: d_batch(),
            samples_per_volume: d_spv(),
            l2: d_l2(),
            recipe: FeatureRecipe::default(),
        }
    }
}

fn default_conditions() -> Vec<String> {
    DEFAULT_CONDITIONS.iter().map(|s| s.to_string()).collect()
}

pub fn default_models() -> Vec<ModelSpec> {
    DEFAULT_MODELS
        .iter()
        .map(|(name, data)| ModelSpec {
            name: name.to_string(),
            datasets: data.iter().map(|s| s.to_string()).collect(),
        })
        .collect()
}

fn default_output() -> PathBuf {
    PathBuf::from("experiment-out")
}

/// `experiment.json`. Every field is optional; omitted fields take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub cohort: CohortSource,
    #[serde(default = "default_conditions")]
    pub conditions: Vec<String>,
    #[serde(default = "default_models")]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cohort: CohortSource::default(),
            conditions: default_conditions(),
            models: default_models(),
            train: TrainSettings::default(),
            seed: 0,
            output: default_output(),
        }
    }
}

impl ExperimentConfig {
    /// Every dataset that must be materialized: test conditions first, then
    /// any training-only datasets, without duplicates.
    pub fn required_datasets(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let all = self
            .conditions
            .iter()
            .chain(self.models.iter().flat_map(|m| m.datasets.iter()));
        for name in all {
            if !out.contains(name) {
                out.push(name.clone());
            }
        }
        out
    }

    pub fn model(&self, name: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.name == name)
    }
}
