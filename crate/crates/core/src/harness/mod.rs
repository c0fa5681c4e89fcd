//! Experiment orchestration: cohort, corrupted datasets, model grid,
//! evaluation grid, and reports.
//!
//! Output layout under `ExperimentConfig::output`:
//!
//! ```text
//! experiment.json        resolved configuration
//! cohort/                generated phantoms (unless an existing cohort is used)
//! datasets/<name>/       one directory per corruption, with dataset.json
//! models/<MODEL>.json    trained segmenters
//! reports/<MODEL>.csv    per-model tables
//! matrix.json            full robustness matrix
//! matrix.csv             all models, one row per (model, condition)
//! report.md              per-model Markdown tables
//! summary.json           headline numbers and timings
//! FAILED                 present only after a failed stage
//! ```

mod config;
mod report;
mod slice;

pub use config::{
    default_models, CohortSource, ExperimentConfig, ModelSpec, TrainSettings, DEFAULT_CONDITIONS,
    DEFAULT_MODELS, GRID_EPOCHS, UNSEEN_CONDITIONS,
};
pub use report::{emit_report, model_csv, parse_csv, ReportFormat, HIGHLIGHT_THRESHOLD, ROW_MARK};
pub use slice::{export_slice, render_slice, SliceAxis, SliceSource, PALETTE};

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{self, CohortManifest};
use crate::error::{Error, Result};
use crate::filters::{corrupt_dataset, DatasetManifest, NoiseSpec};
use crate::metrics::{evaluate_condition, MatrixCell, RobustnessMatrix};
use crate::phantom::{generate_cohort, PhantomSpec};
use crate::seed;
use crate::segmenter::{train, ModelParams, TrainConfig};

pub const FAILED_MARKER: &str = "FAILED";

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Skip stages whose outputs are present and verify.
    pub resume: bool,
}

/// Seed for the salt-and-pepper stream of dataset `name`.
pub fn dataset_seed(master: u64, name: &str) -> u64 {
    seed::derive(master, &[seed::tag("dataset"), seed::tag(name)])
}

/// Seed for training model `name`.
pub fn model_seed(master: u64, name: &str) -> u64 {
    seed::derive(master, &[seed::tag("model"), seed::tag(name)])
}

pub fn train_config(cfg: &ExperimentConfig, model: &ModelSpec) -> TrainConfig {
    TrainConfig {
        datasets: model.datasets.clone(),
        name: Some(model.name.clone()),
        learning_rate: cfg.train.learning_rate,
        epochs: cfg.train.epochs,
        batch_size: cfg.train.batch_size,
        samples_per_volume: cfg.train.samples_per_volume,
        seed: model_seed(cfg.seed, &model.name),
        l2: cfg.train.l2,
        recipe: cfg.train.recipe.clone(),
    }
}

pub fn validate_config(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.models.is_empty() || cfg.conditions.is_empty() {
        return Err(Error::InvalidParameter(
            "experiment needs at least one model and one condition".into(),
        ));
    }
    for name in cfg.required_datasets() {
        NoiseSpec::from_name(&name, 0)?;
    }
    for m in &cfg.models {
        train_config(cfg, m).validate()?;
    }
    let mut names: Vec<&str> = cfg.models.iter().map(|m| m.name.as_str()).collect();
    names.sort();
    names.dedup();
    if names.len() != cfg.models.len() {
        return Err(Error::InvalidParameter("duplicate model names".into()));
    }
    if let CohortSource::Generate {
        count,
        dims,
        num_classes,
    } = cfg.cohort
    {
        dataset::split_counts(count)?;
        PhantomSpec {
            dims,
            ..PhantomSpec::with_classes(num_classes)
        }
        .validate()?;
    }
    Ok(())
}

fn stage<T>(out: &Path, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {name}: start");
    let started = Instant::now();
    match f() {
        Ok(v) => {
            log::info!("stage {name}: done in {:.1}s", started.elapsed().as_secs_f64());
            Ok(v)
        }
        Err(e) => {
            let _ = fs::write(out.join(FAILED_MARKER), format!("stage: {name}\nerror: {e}\n"));
            Err(Error::Stage {
                stage: name.to_string(),
                source: Box::new(e),
            })
        }
    }
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    seed: u64,
    models: usize,
    conditions: usize,
    classes: usize,
    /// Foreground-mean Dice per model and condition.
    foreground: Vec<(&'a str, Vec<(&'a str, f64)>)>,
    stage_seconds: Vec<(&'static str, f64)>,
}

fn cohort_ready(dir: &Path) -> bool {
    match CohortManifest::load(dir) {
        Ok(m) => m
            .subjects
            .iter()
            .all(|s| dir.join(&s.volume).exists() && dir.join(&s.labels).exists()),
        Err(_) => false,
    }
}

/// Runs the whole grid and returns the robustness matrix. Deterministic in
/// the configuration (master seed included) regardless of thread count.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RobustnessMatrix> {
    validate_config(cfg)?;
    let out = cfg.output.clone();
    dataset::ensure_dir(&out)?;
    let _ = fs::remove_file(out.join(FAILED_MARKER));
    dataset::write_json(&out.join("experiment.json"), cfg)?;
    let mut timings: Vec<(&'static str, f64)> = Vec::new();

    // 1. cohort
    let t = Instant::now();
    let cohort_dir: PathBuf = stage(&out, "cohort", || match &cfg.cohort {
        CohortSource::Existing { path } => {
            CohortManifest::load(path)?;
            Ok(path.clone())
        }
        CohortSource::Generate {
            count,
            dims,
            num_classes,
        } => {
            let dir = out.join("cohort");
            if !(opts.resume && cohort_ready(&dir)) {
                let spec = PhantomSpec {
                    dims: *dims,
                    ..PhantomSpec::with_classes(*num_classes)
                };
                generate_cohort(*count, &spec, cfg.seed, &dir)?;
            }
            Ok(dir)
        }
    })?;
    let num_classes = CohortManifest::load(&cohort_dir)?.num_classes;
    timings.push(("cohort", t.elapsed().as_secs_f64()));

    // 2. corrupted datasets
    let t = Instant::now();
    let data_root = out.join("datasets");
    stage(&out, "corrupt", || {
        dataset::ensure_dir(&data_root)?;
        cfg.required_datasets()
            .par_iter()
            .try_for_each(|name| -> Result<()> {
                let spec = NoiseSpec::from_name(name, dataset_seed(cfg.seed, name))?;
                let dir = data_root.join(name);
                if opts.resume && DatasetManifest::verify(&dir, &spec) {
                    return Ok(());
                }
                corrupt_dataset(&cohort_dir, &spec, &dir)?;
                Ok(())
            })
    })?;
    timings.push(("corrupt", t.elapsed().as_secs_f64()));

    // 3. training
    let t = Instant::now();
    let model_dir = out.join("models");
    let models: Vec<ModelParams> = stage(&out, "train", || {
        dataset::ensure_dir(&model_dir)?;
        cfg.models
            .par_iter()
            .map(|m| -> Result<ModelParams> {
                let tc = train_config(cfg, m);
                let path = model_dir.join(format!("{}.json", m.name));
                if opts.resume {
                    if let Ok(existing) = ModelParams::load(&path) {
                        if existing.config == tc {
                            return Ok(existing);
                        }
                    }
                }
                let model = train(&tc, &data_root)?;
                model.save(&path)?;
                Ok(model)
            })
            .collect()
    })?;
    timings.push(("train", t.elapsed().as_secs_f64()));

    // 4. evaluation: one pass per condition scores every model
    let t = Instant::now();
    let matrix = stage(&out, "evaluate", || {
        let refs: Vec<&ModelParams> = models.iter().collect();
        let columns: Vec<Vec<MatrixCell>> = cfg
            .conditions
            .par_iter()
            .map(|c| -> Result<Vec<MatrixCell>> {
                let per_model = evaluate_condition(&refs, &data_root.join(c))?;
                Ok(per_model.iter().map(|v| MatrixCell::from_subjects(v)).collect())
            })
            .collect::<Result<_>>()?;
        let mut matrix = RobustnessMatrix::new(
            cfg.models.iter().map(|m| m.name.clone()).collect(),
            cfg.conditions.clone(),
            num_classes,
        );
        for (c, column) in columns.into_iter().enumerate() {
            for (m, cell) in column.into_iter().enumerate() {
                matrix.cells[m][c] = Some(cell);
            }
        }
        Ok(matrix)
    })?;
    timings.push(("evaluate", t.elapsed().as_secs_f64()));

    // 5. reports
    stage(&out, "report", || {
        dataset::write_json(&out.join("matrix.json"), &matrix)?;
        crate::volume::write_atomic(
            &out.join("matrix.csv"),
            emit_report(&matrix, ReportFormat::Csv)?.as_bytes(),
        )?;
        crate::volume::write_atomic(
            &out.join("report.md"),
            emit_report(&matrix, ReportFormat::Markdown)?.as_bytes(),
        )?;
        let reports = out.join("reports");
        dataset::ensure_dir(&reports)?;
        for (m, name) in matrix.models.iter().enumerate() {
            crate::volume::write_atomic(
                &reports.join(format!("{name}.csv")),
                model_csv(&matrix, m)?.as_bytes(),
            )?;
        }
        let summary = Summary {
            seed: cfg.seed,
            models: matrix.models.len(),
            conditions: matrix.conditions.len(),
            classes: matrix.num_classes,
            foreground: matrix
                .models
                .iter()
                .enumerate()
                .map(|(m, name)| {
                    (
                        name.as_str(),
                        matrix
                            .conditions
                            .iter()
                            .zip(&matrix.cells[m])
                            .map(|(c, cell)| {
                                (c.as_str(), cell.as_ref().map_or(f64::NAN, |x| x.foreground_mean()))
                            })
                            .collect(),
                    )
                })
                .collect(),
            stage_seconds: timings.clone(),
        };
        dataset::write_json(&out.join("summary.json"), &summary)
    })?;
    Ok(matrix)
}

/// Mean foreground Dice of `model` averaged over `conditions`.
pub fn mean_foreground(matrix: &RobustnessMatrix, model: &str, conditions: &[&str]) -> Option<f64> {
    let vals: Option<Vec<f64>> = conditions
        .iter()
        .map(|c| matrix.foreground(model, c))
        .collect();
    let vals = vals?;
    Some(vals.iter().sum::<f64>() / vals.len().max(1) as f64)
}
