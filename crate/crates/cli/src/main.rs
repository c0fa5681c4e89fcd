use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use texbias_core::dataset;
use texbias_core::filters::{corrupt_dataset, NoiseSpec};
use texbias_core::harness::{
    emit_report, export_slice, run_experiment, ExperimentConfig, ReportFormat, RunOptions,
    SliceAxis, SliceSource,
};
use texbias_core::metrics::{dice_per_class, evaluate_model, RobustnessMatrix};
use texbias_core::phantom::{generate_cohort, PhantomSpec};
use texbias_core::segmenter::{predict, train, ModelParams, TrainConfig};
use texbias_core::volume::{
    load_labelmap, load_volume, normalize_zmuv, save_labelmap, save_volume, VolumeFormat,
};
use texbias_core::Error;

#[derive(Parser, Debug)]
#[command(name = "texbias", version, about = "Textural-corruption robustness experiments on 3D volumes")]
struct Cli {
    /// Master seed (phantom cohorts, salt-and-pepper, training, `run`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Reuse stage outputs whose manifests verify.
    #[arg(long, global = true)]
    resume: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FilterKind {
    Identity,
    Gaussian,
    Median,
    Snp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    Axial,
    Coronal,
    Sagittal,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic phantom cohort.
    Phantom {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, value_delimiter = ',', default_values_t = [64, 64, 64])]
        size: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corrupt every volume of a dataset directory.
    Corrupt {
        #[arg(long, value_enum)]
        filter: FilterKind,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        prob: Option<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Zero-mean, unit-variance normalization of one volume.
    Normalize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the reference segmenter on a dataset combination.
    Train {
        /// JSON training config (`{"datasets": [...], ...}`).
        #[arg(long)]
        config: PathBuf,
        /// Directory holding one subdirectory per dataset.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one volume.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class Dice between two label maps.
    Dice {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        classes: Option<usize>,
    },
    /// Score one model on the test split of each condition directory.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 1.., required = true)]
        conditions: Vec<PathBuf>,
    },
    /// Run the full experiment grid.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config's output root.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a saved matrix as CSV or Markdown.
    Report {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Md)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export one slice of a volume or label map as PNG.
    Slice {
        #[arg(long = "in")]
        input: PathBuf,
        /// Treat the input as a label map.
        #[arg(long)]
        labels: bool,
        #[arg(long, value_enum, default_value_t = Axis::Axial)]
        axis: Axis,
        #[arg(long)]
        index: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Phantom {
            count,
            size,
            classes,
            out,
        } => {
            let [x, y, z] = size[..] else {
                bail!("--size takes three comma-separated extents, e.g. 64,64,64");
            };
            let spec = PhantomSpec {
                dims: [x, y, z],
                ..PhantomSpec::with_classes(classes)
            };
            let m = generate_cohort(count, &spec, seed, &out)?;
            let retries: u32 = m.subjects.iter().map(|s| s.retries).sum();
            eprintln!(
                "wrote {} subjects to {} ({} regeneration retries)",
                m.subjects.len(),
                out.display(),
                retries
            );
        }
        Command::Corrupt {
            filter,
            sigma,
            size,
            prob,
            input,
            out,
        } => {
            let spec = match filter {
                FilterKind::Identity => NoiseSpec::Identity,
                FilterKind::Gaussian => NoiseSpec::Gaussian {
                    sigma: sigma.context("--filter gaussian needs --sigma")?,
                },
                FilterKind::Median => NoiseSpec::Median {
                    size: size.context("--filter median needs --size")?,
                },
                FilterKind::Snp => NoiseSpec::salt_pepper(prob.context("--filter snp needs --prob")?, seed),
            };
            let n = corrupt_dataset(&input, &spec, &out)?;
            eprintln!("{}: corrupted {n} volumes into {}", spec.name(), out.display());
        }
        Command::Normalize { input, out } => {
            let v = normalize_zmuv(&load_volume(&input)?)?;
            save_volume(&v, &out, VolumeFormat::from_path(&out))?;
        }
        Command::Train { config, data, out } => {
            let mut tc: TrainConfig = dataset::read_json(&config)?;
            if let Some(s) = cli.seed {
                tc.seed = s;
            }
            let model = train(&tc, &data)?;
            model.save(&out)?;
            eprintln!(
                "trained on {:?}: sample accuracy {:.4}, epoch losses {:?}",
                model.metadata.datasets, model.metadata.sample_accuracy, model.metadata.epoch_losses
            );
        }
        Command::Predict { model, input, out } => {
            let model = ModelParams::load(&model)?;
            let seg = predict(&model, &load_volume(&input)?)?;
            save_labelmap(&seg, &out)?;
        }
        Command::Dice { pred, gt, classes } => {
            let gt = load_labelmap(&gt, classes)?;
            let pred = load_labelmap(&pred, Some(classes.unwrap_or(gt.num_classes())))?;
            let d = dice_per_class(&pred, &gt)?;
            println!("{}", serde_json::to_string_pretty(&d)?);
        }
        Command::Evaluate { model, conditions } => {
            let model = ModelParams::load(&model)?;
            let dirs: Vec<&Path> = conditions.iter().map(PathBuf::as_path).collect();
            let row = evaluate_model(&model, &dirs)?;
            println!("condition,{}", (1..=model.num_classes).map(|k| format!("class_{k}")).collect::<Vec<_>>().join(","));
            for (name, cell) in row {
                let vals: Vec<String> = cell.dice.iter().map(|v| format!("{v:.4}")).collect();
                println!("{name},{}", vals.join(","));
            }
        }
        Command::Run { config, out } => {
            let mut cfg: ExperimentConfig = match &config {
                Some(p) => dataset::read_json(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.output = o;
            }
            let matrix = run_experiment(&cfg, RunOptions { resume: cli.resume })?;
            eprintln!(
                "{} models x {} conditions written to {}",
                matrix.models.len(),
                matrix.conditions.len(),
                cfg.output.display()
            );
        }
        Command::Report {
            matrix,
            format,
            out,
        } => {
            let m: RobustnessMatrix = dataset::read_json(&matrix)?;
            let format = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Md => ReportFormat::Markdown,
            };
            write_output(out.as_deref(), &emit_report(&m, format)?)?;
        }
        Command::Slice {
            input,
            labels,
            axis,
            index,
            out,
        } => {
            let axis = match axis {
                Axis::Axial => SliceAxis::Axial,
                Axis::Coronal => SliceAxis::Coronal,
                Axis::Sagittal => SliceAxis::Sagittal,
            };
            let fixed = match axis {
                SliceAxis::Axial => 2,
                SliceAxis::Coronal => 1,
                SliceAxis::Sagittal => 0,
            };
            if labels {
                let lm = load_labelmap(&input, None)?;
                let index = index.unwrap_or(lm.dims()[fixed] / 2);
                export_slice(&SliceSource::Labels(&lm), axis, index, &out)?;
            } else {
                let v = load_volume(&input)?;
                let index = index.unwrap_or(v.dims()[fixed] / 2);
                export_slice(&SliceSource::Volume(&v), axis, index, &out)?;
            }
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Stage { .. }) | Some(Error::Io { .. }) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be positive");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

