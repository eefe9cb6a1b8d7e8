//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or file
//! error, 3 numeric failure (non-finite loss, failed gradient check).

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::data::{load_image, load_samples, scan_dataset, split_dataset, synth_dataset, ScannedDataset};
use crate::error::{Error, Result};
use crate::layers::softmax;
use crate::model::verify::run_suite;
use crate::model::{build_model, load_checkpoint, Preset, NUM_CLASSES};
use crate::tensor::argmax;
use crate::train::{evaluate, run_training, TrainConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lungnet", version, about = "Train and run a 4-class chest CT CNN classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Arch {
    Paper,
    Tiny,
}

impl From<Arch> for Preset {
    fn from(a: Arch) -> Self {
        match a {
            Arch::Paper => Preset::Paper,
            Arch::Tiny => Preset::Tiny,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Subset {
    Train,
    Val,
    All,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the layer table and parameter totals.
    Summary {
        #[arg(long, value_enum, default_value = "paper")]
        arch: Arch,
    },
    /// Train on a directory-per-class dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "paper")]
        arch: Arch,
        #[arg(long, default_value_t = 32)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 0.001)]
        lr: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value = "model.cnck")]
        out: PathBuf,
        #[arg(long, default_value = "metrics.csv")]
        metrics: PathBuf,
        /// Record wall-clock seconds per epoch (makes output run-dependent).
        #[arg(long)]
        timing: bool,
    },
    /// Report loss and accuracy of a checkpoint on a dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, value_enum, default_value = "val")]
        subset: Subset,
    },
    /// Classify a single image.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Run the finite-difference gradient verification suite.
    Gradcheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Write a synthetic 4-class CTT1 dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "per-class")]
        per_class: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 64, value_parser = parse_size)]
        size: usize,
    },
}

fn parse_size(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(n @ (64 | 350)) => Ok(n),
        _ => Err(format!("size must be 64 or 350, got {s:?}")),
    }
}

/// Failure of a command, carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            Error::Numeric(_) => EXIT_NUMERIC,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: format!("write failed: {e}"),
        }
    }
}

type CmdResult = std::result::Result<(), Failure>;

/// Parses `args` (program name first) and runs the chosen subcommand.
pub fn run<I, A>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match cli.command {
        Command::Summary { arch } => summary(arch.into(), out),
        Command::Train {
            data,
            arch,
            epochs,
            batch,
            lr,
            seed,
            split,
            out: checkpoint,
            metrics,
            timing,
        } => {
            let config = TrainConfig {
                epochs,
                batch_size: batch,
                lr,
                seed,
                split_ratio: split,
                preset: arch.into(),
                checkpoint_path: Some(checkpoint),
                metrics_path: Some(metrics),
                record_time: timing,
            };
            train(&data, &config, out, err)
        }
        Command::Eval {
            model,
            data,
            seed,
            split,
            subset,
        } => eval(&model, &data, seed, split, subset, out, err),
        Command::Predict { model, image } => predict(&model, &image, out),
        Command::Gradcheck { seed } => gradcheck(seed, out),
        Command::Synth {
            out: dir,
            per_class,
            seed,
            size,
        } => synth(&dir, per_class, seed, size, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn summary(preset: Preset, out: &mut dyn Write) -> CmdResult {
    let model = build_model::<f32>(preset, 0)?;
    write!(out, "{}", model.summary())?;
    Ok(())
}

fn scan(data: &Path, err: &mut dyn Write) -> Result<ScannedDataset> {
    let scanned = scan_dataset(data)?;
    for class in &scanned.empty_classes {
        let _ = writeln!(err, "warning: class {class:?} has no sample files");
    }
    if scanned.classes.len() != NUM_CLASSES {
        return Err(Error::Dimension(format!(
            "dataset has {} classes, the model predicts {NUM_CLASSES}",
            scanned.classes.len()
        )));
    }
    Ok(scanned)
}

fn train(data: &Path, config: &TrainConfig, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    config.validate()?;
    let scanned = scan(data, err)?;
    let split = split_dataset(&scanned.entries, config.split_ratio, config.seed)?;
    let size = config.preset.input_shape()[0];
    let samples = crate::data::DatasetSplit {
        train: load_samples(&split.train, size)?,
        val: load_samples(&split.val, size)?,
        seed: split.seed,
    };
    writeln!(
        out,
        "{} samples in {} classes: {} train / {} val",
        scanned.entries.len(),
        scanned.classes.len(),
        samples.train.len(),
        samples.val.len()
    )?;
    let mut model = build_model::<f32>(config.preset, config.seed)?;
    let mut write_err = None;
    let outcome = run_training(&mut model, &samples, scanned.classes.names(), config, |m, improved| {
        let mut line = format!(
            "epoch {}/{} train_loss={:.6} train_acc={:.6} val_loss={:.6} val_acc={:.6}",
            m.epoch, config.epochs, m.train_loss, m.train_acc, m.val_loss, m.val_acc
        );
        if config.record_time {
            line.push_str(&format!(" elapsed_s={:.3}", m.elapsed_s));
        }
        if improved {
            line.push_str(" (best, saved)");
        }
        if let Err(e) = writeln!(out, "{line}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    writeln!(
        out,
        "best val_acc={:.6} at epoch {}",
        outcome.best.val_acc, outcome.best.epoch
    )?;
    Ok(())
}

fn eval(
    model_path: &Path,
    data: &Path,
    seed: u64,
    ratio: f64,
    subset: Subset,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    let ck = load_checkpoint(model_path)?;
    let scanned = scan(data, err)?;
    if !ck.classes.is_empty() && ck.classes != scanned.classes.names() {
        return Err(Error::Dimension(format!(
            "checkpoint classes {:?} differ from dataset classes {:?}",
            ck.classes,
            scanned.classes.names()
        ))
        .into());
    }
    let entries = match subset {
        Subset::All => scanned.entries,
        Subset::Train => split_dataset(&scanned.entries, ratio, seed)?.train,
        Subset::Val => split_dataset(&scanned.entries, ratio, seed)?.val,
    };
    let samples = load_samples(&entries, ck.model.input_shape()[0])?;
    let (loss, acc) = evaluate(&ck.model, &samples)?;
    writeln!(out, "samples={}", samples.len())?;
    writeln!(out, "loss={loss:.6}")?;
    writeln!(out, "accuracy={acc:.6}")?;
    Ok(())
}

fn predict(model_path: &Path, image: &Path, out: &mut dyn Write) -> CmdResult {
    let ck = load_checkpoint(model_path)?;
    let x = load_image(image, ck.model.input_shape()[0])?;
    let logits = ck.model.infer(&x)?;
    let probs = softmax(&logits)?;
    let names: Vec<String> = if ck.classes.is_empty() {
        (0..probs.len()).map(|i| format!("class_{i}")).collect()
    } else {
        ck.classes
    };
    writeln!(out, "prediction: {}", names[argmax(&logits)?])?;
    for (name, p) in names.iter().zip(probs.data()) {
        writeln!(out, "{name}: {p:.6}")?;
    }
    Ok(())
}

fn gradcheck(seed: u64, out: &mut dyn Write) -> CmdResult {
    let entries = run_suite(seed)?;
    let mut failures = 0;
    for e in &entries {
        let r = &e.report;
        let verdict = if e.ok() { "PASS" } else { "FAIL" };
        let expectation = match (e.expect_pass, r.pass) {
            (true, _) => "",
            (false, false) => " [mutation rejected]",
            (false, true) => " [mutation NOT rejected]",
        };
        writeln!(
            out,
            "{verdict} {}: max_rel_err={:.3e} tol={:.0e} checked={} skipped={}{expectation}",
            r.name, r.max_rel_err, r.tolerance, r.checked, r.skipped
        )?;
        if !e.ok() {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("{failures} gradient check(s) failed"),
        });
    }
    writeln!(out, "all {} checks passed", entries.len())?;
    Ok(())
}

fn synth(dir: &Path, per_class: usize, seed: u64, size: usize, out: &mut dyn Write) -> CmdResult {
    let files = synth_dataset(dir, per_class, seed, size)?;
    writeln!(out, "wrote {} files to {}", files.len(), dir.display())?;
    Ok(())
}
