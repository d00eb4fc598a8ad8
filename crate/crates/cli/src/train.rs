//! Trains a detector on cached windows and writes the checkpoint plus the
//! per-epoch history.

use std::path::PathBuf;

use apnea_core::nn::{checkpoint, Model};
use apnea_core::train::{train, write_history_csv};

use crate::config::RunConfig;
use crate::data::{self, runtime};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory of *.windows.bin caches.
    #[arg(long)]
    data: PathBuf,
    /// Directory for model.ckpt, history.csv, and config.toml.
    #[arg(long)]
    output: PathBuf,
    /// Model variant override.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    ecg_rate_hz: Option<usize>,
    #[arg(long)]
    output_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Patients held out for validation metrics.
    #[arg(long)]
    n_validation: Option<usize>,
}

pub fn apply_model_overrides(
    cfg: &mut RunConfig,
    variant: &Option<String>,
    rate: &Option<usize>,
    output_len: &Option<usize>,
) {
    if let Some(v) = variant {
        cfg.model.variant = v.clone();
    }
    if let Some(r) = rate {
        cfg.model.ecg_rate_hz = *r;
    }
    if let Some(o) = output_len {
        cfg.model.output_len = *o;
    }
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    apply_model_overrides(&mut cfg, &args.variant, &args.ecg_rate_hz, &args.output_len);
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
        cfg.train.max_epochs = cfg.train.max_epochs.max(e);
    }
    if let Some(b) = args.batch_size {
        cfg.train.batch_size = b;
    }
    if let Some(n) = args.n_validation {
        cfg.train.n_validation_patients = n;
    }

    let spec = cfg.model_spec()?;
    let train_cfg = cfg.train_config();
    train_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;

    let mut groups = data::load_windows_dir(&args.data, cfg.windowing.window_s)?;
    groups.retain(|(id, instances)| {
        if instances.is_empty() {
            eprintln!("warning: {id} has no windows with signal, excluded");
            false
        } else {
            true
        }
    });
    let (train_set, val_set) =
        data::split_groups(groups, cfg.train.n_validation_patients, cfg.seed)?;
    println!(
        "training {} on {} windows, validating on {}",
        spec.variant.as_str(),
        train_set.len(),
        val_set.len()
    );

    let mut model = Model::new(spec, cfg.seed).map_err(runtime)?;
    let history = train(&mut model, &train_set, &val_set, &train_cfg).map_err(runtime)?;

    data::ensure_dir(&args.output)?;
    write_history_csv(&history, &args.output.join("history.csv")).map_err(runtime)?;
    checkpoint::save(&mut model, &args.output.join("model.ckpt")).map_err(runtime)?;
    cfg.write_resolved(&args.output)?;

    if let Some(last) = history.last() {
        println!(
            "epoch {}: loss {:.4}, val F1 {:.3}, val AUC {:.3}",
            last.epoch, last.train_loss, last.val_f1, last.val_auc
        );
    }
    println!("checkpoint written to {}", args.output.join("model.ckpt").display());
    Ok(())
}
