//! Detection quality as a function of training-set size: a fixed
//! validation holdout, then repeated training on random patient subsets
//! at each fraction.

use std::path::PathBuf;

use apnea_core::nn::Model;
use apnea_core::scoring::{confusion_metrics, training_fraction_sweep};
use apnea_core::train::{eval_scores, train};

use crate::config::RunConfig;
use crate::data;
use crate::post;
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Dataset directory of native channel files.
    #[arg(long)]
    input: PathBuf,
    /// Directory for sweep.csv and config.toml.
    #[arg(long)]
    output: PathBuf,
    /// Training-set fractions to sample.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 0.75, 1.0])]
    fractions: Vec<f64>,
    /// Training runs per fraction.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
        cfg.train.max_epochs = cfg.train.max_epochs.max(e);
    }
    let spec = cfg.model_spec()?;
    let base_train_cfg = cfg.train_config();
    base_train_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let tau = cfg.report_config()?.tau;

    let groups =
        data::preprocess_patients(&args.input, &cfg.bandpass_spec(), cfg.windowing.window_s)?;
    let (pool, val_set) =
        data::split_groups(groups.clone(), cfg.train.n_validation_patients, cfg.seed)?;
    if val_set.is_empty() {
        return Err(CliError::Runtime("validation holdout has no windows".into()));
    }
    let pool_ids: Vec<String> = {
        let val_patients: std::collections::HashSet<&str> =
            val_set.iter().map(|w| w.patient_id.as_str()).collect();
        let mut ids: Vec<String> = groups
            .iter()
            .map(|(id, _)| id.clone())
            .filter(|id| !val_patients.contains(id.as_str()))
            .collect();
        ids.sort();
        ids
    };
    drop(pool);

    let outcome = training_fraction_sweep(
        &pool_ids,
        &args.fractions,
        args.repeats,
        cfg.seed,
        &mut |subset, repeat_seed| {
            let train_set: Vec<_> = groups
                .iter()
                .filter(|(id, _)| subset.contains(id))
                .flat_map(|(_, v)| v.iter().cloned())
                .collect();
            let mut train_cfg = base_train_cfg.clone();
            train_cfg.seed = repeat_seed;
            let mut model = Model::new(spec.clone(), repeat_seed)?;
            train(&mut model, &train_set, &val_set, &train_cfg)?;
            let scores = eval_scores(&mut model, &val_set, train_cfg.batch_size)?;
            let probs = post::window_probs(&scores);
            let (pred, truth) = post::flatten(&val_set, &probs, tau);
            Ok(confusion_metrics(&pred, &truth)?.f1)
        },
    )
    .map_err(data::runtime)?;

    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    let mut csv = String::from("fraction,n_patients,repeat,f1\n");
    let mut summary = String::from("fraction,n_patients,mean_f1,sd_f1\n");
    for point in &outcome.points {
        for (i, score) in point.scores.iter().enumerate() {
            csv.push_str(&format!("{},{},{},{}\n", point.fraction, point.n_patients, i, score));
        }
        summary.push_str(&format!(
            "{},{},{},{}\n",
            point.fraction, point.n_patients, point.mean, point.sd
        ));
        println!(
            "fraction {:.2}: {} patients, f1 {:.3} +- {:.3} over {} repeats",
            point.fraction,
            point.n_patients,
            point.mean,
            point.sd,
            point.scores.len()
        );
    }

    data::ensure_dir(&args.output)?;
    data::write_text(&args.output.join("sweep.csv"), &csv)?;
    data::write_text(&args.output.join("sweep_summary.csv"), &summary)?;
    cfg.write_resolved(&args.output)?;
    Ok(())
}
