//! Leave-one-patient-out cross-validation: every fold retrains from
//! scratch on the remaining patients and scores the held-out one.

use std::collections::HashMap;
use std::path::PathBuf;

use apnea_core::nn::Model;
use apnea_core::scoring::loocv;
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
    /// Directory for folds.csv and config.toml.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    ecg_rate_hz: Option<usize>,
    #[arg(long)]
    output_len: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    crate::train::apply_model_overrides(&mut cfg, &args.variant, &args.ecg_rate_hz, &args.output_len);
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
        cfg.train.max_epochs = cfg.train.max_epochs.max(e);
    }
    let spec = cfg.model_spec()?;
    let train_cfg = cfg.train_config();
    train_cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let tau = cfg.report_config()?.tau;

    let groups =
        data::preprocess_patients(&args.input, &cfg.bandpass_spec(), cfg.windowing.window_s)?;
    for (id, instances) in &groups {
        if instances.is_empty() {
            return Err(CliError::Runtime(format!(
                "{id} has no windows with signal; cross-validation needs every patient scorable"
            )));
        }
    }
    let by_id: HashMap<&str, &Vec<_>> = groups.iter().map(|(id, v)| (id.as_str(), v)).collect();
    let ids: Vec<String> = groups.iter().map(|(id, _)| id.clone()).collect();

    let outcome = loocv(&ids, &mut |held, train_ids| {
        let train_set: Vec<_> = train_ids
            .iter()
            .flat_map(|id| by_id[id.as_str()].iter().cloned())
            .collect();
        let held_set = by_id[held];
        let mut model = Model::new(spec.clone(), cfg.seed)?;
        train(&mut model, &train_set, held_set, &train_cfg)?;
        let scores = eval_scores(&mut model, held_set, train_cfg.batch_size)?;
        let probs = post::window_probs(&scores);
        Ok(post::flatten(held_set, &probs, tau))
    })
    .map_err(data::runtime)?;

    let mut csv = String::from("patient_id,elements,tp,fp,tn,fn,accuracy,f1\n");
    for fold in &outcome.folds {
        let m = &fold.metrics;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fold.held_out,
            m.total(),
            m.true_pos,
            m.false_pos,
            m.true_neg,
            m.false_neg,
            m.accuracy,
            m.f1
        ));
        println!(
            "fold {}: accuracy {:.3}, f1 {:.3} over {} elements",
            fold.held_out,
            m.accuracy,
            m.f1,
            m.total()
        );
    }
    let p = &outcome.pooled;
    csv.push_str(&format!(
        "pooled,{},{},{},{},{},{},{}\n",
        p.total(), p.true_pos, p.false_pos, p.true_neg, p.false_neg, p.accuracy, p.f1
    ));

    data::ensure_dir(&args.output)?;
    data::write_text(&args.output.join("folds.csv"), &csv)?;
    cfg.write_resolved(&args.output)?;
    println!(
        "pooled over {} folds: accuracy {:.3}, f1 {:.3}",
        outcome.folds.len(),
        p.accuracy,
        p.f1
    );
    Ok(())
}
