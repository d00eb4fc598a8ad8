//! Generates a synthetic cohort with known events: pulse-train ECG with
//! amplitude dips during events plus matching SpO2 desaturations.

use std::path::PathBuf;

use apnea_core::dataset::io::{write_annotations, write_channel};
use apnea_core::synth::synth_cohort;

use crate::config::RunConfig;
use crate::data::{self, runtime};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory for the generated channel files.
    #[arg(long)]
    output: PathBuf,
    /// Number of patients.
    #[arg(long)]
    patients: Option<usize>,
    /// Length of each recording in seconds.
    #[arg(long)]
    duration_s: Option<usize>,
    /// Mean events per hour.
    #[arg(long)]
    event_rate_per_hour: Option<f64>,
}

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    if let Some(n) = args.patients {
        cfg.synth.patients = n;
    }
    if let Some(d) = args.duration_s {
        cfg.synth.duration_s = d;
    }
    if let Some(r) = args.event_rate_per_hour {
        cfg.synth.event_rate_per_hour = r;
    }

    let cohort = synth_cohort(cfg.synth.patients, &cfg.synth_config())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    data::ensure_dir(&args.output)?;
    for rec in &cohort {
        let id = &rec.patient_id;
        write_channel(&rec.ecg, &data::channel_path(&args.output, id, data::ECG_SUFFIX))
            .map_err(runtime)?;
        if let Some(spo2) = &rec.spo2 {
            write_channel(spo2, &data::channel_path(&args.output, id, data::SPO2_SUFFIX))
                .map_err(runtime)?;
        }
        write_annotations(id, &rec.events, &data::channel_path(&args.output, id, data::EVENTS_SUFFIX))
            .map_err(runtime)?;
        println!(
            "generated {id}: {} s, {} events",
            cfg.synth.duration_s,
            rec.events.len()
        );
    }
    cfg.write_resolved(&args.output)?;
    Ok(())
}
