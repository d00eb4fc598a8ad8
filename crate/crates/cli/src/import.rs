//! Converts a minute-labeled ECG text export (`<subject>.ecg.txt` at
//! 100 Hz plus `<subject>.apn.txt` with one A/N per minute) into native
//! channel and annotation files.

use std::path::PathBuf;

use apnea_core::dataset::apnea_ecg::import_apnea_ecg;
use apnea_core::dataset::io::{write_annotations, write_channel};
use apnea_core::dataset::{AnnotationEvent, EventKind};

use crate::config::RunConfig;
use crate::data::{self, runtime};
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory holding <subject>.ecg.txt / <subject>.apn.txt pairs.
    #[arg(long)]
    input: PathBuf,
    /// Directory for the native channel files.
    #[arg(long)]
    output: PathBuf,
    /// Overwrite previously imported patients.
    #[arg(long)]
    force: bool,
}

/// Each maximal run of labeled minutes becomes one annotation, so the
/// written events.csv carries the same truth as the source A/N column.
fn minute_run_events(labels: &[bool]) -> Vec<AnnotationEvent> {
    let mut events = Vec::new();
    let mut run_start = None;
    for (i, &flagged) in labels.iter().chain([&false]).enumerate() {
        match (flagged, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                let ev = AnnotationEvent::new(60.0 * s as f64, 60.0 * i as f64, EventKind::Unspecified)
                    .expect("minute bounds are finite and ordered");
                events.push(ev);
                run_start = None;
            }
            _ => {}
        }
    }
    events
}

pub fn run(args: Args, cfg: RunConfig) -> Result<(), CliError> {
    data::ensure_dir(&args.output)?;
    let existing = data::existing_patients(&args.output)?;
    if !existing.is_empty() && !args.force {
        return Err(CliError::Runtime(format!(
            "{} already holds {} imported patients ({}...); pass --force to overwrite",
            args.output.display(),
            existing.len(),
            existing[0]
        )));
    }

    let outcome = import_apnea_ecg(&args.input).map_err(runtime)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }

    let mut manifest = String::from("patient_id,split,minutes,events\n");
    for import in &outcome.recordings {
        let rec = &import.recording;
        let id = &rec.patient_id;
        write_channel(&rec.ecg, &data::channel_path(&args.output, id, data::ECG_SUFFIX))
            .map_err(runtime)?;
        if let Some(spo2) = &rec.spo2 {
            write_channel(spo2, &data::channel_path(&args.output, id, data::SPO2_SUFFIX))
                .map_err(runtime)?;
        }
        let events = match &rec.minute_labels {
            Some(labels) => minute_run_events(labels),
            None => rec.events.clone(),
        };
        write_annotations(id, &events, &data::channel_path(&args.output, id, data::EVENTS_SUFFIX))
            .map_err(runtime)?;

        let split = if import.official_test { "test" } else { "train" };
        let minutes = rec
            .minute_labels
            .as_ref()
            .map(Vec::len)
            .unwrap_or_else(|| rec.duration_s() as usize / 60);
        manifest.push_str(&format!("{id},{split},{minutes},{}\n", events.len()));
        println!("imported {id}: {split} split, {minutes} min, {} events", events.len());
    }
    data::write_text(&args.output.join("manifest.csv"), &manifest)?;
    cfg.write_resolved(&args.output)?;
    println!("{} patients into {}", outcome.recordings.len(), args.output.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::minute_run_events;

    #[test]
    fn consecutive_minutes_merge_and_trailing_runs_close() {
        let events = minute_run_events(&[false, true, true, false, true]);
        let spans: Vec<(f64, f64)> = events.iter().map(|e| (e.start_s, e.end_s)).collect();
        assert_eq!(spans, vec![(60.0, 180.0), (240.0, 300.0)]);
        assert!(minute_run_events(&[false, false]).is_empty());
    }
}
