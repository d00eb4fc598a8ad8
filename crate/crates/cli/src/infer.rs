//! Scores one recording with a trained detector: per-second scores,
//! detected events, and the AHI with its severity class.

use std::path::PathBuf;

use apnea_core::dataset::{build_windows, filter_null_windows, Recording};
use apnea_core::nn::checkpoint;
use apnea_core::scoring::{
    ahi_class, per_patient_report, render_timeline_svg, ScoredEvent, ScoredWindow,
};
use apnea_core::signal::butterworth_bandpass;
use apnea_core::train::eval_scores;

use crate::config::RunConfig;
use crate::data::{self, runtime};
use crate::post;
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Trained checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Dataset directory holding the recording.
    #[arg(long)]
    input: PathBuf,
    /// Patient to score.
    #[arg(long)]
    patient: String,
    /// Directory for scores.csv, events.csv, and config.toml.
    #[arg(long)]
    output: PathBuf,
    /// Also render timeline.svg with predicted and annotated events.
    #[arg(long)]
    timeline_svg: bool,
}

const SCORES_HEADER: &str = "second,score,prob,label_pred\n";
const EVENTS_HEADER: &str = "start_s,end_s\n";

pub fn run(args: Args, mut cfg: RunConfig) -> Result<(), CliError> {
    let mut model = checkpoint::load(&args.model).map_err(runtime)?;
    let spec = model.spec.clone();
    // The checkpoint is the authority on geometry; the config keeps only
    // filtering and scoring knobs.
    cfg.model.variant = spec.variant.as_str().to_string();
    cfg.model.ecg_rate_hz = spec.ecg_rate_hz;
    cfg.model.output_len = spec.output_len;
    cfg.windowing.window_s = spec.window_s;
    let report_cfg = cfg.report_config()?;

    let rec = data::load_patient_recording(&args.input, &args.patient)?;
    if rec.ecg.rate_hz != spec.ecg_rate_hz as f64 {
        return Err(CliError::Runtime(format!(
            "{} was recorded at {} Hz but the model expects {} Hz",
            args.patient, rec.ecg.rate_hz, spec.ecg_rate_hz
        )));
    }
    let truth_events: Vec<ScoredEvent> = rec
        .events
        .iter()
        .map(|e| ScoredEvent {
            start_s: e.start_s as usize,
            end_s: e.end_s.ceil() as usize,
        })
        .collect();
    let duration_s = rec.duration_s() as usize;

    let ecg = butterworth_bandpass(&rec.ecg, &cfg.bandpass_spec()).map_err(runtime)?;
    let rec = Recording { ecg, ..rec };
    let instances = filter_null_windows(build_windows(&rec, spec.window_s).map_err(runtime)?);

    data::ensure_dir(&args.output)?;
    cfg.write_resolved(&args.output)?;
    if instances.is_empty() {
        eprintln!(
            "warning: {} has no scorable {} s windows; writing empty outputs",
            args.patient, spec.window_s
        );
        data::write_text(&args.output.join("scores.csv"), SCORES_HEADER)?;
        data::write_text(&args.output.join("events.csv"), EVENTS_HEADER)?;
        return Ok(());
    }

    let scores = eval_scores(&mut model, &instances, cfg.train.batch_size).map_err(runtime)?;
    let probs = post::window_probs(&scores);

    let mut scores_csv = String::from(SCORES_HEADER);
    for ((inst, s), p) in instances.iter().zip(&scores).zip(&probs) {
        for (j, (&sv, &pv)) in s.iter().zip(p).enumerate() {
            let second = inst.target_start_s + if s.len() == 1 { 0 } else { j };
            scores_csv.push_str(&format!("{second},{sv},{pv},{}\n", (pv > report_cfg.tau) as u8));
        }
    }
    data::write_text(&args.output.join("scores.csv"), &scores_csv)?;

    let hours = instances.len() as f64 * spec.window_s as f64 / 3600.0;
    let (events, ahi) = if spec.output_len == spec.window_s {
        // Labels are unknown at inference; all-false placeholders keep the
        // prediction side of the report valid.
        let windows: Vec<ScoredWindow> = instances
            .iter()
            .zip(&scores)
            .map(|(inst, s)| ScoredWindow {
                target_start_s: inst.target_start_s,
                scores: s.clone(),
                labels: vec![false; spec.window_s],
            })
            .collect();
        let report =
            per_patient_report(&args.patient, &windows, &[], &report_cfg).map_err(runtime)?;
        (report.pred_events, report.pred_ahi)
    } else {
        let starts: Vec<usize> = instances.iter().map(|i| i.target_start_s).collect();
        let flags: Vec<bool> = probs.iter().map(|p| p[0] > report_cfg.tau).collect();
        let events = post::minute_events(&starts, &flags, spec.window_s);
        let flagged = flags.iter().filter(|&&f| f).count();
        (events, flagged as f64 / hours)
    };

    let mut events_csv = String::from(EVENTS_HEADER);
    for e in &events {
        events_csv.push_str(&format!("{},{}\n", e.start_s, e.end_s));
    }
    data::write_text(&args.output.join("events.csv"), &events_csv)?;

    if args.timeline_svg {
        let svg = render_timeline_svg(duration_s, &events, &truth_events);
        data::write_text(&args.output.join("timeline.svg"), &svg)?;
    }

    println!(
        "{}: {} windows, {hours:.3} h, {} events, ahi={ahi:.2} class={}",
        args.patient,
        instances.len(),
        events.len(),
        ahi_class(ahi).as_str()
    );
    Ok(())
}
