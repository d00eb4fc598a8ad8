//! Scores preprocessed patients against their annotations and writes
//! per-patient rows plus a pooled summary. `--oracle` feeds the stored
//! labels back as scores, which must reproduce the annotations exactly;
//! it exists to validate a dataset end to end without a model.

use std::path::PathBuf;

use apnea_core::dataset::{WindowInstance, WindowLabels};
use apnea_core::nn::checkpoint;
use apnea_core::scoring::{
    ahi_class, auc, confusion_metrics, per_patient_report, render_timeline_svg, summarize,
    summary_kv, write_patient_csv, write_summary_kv, PatientReport, ReportConfig, ScoredEvent,
    ScoredWindow,
};
use apnea_core::train::eval_scores;

use crate::config::RunConfig;
use crate::data::{self, runtime};
use crate::post;
use crate::CliError;

#[derive(clap::Args)]
pub struct Args {
    /// Directory of *.windows.bin caches.
    #[arg(long)]
    data: PathBuf,
    /// Dataset directory holding the *.events.csv annotations.
    #[arg(long)]
    annotations: PathBuf,
    /// Trained checkpoint.
    #[arg(long, required_unless_present = "oracle", conflicts_with = "oracle")]
    model: Option<PathBuf>,
    /// Score with the stored labels instead of a model.
    #[arg(long)]
    oracle: bool,
    /// Directory for patients.csv, summary.txt, and config.toml.
    #[arg(long)]
    output: PathBuf,
    /// Also render one <patient>.svg timeline per patient.
    #[arg(long)]
    timeline_svg: bool,
}

fn oracle_scores(instances: &[WindowInstance]) -> Vec<Vec<f64>> {
    // +-9 saturates the sigmoid well past the threshold on either side.
    let margin = |b: bool| if b { 9.0 } else { -9.0 };
    instances
        .iter()
        .map(|inst| match &inst.labels {
            WindowLabels::PerSecond(v) => v.iter().map(|&b| margin(b)).collect(),
            WindowLabels::PerWindow(b) => vec![margin(*b)],
        })
        .collect()
}

fn per_second_report(
    id: &str,
    instances: &[WindowInstance],
    scores: &[Vec<f64>],
    truth_events: &[apnea_core::dataset::AnnotationEvent],
    cfg: &ReportConfig,
) -> Result<PatientReport, CliError> {
    let mut windows = Vec::with_capacity(instances.len());
    for (inst, s) in instances.iter().zip(scores) {
        let WindowLabels::PerSecond(labels) = &inst.labels else {
            return Err(CliError::Usage(format!(
                "{id} has whole-window labels; event-level evaluation needs per-second labels"
            )));
        };
        windows.push(ScoredWindow {
            target_start_s: inst.target_start_s,
            scores: s.clone(),
            labels: labels.clone(),
        });
    }
    per_patient_report(id, &windows, truth_events, cfg).map_err(runtime)
}

fn per_window_report(
    id: &str,
    instances: &[WindowInstance],
    probs: &[Vec<f64>],
    n_true_events: usize,
    cfg: &ReportConfig,
) -> Result<PatientReport, CliError> {
    let hours = instances.len() as f64 * cfg.window_s as f64 / 3600.0;
    let starts: Vec<usize> = instances.iter().map(|i| i.target_start_s).collect();
    let pred: Vec<bool> = probs.iter().map(|p| p[0] > cfg.tau).collect();
    let truth: Vec<bool> = instances.iter().map(|i| i.labels.window_label()).collect();
    let flat: Vec<f64> = probs.iter().map(|p| p[0]).collect();

    // Whole-window granularity: the rate is anomalous windows per hour.
    let pred_ahi = pred.iter().filter(|&&b| b).count() as f64 / hours;
    let true_ahi = truth.iter().filter(|&&b| b).count() as f64 / hours;
    Ok(PatientReport {
        patient_id: id.to_string(),
        hours,
        pred_ahi,
        true_ahi,
        pred_class: ahi_class(pred_ahi),
        true_class: ahi_class(true_ahi),
        pred_events: post::minute_events(&starts, &pred, cfg.window_s),
        n_true_events,
        confusion: confusion_metrics(&pred, &truth).map_err(runtime)?,
        auc: auc(&flat, &truth).unwrap_or(f64::NAN),
        empty: false,
    })
}

pub fn run(args: Args, cfg: RunConfig) -> Result<(), CliError> {
    let report_cfg = cfg.report_config()?;
    let groups = data::load_windows_dir(&args.data, cfg.windowing.window_s)?;
    let mut model = match &args.model {
        Some(path) => Some(checkpoint::load(path).map_err(runtime)?),
        None => None,
    };

    data::ensure_dir(&args.output)?;
    let mut reports = Vec::with_capacity(groups.len());
    for (id, instances) in &groups {
        if instances.is_empty() {
            eprintln!("warning: {id} has no windows with signal");
            reports.push(
                per_patient_report(id, &[], &[], &report_cfg).map_err(runtime)?,
            );
            continue;
        }
        let scores = match model.as_mut() {
            Some(m) => eval_scores(m, instances, cfg.train.batch_size).map_err(runtime)?,
            None => oracle_scores(instances),
        };
        let truth_events = data::load_patient_events(&args.annotations, id)?;
        let report = if scores[0].len() == report_cfg.window_s {
            per_second_report(id, instances, &scores, &truth_events, &report_cfg)?
        } else {
            let probs = post::window_probs(&scores);
            per_window_report(id, instances, &probs, truth_events.len(), &report_cfg)?
        };

        if args.timeline_svg {
            let truth: Vec<ScoredEvent> = truth_events
                .iter()
                .map(|e| ScoredEvent {
                    start_s: e.start_s as usize,
                    end_s: e.end_s.ceil() as usize,
                })
                .collect();
            let last_window = instances.last().map(|i| i.target_start_s + i.window_s);
            let duration = truth
                .last()
                .map(|e| e.end_s)
                .into_iter()
                .chain(last_window)
                .max()
                .unwrap_or(0);
            let svg = render_timeline_svg(duration, &report.pred_events, &truth);
            data::write_text(&args.output.join(format!("{id}.svg")), &svg)?;
        }
        println!(
            "{id}: ahi {:.2} vs {:.2}, class {} vs {}, f1 {:.3}",
            report.pred_ahi,
            report.true_ahi,
            report.pred_class.as_str(),
            report.true_class.as_str(),
            report.confusion.f1
        );
        reports.push(report);
    }

    write_patient_csv(&reports, &args.output.join("patients.csv")).map_err(runtime)?;
    let summary = summarize(&reports).map_err(runtime)?;
    write_summary_kv(&summary, &args.output.join("summary.txt")).map_err(runtime)?;
    cfg.write_resolved(&args.output)?;
    print!("{}", summary_kv(&summary));
    Ok(())
}
