//! Per-patient reports, evaluation summaries, cross-validation plumbing,
//! and the training-fraction sweep.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::AnnotationEvent;
use crate::error::{Error, Result};
use crate::scoring::metrics::{acc_at_k, auc, confusion_metrics, ConfusionMetrics};
use crate::scoring::{
    ahi_class, compute_ahi, events_per_hour, extract_events, filter_short_events, osa_binary,
    scores_to_probs, threshold_probs, ScoredEvent, Severity, DEFAULT_THRESHOLD, MIN_EVENT_S,
};

/// Model scores for one kept target window, with its ground-truth labels.
/// `scores` and `labels` hold one entry per second of the window.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredWindow {
    pub target_start_s: usize,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportConfig {
    pub window_s: usize,
    pub tau: f64,
    pub min_event_s: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig { window_s: 60, tau: DEFAULT_THRESHOLD, min_event_s: MIN_EVENT_S }
    }
}

impl ReportConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_s == 0 {
            return Err(Error::InvalidConfig("window length must be positive".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie strictly inside (0, 1), got {}",
                self.tau
            )));
        }
        if self.min_event_s == 0 {
            return Err(Error::InvalidConfig("minimum event length must be positive".into()));
        }
        Ok(())
    }
}

/// Everything the evaluation CSV reports for one recording. When no
/// windows survived null filtering, `empty` is set and the AHI and AUC
/// fields are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientReport {
    pub patient_id: String,
    /// Scored hours after null filtering.
    pub hours: f64,
    pub pred_ahi: f64,
    pub true_ahi: f64,
    pub pred_class: Severity,
    pub true_class: Severity,
    pub pred_events: Vec<ScoredEvent>,
    pub n_true_events: usize,
    pub confusion: ConfusionMetrics,
    pub auc: f64,
    pub empty: bool,
}

/// Scores one recording: thresholds per-second probabilities, extracts
/// events inside each contiguous run of kept windows (dropped windows
/// break events rather than bridging them), drops events shorter than
/// `min_event_s`, and derives both AHI figures over the kept hours. The
/// true AHI comes from the annotated event count, not from the labels.
pub fn per_patient_report(
    patient_id: &str,
    windows: &[ScoredWindow],
    true_events: &[AnnotationEvent],
    cfg: &ReportConfig,
) -> Result<PatientReport> {
    cfg.validate()?;
    for (i, w) in windows.iter().enumerate() {
        if w.scores.len() != cfg.window_s || w.labels.len() != cfg.window_s {
            return Err(Error::InvalidInput(format!(
                "window {i} of {patient_id} has {} scores and {} labels for a {}-second window",
                w.scores.len(),
                w.labels.len(),
                cfg.window_s
            )));
        }
        if w.target_start_s % cfg.window_s != 0 {
            return Err(Error::InvalidInput(format!(
                "window {i} of {patient_id} starts at {} s, not on the {}-second grid",
                w.target_start_s, cfg.window_s
            )));
        }
        if w.scores.iter().any(|s| s.is_nan()) {
            return Err(Error::InvalidInput(format!(
                "window {i} of {patient_id} contains NaN scores"
            )));
        }
    }

    if windows.is_empty() {
        return Ok(PatientReport {
            patient_id: patient_id.to_string(),
            hours: 0.0,
            pred_ahi: f64::NAN,
            true_ahi: f64::NAN,
            pred_class: Severity::None,
            true_class: Severity::None,
            pred_events: Vec::new(),
            n_true_events: true_events.len(),
            confusion: ConfusionMetrics::from_counts(0, 0, 0, 0),
            auc: f64::NAN,
            empty: true,
        });
    }

    let mut sorted: Vec<&ScoredWindow> = windows.iter().collect();
    sorted.sort_by_key(|w| w.target_start_s);
    for pair in sorted.windows(2) {
        if pair[0].target_start_s == pair[1].target_start_s {
            return Err(Error::InvalidInput(format!(
                "{patient_id} has two windows starting at {} s",
                pair[0].target_start_s
            )));
        }
    }

    let hours = (windows.len() * cfg.window_s) as f64 / 3600.0;
    let mut flat_scores = Vec::with_capacity(windows.len() * cfg.window_s);
    let mut flat_pred = Vec::with_capacity(flat_scores.capacity());
    let mut flat_truth = Vec::with_capacity(flat_scores.capacity());
    let mut pred_events = Vec::new();
    let mut run_pred: Vec<bool> = Vec::new();
    let mut run_start = sorted[0].target_start_s;

    for (i, w) in sorted.iter().enumerate() {
        if i > 0 && w.target_start_s != sorted[i - 1].target_start_s + cfg.window_s {
            push_run_events(&mut pred_events, &run_pred, run_start);
            run_pred.clear();
            run_start = w.target_start_s;
        }
        let pred = threshold_probs(&scores_to_probs(&w.scores), cfg.tau);
        flat_scores.extend_from_slice(&w.scores);
        flat_truth.extend_from_slice(&w.labels);
        flat_pred.extend_from_slice(&pred);
        run_pred.extend_from_slice(&pred);
    }
    push_run_events(&mut pred_events, &run_pred, run_start);
    let pred_events = filter_short_events(&pred_events, cfg.min_event_s);

    let pred_ahi = compute_ahi(&pred_events, hours)?;
    let true_ahi = events_per_hour(true_events.len(), hours)?;
    let confusion = confusion_metrics(&flat_pred, &flat_truth)?;
    let report_auc = auc(&flat_scores, &flat_truth).unwrap_or(f64::NAN);

    Ok(PatientReport {
        patient_id: patient_id.to_string(),
        hours,
        pred_ahi,
        true_ahi,
        pred_class: ahi_class(pred_ahi),
        true_class: ahi_class(true_ahi),
        pred_events,
        n_true_events: true_events.len(),
        confusion,
        auc: report_auc,
        empty: false,
    })
}

fn push_run_events(out: &mut Vec<ScoredEvent>, run: &[bool], run_start: usize) {
    out.extend(extract_events(run).into_iter().map(|e| ScoredEvent {
        start_s: e.start_s + run_start,
        end_s: e.end_s + run_start,
    }));
}

pub fn write_patient_csv(reports: &[PatientReport], path: &Path) -> Result<()> {
    let mut s = String::from(
        "patient_id,hours,pred_ahi,true_ahi,pred_class,true_class,pred_events,true_events,\
         sensitivity,specificity,precision,accuracy,f1,auc,empty\n",
    );
    for r in reports {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.patient_id,
            r.hours,
            r.pred_ahi,
            r.true_ahi,
            r.pred_class.as_str(),
            r.true_class.as_str(),
            r.pred_events.len(),
            r.n_true_events,
            r.confusion.sensitivity,
            r.confusion.specificity,
            r.confusion.precision,
            r.confusion.accuracy,
            r.confusion.f1,
            r.auc,
            r.empty,
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Cohort-level rollup of per-patient reports. Pooled rates are computed
/// on summed confusion counts; empty reports contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationSummary {
    pub n_patients: usize,
    pub n_empty: usize,
    pub pooled: ConfusionMetrics,
    pub osa_accuracy: f64,
    pub class_accuracy: f64,
    pub class_accuracy_within_one: f64,
    pub mean_abs_ahi_error: f64,
}

pub fn summarize(reports: &[PatientReport]) -> Result<EvaluationSummary> {
    let scored: Vec<&PatientReport> = reports.iter().filter(|r| !r.empty).collect();
    if scored.is_empty() {
        return Err(Error::InvalidInput("no scored recordings to summarize".into()));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for r in &scored {
        tp += r.confusion.true_pos;
        fp += r.confusion.false_pos;
        tn += r.confusion.true_neg;
        fn_ += r.confusion.false_neg;
    }
    let truth: Vec<Severity> = scored.iter().map(|r| r.true_class).collect();
    let pred: Vec<Severity> = scored.iter().map(|r| r.pred_class).collect();
    let osa_hits = scored
        .iter()
        .filter(|r| osa_binary(r.pred_ahi) == osa_binary(r.true_ahi))
        .count();
    let ahi_err: f64 = scored.iter().map(|r| (r.pred_ahi - r.true_ahi).abs()).sum();
    Ok(EvaluationSummary {
        n_patients: reports.len(),
        n_empty: reports.len() - scored.len(),
        pooled: ConfusionMetrics::from_counts(tp, fp, tn, fn_),
        osa_accuracy: osa_hits as f64 / scored.len() as f64,
        class_accuracy: acc_at_k(&truth, &pred, 1)?,
        class_accuracy_within_one: acc_at_k(&truth, &pred, 2)?,
        mean_abs_ahi_error: ahi_err / scored.len() as f64,
    })
}

pub fn write_summary_kv(summary: &EvaluationSummary, path: &Path) -> Result<()> {
    std::fs::write(path, summary_kv(summary)).map_err(|e| Error::io(path, e))
}

pub fn summary_kv(s: &EvaluationSummary) -> String {
    format!(
        "n_patients={}\nn_empty={}\npooled_sensitivity={}\npooled_specificity={}\n\
         pooled_precision={}\npooled_accuracy={}\npooled_f1={}\nosa_accuracy={}\n\
         class_accuracy={}\nclass_accuracy_within_one={}\nmean_abs_ahi_error={}\n",
        s.n_patients,
        s.n_empty,
        s.pooled.sensitivity,
        s.pooled.specificity,
        s.pooled.precision,
        s.pooled.accuracy,
        s.pooled.f1,
        s.osa_accuracy,
        s.class_accuracy,
        s.class_accuracy_within_one,
        s.mean_abs_ahi_error,
    )
}

/// Two-track event timeline: predicted events on the PR track, annotated
/// events on the GT track.
pub fn render_timeline_svg(
    duration_s: usize,
    pred: &[ScoredEvent],
    truth: &[ScoredEvent],
) -> String {
    let width = 1000.0;
    let scale = width / duration_s.max(1) as f64;
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"120\" \
         viewBox=\"-60 0 {} 120\">\n",
        width + 60.0,
        width + 60.0
    ));
    for (label, y, color, events) in
        [("PR", 20.0, "#d62728", pred), ("GT", 70.0, "#1f77b4", truth)]
    {
        svg.push_str(&format!(
            "<text x=\"-50\" y=\"{}\" font-family=\"monospace\" font-size=\"14\">{}</text>\n",
            y + 20.0,
            label
        ));
        svg.push_str(&format!(
            "<line x1=\"0\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"#999\"/>\n",
            y + 30.0,
            width
        ));
        for e in events {
            svg.push_str(&format!(
                "<rect x=\"{:.3}\" y=\"{}\" width=\"{:.3}\" height=\"30\" fill=\"{}\"/>\n",
                e.start_s as f64 * scale,
                y,
                (e.duration_s() as f64 * scale).max(0.5),
                color
            ));
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvFold {
    pub held_out: String,
    pub metrics: ConfusionMetrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoocvOutcome {
    pub folds: Vec<LoocvFold>,
    /// Micro average: rates over the summed per-fold counts.
    pub pooled: ConfusionMetrics,
}

/// Leave-one-patient-out driver. For each patient, `run_fold` receives
/// the held-out id and the remaining train ids and returns that fold's
/// per-sample (predictions, truth).
pub fn loocv(
    patient_ids: &[String],
    run_fold: &mut dyn FnMut(&str, &[String]) -> Result<(Vec<bool>, Vec<bool>)>,
) -> Result<LoocvOutcome> {
    if patient_ids.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "leave-one-out needs at least 2 patients, got {}",
            patient_ids.len()
        )));
    }
    let unique: HashSet<&String> = patient_ids.iter().collect();
    if unique.len() != patient_ids.len() {
        return Err(Error::InvalidInput("duplicate patient ids".into()));
    }

    let mut folds = Vec::with_capacity(patient_ids.len());
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for held in patient_ids {
        let train: Vec<String> =
            patient_ids.iter().filter(|id| *id != held).cloned().collect();
        let (pred, truth) = run_fold(held, &train)?;
        let metrics = confusion_metrics(&pred, &truth)?;
        tp += metrics.true_pos;
        fp += metrics.false_pos;
        tn += metrics.true_neg;
        fn_ += metrics.false_neg;
        folds.push(LoocvFold { held_out: held.clone(), metrics });
    }
    Ok(LoocvOutcome { folds, pooled: ConfusionMetrics::from_counts(tp, fp, tn, fn_) })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    pub n_patients: usize,
    /// One score per repeat, in repeat order.
    pub scores: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub warnings: Vec<String>,
}

/// Training-set-size sweep against a fixed validation set (held inside
/// `run`). Each repeat draws `floor(fraction * n)` patients without
/// replacement and calls `run(subset, repeat_seed)` for a score.
/// Fractions that floor to zero patients are skipped with a warning.
pub fn training_fraction_sweep(
    patients: &[String],
    fractions: &[f64],
    repeats: usize,
    seed: u64,
    run: &mut dyn FnMut(&[String], u64) -> Result<f64>,
) -> Result<SweepOutcome> {
    if patients.is_empty() {
        return Err(Error::InvalidInput("no patients to sweep over".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidConfig("sweep needs at least one repeat".into()));
    }
    for &f in fractions {
        if !(f.is_finite() && f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "sweep fractions must lie in (0, 1], got {f}"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for &fraction in fractions {
        let k = (fraction * patients.len() as f64).floor() as usize;
        if k == 0 {
            warnings.push(format!(
                "fraction {fraction} of {} patients selects nobody; skipped",
                patients.len()
            ));
            continue;
        }
        let mut scores = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let mut pool = patients.to_vec();
            pool.shuffle(&mut rng);
            pool.truncate(k);
            pool.sort();
            let repeat_seed: u64 = rng.random();
            scores.push(run(&pool, repeat_seed)?);
        }
        let mean = scores.iter().sum::<f64>() / repeats as f64;
        let sd = if repeats > 1 {
            (scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (repeats - 1) as f64)
                .sqrt()
        } else {
            0.0
        };
        points.push(SweepPoint { fraction, n_patients: k, scores, mean, sd });
    }
    Ok(SweepOutcome { points, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EventKind;
    use proptest::prelude::*;

    fn oracle_windows(labels_by_window: &[Vec<bool>], window_s: usize) -> Vec<ScoredWindow> {
        labels_by_window
            .iter()
            .enumerate()
            .map(|(i, labels)| ScoredWindow {
                target_start_s: i * window_s,
                scores: labels
                    .iter()
                    .map(|&b| if b { f64::INFINITY } else { f64::NEG_INFINITY })
                    .collect(),
                labels: labels.clone(),
            })
            .collect()
    }

    fn event(start: usize, end: usize) -> AnnotationEvent {
        AnnotationEvent::new(start as f64, end as f64, EventKind::ObstructiveApnea).unwrap()
    }

    #[test]
    fn oracle_scores_reproduce_annotations_exactly() {
        // One hour of 60 s windows; two events on the window grid's seconds.
        let mut labels = vec![vec![false; 60]; 60];
        for t in 70..95 {
            labels[t / 60][t % 60] = true;
        }
        for t in 200..215 {
            labels[t / 60][t % 60] = true;
        }
        let windows = oracle_windows(&labels, 60);
        let truth = vec![event(70, 95), event(200, 215)];
        let r =
            per_patient_report("p0", &windows, &truth, &ReportConfig::default()).unwrap();
        assert!(!r.empty);
        assert_eq!(r.hours, 1.0);
        assert_eq!(r.pred_ahi, 2.0);
        assert_eq!(r.true_ahi, 2.0);
        assert_eq!(r.pred_ahi, r.true_ahi);
        assert_eq!(
            r.pred_events,
            vec![
                ScoredEvent { start_s: 70, end_s: 95 },
                ScoredEvent { start_s: 200, end_s: 215 }
            ]
        );
        assert_eq!(r.confusion.f1, 1.0);
        assert_eq!(r.auc, 1.0);
        assert_eq!(r.pred_class, r.true_class);
    }

    #[test]
    fn dropped_windows_break_events() {
        // A 30 s run of positives straddles a missing window: both kept
        // halves are 10 s, so they survive as two separate events.
        let w0 = ScoredWindow {
            target_start_s: 0,
            scores: (0..60).map(|t| if t >= 50 { 10.0 } else { -10.0 }).collect(),
            labels: (0..60).map(|t| t >= 50).collect(),
        };
        let w2 = ScoredWindow {
            target_start_s: 120,
            scores: (0..60).map(|t| if t < 10 { 10.0 } else { -10.0 }).collect(),
            labels: (0..60).map(|t| t < 10).collect(),
        };
        let r = per_patient_report("p1", &[w0, w2], &[], &ReportConfig::default()).unwrap();
        assert_eq!(
            r.pred_events,
            vec![
                ScoredEvent { start_s: 50, end_s: 60 },
                ScoredEvent { start_s: 120, end_s: 130 }
            ]
        );
        // Two kept windows, not three: hours reflect the filtered tally.
        assert_eq!(r.hours, 120.0 / 3600.0);
        assert_eq!(r.true_ahi, 0.0);
    }

    #[test]
    fn sub_minimum_detections_are_dropped() {
        let w = ScoredWindow {
            target_start_s: 0,
            scores: (0..60).map(|t| if (20..29).contains(&t) { 10.0 } else { -10.0 }).collect(),
            labels: vec![false; 60],
        };
        let r = per_patient_report("p2", &[w], &[], &ReportConfig::default()).unwrap();
        assert!(r.pred_events.is_empty());
        assert_eq!(r.pred_ahi, 0.0);
        assert_eq!(r.pred_class, Severity::None);
    }

    #[test]
    fn no_kept_windows_is_flagged_not_scored() {
        let r = per_patient_report("p3", &[], &[event(0, 30)], &ReportConfig::default())
            .unwrap();
        assert!(r.empty);
        assert!(r.pred_ahi.is_nan());
        assert!(r.true_ahi.is_nan());
        assert_eq!(r.n_true_events, 1);
        assert_eq!(r.hours, 0.0);
    }

    #[test]
    fn malformed_windows_are_rejected() {
        let cfg = ReportConfig::default();
        let short = ScoredWindow { target_start_s: 0, scores: vec![0.0; 59], labels: vec![false; 59] };
        assert!(per_patient_report("p", &[short], &[], &cfg).is_err());
        let off_grid = ScoredWindow { target_start_s: 30, scores: vec![0.0; 60], labels: vec![false; 60] };
        assert!(per_patient_report("p", &[off_grid], &[], &cfg).is_err());
        let dup = ScoredWindow { target_start_s: 0, scores: vec![0.0; 60], labels: vec![false; 60] };
        assert!(per_patient_report("p", &[dup.clone(), dup], &[], &cfg).is_err());
        let nan = ScoredWindow { target_start_s: 0, scores: vec![f64::NAN; 60], labels: vec![false; 60] };
        assert!(per_patient_report("p", &[nan], &[], &cfg).is_err());
    }

    #[test]
    fn csv_and_summary_cover_all_reports() {
        let labels = vec![vec![true; 60], vec![false; 60]];
        let windows = oracle_windows(&labels, 60);
        let r0 = per_patient_report("a", &windows, &[event(0, 60)], &ReportConfig::default())
            .unwrap();
        let r1 = per_patient_report("b", &[], &[], &ReportConfig::default()).unwrap();
        let reports = vec![r0, r1];

        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("patients.csv");
        write_patient_csv(&reports, &csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("patient_id,hours,pred_ahi,true_ahi,pred_class"));
        assert!(lines[1].starts_with("a,"));
        assert!(lines[2].ends_with(",true"));

        let s = summarize(&reports).unwrap();
        assert_eq!(s.n_patients, 2);
        assert_eq!(s.n_empty, 1);
        assert_eq!(s.pooled.f1, 1.0);
        assert_eq!(s.osa_accuracy, 1.0);
        assert_eq!(s.class_accuracy, 1.0);
        let kv = summary_kv(&s);
        assert!(kv.contains("pooled_f1=1\n"));
        assert!(kv.contains("n_patients=2\n"));

        assert!(summarize(&[reports[1].clone()]).is_err());
    }

    #[test]
    fn timeline_svg_draws_both_tracks() {
        let pred = vec![ScoredEvent { start_s: 10, end_s: 40 }];
        let truth = vec![
            ScoredEvent { start_s: 12, end_s: 38 },
            ScoredEvent { start_s: 80, end_s: 95 },
        ];
        let svg = render_timeline_svg(120, &pred, &truth);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 3);
        assert!(svg.contains(">PR</text>"));
        assert!(svg.contains(">GT</text>"));
    }

    #[test]
    fn loocv_holds_each_patient_out_once() {
        let ids: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let mut seen = Vec::new();
        let out = loocv(&ids, &mut |held, train| {
            assert_eq!(train.len(), 3);
            assert!(!train.contains(&held.to_string()));
            seen.push(held.to_string());
            Ok((vec![true, false], vec![true, true]))
        })
        .unwrap();
        assert_eq!(seen, ids);
        assert_eq!(out.folds.len(), 4);
        assert_eq!(out.pooled.true_pos, 4);
        assert_eq!(out.pooled.false_neg, 4);

        assert!(loocv(&ids[..1], &mut |_, _| Ok((vec![], vec![]))).is_err());
        let dup: Vec<String> = ["a", "a"].iter().map(|s| s.to_string()).collect();
        assert!(loocv(&dup, &mut |_, _| Ok((vec![], vec![]))).is_err());
    }

    #[test]
    fn sweep_skips_empty_fractions_and_is_deterministic() {
        let ids: Vec<String> = (0..5).map(|i| format!("p{i}")).collect();
        let mut calls_a = Vec::new();
        let a = training_fraction_sweep(&ids, &[0.1, 0.4, 1.0], 3, 9, &mut |subset, seed| {
            calls_a.push((subset.to_vec(), seed));
            Ok(subset.len() as f64)
        })
        .unwrap();
        assert_eq!(a.warnings.len(), 1);
        assert_eq!(a.points.len(), 2);
        assert_eq!(a.points[0].n_patients, 2);
        assert_eq!(a.points[1].n_patients, 5);
        assert_eq!(a.points[0].mean, 2.0);
        assert_eq!(a.points[0].sd, 0.0);
        assert_eq!(a.points[1].scores, vec![5.0, 5.0, 5.0]);

        let mut calls_b = Vec::new();
        let b = training_fraction_sweep(&ids, &[0.1, 0.4, 1.0], 3, 9, &mut |subset, seed| {
            calls_b.push((subset.to_vec(), seed));
            Ok(subset.len() as f64)
        })
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(calls_a, calls_b);
        // Sampling is without replacement inside a repeat.
        for (subset, _) in &calls_a {
            let unique: HashSet<&String> = subset.iter().collect();
            assert_eq!(unique.len(), subset.len());
        }

        assert!(training_fraction_sweep(&ids, &[0.5], 0, 0, &mut |_, _| Ok(0.0)).is_err());
        assert!(training_fraction_sweep(&ids, &[1.5], 1, 0, &mut |_, _| Ok(0.0)).is_err());
        assert!(training_fraction_sweep(&[], &[0.5], 1, 0, &mut |_, _| Ok(0.0)).is_err());
    }

    proptest! {
        /// The micro average equals metrics computed on the concatenation
        /// of every fold's predictions.
        #[test]
        fn pooled_metrics_equal_concatenated_metrics(
            folds in proptest::collection::vec(
                proptest::collection::vec((any::<bool>(), any::<bool>()), 1..30),
                2..6,
            ),
        ) {
            let ids: Vec<String> = (0..folds.len()).map(|i| format!("p{i}")).collect();
            let out = loocv(&ids, &mut |held, _| {
                let i: usize = held[1..].parse().unwrap();
                let pred: Vec<bool> = folds[i].iter().map(|&(p, _)| p).collect();
                let truth: Vec<bool> = folds[i].iter().map(|&(_, t)| t).collect();
                Ok((pred, truth))
            }).unwrap();
            let all_pred: Vec<bool> = folds.iter().flatten().map(|&(p, _)| p).collect();
            let all_truth: Vec<bool> = folds.iter().flatten().map(|&(_, t)| t).collect();
            let direct = confusion_metrics(&all_pred, &all_truth).unwrap();
            prop_assert_eq!(out.pooled, direct);
        }
    }
}
