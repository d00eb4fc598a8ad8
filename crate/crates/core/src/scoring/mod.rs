//! Scoring: per-second scores to probabilities, event extraction, AHI,
//! and severity classes.

pub mod metrics;
pub mod report;

pub use metrics::{acc_at_k, auc, confusion_metrics, ConfusionMetrics};
pub use report::{
    loocv, per_patient_report, render_timeline_svg, summarize, summary_kv,
    training_fraction_sweep, write_patient_csv, write_summary_kv, EvaluationSummary, LoocvFold,
    LoocvOutcome, PatientReport, ReportConfig, ScoredWindow, SweepOutcome, SweepPoint,
};

use crate::error::{Error, Result};

/// Decision threshold on probabilities. Exceeding it (strictly) marks a
/// second apneic.
pub const DEFAULT_THRESHOLD: f64 = 0.5875;

/// Shortest detection kept as an event, in seconds.
pub const MIN_EVENT_S: usize = 10;

/// AHI at or above which a recording screens positive.
pub const OSA_AHI_THRESHOLD: f64 = 5.0;

/// Half-open `[start_s, end_s)` span of consecutive apneic seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredEvent {
    pub start_s: usize,
    pub end_s: usize,
}

impl ScoredEvent {
    pub fn duration_s(&self) -> usize {
        self.end_s - self.start_s
    }
}

/// Numerically stable logistic sigmoid, elementwise.
pub fn scores_to_probs(scores: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .map(|&s| {
            if s >= 0.0 {
                1.0 / (1.0 + (-s).exp())
            } else {
                let e = s.exp();
                e / (1.0 + e)
            }
        })
        .collect()
}

/// Strict comparison: a probability equal to `tau` stays negative.
pub fn threshold_probs(probs: &[f64], tau: f64) -> Vec<bool> {
    probs.iter().map(|&p| p > tau).collect()
}

/// Maximal runs of `true` as half-open events indexed from 0.
pub fn extract_events(seconds: &[bool]) -> Vec<ScoredEvent> {
    let mut events = Vec::new();
    let mut start = None;
    for (t, &on) in seconds.iter().enumerate() {
        match (on, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                events.push(ScoredEvent { start_s: s, end_s: t });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        events.push(ScoredEvent { start_s: s, end_s: seconds.len() });
    }
    events
}

/// Keeps events lasting at least `min_s` seconds (exactly `min_s` stays).
pub fn filter_short_events(events: &[ScoredEvent], min_s: usize) -> Vec<ScoredEvent> {
    events.iter().copied().filter(|e| e.duration_s() >= min_s).collect()
}

/// Events per hour over `hours` of scored signal.
pub fn events_per_hour(count: usize, hours: f64) -> Result<f64> {
    if !(hours.is_finite() && hours > 0.0) {
        return Err(Error::InvalidInput(format!(
            "events per hour needs positive scored hours, got {hours}"
        )));
    }
    Ok(count as f64 / hours)
}

pub fn compute_ahi(events: &[ScoredEvent], hours: f64) -> Result<f64> {
    events_per_hour(events.len(), hours)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Severity {
    None,
    Mild,
    Moderate,
    Severe,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::None => "none",
            Severity::Mild => "mild",
            Severity::Moderate => "moderate",
            Severity::Severe => "severe",
        }
    }

    pub fn parse(s: &str) -> Result<Severity> {
        match s {
            "none" => Ok(Severity::None),
            "mild" => Ok(Severity::Mild),
            "moderate" => Ok(Severity::Moderate),
            "severe" => Ok(Severity::Severe),
            other => Err(Error::InvalidInput(format!("unknown severity class {other:?}"))),
        }
    }

    /// Ordinal position, for rank-distance accuracy.
    pub fn rank(&self) -> usize {
        match self {
            Severity::None => 0,
            Severity::Mild => 1,
            Severity::Moderate => 2,
            Severity::Severe => 3,
        }
    }
}

/// Severity bands: below 5 none, then mild, moderate from 15, severe
/// from 30.
pub fn ahi_class(ahi: f64) -> Severity {
    if ahi < 5.0 {
        Severity::None
    } else if ahi < 15.0 {
        Severity::Mild
    } else if ahi < 30.0 {
        Severity::Moderate
    } else {
        Severity::Severe
    }
}

/// Positive screen at an AHI of 5 or more.
pub fn osa_binary(ahi: f64) -> bool {
    ahi >= OSA_AHI_THRESHOLD
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{events_to_labels, AnnotationEvent, EventKind};
    use proptest::prelude::*;

    #[test]
    fn sigmoid_hits_known_points() {
        let p = scores_to_probs(&[0.0, f64::INFINITY, f64::NEG_INFINITY, 2.0, -2.0]);
        assert_eq!(p[0], 0.5);
        assert_eq!(p[1], 1.0);
        assert_eq!(p[2], 0.0);
        assert!((p[3] - 0.8807970779778823).abs() < 1e-15);
        assert!((p[3] + p[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_strict() {
        let pred = threshold_probs(&[0.5875, 0.5875 + 1e-12, 0.0, 1.0], DEFAULT_THRESHOLD);
        assert_eq!(pred, vec![false, true, false, true]);
    }

    #[test]
    fn events_come_from_maximal_runs() {
        let s = [false, true, true, false, true, false, false, true];
        let ev = extract_events(&s);
        assert_eq!(
            ev,
            vec![
                ScoredEvent { start_s: 1, end_s: 3 },
                ScoredEvent { start_s: 4, end_s: 5 },
                ScoredEvent { start_s: 7, end_s: 8 },
            ]
        );
        assert!(extract_events(&[]).is_empty());
        assert_eq!(extract_events(&[true]), vec![ScoredEvent { start_s: 0, end_s: 1 }]);
    }

    #[test]
    fn short_event_filter_keeps_exact_minimum() {
        let ev = vec![
            ScoredEvent { start_s: 0, end_s: 9 },
            ScoredEvent { start_s: 20, end_s: 30 },
            ScoredEvent { start_s: 40, end_s: 51 },
        ];
        let kept = filter_short_events(&ev, MIN_EVENT_S);
        assert_eq!(kept, vec![ev[1], ev[2]]);
    }

    #[test]
    fn ahi_and_classes_match_reference_pairs() {
        for (count, class) in [
            (40, Severity::Severe),
            (26, Severity::Moderate),
            (10, Severity::Mild),
            (4, Severity::None),
        ] {
            let events: Vec<ScoredEvent> = (0..count)
                .map(|i| ScoredEvent { start_s: 90 * i, end_s: 90 * i + 10 })
                .collect();
            let ahi = compute_ahi(&events, 1.0).unwrap();
            assert_eq!(ahi, count as f64);
            assert_eq!(ahi_class(ahi), class);
        }
        assert_eq!(ahi_class(5.0), Severity::Mild);
        assert_eq!(ahi_class(15.0), Severity::Moderate);
        assert_eq!(ahi_class(30.0), Severity::Severe);
        assert!(events_per_hour(3, 0.0).is_err());
        assert!(events_per_hour(3, -1.0).is_err());
        assert!(osa_binary(5.0));
        assert!(!osa_binary(4.999));
    }

    #[test]
    fn severity_round_trips_through_names() {
        for sev in [Severity::None, Severity::Mild, Severity::Moderate, Severity::Severe] {
            assert_eq!(Severity::parse(sev.as_str()).unwrap(), sev);
        }
        assert!(Severity::parse("bad").is_err());
    }

    proptest! {
        /// Integer-aligned events separated by at least one second survive
        /// a round trip through per-second labels unchanged.
        #[test]
        fn extraction_inverts_labeling(gaps in proptest::collection::vec(1usize..5, 0..8),
                                       lens in proptest::collection::vec(1usize..6, 0..8)) {
            let n = gaps.len().min(lens.len());
            let mut t = 0usize;
            let mut events = Vec::new();
            for i in 0..n {
                t += gaps[i];
                let start = t;
                t += lens[i];
                events.push(AnnotationEvent::new(start as f64, t as f64, EventKind::Unspecified).unwrap());
            }
            let duration = t + 2;
            let labels = events_to_labels(&events, duration).unwrap();
            let extracted = extract_events(&labels);
            let expected: Vec<ScoredEvent> = events
                .iter()
                .map(|e| ScoredEvent { start_s: e.start_s as usize, end_s: e.end_s as usize })
                .collect();
            prop_assert_eq!(extracted, expected);
        }

        /// Filtering is idempotent and never adds events.
        #[test]
        fn filtering_is_idempotent(seconds in proptest::collection::vec(any::<bool>(), 0..200),
                                   min_s in 1usize..20) {
            let events = extract_events(&seconds);
            let once = filter_short_events(&events, min_s);
            let twice = filter_short_events(&once, min_s);
            prop_assert!(once.len() <= events.len());
            prop_assert_eq!(&once, &twice);
        }
    }
}
