//! Glue between raw model scores and the scoring module: flattening,
//! thresholding, and the minute-granularity event convention.

use apnea_core::dataset::{WindowInstance, WindowLabels};
use apnea_core::scoring::{scores_to_probs, ScoredEvent};

/// Per-window probabilities from per-window raw scores.
pub fn window_probs(scores: &[Vec<f64>]) -> Vec<Vec<f64>> {
    scores.iter().map(|s| scores_to_probs(s)).collect()
}

/// Flattens window scores and labels into aligned per-element streams.
/// Per-second labels pair with per-second scores; whole-window labels
/// collapse each window to one element.
pub fn flatten(
    instances: &[WindowInstance],
    probs: &[Vec<f64>],
    tau: f64,
) -> (Vec<bool>, Vec<bool>) {
    let mut pred = Vec::new();
    let mut truth = Vec::new();
    for (inst, p) in instances.iter().zip(probs) {
        if p.len() == 1 {
            pred.push(p[0] > tau);
            truth.push(inst.labels.window_label());
        } else {
            pred.extend(p.iter().map(|&v| v > tau));
            match &inst.labels {
                WindowLabels::PerSecond(v) => truth.extend_from_slice(v),
                WindowLabels::PerWindow(b) => truth.extend(std::iter::repeat(*b).take(p.len())),
            }
        }
    }
    (pred, truth)
}

/// Merges flagged windows into events. Windows merge only when their
/// starts are exactly one window apart; gaps from dropped windows break
/// events, mirroring the per-second convention.
pub fn minute_events(starts: &[usize], flags: &[bool], window_s: usize) -> Vec<ScoredEvent> {
    let mut events: Vec<ScoredEvent> = Vec::new();
    let mut prev_start: Option<usize> = None;
    for (&start, &flag) in starts.iter().zip(flags) {
        if flag {
            match (prev_start, events.last_mut()) {
                (Some(p), Some(last)) if start == p + window_s && last.end_s == start => {
                    last.end_s = start + window_s;
                }
                _ => events.push(ScoredEvent {
                    start_s: start,
                    end_s: start + window_s,
                }),
            }
        }
        prev_start = Some(start);
    }
    events
}
