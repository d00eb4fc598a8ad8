//! Recording ingestion and instance assembly: annotation events to
//! per-second labels, fixed-shape context windows with the -1 missing
//! sentinel, null-window filtering, and patient-grouped splits.
//!
//! A windowed instance covers `[target_start - window_s, target_start +
//! 2*window_s)`: one window of look-back and one of look-ahead around the
//! scored window. Context reaching past the recording bounds is filled
//! with -1. Each instance is normalized independently, per channel, before
//! the sentinel is written.

pub mod apnea_ecg;
pub mod io;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::signal::{
    butterworth_bandpass, encode_missing_nan, minmax_normalize, BandpassSpec, SignalChannel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    CentralApnea,
    ObstructiveApnea,
    MixedApnea,
    Hypopnea,
    Unspecified,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::CentralApnea => "central_apnea",
            EventKind::ObstructiveApnea => "obstructive_apnea",
            EventKind::MixedApnea => "mixed_apnea",
            EventKind::Hypopnea => "hypopnea",
            EventKind::Unspecified => "unspecified",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "central_apnea" => Ok(EventKind::CentralApnea),
            "obstructive_apnea" => Ok(EventKind::ObstructiveApnea),
            "mixed_apnea" => Ok(EventKind::MixedApnea),
            "hypopnea" => Ok(EventKind::Hypopnea),
            "unspecified" => Ok(EventKind::Unspecified),
            other => Err(Error::InvalidInput(format!(
                "unknown event kind {other:?}"
            ))),
        }
    }
}

/// One annotated respiratory event. All kinds are scored as a single
/// anomaly class; the kind is carried through for reporting only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotationEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: EventKind,
}

impl AnnotationEvent {
    pub fn new(start_s: f64, end_s: f64, kind: EventKind) -> Result<Self> {
        if !(start_s >= 0.0) || !end_s.is_finite() {
            return Err(Error::InvalidInput(format!(
                "event start must be non-negative and finite, got {start_s}..{end_s}"
            )));
        }
        if !(end_s > start_s) {
            return Err(Error::InvalidInput(format!(
                "event end must exceed start, got {start_s}..{end_s}"
            )));
        }
        Ok(AnnotationEvent { start_s, end_s, kind })
    }
}

/// One subject's night: the ECG channel, the optional SpO2 channel, and
/// exactly one source of labels (annotation events, or per-minute booleans
/// in the minute-label convention).
#[derive(Debug, Clone)]
pub struct Recording {
    pub patient_id: String,
    pub ecg: SignalChannel,
    pub spo2: Option<SignalChannel>,
    pub events: Vec<AnnotationEvent>,
    pub minute_labels: Option<Vec<bool>>,
}

impl Recording {
    pub fn duration_s(&self) -> f64 {
        self.ecg.duration_s()
    }
}

/// Labels of one instance: one boolean per second of the target window, or
/// a single boolean for the whole window (minute-label convention).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WindowLabels {
    PerSecond(Vec<bool>),
    PerWindow(bool),
}

impl WindowLabels {
    pub fn len(&self) -> usize {
        match self {
            WindowLabels::PerSecond(v) => v.len(),
            WindowLabels::PerWindow(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Collapses to one boolean per window: any anomalous second marks the
    /// window anomalous.
    pub fn window_label(&self) -> bool {
        match self {
            WindowLabels::PerSecond(v) => v.iter().any(|&b| b),
            WindowLabels::PerWindow(b) => *b,
        }
    }
}

/// One training/inference unit: three windows of ECG context, three
/// windows of SpO2 context when present, and the target window's labels.
/// Every signal value lies in [0, 1] or is the -1 missing sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowInstance {
    pub patient_id: String,
    pub target_start_s: usize,
    pub window_s: usize,
    pub ecg_ctx: Vec<f64>,
    pub spo2_ctx: Option<Vec<f64>>,
    pub labels: WindowLabels,
}

fn non_null_fraction(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v != -1.0).count() as f64 / values.len() as f64
}

impl WindowInstance {
    pub fn ecg_non_null_fraction(&self) -> f64 {
        non_null_fraction(&self.ecg_ctx)
    }

    pub fn spo2_non_null_fraction(&self) -> f64 {
        self.spo2_ctx.as_deref().map(non_null_fraction).unwrap_or(0.0)
    }
}

/// Per-second labels over `[0, duration_s)`: second `t` is true iff
/// `[t, t+1)` intersects some event.
pub fn events_to_labels(events: &[AnnotationEvent], duration_s: usize) -> Result<Vec<bool>> {
    for e in events {
        if e.end_s > duration_s as f64 {
            return Err(Error::InvalidInput(format!(
                "event {}..{} extends past the {duration_s} s recording",
                e.start_s, e.end_s
            )));
        }
    }
    let mut labels = vec![false; duration_s];
    for e in events {
        let first = e.start_s.floor() as usize;
        for (t, l) in labels.iter_mut().enumerate().skip(first) {
            // [t, t+1) intersects [start, end) iff t < end and t+1 > start.
            if (t as f64) < e.end_s && (t + 1) as f64 > e.start_s {
                *l = true;
            } else if (t as f64) >= e.end_s {
                break;
            }
        }
    }
    Ok(labels)
}

/// Slice of `window_s * rate` samples starting at signal second
/// `start_s` (possibly negative); out-of-range positions become NaN.
fn context_slice(values: &[f64], rate: usize, start_s: i64, ctx_s: usize) -> Vec<f64> {
    let n = (ctx_s * rate) as i64;
    let first = start_s * rate as i64;
    (first..first + n)
        .map(|i| {
            if i >= 0 && (i as usize) < values.len() {
                values[i as usize]
            } else {
                f64::NAN
            }
        })
        .collect()
}

/// Normalizes one context independently, then writes the -1 sentinel. An
/// all-missing context stays all -1.
fn finish_context(raw: Vec<f64>) -> Result<Vec<f64>> {
    if raw.iter().any(|v| v.is_finite()) {
        Ok(encode_missing_nan(&minmax_normalize(&raw)?))
    } else {
        Ok(vec![-1.0; raw.len()])
    }
}

/// Cuts a preprocessed (filtered, NaN-masked) recording into non-overlapping
/// target windows with surrounding context. Emits `floor(duration/window_s)`
/// instances; a recording shorter than one window yields none.
pub fn build_windows(rec: &Recording, window_s: usize) -> Result<Vec<WindowInstance>> {
    if window_s == 0 {
        return Err(Error::InvalidConfig("window length must be positive".into()));
    }
    let rate_f = rec.ecg.rate_hz;
    if rate_f.fract() != 0.0 {
        return Err(Error::InvalidInput(format!(
            "windowing requires an integer ECG rate, got {rate_f} Hz"
        )));
    }
    let rate = rate_f as usize;
    let duration_s = rec.ecg.len() / rate;
    let n_windows = duration_s / window_s;

    if let Some(spo2) = &rec.spo2 {
        if spo2.rate_hz != 1.0 {
            return Err(Error::InvalidInput(format!(
                "SpO2 must be sampled at 1 Hz, got {} Hz",
                spo2.rate_hz
            )));
        }
    }
    // SpO2 second s (relative to the ECG clock) lives at index s - offset.
    let spo2_offset_s = match &rec.spo2 {
        Some(spo2) => {
            let off = spo2.start_epoch_s - rec.ecg.start_epoch_s;
            if off.fract() != 0.0 {
                return Err(Error::InvalidInput(format!(
                    "SpO2 starts {off} s after the ECG; only whole-second offsets are supported"
                )));
            }
            off as i64
        }
        None => 0,
    };

    let second_labels = match &rec.minute_labels {
        Some(labels) => {
            if labels.len() != n_windows {
                return Err(Error::InvalidInput(format!(
                    "{} minute labels for {} whole windows of {} s",
                    labels.len(),
                    n_windows,
                    window_s
                )));
            }
            None
        }
        None => Some(events_to_labels(&rec.events, duration_s)?),
    };

    exec::map_indices(n_windows, |w| -> Result<WindowInstance> {
        let start = (w * window_s) as i64;
        let ecg_ctx = finish_context(context_slice(
            &rec.ecg.values,
            rate,
            start - window_s as i64,
            3 * window_s,
        ))?;
        let spo2_ctx = match &rec.spo2 {
            Some(spo2) => Some(finish_context(context_slice(
                &spo2.values,
                1,
                start - window_s as i64 - spo2_offset_s,
                3 * window_s,
            ))?),
            None => None,
        };
        let labels = match (&second_labels, &rec.minute_labels) {
            (Some(all), _) => {
                let s = w * window_s;
                WindowLabels::PerSecond(all[s..s + window_s].to_vec())
            }
            (None, Some(minutes)) => WindowLabels::PerWindow(minutes[w]),
            (None, None) => unreachable!(),
        };
        Ok(WindowInstance {
            patient_id: rec.patient_id.clone(),
            target_start_s: w * window_s,
            window_s,
            ecg_ctx,
            spo2_ctx,
            labels,
        })
    })
    .into_iter()
    .collect()
}

/// Keeps an instance iff at least half of its ECG context or at least half
/// of its SpO2 context is non-null.
pub fn filter_null_windows(instances: Vec<WindowInstance>) -> Vec<WindowInstance> {
    instances
        .into_iter()
        .filter(|i| i.ecg_non_null_fraction() >= 0.5 || i.spo2_non_null_fraction() >= 0.5)
        .collect()
}

/// The canonical preprocessing chain: bandpass the ECG, window with
/// context (each context min-max normalized and -1 encoded), then drop
/// majority-null instances.
pub fn preprocess_recording(
    rec: &Recording,
    bandpass: &BandpassSpec,
    window_s: usize,
) -> Result<Vec<WindowInstance>> {
    let filtered = Recording {
        patient_id: rec.patient_id.clone(),
        ecg: butterworth_bandpass(&rec.ecg, bandpass)?,
        spo2: rec.spo2.clone(),
        events: rec.events.clone(),
        minute_labels: rec.minute_labels.clone(),
    };
    Ok(filter_null_windows(build_windows(&filtered, window_s)?))
}

/// Splits recordings into (train, validation) with no patient on both
/// sides. Selection shuffles the sorted patient list with the given seed.
pub fn split_by_patient(
    recordings: Vec<Recording>,
    n_validation: usize,
    seed: u64,
) -> Result<(Vec<Recording>, Vec<Recording>)> {
    let mut ids: Vec<String> = recordings.iter().map(|r| r.patient_id.clone()).collect();
    ids.sort();
    ids.dedup();
    if n_validation >= ids.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot hold out {n_validation} of {} patients",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let val_ids: std::collections::HashSet<&String> = ids.iter().take(n_validation).collect();

    let (val, train): (Vec<Recording>, Vec<Recording>) = recordings
        .into_iter()
        .partition(|r| val_ids.contains(&r.patient_id));
    Ok((train, val))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::ChannelKind;
    use proptest::prelude::*;

    fn ev(start: f64, end: f64) -> AnnotationEvent {
        AnnotationEvent::new(start, end, EventKind::Unspecified).unwrap()
    }

    fn ecg_channel(id: &str, rate: f64, values: Vec<f64>) -> SignalChannel {
        SignalChannel::new(id, ChannelKind::Ecg, rate, 0.0, values).unwrap()
    }

    fn spo2_channel(id: &str, values: Vec<f64>) -> SignalChannel {
        SignalChannel::new(id, ChannelKind::Spo2, 1.0, 0.0, values).unwrap()
    }

    /// Recording with a linear ramp ECG so normalization is predictable.
    fn ramp_recording(id: &str, rate: usize, duration_s: usize) -> Recording {
        let n = rate * duration_s;
        Recording {
            patient_id: id.to_string(),
            ecg: ecg_channel(id, rate as f64, (0..n).map(|i| i as f64).collect()),
            spo2: Some(spo2_channel(id, (0..duration_s).map(|i| 90.0 + (i % 8) as f64).collect())),
            events: vec![],
            minute_labels: None,
        }
    }

    #[test]
    fn labels_cover_intersecting_seconds() {
        let labels = events_to_labels(&[ev(2.0, 4.0)], 6).unwrap();
        assert_eq!(labels, vec![false, false, true, true, false, false]);

        let labels = events_to_labels(&[ev(2.5, 3.2)], 6).unwrap();
        assert_eq!(labels, vec![false, false, true, true, false, false]);

        assert_eq!(events_to_labels(&[], 4).unwrap(), vec![false; 4]);
    }

    #[test]
    fn out_of_range_event_is_an_error() {
        assert!(events_to_labels(&[ev(3.0, 7.5)], 6).is_err());
        // Ending exactly at the boundary is in range.
        assert!(events_to_labels(&[ev(3.0, 6.0)], 6).is_ok());
    }

    #[test]
    fn event_validation_rejects_degenerate_spans() {
        assert!(AnnotationEvent::new(4.0, 4.0, EventKind::Hypopnea).is_err());
        assert!(AnnotationEvent::new(-1.0, 4.0, EventKind::Hypopnea).is_err());
        assert!(AnnotationEvent::new(4.0, 3.0, EventKind::Hypopnea).is_err());
    }

    #[test]
    fn window_count_is_floor_of_duration() {
        // 130 s at 4 Hz: two whole 60 s windows, 10 s remainder dropped.
        let rec = ramp_recording("p1", 4, 130);
        let wins = build_windows(&rec, 60).unwrap();
        assert_eq!(wins.len(), 2);
        assert_eq!(wins[0].target_start_s, 0);
        assert_eq!(wins[1].target_start_s, 60);

        let short = ramp_recording("p2", 4, 59);
        assert!(build_windows(&short, 60).unwrap().is_empty());
    }

    #[test]
    fn instance_shapes_match_the_context_layout() {
        let rec = ramp_recording("p1", 4, 240);
        let wins = build_windows(&rec, 60).unwrap();
        for w in &wins {
            assert_eq!(w.ecg_ctx.len(), 3 * 60 * 4);
            assert_eq!(w.spo2_ctx.as_ref().unwrap().len(), 180);
            assert_eq!(w.labels.len(), 60);
        }
    }

    #[test]
    fn leading_context_of_first_window_is_missing() {
        let rec = ramp_recording("p1", 4, 240);
        let wins = build_windows(&rec, 60).unwrap();
        let first = &wins[0];
        // First 60 s of context precede the recording.
        assert!(first.ecg_ctx[..60 * 4].iter().all(|&v| v == -1.0));
        assert!(first.ecg_ctx[60 * 4..].iter().all(|&v| (0.0..=1.0).contains(&v)));
        // Last window's look-ahead is likewise padded.
        let last = wins.last().unwrap();
        assert!(last.ecg_ctx[2 * 60 * 4..].iter().all(|&v| v == -1.0));
    }

    #[test]
    fn every_value_is_normalized_or_sentinel() {
        let mut rec = ramp_recording("p1", 4, 240);
        // Punch some gaps into both channels.
        for i in (100..400).step_by(7) {
            rec.ecg.values[i] = f64::NAN;
        }
        for i in (10..100).step_by(3) {
            rec.spo2.as_mut().unwrap().values[i] = f64::NAN;
        }
        for w in build_windows(&rec, 60).unwrap() {
            for v in w.ecg_ctx.iter().chain(w.spo2_ctx.as_ref().unwrap()) {
                assert!(*v == -1.0 || (0.0..=1.0).contains(v), "value {v}");
            }
        }
    }

    #[test]
    fn normalization_is_per_instance() {
        // Ramp ECG: each instance spans a different value range, so both
        // must still hit 0 and 1 after independent normalization.
        let rec = ramp_recording("p1", 4, 240);
        let wins = build_windows(&rec, 60).unwrap();
        let mid = &wins[1];
        let lo = mid.ecg_ctx.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mid.ecg_ctx.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
        let last = wins.last().unwrap();
        assert_eq!(
            last.ecg_ctx[..2 * 60 * 4]
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max),
            1.0
        );
    }

    #[test]
    fn per_second_labels_slice_the_target_window() {
        let mut rec = ramp_recording("p1", 4, 180);
        rec.events = vec![ev(65.0, 80.0)];
        let wins = build_windows(&rec, 60).unwrap();
        let labels = match &wins[1].labels {
            WindowLabels::PerSecond(v) => v.clone(),
            _ => panic!(),
        };
        assert_eq!(labels.len(), 60);
        assert!(labels[5..20].iter().all(|&b| b));
        assert!(!labels[4] && !labels[20]);
        assert!(!wins[0].labels.window_label());
        assert!(wins[1].labels.window_label());
    }

    #[test]
    fn minute_labels_become_per_window_labels() {
        let mut rec = ramp_recording("p1", 4, 180);
        rec.spo2 = None;
        rec.minute_labels = Some(vec![false, true, false]);
        let wins = build_windows(&rec, 60).unwrap();
        assert_eq!(wins.len(), 3);
        assert_eq!(wins[1].labels, WindowLabels::PerWindow(true));
        assert!(wins[1].spo2_ctx.is_none());

        rec.minute_labels = Some(vec![false, true]);
        assert!(build_windows(&rec, 60).is_err());
    }

    #[test]
    fn spo2_epoch_offset_shifts_the_context() {
        let mut rec = ramp_recording("p1", 4, 240);
        // SpO2 clock starts 30 s after the ECG clock: ECG second 30 is
        // SpO2 sample 0.
        let spo2 = rec.spo2.as_mut().unwrap();
        spo2.start_epoch_s = 30.0;
        let wins = build_windows(&rec, 60).unwrap();
        // Window 1 context covers ECG seconds [0, 180) -> SpO2 indices
        // [-30, 150); the first 30 must be missing.
        let ctx = wins[1].spo2_ctx.as_ref().unwrap();
        assert!(ctx[..30].iter().all(|&v| v == -1.0));
        assert!(ctx[30..].iter().all(|&v| v != -1.0));
    }

    #[test]
    fn null_filter_applies_the_or_rule() {
        let mk = |ecg_present: usize, spo2_present: usize| WindowInstance {
            patient_id: "p".into(),
            target_start_s: 0,
            window_s: 60,
            ecg_ctx: (0..240)
                .map(|i| if i < ecg_present { 0.5 } else { -1.0 })
                .collect(),
            spo2_ctx: Some(
                (0..180)
                    .map(|i| if i < spo2_present { 0.5 } else { -1.0 })
                    .collect(),
            ),
            labels: WindowLabels::PerWindow(false),
        };
        // ECG fully null, SpO2 80% present: kept by the OR rule.
        let kept = filter_null_windows(vec![mk(0, 144), mk(96, 72), mk(240, 180)]);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].spo2_non_null_fraction(), 0.8);
        // Both at 40%: dropped.
        assert!(filter_null_windows(vec![mk(96, 72)]).is_empty());
    }

    #[test]
    fn split_is_patient_disjoint_and_deterministic() {
        let recs: Vec<Recording> = (0..30).map(|i| ramp_recording(&format!("p{i:02}"), 4, 60)).collect();
        let ids = |rs: &[Recording]| {
            rs.iter().map(|r| r.patient_id.clone()).collect::<std::collections::HashSet<_>>()
        };
        let (train, val) = split_by_patient(recs.clone(), 7, 99).unwrap();
        assert_eq!((train.len(), val.len()), (23, 7));
        assert!(ids(&train).is_disjoint(&ids(&val)));

        let (train2, val2) = split_by_patient(recs.clone(), 7, 99).unwrap();
        assert_eq!(ids(&train), ids(&train2));
        assert_eq!(ids(&val), ids(&val2));

        let (all, none) = split_by_patient(recs.clone(), 0, 1).unwrap();
        assert_eq!((all.len(), none.len()), (30, 0));
        assert!(split_by_patient(recs, 30, 1).is_err());
    }

    proptest! {
        /// Integer-aligned events separated by at least one second come
        /// back verbatim from the label sequence.
        #[test]
        fn labels_round_trip_integer_events(spans in prop::collection::vec((0usize..40, 1usize..8), 1..5)) {
            // Lay events head to tail with 1 s gaps so runs stay distinct.
            let mut events = Vec::new();
            let mut cursor = 0usize;
            for (gap, len) in spans {
                let start = cursor + gap + 1;
                events.push(ev(start as f64, (start + len) as f64));
                cursor = start + len;
            }
            let duration = cursor + 3;
            let labels = events_to_labels(&events, duration).unwrap();
            let mut expect = vec![false; duration];
            for e in &events {
                for t in e.start_s as usize..e.end_s as usize {
                    expect[t] = true;
                }
            }
            prop_assert_eq!(labels, expect);
        }

        #[test]
        fn filtering_never_invents_instances(n in 0usize..30, frac in 0.0f64..1.0) {
            let instances: Vec<WindowInstance> = (0..n).map(|i| {
                let present = (frac * 240.0) as usize;
                WindowInstance {
                    patient_id: format!("p{i}"),
                    target_start_s: i * 60,
                    window_s: 60,
                    ecg_ctx: (0..240).map(|j| if j < present { 0.3 } else { -1.0 }).collect(),
                    spo2_ctx: None,
                    labels: WindowLabels::PerWindow(false),
                }
            }).collect();
            let kept = filter_null_windows(instances.clone());
            prop_assert!(kept.len() <= instances.len());
            let again = filter_null_windows(kept.clone());
            prop_assert_eq!(again.len(), kept.len());
        }
    }
}
