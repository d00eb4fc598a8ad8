//! Synthetic overnight recordings: a pulse-train ECG whose amplitude dips
//! during apneic events, and an SpO2 trace that desaturates shortly after
//! each event. Useful for end-to-end tests and as a smoke corpus.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AnnotationEvent, EventKind, Recording};
use crate::error::{Error, Result};
use crate::signal::{ChannelKind, SignalChannel};

pub const MIN_EVENT_LEN_S: usize = 15;
pub const MAX_EVENT_LEN_S: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Recording length per patient, in seconds.
    pub duration_s: usize,
    pub ecg_rate_hz: usize,
    /// Approximate events per hour.
    pub event_rate_per_hour: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { duration_s: 2400, ecg_rate_hz: 80, event_rate_per_hour: 25.0, seed: 0 }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.duration_s < 3 * MAX_EVENT_LEN_S {
            return Err(Error::InvalidConfig(format!(
                "recording of {} s is too short to place events",
                self.duration_s
            )));
        }
        if self.ecg_rate_hz == 0 {
            return Err(Error::InvalidConfig("ECG rate must be positive".into()));
        }
        if !(self.event_rate_per_hour > 0.0 && self.event_rate_per_hour <= 60.0) {
            return Err(Error::InvalidConfig(format!(
                "event rate per hour must lie in (0, 60], got {}",
                self.event_rate_per_hour
            )));
        }
        Ok(())
    }
}

/// Integer-aligned events with at least 15 s between them.
fn place_events(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Result<Vec<AnnotationEvent>> {
    let mean_len = (MIN_EVENT_LEN_S + MAX_EVENT_LEN_S) as f64 / 2.0;
    let mean_gap = (3600.0 / cfg.event_rate_per_hour - mean_len).max(15.0);
    let mut events = Vec::new();
    let mut t = rng.random_range(20..60);
    loop {
        let len = rng.random_range(MIN_EVENT_LEN_S..=MAX_EVENT_LEN_S);
        // Stay clear of the trailing edge so desaturations fit.
        if t + len + MAX_EVENT_LEN_S > cfg.duration_s {
            break;
        }
        events.push(AnnotationEvent::new(
            t as f64,
            (t + len) as f64,
            EventKind::ObstructiveApnea,
        )?);
        let gap = rng.random_range((0.5 * mean_gap)..(1.5 * mean_gap)).max(15.0);
        t += len + gap.round() as usize;
    }
    Ok(events)
}

/// Trapezoidal 0..1 envelope over `[start, end)` with 3 s shoulders.
fn event_envelope(t: f64, start: f64, end: f64) -> f64 {
    if t <= start || t >= end {
        return 0.0;
    }
    let rise = ((t - start) / 3.0).min(1.0);
    let fall = ((end - t) / 3.0).min(1.0);
    rise.min(fall)
}

fn ecg_samples(
    cfg: &SynthConfig,
    events: &[(f64, f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let n = cfg.duration_s * cfg.ecg_rate_hz;
    let rr = rng.random_range(0.7..1.0);
    let wander_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 / cfg.ecg_rate_hz as f64;
        let mut amp = 1.0;
        for &(start, end, depth) in events {
            amp -= depth * event_envelope(t, start, end);
        }
        let tm = t % rr;
        let qrs = (-((tm - 0.3 * rr) / 0.02).powi(2)).exp();
        let t_wave = 0.25 * (-((tm - 0.55 * rr) / 0.06).powi(2)).exp();
        let wander = 0.05 * (std::f64::consts::TAU * 0.05 * t + wander_phase).sin();
        let noise = 0.03 * (rng.random::<f64>() - 0.5);
        out.push(amp.max(0.05) * (qrs + t_wave) + wander + noise);
    }
    out
}

fn spo2_samples(
    cfg: &SynthConfig,
    events: &[(f64, f64, f64)],
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let drift_phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut out = Vec::with_capacity(cfg.duration_s);
    for s in 0..cfg.duration_s {
        let t = s as f64;
        let mut dip: f64 = 0.0;
        for &(start, end, depth) in events {
            // Saturation falls from 5 s after onset, reaches its nadir 5 s
            // after the event ends, and recovers over the next 20 s.
            let desat = 6.0 * depth;
            let nadir = end + 5.0;
            let d = if t <= start + 5.0 || t >= nadir + 20.0 {
                0.0
            } else if t <= nadir {
                desat * (t - start - 5.0) / (nadir - start - 5.0)
            } else {
                desat * (1.0 - (t - nadir) / 20.0)
            };
            dip = dip.max(d);
        }
        let drift = 0.5 * (std::f64::consts::TAU * t / 300.0 + drift_phase).sin();
        let noise = 0.2 * (rng.random::<f64>() - 0.5);
        out.push((97.5 + drift - dip + noise).clamp(80.0, 100.0));
    }
    out
}

/// One synthetic patient, deterministic in `patient_seed`.
pub fn synth_recording(
    patient_id: &str,
    cfg: &SynthConfig,
    patient_seed: u64,
) -> Result<Recording> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(patient_seed);
    let events = place_events(cfg, &mut rng)?;
    let shaped: Vec<(f64, f64, f64)> = events
        .iter()
        .map(|e| (e.start_s, e.end_s, rng.random_range(0.5..0.8)))
        .collect();
    let ecg = SignalChannel::new(
        patient_id.to_string(),
        ChannelKind::Ecg,
        cfg.ecg_rate_hz as f64,
        0.0,
        ecg_samples(cfg, &shaped, &mut rng),
    )?;
    let spo2 = SignalChannel::new(
        patient_id.to_string(),
        ChannelKind::Spo2,
        1.0,
        0.0,
        spo2_samples(cfg, &shaped, &mut rng),
    )?;
    Ok(Recording { patient_id: patient_id.to_string(), ecg, spo2: Some(spo2), events, minute_labels: None })
}

/// `n_patients` recordings named `synth00`, `synth01`, ... with seeds
/// derived from `cfg.seed`.
pub fn synth_cohort(n_patients: usize, cfg: &SynthConfig) -> Result<Vec<Recording>> {
    if n_patients == 0 {
        return Err(Error::InvalidConfig("cohort needs at least one patient".into()));
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..n_patients)
        .map(|i| {
            let seed: u64 = seeder.random();
            synth_recording(&format!("synth{i:02}"), cfg, seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::preprocess_recording;
    use crate::signal::BandpassSpec;

    fn small_cfg() -> SynthConfig {
        SynthConfig { duration_s: 600, ecg_rate_hz: 20, event_rate_per_hour: 30.0, seed: 4 }
    }

    #[test]
    fn recordings_are_deterministic_in_the_seed() {
        let cfg = small_cfg();
        let a = synth_recording("p", &cfg, 11).unwrap();
        let b = synth_recording("p", &cfg, 11).unwrap();
        assert_eq!(a.ecg.values, b.ecg.values);
        assert_eq!(a.spo2.as_ref().unwrap().values, b.spo2.as_ref().unwrap().values);
        assert_eq!(a.events.len(), b.events.len());

        let c = synth_recording("p", &cfg, 12).unwrap();
        assert_ne!(a.ecg.values, c.ecg.values);
    }

    #[test]
    fn events_are_bounded_spaced_and_inside_the_recording() {
        let cfg = small_cfg();
        for seed in 0..8 {
            let r = synth_recording("p", &cfg, seed).unwrap();
            assert!(!r.events.is_empty());
            let mut prev_end = 0.0;
            for e in &r.events {
                let len = e.end_s - e.start_s;
                assert!((MIN_EVENT_LEN_S as f64..=MAX_EVENT_LEN_S as f64).contains(&len));
                assert_eq!(e.start_s.fract(), 0.0);
                assert_eq!(e.end_s.fract(), 0.0);
                assert!(e.start_s - prev_end >= 15.0);
                assert!(e.end_s <= cfg.duration_s as f64);
                prev_end = e.end_s;
            }
        }
    }

    #[test]
    fn signals_have_declared_shapes_and_sane_ranges() {
        let cfg = small_cfg();
        let r = synth_recording("p", &cfg, 3).unwrap();
        assert_eq!(r.ecg.values.len(), cfg.duration_s * cfg.ecg_rate_hz);
        let spo2 = r.spo2.as_ref().unwrap();
        assert_eq!(spo2.values.len(), cfg.duration_s);
        assert!(spo2.values.iter().all(|&v| (80.0..=100.0).contains(&v)));
        assert_eq!(r.ecg.n_missing(), 0);

        // Desaturations actually occur.
        let min = spo2.values.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min < 95.5, "no visible desaturation, min {min}");
    }

    #[test]
    fn cohort_ids_are_unique_and_patients_differ() {
        let cohort = synth_cohort(4, &small_cfg()).unwrap();
        assert_eq!(cohort.len(), 4);
        let ids: Vec<&str> = cohort.iter().map(|r| r.patient_id.as_str()).collect();
        assert_eq!(ids, vec!["synth00", "synth01", "synth02", "synth03"]);
        assert_ne!(cohort[0].ecg.values, cohort[1].ecg.values);
        assert!(synth_cohort(0, &small_cfg()).is_err());
    }

    #[test]
    fn cohort_feeds_the_preprocessing_chain() {
        let cfg = small_cfg();
        let rec = synth_recording("p", &cfg, 9).unwrap();
        let bp = BandpassSpec { low_hz: 2.0, high_hz: 8.0, ..BandpassSpec::default() };
        let instances = preprocess_recording(&rec, &bp, 60).unwrap();
        assert_eq!(instances.len(), cfg.duration_s / 60);
        // Some windows are apneic, some are not.
        let pos = instances.iter().filter(|i| i.labels.window_label()).count();
        assert!(pos > 0 && pos < instances.len());
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let mut cfg = small_cfg();
        cfg.duration_s = 60;
        assert!(synth_recording("p", &cfg, 0).is_err());
        let mut cfg = small_cfg();
        cfg.event_rate_per_hour = 0.0;
        assert!(synth_recording("p", &cfg, 0).is_err());
    }
}
