//! Importer for the minute-labeled ECG corpus in its plain-text export
//! form. Each subject contributes two files in one directory:
//!
//! - `<subject>.ecg.txt` — one ECG sample per line, 100 Hz
//! - `<subject>.apn.txt` — one minute label per line, `A` (apnea) or `N`
//!
//! (These are the signal column of `rdsamp -r <subject> -p` and the
//! annotation column of `rdann -r <subject> -a apn`; the recipe is in the
//! README.) Subjects `a*`, `b*`, `c*` form the official training half,
//! `x*` the official test half.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::Recording;
use crate::error::{Error, Result};
use crate::signal::{ChannelKind, SignalChannel};

pub const APNEA_ECG_RATE_HZ: usize = 100;
const MINUTE_SAMPLES: usize = 60 * APNEA_ECG_RATE_HZ;

#[derive(Debug)]
pub struct ApneaEcgImport {
    pub recording: Recording,
    /// True for the official held-out half (`x*` subjects).
    pub official_test: bool,
}

#[derive(Debug)]
pub struct ApneaEcgOutcome {
    pub recordings: Vec<ApneaEcgImport>,
    /// Human-readable notes about reconciled boundary minutes.
    pub warnings: Vec<String>,
}

fn official_test(subject: &str) -> Result<bool> {
    match subject.chars().next() {
        Some('a') | Some('b') | Some('c') => Ok(false),
        Some('x') => Ok(true),
        _ => Err(Error::InvalidInput(format!(
            "subject {subject:?} has no official split (expected an a/b/c/x prefix)"
        ))),
    }
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut values = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let v: f64 = line.trim().parse().map_err(|_| {
            Error::format(path, format!("line {}: sample {line:?} is not a number", idx + 1))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::format(path, "no samples"));
    }
    Ok(values)
}

fn read_minute_labels(path: &Path) -> Result<Vec<bool>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        match line.trim() {
            "A" => labels.push(true),
            "N" => labels.push(false),
            other => {
                return Err(Error::format(
                    path,
                    format!("line {}: label {other:?} is neither A nor N", idx + 1),
                ))
            }
        }
    }
    if labels.is_empty() {
        return Err(Error::format(path, "no minute labels"));
    }
    Ok(labels)
}

/// Reconciles sample and label counts to whole labeled minutes. A
/// disagreement of up to one minute is repaired (a truncated final minute
/// drops its label with a warning); anything larger is an import error.
fn reconcile(
    subject: &str,
    mut samples: Vec<f64>,
    mut labels: Vec<bool>,
    warnings: &mut Vec<String>,
) -> Result<(Vec<f64>, Vec<bool>)> {
    let signal_s = samples.len() as f64 / APNEA_ECG_RATE_HZ as f64;
    let labeled_s = (labels.len() * 60) as f64;
    if (signal_s - labeled_s).abs() > 60.0 {
        return Err(Error::InvalidInput(format!(
            "subject {subject}: {signal_s} s of signal vs {labeled_s} s of labels; \
             disagreement exceeds one minute"
        )));
    }
    if samples.len() < labels.len() * MINUTE_SAMPLES {
        labels.pop();
        warnings.push(format!(
            "subject {subject}: final minute truncated ({} of {MINUTE_SAMPLES} samples); label dropped",
            samples.len() - labels.len() * MINUTE_SAMPLES
        ));
    }
    samples.truncate(labels.len() * MINUTE_SAMPLES);
    if labels.is_empty() {
        return Err(Error::InvalidInput(format!(
            "subject {subject}: no whole labeled minutes after reconciliation"
        )));
    }
    Ok((samples, labels))
}

/// Imports every subject found in `dir` (by its `*.ecg.txt` files, in
/// sorted order).
pub fn import_apnea_ecg(dir: &Path) -> Result<ApneaEcgOutcome> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut subjects = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(subject) = name.strip_suffix(".ecg.txt") {
            subjects.push(subject.to_string());
        }
    }
    if subjects.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no subjects in {} (expected <subject>.ecg.txt files)",
            dir.display()
        )));
    }
    subjects.sort();

    let mut warnings = Vec::new();
    let mut recordings = Vec::new();
    for subject in &subjects {
        let official_test = official_test(subject)?;
        let samples = read_samples(&dir.join(format!("{subject}.ecg.txt")))?;
        let labels = read_minute_labels(&dir.join(format!("{subject}.apn.txt")))?;
        let (samples, labels) = reconcile(subject, samples, labels, &mut warnings)?;
        let ecg = SignalChannel::new(
            subject.clone(),
            ChannelKind::Ecg,
            APNEA_ECG_RATE_HZ as f64,
            0.0,
            samples,
        )?;
        recordings.push(ApneaEcgImport {
            recording: Recording {
                patient_id: subject.clone(),
                ecg,
                spo2: None,
                events: vec![],
                minute_labels: Some(labels),
            },
            official_test,
        });
    }
    Ok(ApneaEcgOutcome { recordings, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fmt::Write as _;

    fn write_subject(dir: &Path, subject: &str, n_samples: usize, labels: &str) {
        let mut body = String::new();
        for i in 0..n_samples {
            writeln!(body, "{}", (i % 7) as f64 * 0.1 - 0.3).unwrap();
        }
        std::fs::write(dir.join(format!("{subject}.ecg.txt")), body).unwrap();
        let labels: String = labels.chars().map(|c| format!("{c}\n")).collect();
        std::fs::write(dir.join(format!("{subject}.apn.txt")), labels).unwrap();
    }

    #[test]
    fn imports_consistent_subjects_with_split_membership() {
        let dir = tempfile::tempdir().unwrap();
        write_subject(dir.path(), "a01", 3 * MINUTE_SAMPLES, "ANA");
        write_subject(dir.path(), "x01", 2 * MINUTE_SAMPLES, "NN");

        let out = import_apnea_ecg(dir.path()).unwrap();
        assert!(out.warnings.is_empty());
        assert_eq!(out.recordings.len(), 2);

        let a01 = &out.recordings[0];
        assert_eq!(a01.recording.patient_id, "a01");
        assert!(!a01.official_test);
        assert_eq!(a01.recording.ecg.rate_hz, 100.0);
        assert_eq!(a01.recording.ecg.len(), 18000);
        assert_eq!(a01.recording.minute_labels, Some(vec![true, false, true]));

        let x01 = &out.recordings[1];
        assert!(x01.official_test);
        assert_eq!(x01.recording.minute_labels, Some(vec![false, false]));
    }

    #[test]
    fn truncated_final_minute_drops_its_label_with_a_warning() {
        let dir = tempfile::tempdir().unwrap();
        write_subject(dir.path(), "b01", MINUTE_SAMPLES + 2500, "NA");

        let out = import_apnea_ecg(dir.path()).unwrap();
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("b01"), "{}", out.warnings[0]);
        let rec = &out.recordings[0].recording;
        assert_eq!(rec.minute_labels, Some(vec![false]));
        assert_eq!(rec.ecg.len(), MINUTE_SAMPLES);
    }

    #[test]
    fn surplus_signal_within_a_minute_is_trimmed_silently() {
        let dir = tempfile::tempdir().unwrap();
        write_subject(dir.path(), "c01", 2 * MINUTE_SAMPLES + 30, "NA");
        let out = import_apnea_ecg(dir.path()).unwrap();
        assert!(out.warnings.is_empty());
        let rec = &out.recordings[0].recording;
        assert_eq!(rec.ecg.len(), 2 * MINUTE_SAMPLES);
        assert_eq!(rec.minute_labels.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn disagreement_beyond_one_minute_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        write_subject(dir.path(), "a02", MINUTE_SAMPLES, "NNN");
        let err = import_apnea_ecg(dir.path()).unwrap_err().to_string();
        assert!(err.contains("a02"), "{err}");
    }

    #[test]
    fn rejects_unknown_subjects_bad_labels_and_empty_dirs() {
        let dir = tempfile::tempdir().unwrap();
        assert!(import_apnea_ecg(dir.path()).is_err());

        write_subject(dir.path(), "q01", MINUTE_SAMPLES, "N");
        let err = import_apnea_ecg(dir.path()).unwrap_err().to_string();
        assert!(err.contains("q01"), "{err}");
        std::fs::remove_file(dir.path().join("q01.ecg.txt")).unwrap();
        std::fs::remove_file(dir.path().join("q01.apn.txt")).unwrap();

        write_subject(dir.path(), "a03", MINUTE_SAMPLES, "Z");
        let err = import_apnea_ecg(dir.path()).unwrap_err().to_string();
        assert!(err.contains("line 1"), "{err}");
    }
}
