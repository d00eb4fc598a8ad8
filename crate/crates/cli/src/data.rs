//! Filesystem conventions shared by the subcommands. A dataset directory
//! holds `<patient>.ecg.csv` channels with optional `<patient>.spo2.csv`
//! and `<patient>.events.csv`; a preprocessed directory holds
//! `<patient>.windows.bin` caches of pre-filter instances.

use std::fs;
use std::path::{Path, PathBuf};

use apnea_core::dataset::io::{load_recording, read_annotations, read_instance_cache};
use apnea_core::dataset::{
    filter_null_windows, preprocess_recording, AnnotationEvent, Recording, WindowInstance,
};
use apnea_core::signal::BandpassSpec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::CliError;

pub const ECG_SUFFIX: &str = ".ecg.csv";
pub const SPO2_SUFFIX: &str = ".spo2.csv";
pub const EVENTS_SUFFIX: &str = ".events.csv";
pub const WINDOWS_SUFFIX: &str = ".windows.bin";

pub fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", path.display())))
}

fn ids_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<String>, CliError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", dir.display())))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
        if let Some(name) = entry.file_name().to_str() {
            if let Some(id) = name.strip_suffix(suffix) {
                ids.push(id.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Patients already present in a dataset directory; empty is fine.
pub fn existing_patients(dir: &Path) -> Result<Vec<String>, CliError> {
    ids_with_suffix(dir, ECG_SUFFIX)
}

/// Patients in a dataset directory, by their ECG channel files.
pub fn discover_patients(dir: &Path) -> Result<Vec<String>, CliError> {
    let ids = ids_with_suffix(dir, ECG_SUFFIX)?;
    if ids.is_empty() {
        return Err(CliError::Usage(format!(
            "{} contains no *{ECG_SUFFIX} channels",
            dir.display()
        )));
    }
    Ok(ids)
}

pub fn load_patient_recording(dir: &Path, id: &str) -> Result<Recording, CliError> {
    let ecg = dir.join(format!("{id}{ECG_SUFFIX}"));
    let spo2 = dir.join(format!("{id}{SPO2_SUFFIX}"));
    let events = dir.join(format!("{id}{EVENTS_SUFFIX}"));
    let mut channels: Vec<&Path> = vec![&ecg];
    if spo2.exists() {
        channels.push(&spo2);
    }
    let annotations = events.exists().then_some(events.as_path());
    load_recording(&channels, annotations).map_err(runtime)
}

pub fn load_patient_events(dir: &Path, id: &str) -> Result<Vec<AnnotationEvent>, CliError> {
    let path = dir.join(format!("{id}{EVENTS_SUFFIX}"));
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "{}: no annotations for {id}",
            path.display()
        )));
    }
    let (file_id, events) = read_annotations(&path).map_err(runtime)?;
    if file_id != id {
        return Err(CliError::Runtime(format!(
            "{} is annotated for {file_id}, not {id}",
            path.display()
        )));
    }
    Ok(events)
}

/// Filters and windows every patient of a dataset directory in memory,
/// for commands that retrain per fold and have no use for caches.
pub fn preprocess_patients(
    dir: &Path,
    bandpass: &BandpassSpec,
    window_s: usize,
) -> Result<Vec<(String, Vec<WindowInstance>)>, CliError> {
    let ids = discover_patients(dir)?;
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let rec = load_patient_recording(dir, &id)?;
        let instances = preprocess_recording(&rec, bandpass, window_s).map_err(runtime)?;
        out.push((id, instances));
    }
    Ok(out)
}

/// Loads every window cache in a preprocessed directory and drops the
/// all-missing windows, keyed by patient.
pub fn load_windows_dir(
    dir: &Path,
    window_s: usize,
) -> Result<Vec<(String, Vec<WindowInstance>)>, CliError> {
    let ids = ids_with_suffix(dir, WINDOWS_SUFFIX)?;
    if ids.is_empty() {
        return Err(CliError::Usage(format!(
            "{} contains no *{WINDOWS_SUFFIX} caches; run preprocess first",
            dir.display()
        )));
    }
    let mut out = Vec::with_capacity(ids.len());
    for id in ids {
        let path = dir.join(format!("{id}{WINDOWS_SUFFIX}"));
        let instances = read_instance_cache(&path, &id, window_s).map_err(runtime)?;
        out.push((id, filter_null_windows(instances)));
    }
    Ok(out)
}

/// Splits patient groups into train and validation sets: ids are sorted,
/// shuffled by the seed, and the first `n_validation` held out. Matches
/// the in-core recording split so the two stay interchangeable.
pub fn split_groups(
    groups: Vec<(String, Vec<WindowInstance>)>,
    n_validation: usize,
    seed: u64,
) -> Result<(Vec<WindowInstance>, Vec<WindowInstance>), CliError> {
    let mut ids: Vec<String> = groups.iter().map(|(id, _)| id.clone()).collect();
    ids.sort();
    ids.dedup();
    if n_validation == 0 || n_validation >= ids.len() {
        return Err(CliError::Usage(format!(
            "cannot hold out {n_validation} of {} patients",
            ids.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let val_ids: std::collections::HashSet<&String> = ids.iter().take(n_validation).collect();

    let mut train = Vec::new();
    let mut val = Vec::new();
    for (id, instances) in groups {
        if val_ids.contains(&id) {
            val.extend(instances);
        } else {
            train.extend(instances);
        }
    }
    Ok((train, val))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn channel_path(dir: &Path, id: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{id}{suffix}"))
}
