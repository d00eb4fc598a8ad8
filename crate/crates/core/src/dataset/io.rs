//! On-disk formats: the native channel and annotation text files, the
//! binary instance cache, and recording assembly from a set of files.
//!
//! Channel file: UTF-8 text. The first line is
//! `patient_id,channel,rate_hz,start_epoch_s`; every following line is one
//! sample value, or empty for a missing sample.
//!
//! Annotation file: first line is the patient id; every following line is
//! `start_s,end_s,kind`.
//!
//! Instance cache: a 16-byte header (magic `APNW`, u16 version, u32 ECG
//! context length, u32 SpO2 context length, u16 label length), then
//! fixed-size records of little-endian f32 samples `[ecg_ctx | spo2_ctx]`
//! followed by one byte per label. Records are stored pre-filter, so the
//! target window of record `i` starts at `i * window_s` seconds.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{AnnotationEvent, EventKind, Recording, WindowInstance, WindowLabels};
use crate::error::{Error, Result};
use crate::signal::{ChannelKind, SignalChannel};

pub fn write_channel(channel: &SignalChannel, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        w,
        "{},{},{},{}",
        channel.patient_id,
        channel.kind.as_str(),
        channel.rate_hz,
        channel.start_epoch_s
    )
    .map_err(io)?;
    for v in &channel.values {
        if v.is_finite() {
            writeln!(w, "{v}").map_err(io)?;
        } else {
            writeln!(w).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_channel(path: &Path) -> Result<SignalChannel> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::format(path, "empty channel file")),
    };
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 4 {
        return Err(Error::format(
            path,
            format!("line 1: expected patient_id,channel,rate_hz,start_epoch_s, got {header:?}"),
        ));
    }
    let patient_id = fields[0].to_string();
    if patient_id.is_empty() {
        return Err(Error::format(path, "line 1: empty patient_id"));
    }
    let kind = ChannelKind::parse(fields[1])
        .map_err(|e| Error::format(path, format!("line 1: {e}")))?;
    let rate_hz: f64 = fields[2]
        .parse()
        .map_err(|_| Error::format(path, format!("line 1: rate_hz {:?} is not a number", fields[2])))?;
    let start_epoch_s: f64 = fields[3].parse().map_err(|_| {
        Error::format(path, format!("line 1: start_epoch_s {:?} is not a number", fields[3]))
    })?;

    let mut values = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            values.push(f64::NAN);
        } else {
            let v: f64 = line.parse().map_err(|_| {
                Error::format(path, format!("line {}: sample {line:?} is not a number", idx + 1))
            })?;
            values.push(v);
        }
    }
    SignalChannel::new(patient_id, kind, rate_hz, start_epoch_s, values)
}

pub fn write_annotations(patient_id: &str, events: &[AnnotationEvent], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{patient_id}").map_err(io)?;
    for e in events {
        writeln!(w, "{},{},{}", e.start_s, e.end_s, e.kind.as_str()).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Returns the patient id and the events sorted by start time.
pub fn read_annotations(path: &Path) -> Result<(String, Vec<AnnotationEvent>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let patient_id = match lines.next() {
        Some((_, line)) => line.map_err(|e| Error::io(path, e))?,
        None => return Err(Error::format(path, "empty annotation file")),
    };
    if patient_id.is_empty() || patient_id.contains(',') {
        return Err(Error::format(
            path,
            format!("line 1: expected a bare patient id, got {patient_id:?}"),
        ));
    }

    let mut events = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::format(
                path,
                format!("line {lineno}: expected start_s,end_s,kind, got {line:?}"),
            ));
        }
        let start_s: f64 = fields[0].parse().map_err(|_| {
            Error::format(path, format!("line {lineno}: start_s {:?} is not a number", fields[0]))
        })?;
        let end_s: f64 = fields[1].parse().map_err(|_| {
            Error::format(path, format!("line {lineno}: end_s {:?} is not a number", fields[1]))
        })?;
        let kind = EventKind::parse(fields[2])
            .map_err(|e| Error::format(path, format!("line {lineno}: {e}")))?;
        let event = AnnotationEvent::new(start_s, end_s, kind)
            .map_err(|e| Error::format(path, format!("line {lineno}: {e}")))?;
        events.push(event);
    }
    events.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    Ok((patient_id, events))
}

/// Assembles a recording from channel files plus an optional annotation
/// file. Exactly one ECG channel is required; one SpO2 channel may
/// accompany it; every file must agree on the patient id.
pub fn load_recording(channel_paths: &[&Path], annotation_path: Option<&Path>) -> Result<Recording> {
    let mut ecg: Option<SignalChannel> = None;
    let mut spo2: Option<SignalChannel> = None;
    for path in channel_paths {
        let ch = read_channel(path)?;
        let slot = match ch.kind {
            ChannelKind::Ecg => &mut ecg,
            ChannelKind::Spo2 => &mut spo2,
            ChannelKind::HeartRate => {
                return Err(Error::InvalidInput(format!(
                    "{}: heart-rate channels feed alignment, not recording assembly",
                    path.display()
                )))
            }
        };
        if let Some(prev) = slot {
            return Err(Error::InvalidInput(format!(
                "{}: duplicate {} channel (already loaded for {})",
                path.display(),
                ch.kind.as_str(),
                prev.patient_id
            )));
        }
        *slot = Some(ch);
    }
    let ecg = ecg.ok_or_else(|| Error::InvalidInput("no ECG channel among the inputs".into()))?;
    if let Some(spo2) = &spo2 {
        if spo2.patient_id != ecg.patient_id {
            return Err(Error::InvalidInput(format!(
                "channel patient ids disagree: {:?} vs {:?}",
                ecg.patient_id, spo2.patient_id
            )));
        }
    }

    let mut events = Vec::new();
    if let Some(path) = annotation_path {
        let (ann_id, parsed) = read_annotations(path)?;
        if ann_id != ecg.patient_id {
            return Err(Error::InvalidInput(format!(
                "annotation patient id {:?} does not match channel id {:?}",
                ann_id, ecg.patient_id
            )));
        }
        events = parsed;
    }

    Ok(Recording {
        patient_id: ecg.patient_id.clone(),
        ecg,
        spo2,
        events,
        minute_labels: None,
    })
}

const CACHE_MAGIC: &[u8; 4] = b"APNW";
const CACHE_VERSION: u16 = 1;

fn label_bytes(labels: &WindowLabels) -> Vec<u8> {
    match labels {
        WindowLabels::PerSecond(v) => v.iter().map(|&b| b as u8).collect(),
        WindowLabels::PerWindow(b) => vec![*b as u8],
    }
}

/// Writes pre-filter instances of one patient. All records must share one
/// shape and sit at consecutive window offsets, so the reader can
/// reconstruct target starts by index.
pub fn write_instance_cache(instances: &[WindowInstance], path: &Path) -> Result<()> {
    let first = instances
        .first()
        .ok_or_else(|| Error::InvalidInput("refusing to write an empty instance cache".into()))?;
    let ecg_len = first.ecg_ctx.len();
    let spo2_len = first.spo2_ctx.as_ref().map(Vec::len).unwrap_or(0);
    let label_len = first.labels.len();
    let window_s = first.window_s;

    for (i, inst) in instances.iter().enumerate() {
        let matches = inst.ecg_ctx.len() == ecg_len
            && inst.spo2_ctx.as_ref().map(Vec::len).unwrap_or(0) == spo2_len
            && inst.labels.len() == label_len
            && inst.window_s == window_s;
        if !matches {
            return Err(Error::InvalidInput(format!(
                "instance {i} does not match the cache shape of instance 0"
            )));
        }
        if inst.target_start_s != i * window_s {
            return Err(Error::InvalidInput(format!(
                "instance {i} starts at {} s, expected {} s; caches hold pre-filter windows in order",
                inst.target_start_s,
                i * window_s
            )));
        }
    }

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io)?;
    w.write_all(&(ecg_len as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(spo2_len as u32).to_le_bytes()).map_err(io)?;
    w.write_all(&(label_len as u16).to_le_bytes()).map_err(io)?;
    for inst in instances {
        for v in &inst.ecg_ctx {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
        }
        if let Some(spo2) = &inst.spo2_ctx {
            for v in spo2 {
                w.write_all(&(*v as f32).to_le_bytes()).map_err(io)?;
            }
        }
        w.write_all(&label_bytes(&inst.labels)).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_instance_cache(
    path: &Path,
    patient_id: &str,
    window_s: usize,
) -> Result<Vec<WindowInstance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| Error::io(path, e);

    let mut header = [0u8; 16];
    r.read_exact(&mut header).map_err(io)?;
    if &header[..4] != CACHE_MAGIC {
        return Err(Error::format(path, "not an instance cache (bad magic)"));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != CACHE_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported cache version {version} (expected {CACHE_VERSION})"),
        ));
    }
    let ecg_len = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
    let spo2_len = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
    let label_len = u16::from_le_bytes([header[14], header[15]]) as usize;
    if label_len != 1 && label_len != window_s {
        return Err(Error::format(
            path,
            format!("label length {label_len} matches neither 1 nor the {window_s} s window"),
        ));
    }

    let record_bytes = 4 * (ecg_len + spo2_len) + label_len;
    let mut body = Vec::new();
    r.read_to_end(&mut body).map_err(io)?;
    if record_bytes == 0 || body.len() % record_bytes != 0 {
        return Err(Error::format(
            path,
            format!("{} payload bytes is not a whole number of {record_bytes}-byte records", body.len()),
        ));
    }

    let read_f32s = |bytes: &[u8]| -> Vec<f64> {
        bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect()
    };

    let mut instances = Vec::with_capacity(body.len() / record_bytes);
    for (i, rec) in body.chunks_exact(record_bytes).enumerate() {
        let (ecg_b, rest) = rec.split_at(4 * ecg_len);
        let (spo2_b, label_b) = rest.split_at(4 * spo2_len);
        let labels = if label_len == 1 && window_s != 1 {
            WindowLabels::PerWindow(label_b[0] != 0)
        } else {
            WindowLabels::PerSecond(label_b.iter().map(|&b| b != 0).collect())
        };
        for (j, b) in label_b.iter().enumerate() {
            if *b > 1 {
                return Err(Error::format(
                    path,
                    format!("record {i}: label byte {j} is {b}, expected 0 or 1"),
                ));
            }
        }
        instances.push(WindowInstance {
            patient_id: patient_id.to_string(),
            target_start_s: i * window_s,
            window_s,
            ecg_ctx: read_f32s(ecg_b),
            spo2_ctx: if spo2_len > 0 { Some(read_f32s(spo2_b)) } else { None },
            labels,
        });
    }
    Ok(instances)
}
