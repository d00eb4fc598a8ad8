//! Detection of obstructive sleep apnea events at one-second granularity
//! from ECG and SpO2 time series.
//!
//! The pipeline stages, one module each:
//!
//! - [`signal`]: Butterworth bandpass filtering, min-max normalization,
//!   missing-sample encoding, and inter-device clock alignment.
//! - [`dataset`]: recording/annotation ingest, 60-second windowing with
//!   a three-window context, null-window filtering, patient-grouped splits.
//! - [`nn`]: the differentiable numerical core — dilated depthwise-separable
//!   conv blocks, LSTM/BiLSTM heads, and the four model variants.
//! - [`train`]: weighted squared hinge loss, Adam, one-cycle schedule,
//!   gradient clipping, and the training loop.
//! - [`scoring`]: score post-processing, event extraction, AHI and severity
//!   classes, per-second metrics, AUC, per-patient reports, leave-one-patient-out
//!   cross-validation, and the training-fraction sweep.
//! - [`synth`]: synthetic patient generator used by tests and demos.
//!
//! Batch inference, per-patient pipelines, CV folds, and sweep repeats run
//! data-parallel on rayon when the `parallel` feature (default) is enabled;
//! disabling it yields a fully sequential build with identical results.

pub mod dataset;
pub mod error;
pub mod exec;
pub mod nn;
pub mod scoring;
pub mod signal;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
