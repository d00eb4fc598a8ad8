//! Run configuration: TOML file under explicit flags, defaults underneath.
//! Unknown keys are rejected so typos fail loudly instead of silently
//! falling back to defaults.

use std::fs;
use std::path::Path;

use apnea_core::nn::{ModelSpec, ModelVariant};
use apnea_core::scoring::{ReportConfig, DEFAULT_THRESHOLD, MIN_EVENT_S};
use apnea_core::signal::BandpassSpec;
use apnea_core::synth::SynthConfig;
use apnea_core::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Base seed for splits, parameter init, and training order.
    pub seed: u64,
    /// Worker thread cap; 0 keeps the pool at its default size.
    pub threads: usize,
    pub bandpass: BandpassSection,
    pub windowing: WindowingSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub scoring: ScoringSection,
    pub synth: SynthSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            bandpass: BandpassSection::default(),
            windowing: WindowingSection::default(),
            model: ModelSection::default(),
            train: TrainSection::default(),
            scoring: ScoringSection::default(),
            synth: SynthSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandpassSection {
    pub order: usize,
    pub low_hz: f64,
    pub high_hz: f64,
    pub zero_phase: bool,
}

impl Default for BandpassSection {
    fn default() -> Self {
        let s = BandpassSpec::default();
        BandpassSection {
            order: s.order,
            low_hz: s.low_hz,
            high_hz: s.high_hz,
            zero_phase: s.zero_phase,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowingSection {
    pub window_s: usize,
}

impl Default for WindowingSection {
    fn default() -> Self {
        WindowingSection { window_s: 60 }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// One of cnn_dense, cnn_lstm, spo2_bilstm, cnn_lstm_spo2.
    pub variant: String,
    pub ecg_rate_hz: usize,
    /// Scores per window: the window length for per-second labels, 1 for
    /// whole-window labels.
    pub output_len: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            variant: "cnn_lstm_spo2".into(),
            ecg_rate_hz: 80,
            output_len: 60,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub base_lr: f64,
    pub max_lr: f64,
    pub epochs: usize,
    /// Schedule horizon; training early-stops at `epochs`.
    pub max_epochs: usize,
    pub base_momentum: f64,
    pub max_momentum: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Weight of anomalous elements in the loss; inverse class frequency
    /// of the training labels when absent.
    pub class_weight_positive: Option<f64>,
    pub n_validation_patients: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::per_second();
        TrainSection {
            base_lr: t.base_lr,
            max_lr: t.max_lr,
            epochs: t.epochs,
            max_epochs: t.max_epochs,
            base_momentum: t.base_momentum,
            max_momentum: t.max_momentum,
            batch_size: t.batch_size,
            clip_norm: t.clip_norm,
            class_weight_positive: None,
            n_validation_patients: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    /// Probability threshold for an apneic second.
    pub tau: f64,
    /// Events shorter than this are discarded.
    pub min_event_s: usize,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection {
            tau: DEFAULT_THRESHOLD,
            min_event_s: MIN_EVENT_S,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub patients: usize,
    pub duration_s: usize,
    pub ecg_rate_hz: usize,
    pub event_rate_per_hour: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let s = SynthConfig::default();
        SynthSection {
            patients: 8,
            duration_s: s.duration_s,
            ecg_rate_hz: s.ecg_rate_hz,
            event_rate_per_hour: s.event_rate_per_hour,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn bandpass_spec(&self) -> BandpassSpec {
        BandpassSpec {
            order: self.bandpass.order,
            low_hz: self.bandpass.low_hz,
            high_hz: self.bandpass.high_hz,
            zero_phase: self.bandpass.zero_phase,
        }
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        let variant = ModelVariant::parse(&self.model.variant)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        let mut spec = ModelSpec::new(variant, self.model.ecg_rate_hz)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        spec.output_len = self.model.output_len;
        spec.window_s = self.windowing.window_s;
        spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(spec)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            base_lr: self.train.base_lr,
            max_lr: self.train.max_lr,
            epochs: self.train.epochs,
            max_epochs: self.train.max_epochs,
            base_momentum: self.train.base_momentum,
            max_momentum: self.train.max_momentum,
            batch_size: self.train.batch_size,
            clip_norm: self.train.clip_norm,
            class_weight_positive: self.train.class_weight_positive,
            seed: self.seed,
        }
    }

    pub fn report_config(&self) -> Result<ReportConfig, CliError> {
        let cfg = ReportConfig {
            window_s: self.windowing.window_s,
            tau: self.scoring.tau,
            min_event_s: self.scoring.min_event_s,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            duration_s: self.synth.duration_s,
            ecg_rate_hz: self.synth.ecg_rate_hz,
            event_rate_per_hour: self.synth.event_rate_per_hour,
            seed: self.seed,
        }
    }

    /// Writes the fully resolved configuration next to a command's outputs
    /// so a run can be reproduced from its artifacts alone.
    pub fn write_resolved(&self, dir: &Path) -> Result<(), CliError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Runtime(format!("serializing config: {e}")))?;
        let path = dir.join("config.toml");
        fs::write(&path, text)
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", path.display())))
    }
}
