//! Training: config presets, instance batching, and the loop wiring the
//! one-cycle schedule, Adam, gradient clipping, and per-epoch validation
//! metrics together.
//!
//! The schedule spans `max_epochs` worth of steps; training stops after
//! `epochs` (an early-stop point inside the planned cycle). A run is
//! bitwise reproducible from (seed, config, data).

pub mod loss;
pub mod optim;
pub mod schedule;

pub use loss::{inverse_class_weight, weighted_squared_hinge, LossValue};
pub use optim::{clip_gradients, Adam};
pub use schedule::OneCycle;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{WindowInstance, WindowLabels};
use crate::error::{Error, Result};
use crate::nn::{Model, ModelSpec, Parameterized, Phase, Tensor2, Tensor3};
use crate::scoring;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub max_lr: f64,
    /// Epochs actually run.
    pub epochs: usize,
    /// Epochs the one-cycle schedule is laid out over.
    pub max_epochs: usize,
    pub base_momentum: f64,
    pub max_momentum: f64,
    pub batch_size: usize,
    pub clip_norm: f64,
    /// Positive-class loss weight; None derives it from the training fold
    /// as negatives/positives.
    pub class_weight_positive: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    /// Preset for the minute-labeled 100 Hz convention.
    pub fn apnea_ecg() -> Self {
        TrainConfig {
            base_lr: 3e-4,
            max_lr: 1e-1,
            epochs: 239,
            max_epochs: 300,
            base_momentum: 0.85,
            max_momentum: 0.95,
            batch_size: 32,
            clip_norm: 1.0,
            class_weight_positive: None,
            seed: 0,
        }
    }

    /// Preset for the per-second 80 Hz convention.
    pub fn per_second() -> Self {
        TrainConfig {
            base_lr: 3e-4,
            max_lr: 1e-2,
            epochs: 191,
            max_epochs: 200,
            base_momentum: 0.78,
            max_momentum: 0.99,
            batch_size: 32,
            clip_norm: 1.0,
            class_weight_positive: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr < self.max_lr) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < base_lr < max_lr, got {}/{}",
                self.base_lr, self.max_lr
            )));
        }
        if self.epochs > self.max_epochs {
            return Err(Error::InvalidConfig(format!(
                "epochs {} exceeds the {}-epoch schedule span",
                self.epochs, self.max_epochs
            )));
        }
        if !(0.0 < self.base_momentum
            && self.base_momentum <= self.max_momentum
            && self.max_momentum < 1.0)
        {
            return Err(Error::InvalidConfig(format!(
                "need 0 < base_momentum <= max_momentum < 1, got {}/{}",
                self.base_momentum, self.max_momentum
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "clip norm must be positive, got {}",
                self.clip_norm
            )));
        }
        if let Some(w) = self.class_weight_positive {
            if !(w > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "class weight must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// Model inputs for a batch of instances, in instance order.
pub struct Batch {
    pub ecg: Option<Tensor3>,
    pub spo2: Option<Tensor3>,
}

/// Stacks the signal contexts the spec's variant consumes.
pub fn batch_signals(instances: &[&WindowInstance], spec: &ModelSpec) -> Result<Batch> {
    let n = instances.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let ecg = if spec.variant.uses_ecg() {
        let len = spec.ecg_len();
        let mut t = Tensor3::zeros(n, 1, len);
        for (i, inst) in instances.iter().enumerate() {
            if inst.ecg_ctx.len() != len {
                return Err(Error::InvalidInput(format!(
                    "instance {i} has {} ECG samples, the model expects {len}",
                    inst.ecg_ctx.len()
                )));
            }
            t.row_mut(i, 0).copy_from_slice(&inst.ecg_ctx);
        }
        Some(t)
    } else {
        None
    };
    let spo2 = if spec.variant.uses_spo2() {
        let len = spec.spo2_len();
        let mut t = Tensor3::zeros(n, 1, len);
        for (i, inst) in instances.iter().enumerate() {
            let ctx = inst.spo2_ctx.as_ref().ok_or_else(|| {
                Error::InvalidInput(format!(
                    "instance {i} has no SpO2 context but variant {} needs one",
                    spec.variant.as_str()
                ))
            })?;
            if ctx.len() != len {
                return Err(Error::InvalidInput(format!(
                    "instance {i} has {} SpO2 samples, the model expects {len}",
                    ctx.len()
                )));
            }
            t.row_mut(i, 0).copy_from_slice(ctx);
        }
        Some(t)
    } else {
        None
    };
    Ok(Batch { ecg, spo2 })
}

/// ±1 training targets, `[n, output_len]`.
pub fn batch_targets(instances: &[&WindowInstance], spec: &ModelSpec) -> Result<Tensor2> {
    let n = instances.len();
    let mut t = Tensor2::zeros(n, spec.output_len);
    for (i, inst) in instances.iter().enumerate() {
        if spec.output_len == 1 {
            *t.at_mut(i, 0) = if inst.labels.window_label() { 1.0 } else { -1.0 };
        } else {
            match &inst.labels {
                WindowLabels::PerSecond(v) if v.len() == spec.output_len => {
                    for (j, &b) in v.iter().enumerate() {
                        *t.at_mut(i, j) = if b { 1.0 } else { -1.0 };
                    }
                }
                WindowLabels::PerSecond(v) => {
                    return Err(Error::InvalidInput(format!(
                        "instance {i} has {} per-second labels, the model emits {}",
                        v.len(),
                        spec.output_len
                    )))
                }
                WindowLabels::PerWindow(_) => {
                    return Err(Error::InvalidInput(format!(
                        "instance {i} carries one label per window; a {}-output model needs per-second labels",
                        spec.output_len
                    )))
                }
            }
        }
    }
    Ok(t)
}

/// Boolean targets in the layout `batch_targets` uses, flattened.
pub fn flat_labels(instances: &[&WindowInstance], spec: &ModelSpec) -> Result<Vec<bool>> {
    let t = batch_targets(instances, spec)?;
    Ok(t.data.iter().map(|&v| v > 0.0).collect())
}

/// Eval-phase scores for every instance, one row per instance, computed in
/// batches of `batch_size`.
pub fn eval_scores(
    model: &mut Model,
    instances: &[WindowInstance],
    batch_size: usize,
) -> Result<Vec<Vec<f64>>> {
    let spec = model.spec.clone();
    let mut out = Vec::with_capacity(instances.len());
    for chunk in instances.chunks(batch_size.max(1)) {
        let refs: Vec<&WindowInstance> = chunk.iter().collect();
        let batch = batch_signals(&refs, &spec)?;
        let scores = model.forward(batch.ecg.as_ref(), batch.spo2.as_ref(), &mut Phase::Eval)?;
        for r in 0..scores.rows {
            out.push(scores.row(r).to_vec());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
    pub val_auc: f64,
    /// Learning rate at the epoch's first step.
    pub lr: f64,
}

pub fn write_history_csv(history: &[EpochStats], path: &Path) -> Result<()> {
    let mut s = String::from("epoch,train_loss,val_f1,val_auc,lr\n");
    for h in history {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            h.epoch, h.train_loss, h.val_f1, h.val_auc, h.lr
        ));
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Validation F1 (at the default probability threshold) and AUC over all
/// target labels. AUC is NaN when validation has a single class.
fn validation_metrics(
    model: &mut Model,
    val: &[WindowInstance],
    batch_size: usize,
) -> Result<(f64, f64)> {
    let spec = model.spec.clone();
    let scores: Vec<f64> = eval_scores(model, val, batch_size)?.concat();
    let refs: Vec<&WindowInstance> = val.iter().collect();
    let labels = flat_labels(&refs, &spec)?;
    let probs = scoring::scores_to_probs(&scores);
    let pred = scoring::threshold_probs(&probs, scoring::DEFAULT_THRESHOLD);
    let f1 = scoring::confusion_metrics(&pred, &labels)?.f1;
    let auc = scoring::auc(&scores, &labels).unwrap_or(f64::NAN);
    Ok((f1, auc))
}

/// Trains in place. Shuffles per epoch, steps the one-cycle schedule per
/// batch, clips to `clip_norm`, and records one history row per epoch.
/// A non-finite loss aborts with the offending epoch and batch.
pub fn train(
    model: &mut Model,
    train_instances: &[WindowInstance],
    val_instances: &[WindowInstance],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if train_instances.is_empty() {
        return Err(Error::InvalidInput("no training instances".into()));
    }
    if val_instances.is_empty() {
        return Err(Error::InvalidInput(
            "no validation instances (hold out at least one patient)".into(),
        ));
    }
    if cfg.epochs == 0 {
        return Ok(Vec::new());
    }
    let spec = model.spec.clone();

    let w_pos = match cfg.class_weight_positive {
        Some(w) => w,
        None => {
            let refs: Vec<&WindowInstance> = train_instances.iter().collect();
            inverse_class_weight(&flat_labels(&refs, &spec)?)?
        }
    };

    let n = train_instances.len();
    let batch_size = cfg.batch_size.min(n);
    // The remainder rides with the final batch so every instance is seen.
    let batches_per_epoch = (n / batch_size).max(1);
    let total_steps = (cfg.max_epochs * batches_per_epoch).max(1) as u64;
    let sched = OneCycle::new(
        cfg.base_lr,
        cfg.max_lr,
        cfg.base_momentum,
        cfg.max_momentum,
        total_steps,
    )?;
    let mut adam = Adam::new(0.999, 1e-8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut step = 0u64;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut n_elems = 0usize;
        let mut epoch_lr = 0.0;

        for bi in 0..batches_per_epoch {
            let lo = bi * batch_size;
            let hi = if bi + 1 == batches_per_epoch { n } else { lo + batch_size };
            let refs: Vec<&WindowInstance> =
                order[lo..hi].iter().map(|&i| &train_instances[i]).collect();
            let batch = batch_signals(&refs, &spec)?;
            let targets = batch_targets(&refs, &spec)?;

            let (lr, momentum) = sched.at(step);
            if bi == 0 {
                epoch_lr = lr;
            }
            let scores = model.forward(
                batch.ecg.as_ref(),
                batch.spo2.as_ref(),
                &mut Phase::Train { rng: &mut rng },
            )?;
            if !scores.data.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            let l = weighted_squared_hinge(&scores, &targets, w_pos)?;
            if !l.value.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: bi });
            }
            loss_sum += l.value * scores.data.len() as f64;
            n_elems += scores.data.len();

            model.zero_grad();
            model.backward(&l.grad)?;
            clip_gradients(model, cfg.clip_norm)?;
            adam.step(model, lr, momentum)?;
            step += 1;
        }

        let (val_f1, val_auc) = validation_metrics(model, val_instances, cfg.batch_size)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / n_elems as f64,
            val_f1,
            val_auc,
            lr: epoch_lr,
        });
    }
    Ok(history)
}
