//! One-cycle schedule: the learning rate rises base -> max over the first
//! 30% of the step budget on a cosine ramp, then anneals to base/100;
//! momentum runs the same path inverted (max -> base -> max).

use crate::error::{Error, Result};

pub const WARMUP_FRACTION: f64 = 0.3;
pub const FINAL_LR_FRACTION: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct OneCycle {
    pub base_lr: f64,
    pub max_lr: f64,
    pub base_momentum: f64,
    pub max_momentum: f64,
    pub total_steps: u64,
}

/// Cosine ramp from 0 at u=0 to 1 at u=1.
fn ramp(u: f64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * u).cos())
}

impl OneCycle {
    pub fn new(
        base_lr: f64,
        max_lr: f64,
        base_momentum: f64,
        max_momentum: f64,
        total_steps: u64,
    ) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr < max_lr) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < base_lr < max_lr, got {base_lr}/{max_lr}"
            )));
        }
        if !(0.0 < base_momentum && base_momentum <= max_momentum && max_momentum < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < base_momentum <= max_momentum < 1, got {base_momentum}/{max_momentum}"
            )));
        }
        if total_steps == 0 {
            return Err(Error::InvalidConfig("schedule needs at least one step".into()));
        }
        Ok(OneCycle { base_lr, max_lr, base_momentum, max_momentum, total_steps })
    }

    /// `(learning rate, momentum)` at a step in `[0, total_steps)`.
    pub fn at(&self, step: u64) -> (f64, f64) {
        let step = step.min(self.total_steps - 1) as f64;
        let peak = WARMUP_FRACTION * self.total_steps as f64;
        let final_lr = self.base_lr * FINAL_LR_FRACTION;
        if step <= peak {
            let r = ramp(step / peak);
            (
                self.base_lr + (self.max_lr - self.base_lr) * r,
                self.max_momentum - (self.max_momentum - self.base_momentum) * r,
            )
        } else {
            // Anneal over [peak, total-1] so the final step lands on
            // base/100 exactly.
            let r = ramp((step - peak) / (self.total_steps as f64 - 1.0 - peak));
            (
                self.max_lr - (self.max_lr - final_lr) * r,
                self.base_momentum + (self.max_momentum - self.base_momentum) * r,
            )
        }
    }
}
