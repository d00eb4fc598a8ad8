//! Adam with bias correction and global-norm gradient clipping. The first
//! moment's decay rate is supplied per step so the momentum schedule can
//! drive it.

use crate::error::{Error, Result};
use crate::nn::Parameterized;

struct Slot {
    m: Vec<f64>,
    v: Vec<f64>,
}

pub struct Adam {
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    slots: Vec<Slot>,
}

impl Adam {
    pub fn new(beta2: f64, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta2) || !(eps > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Adam needs beta2 in [0,1) and positive eps, got {beta2}/{eps}"
            )));
        }
        Ok(Adam { beta2, eps, t: 0, slots: Vec::new() })
    }

    /// One bias-corrected update over every parameter, in visit order.
    /// `beta1` is the scheduled momentum for this step.
    pub fn step<M: Parameterized>(&mut self, model: &mut M, lr: f64, beta1: f64) -> Result<()> {
        if !(0.0..1.0).contains(&beta1) {
            return Err(Error::InvalidConfig(format!(
                "beta1 must be in [0,1), got {beta1}"
            )));
        }
        self.t += 1;
        let t = self.t;
        let (beta2, eps) = (self.beta2, self.eps);
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);

        let first_step = self.slots.is_empty();
        let slots = &mut self.slots;
        let mut idx = 0usize;
        let mut mismatch = false;
        model.for_each_param(&mut |_, p| {
            if mismatch {
                return;
            }
            if first_step {
                slots.push(Slot { m: vec![0.0; p.len()], v: vec![0.0; p.len()] });
            }
            let Some(slot) = slots.get_mut(idx) else {
                mismatch = true;
                return;
            };
            if slot.m.len() != p.len() {
                mismatch = true;
                return;
            }
            for i in 0..p.len() {
                let g = p.grad[i];
                slot.m[i] = beta1 * slot.m[i] + (1.0 - beta1) * g;
                slot.v[i] = beta2 * slot.v[i] + (1.0 - beta2) * g * g;
                let m_hat = slot.m[i] / bc1;
                let v_hat = slot.v[i] / bc2;
                p.value[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            idx += 1;
        });
        if mismatch || idx != slots.len() {
            return Err(Error::State(
                "optimizer state does not match the model's parameters".into(),
            ));
        }
        Ok(())
    }
}

/// Scales all gradients so their global L2 norm is at most `clip_norm`.
/// Returns the pre-clip norm.
pub fn clip_gradients<M: Parameterized>(model: &mut M, clip_norm: f64) -> Result<f64> {
    if !(clip_norm > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "clip norm must be positive, got {clip_norm}"
        )));
    }
    let mut sq = 0.0;
    model.for_each_param(&mut |_, p| {
        for g in &p.grad {
            sq += g * g;
        }
    });
    let norm = sq.sqrt();
    if norm > clip_norm {
        let scale = clip_norm / norm;
        model.for_each_param(&mut |_, p| {
            for g in p.grad.iter_mut() {
                *g *= scale;
            }
        });
    }
    Ok(norm)
}
