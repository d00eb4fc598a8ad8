//! The differentiable numerical core: tensors, conv/norm/recurrent layers
//! with hand-written reverse-mode gradients, the conv block, the four model
//! variants, checkpointing, and a finite-difference gradient checker.
//!
//! Design constraints that shape this module:
//!
//! - Every layer owns its parameters (value + gradient) and the forward
//!   cache its backward pass needs. `backward` consumes the cache, so it
//!   must follow a `forward` in train phase.
//! - All arithmetic is f64 and every reduction runs in a fixed order, so
//!   results are bitwise reproducible regardless of thread count.
//! - Scores are raw (no output activation); positive means anomaly.

pub mod block;
pub mod checkpoint;
pub mod gradcheck;
pub mod layers;
pub mod lstm;
pub mod model;
pub mod tensor;

pub use block::ConvBlock;
pub use model::{Model, ModelSpec, ModelVariant};
pub use tensor::{Tensor2, Tensor3};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One trainable parameter group: flat values plus accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn new(value: Vec<f64>) -> Self {
        let grad = vec![0.0; value.len()];
        Param { value, grad }
    }

    pub fn zeros(len: usize) -> Self {
        Param::new(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
pub(crate) fn uniform_fan_in(rng: &mut ChaCha8Rng, fan_in: usize, len: usize) -> Vec<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    (0..len).map(|_| rng.random_range(-bound..bound)).collect()
}

/// Forward phase. Train enables batch statistics, dropout, and caching for
/// backward; eval is a pure deterministic function of the parameters.
pub enum Phase<'r> {
    Train { rng: &'r mut ChaCha8Rng },
    Eval,
}

impl Phase<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Phase::Train { .. })
    }
}

/// Callback used to enumerate parameters in a stable, documented order.
/// The same order drives optimizer state and checkpoint layout.
pub type ParamFn<'a> = dyn FnMut(&str, &mut Param) + 'a;

/// Anything exposing its parameters in a stable visit order: whole models,
/// but also individual recurrent layers and conv blocks, so the gradient
/// checker and optimizer work uniformly.
pub trait Parameterized {
    fn for_each_param(&mut self, f: &mut ParamFn);

    fn zero_grad(&mut self) {
        self.for_each_param(&mut |_, p| p.zero_grad());
    }

    fn n_params(&mut self) -> usize {
        let mut n = 0;
        self.for_each_param(&mut |_, p| n += p.len());
        n
    }
}

impl Parameterized for block::ConvBlock {
    fn for_each_param(&mut self, f: &mut ParamFn) {
        ConvBlock::for_each_param(self, "block", f);
    }
}

impl Parameterized for lstm::Lstm {
    fn for_each_param(&mut self, f: &mut ParamFn) {
        lstm::Lstm::for_each_param(self, "lstm", f);
    }
}

impl Parameterized for lstm::BiLstm {
    fn for_each_param(&mut self, f: &mut ParamFn) {
        lstm::BiLstm::for_each_param(self, "bilstm", f);
    }
}

/// Callback for non-trainable state that must round-trip through
/// checkpoints (batch-norm running statistics).
pub type BufferFn<'a> = dyn FnMut(&str, &mut Vec<f64>) + 'a;
