//! The four model variants on top of the conv block stack:
//!
//! - `CnnDense`: blocks -> 1x1 conv -> flatten -> dense -> ReLU -> scores.
//! - `CnnLstm`: blocks -> LSTM over the 1 Hz latent sequence -> shared
//!   per-step projection on the central third (or last hidden state -> one
//!   score when `output_len` is 1).
//! - `Spo2Bilstm`: SpO2 sequence -> BiLSTM -> per-step projection.
//! - `CnnLstmSpo2`: both latent sequences concatenated step-wise at 1 Hz,
//!   then projected per step.
//!
//! Scores are raw reals with no output activation; positive means anomaly.
//! The block stack must land exactly on the 1 Hz grid: the product of the
//! pool widths must equal the ECG sample rate, which is asserted at
//! assembly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::block::{ConvBlock, ConvBlockSpec};
use super::layers::{Dense, PointwiseConv1d, Relu};
use super::lstm::{BiLstm, Lstm};
use super::tensor::{Tensor2, Tensor3};
use super::{BufferFn, Parameterized, ParamFn, Phase};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelVariant {
    CnnDense,
    CnnLstm,
    Spo2Bilstm,
    CnnLstmSpo2,
}

impl ModelVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelVariant::CnnDense => "cnn_dense",
            ModelVariant::CnnLstm => "cnn_lstm",
            ModelVariant::Spo2Bilstm => "spo2_bilstm",
            ModelVariant::CnnLstmSpo2 => "cnn_lstm_spo2",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cnn_dense" => Ok(ModelVariant::CnnDense),
            "cnn_lstm" => Ok(ModelVariant::CnnLstm),
            "spo2_bilstm" => Ok(ModelVariant::Spo2Bilstm),
            "cnn_lstm_spo2" => Ok(ModelVariant::CnnLstmSpo2),
            other => Err(Error::InvalidConfig(format!(
                "unknown model variant {other:?}"
            ))),
        }
    }

    pub fn uses_ecg(&self) -> bool {
        !matches!(self, ModelVariant::Spo2Bilstm)
    }

    pub fn uses_spo2(&self) -> bool {
        matches!(self, ModelVariant::Spo2Bilstm | ModelVariant::CnnLstmSpo2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub blocks: Vec<ConvBlockSpec>,
    pub lstm_hidden: usize,
    pub dense_hidden: usize,
    /// Per-second scores over the target window, or 1 for one label per
    /// instance.
    pub output_len: usize,
    pub ecg_rate_hz: usize,
    /// Target window length in seconds; the context spans three windows.
    pub window_s: usize,
}

impl ModelSpec {
    /// Standard stack for a supported ECG rate: three default blocks whose
    /// pools multiply to the rate (80: 4-4-5, 100: 4-5-5).
    pub fn new(variant: ModelVariant, ecg_rate_hz: usize) -> Result<Self> {
        let pools: [usize; 3] = match ecg_rate_hz {
            80 => [4, 4, 5],
            100 => [4, 5, 5],
            other => {
                return Err(Error::InvalidConfig(format!(
                    "no default block stack for {other} Hz ECG (supported: 80, 100)"
                )))
            }
        };
        let spec = ModelSpec {
            variant,
            blocks: pools.iter().map(|&p| ConvBlockSpec::with_pool(p)).collect(),
            lstm_hidden: 16,
            dense_hidden: 128,
            output_len: 60,
            ecg_rate_hz,
            window_s: 60,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ecg_len(&self) -> usize {
        3 * self.window_s * self.ecg_rate_hz
    }

    pub fn spo2_len(&self) -> usize {
        3 * self.window_s
    }

    /// Temporal length after the block stack: always three target windows
    /// at 1 Hz.
    pub fn latent_len(&self) -> usize {
        3 * self.window_s
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_s == 0 || self.ecg_rate_hz == 0 {
            return Err(Error::InvalidConfig(
                "window length and ECG rate must be positive".into(),
            ));
        }
        if self.output_len != self.window_s && self.output_len != 1 {
            return Err(Error::InvalidConfig(format!(
                "output_len must be the window length ({}) or 1, got {}",
                self.window_s, self.output_len
            )));
        }
        if self.variant.uses_spo2() && self.output_len != self.window_s {
            return Err(Error::InvalidConfig(
                "SpO2-consuming variants emit per-second scores; output_len must equal the window length"
                    .into(),
            ));
        }
        if self.lstm_hidden == 0 || self.dense_hidden == 0 {
            return Err(Error::InvalidConfig(
                "hidden sizes must be positive".into(),
            ));
        }
        if self.variant.uses_ecg() {
            if self.blocks.is_empty() {
                return Err(Error::InvalidConfig(
                    "ECG-consuming variants need at least one conv block".into(),
                ));
            }
            for b in &self.blocks {
                b.validate()?;
            }
            // Downsampling invariant: the stack must step the ECG down to
            // exactly 1 Hz, every pool dividing its stage length.
            let mut t = self.ecg_len();
            for (i, b) in self.blocks.iter().enumerate() {
                if t % b.pool != 0 {
                    return Err(Error::InvalidConfig(format!(
                        "block {i} pool {} does not divide its input length {t}",
                        b.pool
                    )));
                }
                t /= b.pool;
            }
            if t != self.latent_len() {
                return Err(Error::InvalidConfig(format!(
                    "block pools downsample {} -> {t}, expected {} (pool product must equal the ECG rate)",
                    self.ecg_len(),
                    self.latent_len()
                )));
            }
        }
        Ok(())
    }
}

enum Head {
    Dense {
        squeeze: PointwiseConv1d,
        fc1: Dense,
        relu: Relu,
        fc2: Dense,
    },
    Lstm {
        lstm: Lstm,
        /// Shared per-step projection for per-second output.
        proj_seq: Option<PointwiseConv1d>,
        /// Last-hidden-state projection for single output.
        proj_last: Option<Dense>,
    },
    Spo2 {
        bilstm: BiLstm,
        proj: PointwiseConv1d,
    },
    Fusion {
        lstm: Lstm,
        bilstm: BiLstm,
        proj: PointwiseConv1d,
    },
}

pub struct Model {
    pub spec: ModelSpec,
    blocks: Vec<ConvBlock>,
    head: Head,
}

/// Reinterprets `[N, C, T]` as `[N, C*T]`; layouts are identical.
fn flatten(x: Tensor3) -> Tensor2 {
    Tensor2 {
        rows: x.n,
        cols: x.c * x.t,
        data: x.data,
    }
}

fn unflatten(x: Tensor2, c: usize, t: usize) -> Tensor3 {
    debug_assert_eq!(x.cols, c * t);
    Tensor3 {
        n: x.rows,
        c,
        t,
        data: x.data,
    }
}

/// Central `window_s` steps of a `[N, 1, 3*window_s]` score sequence.
fn take_central(seq: &Tensor3, window_s: usize) -> Tensor2 {
    let mut out = Tensor2::zeros(seq.n, window_s);
    for n in 0..seq.n {
        out.row_mut(n)
            .copy_from_slice(&seq.row(n, 0)[window_s..2 * window_s]);
    }
    out
}

fn scatter_central(grad: &Tensor2, window_s: usize) -> Tensor3 {
    let mut out = Tensor3::zeros(grad.rows, 1, 3 * window_s);
    for n in 0..grad.rows {
        out.row_mut(n, 0)[window_s..2 * window_s].copy_from_slice(grad.row(n));
    }
    out
}

impl Model {
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut blocks = Vec::new();
        if spec.variant.uses_ecg() {
            let mut ch = 1;
            for b in &spec.blocks {
                let block = ConvBlock::new(ch, b.clone(), &mut rng)?;
                ch = block.out_channels();
                blocks.push(block);
            }
        }
        let latent_ch = blocks.last().map(|b| b.out_channels()).unwrap_or(0);
        let h = spec.lstm_hidden;

        let head = match spec.variant {
            ModelVariant::CnnDense => Head::Dense {
                squeeze: PointwiseConv1d::new(latent_ch, latent_ch, &mut rng)?,
                fc1: Dense::new(latent_ch * spec.latent_len(), spec.dense_hidden, &mut rng)?,
                relu: Relu::new(),
                fc2: Dense::new(spec.dense_hidden, spec.output_len, &mut rng)?,
            },
            ModelVariant::CnnLstm => {
                let lstm = Lstm::new(latent_ch, h, &mut rng)?;
                if spec.output_len == 1 {
                    Head::Lstm {
                        lstm,
                        proj_seq: None,
                        proj_last: Some(Dense::new(h, 1, &mut rng)?),
                    }
                } else {
                    Head::Lstm {
                        lstm,
                        proj_seq: Some(PointwiseConv1d::new(h, 1, &mut rng)?),
                        proj_last: None,
                    }
                }
            }
            ModelVariant::Spo2Bilstm => Head::Spo2 {
                bilstm: BiLstm::new(1, h, &mut rng)?,
                proj: PointwiseConv1d::new(2 * h, 1, &mut rng)?,
            },
            ModelVariant::CnnLstmSpo2 => Head::Fusion {
                lstm: Lstm::new(latent_ch, h, &mut rng)?,
                bilstm: BiLstm::new(1, h, &mut rng)?,
                proj: PointwiseConv1d::new(3 * h, 1, &mut rng)?,
            },
        };
        Ok(Model { spec, blocks, head })
    }

    fn expect_ecg<'a>(&self, ecg: Option<&'a Tensor3>) -> Result<&'a Tensor3> {
        let x = ecg.ok_or_else(|| {
            Error::InvalidInput(format!(
                "variant {} requires an ECG input",
                self.spec.variant.as_str()
            ))
        })?;
        if x.c != 1 || x.t != self.spec.ecg_len() {
            return Err(Error::InvalidInput(format!(
                "ECG input must be [n, 1, {}], got [{}, {}, {}]",
                self.spec.ecg_len(),
                x.n,
                x.c,
                x.t
            )));
        }
        Ok(x)
    }

    fn expect_spo2<'a>(&self, spo2: Option<&'a Tensor3>) -> Result<&'a Tensor3> {
        let x = spo2.ok_or_else(|| {
            Error::InvalidInput(format!(
                "variant {} requires an SpO2 input",
                self.spec.variant.as_str()
            ))
        })?;
        if x.c != 1 || x.t != self.spec.spo2_len() {
            return Err(Error::InvalidInput(format!(
                "SpO2 input must be [n, 1, {}], got [{}, {}, {}]",
                self.spec.spo2_len(),
                x.n,
                x.c,
                x.t
            )));
        }
        Ok(x)
    }

    /// Runs the block stack down to the `[N, C, 3*window_s]` latent
    /// sequence.
    fn conv_latent(&mut self, ecg: &Tensor3, phase: &mut Phase) -> Result<Tensor3> {
        let mut cur = None;
        for b in &mut self.blocks {
            let y = match &cur {
                None => b.forward(ecg, phase)?,
                Some(prev) => b.forward(prev, phase)?,
            };
            cur = Some(y);
        }
        let latent = cur.expect("validated: at least one block");
        debug_assert_eq!(latent.t, self.spec.latent_len());
        Ok(latent)
    }

    fn blocks_backward(&mut self, grad_latent: &Tensor3) -> Result<()> {
        let mut g = grad_latent.clone();
        for b in self.blocks.iter_mut().rev() {
            g = b.backward(&g)?;
        }
        Ok(())
    }

    /// Raw scores, `[N, output_len]`.
    pub fn forward(
        &mut self,
        ecg: Option<&Tensor3>,
        spo2: Option<&Tensor3>,
        phase: &mut Phase,
    ) -> Result<Tensor2> {
        let w = self.spec.window_s;
        match self.spec.variant {
            ModelVariant::CnnDense => {
                let x = self.expect_ecg(ecg)?;
                let latent = self.conv_latent(x, phase)?;
                let Head::Dense { squeeze, fc1, relu, fc2 } = &mut self.head else {
                    unreachable!()
                };
                let z = squeeze.forward(&latent, phase)?;
                let flat = flatten(z);
                let a = fc1.forward(&flat, phase)?;
                let a3 = relu.forward(unflatten(a, 1, fc1.out_dim), phase);
                fc2.forward(&flatten(a3), phase)
            }
            ModelVariant::CnnLstm => {
                let x = self.expect_ecg(ecg)?;
                let latent = self.conv_latent(x, phase)?;
                let Head::Lstm { lstm, proj_seq, proj_last } = &mut self.head else {
                    unreachable!()
                };
                let hseq = lstm.forward(&latent, phase)?;
                if let Some(proj) = proj_seq {
                    let s = proj.forward(&hseq, phase)?;
                    Ok(take_central(&s, w))
                } else {
                    let proj = proj_last.as_mut().expect("one projection present");
                    let h_dim = lstm.hidden;
                    let mut last = Tensor2::zeros(hseq.n, h_dim);
                    for n in 0..hseq.n {
                        for j in 0..h_dim {
                            *last.at_mut(n, j) = hseq.at(n, j, hseq.t - 1);
                        }
                    }
                    proj.forward(&last, phase)
                }
            }
            ModelVariant::Spo2Bilstm => {
                let x = self.expect_spo2(spo2)?;
                let Head::Spo2 { bilstm, proj } = &mut self.head else {
                    unreachable!()
                };
                let hseq = bilstm.forward(x, phase)?;
                let s = proj.forward(&hseq, phase)?;
                Ok(take_central(&s, w))
            }
            ModelVariant::CnnLstmSpo2 => {
                let x = self.expect_ecg(ecg)?;
                let sp = self.expect_spo2(spo2)?;
                let latent = self.conv_latent(x, phase)?;
                let Head::Fusion { lstm, bilstm, proj } = &mut self.head else {
                    unreachable!()
                };
                let h_ecg = lstm.forward(&latent, phase)?;
                let h_sp = bilstm.forward(sp, phase)?;
                // Step-wise concatenation at 1 Hz: [N, H, T] ++ [N, 2H, T].
                let (h, t) = (lstm.hidden, h_ecg.t);
                let mut cat = Tensor3::zeros(h_ecg.n, 3 * h, t);
                for n in 0..h_ecg.n {
                    for j in 0..h {
                        cat.row_mut(n, j).copy_from_slice(h_ecg.row(n, j));
                    }
                    for j in 0..2 * h {
                        cat.row_mut(n, h + j).copy_from_slice(h_sp.row(n, j));
                    }
                }
                let s = proj.forward(&cat, phase)?;
                Ok(take_central(&s, w))
            }
        }
    }

    /// Accumulates parameter gradients for the given score gradient.
    pub fn backward(&mut self, grad_scores: &Tensor2) -> Result<()> {
        let w = self.spec.window_s;
        match self.spec.variant {
            ModelVariant::CnnDense => {
                let g_latent = {
                    let Head::Dense { squeeze, fc1, relu, fc2 } = &mut self.head else {
                        unreachable!()
                    };
                    let g = fc2.backward(grad_scores)?;
                    let g = relu.backward(unflatten(g, 1, fc1.out_dim))?;
                    let g = fc1.backward(&flatten(g))?;
                    let c = squeeze.out_channels;
                    let t = g.cols / c;
                    squeeze.backward(&unflatten(g, c, t))?
                };
                self.blocks_backward(&g_latent)
            }
            ModelVariant::CnnLstm => {
                let g_latent = {
                    let Head::Lstm { lstm, proj_seq, proj_last } = &mut self.head else {
                        unreachable!()
                    };
                    if let Some(proj) = proj_seq {
                        let g = scatter_central(grad_scores, w);
                        let g = proj.backward(&g)?;
                        lstm.backward(&g)?
                    } else {
                        let proj = proj_last.as_mut().expect("one projection present");
                        let g_last = proj.backward(grad_scores)?;
                        let t = 3 * w;
                        let mut g = Tensor3::zeros(g_last.rows, lstm.hidden, t);
                        for n in 0..g_last.rows {
                            for j in 0..lstm.hidden {
                                *g.at_mut(n, j, t - 1) = g_last.at(n, j);
                            }
                        }
                        lstm.backward(&g)?
                    }
                };
                self.blocks_backward(&g_latent)
            }
            ModelVariant::Spo2Bilstm => {
                let Head::Spo2 { bilstm, proj } = &mut self.head else {
                    unreachable!()
                };
                let g = scatter_central(grad_scores, w);
                let g = proj.backward(&g)?;
                bilstm.backward(&g)?;
                Ok(())
            }
            ModelVariant::CnnLstmSpo2 => {
                let g_latent = {
                    let Head::Fusion { lstm, bilstm, proj } = &mut self.head else {
                        unreachable!()
                    };
                    let g = scatter_central(grad_scores, w);
                    let gcat = proj.backward(&g)?;
                    let h = lstm.hidden;
                    let (n_batch, t) = (gcat.n, gcat.t);
                    let mut g_ecg = Tensor3::zeros(n_batch, h, t);
                    let mut g_sp = Tensor3::zeros(n_batch, 2 * h, t);
                    for n in 0..n_batch {
                        for j in 0..h {
                            g_ecg.row_mut(n, j).copy_from_slice(gcat.row(n, j));
                        }
                        for j in 0..2 * h {
                            g_sp.row_mut(n, j).copy_from_slice(gcat.row(n, h + j));
                        }
                    }
                    bilstm.backward(&g_sp)?;
                    lstm.backward(&g_ecg)?
                };
                self.blocks_backward(&g_latent)
            }
        }
    }

    pub fn for_each_param_prefixed(&mut self, f: &mut ParamFn) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.for_each_param(&format!("blocks{i}"), f);
        }
        match &mut self.head {
            Head::Dense { squeeze, fc1, fc2, .. } => {
                squeeze.for_each_param("head.squeeze", f);
                fc1.for_each_param("head.fc1", f);
                fc2.for_each_param("head.fc2", f);
            }
            Head::Lstm { lstm, proj_seq, proj_last } => {
                lstm.for_each_param("head.lstm", f);
                if let Some(p) = proj_seq {
                    p.for_each_param("head.proj", f);
                }
                if let Some(p) = proj_last {
                    p.for_each_param("head.proj", f);
                }
            }
            Head::Spo2 { bilstm, proj } => {
                bilstm.for_each_param("head.bilstm", f);
                proj.for_each_param("head.proj", f);
            }
            Head::Fusion { lstm, bilstm, proj } => {
                lstm.for_each_param("head.lstm", f);
                bilstm.for_each_param("head.bilstm", f);
                proj.for_each_param("head.proj", f);
            }
        }
    }

    pub fn for_each_buffer(&mut self, f: &mut BufferFn) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.for_each_buffer(&format!("blocks{i}"), f);
        }
    }
}

impl Parameterized for Model {
    fn for_each_param(&mut self, f: &mut ParamFn) {
        self.for_each_param_prefixed(f);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck;
    use rand::prelude::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_t3(n: usize, c: usize, t: usize, seed: u64) -> Tensor3 {
        let mut r = rng(seed);
        Tensor3::from_vec(n, c, t, (0..n * c * t).map(|_| r.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    /// Tiny spec: 5 "Hz" ECG, 4-second windows, one block of two series.
    fn toy_spec(variant: ModelVariant, output_len: usize) -> ModelSpec {
        ModelSpec {
            variant,
            blocks: vec![ConvBlockSpec {
                kernel: 3,
                channels: 3,
                dilations: vec![1, 2],
                dropout_rate: 0.0,
                pool: 5,
            }],
            lstm_hidden: 3,
            dense_hidden: 8,
            output_len,
            ecg_rate_hz: 5,
            window_s: 4,
        }
    }

    fn toy_inputs(spec: &ModelSpec, seed: u64) -> (Tensor3, Tensor3) {
        let ecg = random_t3(2, 1, spec.ecg_len(), seed);
        let spo2 = random_t3(2, 1, spec.spo2_len(), seed + 1);
        (ecg, spo2)
    }

    #[test]
    fn default_specs_downsample_to_one_hertz() {
        for (rate, ecg_len) in [(80usize, 14400usize), (100, 18000)] {
            let spec = ModelSpec::new(ModelVariant::CnnLstm, rate).unwrap();
            assert_eq!(spec.ecg_len(), ecg_len);
            assert_eq!(spec.latent_len(), 180);
            let mut model = Model::new(spec, 7).unwrap();
            let x = random_t3(1, 1, ecg_len, 11);
            let latent = model.conv_latent(&x, &mut Phase::Eval).unwrap();
            assert_eq!((latent.c, latent.t), (16, 180));
        }
    }

    #[test]
    fn bad_pool_products_are_rejected() {
        let mut spec = ModelSpec::new(ModelVariant::CnnLstm, 80).unwrap();
        spec.blocks[2].pool = 4; // 4*4*4 != 80
        assert!(spec.validate().is_err());
    }

    #[test]
    fn forward_emits_finite_scores_of_declared_length() {
        for variant in [
            ModelVariant::CnnDense,
            ModelVariant::CnnLstm,
            ModelVariant::Spo2Bilstm,
            ModelVariant::CnnLstmSpo2,
        ] {
            let spec = toy_spec(variant, 4);
            let (ecg, spo2) = toy_inputs(&spec, 20);
            let mut model = Model::new(spec, 1).unwrap();
            let scores = model
                .forward(Some(&ecg), Some(&spo2), &mut Phase::Eval)
                .unwrap();
            assert_eq!((scores.rows, scores.cols), (2, 4), "{variant:?}");
            assert!(scores.data.iter().all(|v| v.is_finite()), "{variant:?}");
        }
    }

    #[test]
    fn single_output_variants_emit_one_score() {
        for variant in [ModelVariant::CnnDense, ModelVariant::CnnLstm] {
            let spec = toy_spec(variant, 1);
            let (ecg, _) = toy_inputs(&spec, 30);
            let mut model = Model::new(spec, 2).unwrap();
            let scores = model.forward(Some(&ecg), None, &mut Phase::Eval).unwrap();
            assert_eq!((scores.rows, scores.cols), (2, 1), "{variant:?}");
        }
    }

    #[test]
    fn missing_required_inputs_are_rejected() {
        let spec = toy_spec(ModelVariant::CnnLstmSpo2, 4);
        let (ecg, spo2) = toy_inputs(&spec, 40);
        let mut model = Model::new(spec, 3).unwrap();
        assert!(model.forward(Some(&ecg), None, &mut Phase::Eval).is_err());
        assert!(model.forward(None, Some(&spo2), &mut Phase::Eval).is_err());
    }

    #[test]
    fn same_seed_assembles_identical_parameters() {
        let spec = toy_spec(ModelVariant::CnnLstmSpo2, 4);
        let mut a = Model::new(spec.clone(), 9).unwrap();
        let mut b = Model::new(spec, 9).unwrap();
        let mut va = Vec::new();
        a.for_each_param(&mut |name, p| va.push((name.to_string(), p.value.clone())));
        let mut vb = Vec::new();
        b.for_each_param(&mut |name, p| vb.push((name.to_string(), p.value.clone())));
        assert_eq!(va, vb);
        assert!(a.n_params() > 0);
    }

    #[test]
    fn batch_of_one_matches_batch_row_in_eval() {
        let spec = toy_spec(ModelVariant::CnnLstmSpo2, 4);
        let (ecg, spo2) = toy_inputs(&spec, 50);
        let mut model = Model::new(spec.clone(), 4).unwrap();
        let full = model
            .forward(Some(&ecg), Some(&spo2), &mut Phase::Eval)
            .unwrap();

        let one_ecg = Tensor3::from_vec(1, 1, spec.ecg_len(), ecg.row(1, 0).to_vec()).unwrap();
        let one_spo2 = Tensor3::from_vec(1, 1, spec.spo2_len(), spo2.row(1, 0).to_vec()).unwrap();
        let single = model
            .forward(Some(&one_ecg), Some(&one_spo2), &mut Phase::Eval)
            .unwrap();
        for j in 0..4 {
            assert!((single.at(0, j) - full.at(1, j)).abs() < 1e-9);
        }
    }

    #[test]
    fn all_variant_gradients_match_finite_differences() {
        for (variant, output_len) in [
            (ModelVariant::CnnDense, 4),
            (ModelVariant::CnnDense, 1),
            (ModelVariant::CnnLstm, 4),
            (ModelVariant::CnnLstm, 1),
            (ModelVariant::Spo2Bilstm, 4),
            (ModelVariant::CnnLstmSpo2, 4),
        ] {
            let spec = toy_spec(variant, output_len);
            let (ecg, spo2) = toy_inputs(&spec, 60);
            let mut model = Model::new(spec, 5).unwrap();
            let mut r = rng(61);
            let coeffs = Tensor2::from_vec(
                2,
                output_len,
                (0..2 * output_len).map(|_| r.random_range(-1.0..1.0)).collect(),
            )
            .unwrap();

            let report = gradcheck::check_gradients(
                &mut model,
                &mut |m: &mut Model| {
                    m.zero_grad();
                    let mut tr = rng(0);
                    m.forward(Some(&ecg), Some(&spo2), &mut Phase::Train { rng: &mut tr })
                        .unwrap();
                    m.backward(&coeffs).unwrap();
                },
                &mut |m: &mut Model| {
                    let mut tr = rng(0);
                    let y = m
                        .forward(Some(&ecg), Some(&spo2), &mut Phase::Train { rng: &mut tr })
                        .unwrap();
                    y.data.iter().zip(&coeffs.data).map(|(a, b)| a * b).sum()
                },
                1e-5,
            );
            assert!(
                report.max_rel_err <= 1e-4,
                "{variant:?}/{output_len}: worst {} rel err {}",
                report.worst,
                report.max_rel_err
            );
        }
    }

    #[test]
    fn backward_without_forward_is_a_state_error() {
        let spec = toy_spec(ModelVariant::CnnLstm, 4);
        let mut model = Model::new(spec, 6).unwrap();
        let g = Tensor2::zeros(2, 4);
        assert!(matches!(model.backward(&g), Err(Error::State(_))));
    }
}
