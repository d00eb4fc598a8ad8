//! Feed-forward layers. Each struct owns its parameters and the forward
//! cache its backward pass reads; `backward` consumes the cache and
//! accumulates into `Param::grad`, returning the gradient w.r.t. its input.
//!
//! Row loops are structured as shifted-slice passes so they vectorize and
//! can be distributed over disjoint output rows.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Tensor2, Tensor3};
use super::{uniform_fan_in, Param, ParamFn, Phase};
use crate::error::{Error, Result};
use crate::exec;

/// out[t] += w * x[t + off] over the in-bounds range of t.
fn axpy_shifted(out: &mut [f64], x: &[f64], w: f64, off: isize) {
    let len = out.len() as isize;
    if off >= 0 {
        let n = (len - off).max(0) as usize;
        let off = off as usize;
        for (o, &v) in out[..n].iter_mut().zip(&x[off..off + n]) {
            *o += w * v;
        }
    } else {
        let start = (-off) as usize;
        let n = (len + off).max(0) as usize;
        for (o, &v) in out[start..start + n].iter_mut().zip(&x[..n]) {
            *o += w * v;
        }
    }
}

/// sum over t of a[t] * b[t + off], in-bounds range only.
fn dot_shifted(a: &[f64], b: &[f64], off: isize) -> f64 {
    let len = a.len() as isize;
    if off >= 0 {
        let n = (len - off).max(0) as usize;
        let off = off as usize;
        a[..n].iter().zip(&b[off..off + n]).map(|(p, q)| p * q).sum()
    } else {
        let start = (-off) as usize;
        let n = (len + off).max(0) as usize;
        a[start..start + n].iter().zip(&b[..n]).map(|(p, q)| p * q).sum()
    }
}

fn state_err(layer: &str) -> Error {
    Error::State(format!("{layer}: backward without a preceding train-phase forward"))
}

/// Per-channel convolution: channel c of the output depends only on
/// channel c of the input. Same-length zero padding, odd kernels only.
#[derive(Debug, Clone)]
pub struct DepthwiseConv1d {
    pub channels: usize,
    pub kernel: usize,
    pub dilation: usize,
    /// `[channels, kernel]`
    pub weight: Param,
    /// `[channels]`
    pub bias: Param,
    cache_x: Option<Tensor3>,
}

impl DepthwiseConv1d {
    pub fn new(
        channels: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        if kernel % 2 == 0 || kernel == 0 {
            return Err(Error::InvalidConfig(format!(
                "depthwise kernel must be odd, got {kernel}"
            )));
        }
        if channels == 0 || dilation == 0 {
            return Err(Error::InvalidConfig(
                "depthwise channels and dilation must be positive".into(),
            ));
        }
        Ok(DepthwiseConv1d {
            channels,
            kernel,
            dilation,
            weight: Param::new(uniform_fan_in(rng, kernel, channels * kernel)),
            bias: Param::zeros(channels),
            cache_x: None,
        })
    }

    fn tap_offset(&self, j: usize) -> isize {
        (j as isize - (self.kernel as isize - 1) / 2) * self.dilation as isize
    }

    pub fn forward(&mut self, x: &Tensor3, phase: &Phase) -> Result<Tensor3> {
        if x.c != self.channels {
            return Err(Error::InvalidInput(format!(
                "depthwise expects {} channels, got {}",
                self.channels, x.c
            )));
        }
        let mut out = Tensor3::zeros(x.n, x.c, x.t);
        let (t, k, ch) = (x.t, self.kernel, self.channels);
        let weight = &self.weight.value;
        let bias = &self.bias.value;
        let xdata = &x.data;
        exec::for_each_row_mut(&mut out.data, t, |i, orow| {
            let c = i % ch;
            let xrow = &xdata[i * t..(i + 1) * t];
            orow.fill(bias[c]);
            for j in 0..k {
                axpy_shifted(orow, xrow, weight[c * k + j], self.tap_offset(j));
            }
        });
        if phase.is_train() {
            self.cache_x = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let x = self.cache_x.take().ok_or_else(|| state_err("depthwise"))?;
        let (t, k, ch) = (x.t, self.kernel, self.channels);
        let weight = &self.weight.value;
        let godata = &grad_out.data;

        let mut gx = Tensor3::zeros(x.n, x.c, x.t);
        exec::for_each_row_mut(&mut gx.data, t, |i, grow| {
            let c = i % ch;
            let gorow = &godata[i * t..(i + 1) * t];
            for j in 0..k {
                axpy_shifted(grow, gorow, weight[c * k + j], -self.tap_offset(j));
            }
        });

        let per_channel: Vec<(Vec<f64>, f64)> = exec::map_indices(ch, |c| {
            let mut gw = vec![0.0; k];
            let mut gb = 0.0;
            for n in 0..x.n {
                let xrow = x.row(n, c);
                let gorow = grad_out.row(n, c);
                for (j, g) in gw.iter_mut().enumerate() {
                    *g += dot_shifted(gorow, xrow, self.tap_offset(j));
                }
                gb += gorow.iter().sum::<f64>();
            }
            (gw, gb)
        });
        for (c, (gw, gb)) in per_channel.into_iter().enumerate() {
            for (j, g) in gw.into_iter().enumerate() {
                self.weight.grad[c * k + j] += g;
            }
            self.bias.grad[c] += gb;
        }
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

/// 1x1 cross-channel convolution: a dense map applied at every time step.
#[derive(Debug, Clone)]
pub struct PointwiseConv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    /// `[out_channels, in_channels]`
    pub weight: Param,
    /// `[out_channels]`
    pub bias: Param,
    cache_x: Option<Tensor3>,
}

impl PointwiseConv1d {
    pub fn new(in_channels: usize, out_channels: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 {
            return Err(Error::InvalidConfig(
                "pointwise channel counts must be positive".into(),
            ));
        }
        Ok(PointwiseConv1d {
            in_channels,
            out_channels,
            weight: Param::new(uniform_fan_in(
                rng,
                in_channels,
                out_channels * in_channels,
            )),
            bias: Param::zeros(out_channels),
            cache_x: None,
        })
    }

    pub fn forward(&mut self, x: &Tensor3, phase: &Phase) -> Result<Tensor3> {
        if x.c != self.in_channels {
            return Err(Error::InvalidInput(format!(
                "pointwise expects {} channels, got {}",
                self.in_channels, x.c
            )));
        }
        let mut out = Tensor3::zeros(x.n, self.out_channels, x.t);
        let (t, cin, cout) = (x.t, self.in_channels, self.out_channels);
        let weight = &self.weight.value;
        let bias = &self.bias.value;
        exec::for_each_row_mut(&mut out.data, t, |i, orow| {
            let (n, o) = (i / cout, i % cout);
            orow.fill(bias[o]);
            for ci in 0..cin {
                axpy_shifted(orow, x.row(n, ci), weight[o * cin + ci], 0);
            }
        });
        if phase.is_train() {
            self.cache_x = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let x = self.cache_x.take().ok_or_else(|| state_err("pointwise"))?;
        let (t, cin, cout) = (x.t, self.in_channels, self.out_channels);
        let weight = &self.weight.value;

        let mut gx = Tensor3::zeros(x.n, x.c, x.t);
        exec::for_each_row_mut(&mut gx.data, t, |i, grow| {
            let (n, ci) = (i / cin, i % cin);
            for o in 0..cout {
                axpy_shifted(grow, grad_out.row(n, o), weight[o * cin + ci], 0);
            }
        });

        let per_out: Vec<(Vec<f64>, f64)> = exec::map_indices(cout, |o| {
            let mut gw = vec![0.0; cin];
            let mut gb = 0.0;
            for n in 0..x.n {
                let gorow = grad_out.row(n, o);
                for (ci, g) in gw.iter_mut().enumerate() {
                    *g += dot_shifted(gorow, x.row(n, ci), 0);
                }
                gb += gorow.iter().sum::<f64>();
            }
            (gw, gb)
        });
        for (o, (gw, gb)) in per_out.into_iter().enumerate() {
            for (ci, g) in gw.into_iter().enumerate() {
                self.weight.grad[o * cin + ci] += g;
            }
            self.bias.grad[o] += gb;
        }
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}

struct BnCache {
    x: Tensor3,
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

/// Per-channel normalization over the batch and time axes, then affine.
/// Train phase uses batch statistics and updates the running ones; eval
/// uses the running statistics and is a pure function.
pub struct BatchNorm1d {
    pub channels: usize,
    pub eps: f64,
    /// Running-stat update: running = (1 - momentum) * running + momentum * batch.
    pub momentum: f64,
    pub gamma: Param,
    pub beta: Param,
    /// Biased (population) variance, matching the train-phase statistics.
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    cache: Option<BnCache>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            channels,
            // Small enough that normalized variance is 1 within 1e-6 for
            // any realistic channel variance; f64 keeps this stable.
            eps: 1e-8,
            momentum: 0.1,
            gamma: Param::new(vec![1.0; channels]),
            beta: Param::zeros(channels),
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor3, phase: &Phase) -> Result<Tensor3> {
        if x.c != self.channels {
            return Err(Error::InvalidInput(format!(
                "batchnorm expects {} channels, got {}",
                self.channels, x.c
            )));
        }
        let (mean, inv_std) = if phase.is_train() {
            if x.n < 2 {
                return Err(Error::InvalidInput(
                    "batchnorm needs batch size >= 2 in train phase".into(),
                ));
            }
            let m = (x.n * x.t) as f64;
            let stats: Vec<(f64, f64)> = exec::map_indices(self.channels, |c| {
                let mut sum = 0.0;
                let mut sq = 0.0;
                for n in 0..x.n {
                    for &v in x.row(n, c) {
                        sum += v;
                        sq += v * v;
                    }
                }
                let mean = sum / m;
                (mean, (sq / m - mean * mean).max(0.0))
            });
            let mut mean = Vec::with_capacity(self.channels);
            let mut inv_std = Vec::with_capacity(self.channels);
            for (c, (mu, var)) in stats.into_iter().enumerate() {
                self.running_mean[c] = (1.0 - self.momentum) * self.running_mean[c] + self.momentum * mu;
                self.running_var[c] = (1.0 - self.momentum) * self.running_var[c] + self.momentum * var;
                mean.push(mu);
                inv_std.push(1.0 / (var + self.eps).sqrt());
            }
            (mean, inv_std)
        } else {
            let mean = self.running_mean.clone();
            let inv_std = self
                .running_var
                .iter()
                .map(|&v| 1.0 / (v + self.eps).sqrt())
                .collect();
            (mean, inv_std)
        };

        let mut out = Tensor3::zeros(x.n, x.c, x.t);
        let (t, ch) = (x.t, self.channels);
        let gamma = &self.gamma.value;
        let beta = &self.beta.value;
        exec::for_each_row_mut(&mut out.data, t, |i, orow| {
            let c = i % ch;
            let (g, b, mu, is) = (gamma[c], beta[c], mean[c], inv_std[c]);
            for (o, &v) in orow.iter_mut().zip(&x.data[i * t..(i + 1) * t]) {
                *o = g * (v - mu) * is + b;
            }
        });
        if phase.is_train() {
            self.cache = Some(BnCache {
                x: x.clone(),
                mean,
                inv_std,
            });
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let BnCache { x, mean, inv_std } =
            self.cache.take().ok_or_else(|| state_err("batchnorm"))?;
        let m = (x.n * x.t) as f64;
        let ch = self.channels;

        // Phase 1: per-channel reductions sum(go) and sum(go * xhat).
        let sums: Vec<(f64, f64)> = exec::map_indices(ch, |c| {
            let (mu, is) = (mean[c], inv_std[c]);
            let mut s1 = 0.0;
            let mut s2 = 0.0;
            for n in 0..x.n {
                for (&g, &v) in grad_out.row(n, c).iter().zip(x.row(n, c)) {
                    s1 += g;
                    s2 += g * (v - mu) * is;
                }
            }
            (s1, s2)
        });
        for (c, &(s1, s2)) in sums.iter().enumerate() {
            self.beta.grad[c] += s1;
            self.gamma.grad[c] += s2;
        }

        // Phase 2: gx = gamma * inv_std * (go - s1/m - xhat * s2/m), rowwise.
        let mut gx = Tensor3::zeros(x.n, x.c, x.t);
        let t = x.t;
        let gamma = &self.gamma.value;
        exec::for_each_row_mut(&mut gx.data, t, |i, grow| {
            let c = i % ch;
            let (mu, is, g) = (mean[c], inv_std[c], gamma[c]);
            let (s1, s2) = sums[c];
            let go = &grad_out.data[i * t..(i + 1) * t];
            let xr = &x.data[i * t..(i + 1) * t];
            for ((gi, &goi), &xi) in grow.iter_mut().zip(go).zip(xr) {
                let xhat = (xi - mu) * is;
                *gi = g * is * (goi - s1 / m - xhat * s2 / m);
            }
        });
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        f(&format!("{prefix}.gamma"), &mut self.gamma);
        f(&format!("{prefix}.beta"), &mut self.beta);
    }

    pub fn for_each_buffer(&mut self, prefix: &str, f: &mut super::BufferFn) {
        f(&format!("{prefix}.running_mean"), &mut self.running_mean);
        f(&format!("{prefix}.running_var"), &mut self.running_var);
    }
}

/// Elementwise max(0, x). Consumes its input and works in place.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    cache_mask: Option<Vec<u8>>,
}

impl Relu {
    pub fn new() -> Self {
        Relu { cache_mask: None }
    }

    pub fn forward(&mut self, mut x: Tensor3, phase: &Phase) -> Tensor3 {
        if phase.is_train() {
            self.cache_mask = Some(x.data.iter().map(|&v| (v > 0.0) as u8).collect());
        }
        for v in &mut x.data {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        x
    }

    pub fn backward(&mut self, mut grad_out: Tensor3) -> Result<Tensor3> {
        let mask = self.cache_mask.take().ok_or_else(|| state_err("relu"))?;
        for (g, m) in grad_out.data.iter_mut().zip(mask) {
            if m == 0 {
                *g = 0.0;
            }
        }
        Ok(grad_out)
    }
}

/// Dropout over whole channels: in train phase each (batch, channel) row is
/// zeroed with probability `rate`, survivors scaled by 1/(1-rate). Eval is
/// the identity. Draw order is fixed (batch-major) for reproducibility.
#[derive(Debug, Clone)]
pub struct SpatialDropout {
    pub rate: f64,
    cache_scale: Option<Vec<f64>>,
}

impl SpatialDropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        Ok(SpatialDropout {
            rate,
            cache_scale: None,
        })
    }

    pub fn forward(&mut self, mut x: Tensor3, phase: &mut Phase) -> Tensor3 {
        match phase {
            Phase::Eval => x,
            Phase::Train { rng } => {
                let keep_scale = 1.0 / (1.0 - self.rate);
                let scales: Vec<f64> = (0..x.rows())
                    .map(|_| {
                        if self.rate > 0.0 && rng.random::<f64>() < self.rate {
                            0.0
                        } else {
                            keep_scale
                        }
                    })
                    .collect();
                let t = x.t;
                exec::for_each_row_mut(&mut x.data, t, |i, row| {
                    let s = scales[i];
                    if s != 1.0 {
                        for v in row {
                            *v *= s;
                        }
                    }
                });
                self.cache_scale = Some(scales);
                x
            }
        }
    }

    pub fn backward(&mut self, mut grad_out: Tensor3) -> Result<Tensor3> {
        let scales = self.cache_scale.take().ok_or_else(|| state_err("dropout"))?;
        let t = grad_out.t;
        exec::for_each_row_mut(&mut grad_out.data, t, |i, row| {
            let s = scales[i];
            if s != 1.0 {
                for v in row {
                    *v *= s;
                }
            }
        });
        Ok(grad_out)
    }
}

/// Non-overlapping mean pooling; the pool width must divide the length.
#[derive(Debug, Clone)]
pub struct AvgPool1d {
    pub k: usize,
    cache_t_in: Option<usize>,
}

impl AvgPool1d {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("pool width must be positive".into()));
        }
        Ok(AvgPool1d { k, cache_t_in: None })
    }

    pub fn forward(&mut self, x: &Tensor3) -> Result<Tensor3> {
        if x.t % self.k != 0 {
            return Err(Error::InvalidInput(format!(
                "pool width {} does not divide length {}",
                self.k, x.t
            )));
        }
        let k = self.k;
        let t_out = x.t / k;
        let mut out = Tensor3::zeros(x.n, x.c, t_out);
        let t_in = x.t;
        exec::for_each_row_mut(&mut out.data, t_out, |i, orow| {
            let xrow = &x.data[i * t_in..(i + 1) * t_in];
            for (o, chunk) in orow.iter_mut().zip(xrow.chunks_exact(k)) {
                *o = chunk.iter().sum::<f64>() / k as f64;
            }
        });
        self.cache_t_in = Some(t_in);
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let t_in = self.cache_t_in.take().ok_or_else(|| state_err("avgpool"))?;
        let k = self.k;
        let mut gx = Tensor3::zeros(grad_out.n, grad_out.c, t_in);
        let t_out = grad_out.t;
        exec::for_each_row_mut(&mut gx.data, t_in, |i, grow| {
            let gorow = &grad_out.data[i * t_out..(i + 1) * t_out];
            for (chunk, &g) in grow.chunks_exact_mut(k).zip(gorow) {
                let share = g / k as f64;
                for v in chunk {
                    *v = share;
                }
            }
        });
        Ok(gx)
    }
}

/// Fully connected layer over flattened features.
#[derive(Debug, Clone)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    /// `[out_dim, in_dim]`
    pub weight: Param,
    /// `[out_dim]`
    pub bias: Param,
    cache_x: Option<Tensor2>,
}

impl Dense {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig(
                "dense dimensions must be positive".into(),
            ));
        }
        Ok(Dense {
            in_dim,
            out_dim,
            weight: Param::new(uniform_fan_in(rng, in_dim, out_dim * in_dim)),
            bias: Param::zeros(out_dim),
            cache_x: None,
        })
    }

    pub fn forward(&mut self, x: &Tensor2, phase: &Phase) -> Result<Tensor2> {
        if x.cols != self.in_dim {
            return Err(Error::InvalidInput(format!(
                "dense expects {} inputs, got {}",
                self.in_dim, x.cols
            )));
        }
        let mut out = Tensor2::zeros(x.rows, self.out_dim);
        let (din, dout) = (self.in_dim, self.out_dim);
        let weight = &self.weight.value;
        let bias = &self.bias.value;
        exec::for_each_row_mut(&mut out.data, dout, |n, orow| {
            let xrow = x.row(n);
            for (o, out_v) in orow.iter_mut().enumerate() {
                let w = &weight[o * din..(o + 1) * din];
                *out_v = bias[o] + w.iter().zip(xrow).map(|(a, b)| a * b).sum::<f64>();
            }
        });
        if phase.is_train() {
            self.cache_x = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor2) -> Result<Tensor2> {
        let x = self.cache_x.take().ok_or_else(|| state_err("dense"))?;
        let (din, dout) = (self.in_dim, self.out_dim);
        let weight = &self.weight.value;

        let mut gx = Tensor2::zeros(x.rows, din);
        exec::for_each_row_mut(&mut gx.data, din, |n, grow| {
            let gorow = grad_out.row(n);
            for (o, &g) in gorow.iter().enumerate() {
                let w = &weight[o * din..(o + 1) * din];
                for (gv, &wv) in grow.iter_mut().zip(w) {
                    *gv += g * wv;
                }
            }
        });

        let per_out: Vec<(Vec<f64>, f64)> = exec::map_indices(dout, |o| {
            let mut gw = vec![0.0; din];
            let mut gb = 0.0;
            for n in 0..x.rows {
                let g = grad_out.at(n, o);
                gb += g;
                for (gv, &xv) in gw.iter_mut().zip(x.row(n)) {
                    *gv += g * xv;
                }
            }
            (gw, gb)
        });
        for (o, (gw, gb)) in per_out.into_iter().enumerate() {
            for (i, g) in gw.into_iter().enumerate() {
                self.weight.grad[o * din + i] += g;
            }
            self.bias.grad[o] += gb;
        }
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        f(&format!("{prefix}.weight"), &mut self.weight);
        f(&format!("{prefix}.bias"), &mut self.bias);
    }
}
