//! LSTM and bidirectional LSTM with hand-written backpropagation through
//! time. Gate layout is input/forget/cell/output in four contiguous
//! row-blocks of the packed matrices; initial state is zero.

use rand_chacha::ChaCha8Rng;

use super::tensor::Tensor3;
use super::{uniform_fan_in, Param, ParamFn, Phase};
use crate::error::{Error, Result};

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct LstmCache {
    /// Input copied time-major: `[N, T, F]`.
    xs: Vec<f64>,
    /// Post-activation gates i,f,g,o per step: `[N, T, 4H]`.
    gates: Vec<f64>,
    /// Cell states: `[N, T, H]`.
    c: Vec<f64>,
    /// Hidden states: `[N, T, H]`.
    h: Vec<f64>,
    n: usize,
    t: usize,
}

/// Unidirectional LSTM over `[N, F, T]` input, returning the full hidden
/// sequence `[N, H, T]`.
pub struct Lstm {
    pub input_dim: usize,
    pub hidden: usize,
    /// `[4H, F]`
    pub wx: Param,
    /// `[4H, H]`
    pub wh: Param,
    /// `[4H]`, forget block initialized to 1.0
    pub b: Param,
    cache: Option<LstmCache>,
}

impl Lstm {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::InvalidConfig(
                "lstm dimensions must be positive".into(),
            ));
        }
        let mut b = vec![0.0; 4 * hidden];
        for v in &mut b[hidden..2 * hidden] {
            *v = 1.0;
        }
        Ok(Lstm {
            input_dim,
            hidden,
            wx: Param::new(uniform_fan_in(rng, input_dim, 4 * hidden * input_dim)),
            wh: Param::new(uniform_fan_in(rng, hidden, 4 * hidden * hidden)),
            b: Param::new(b),
            cache: None,
        })
    }

    pub fn forward(&mut self, x: &Tensor3, phase: &Phase) -> Result<Tensor3> {
        if x.c != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "lstm expects {} input features, got {}",
                self.input_dim, x.c
            )));
        }
        let (n_batch, f_dim, t_len, h_dim) = (x.n, x.c, x.t, self.hidden);
        let mut out = Tensor3::zeros(n_batch, h_dim, t_len);

        let mut xs = vec![0.0; n_batch * t_len * f_dim];
        let mut gates = vec![0.0; n_batch * t_len * 4 * h_dim];
        let mut cs = vec![0.0; n_batch * t_len * h_dim];
        let mut hs = vec![0.0; n_batch * t_len * h_dim];

        let wx = &self.wx.value;
        let wh = &self.wh.value;
        let bias = &self.b.value;

        for n in 0..n_batch {
            let mut h_prev = vec![0.0; h_dim];
            let mut c_prev = vec![0.0; h_dim];
            for t in 0..t_len {
                let xt = &mut xs[(n * t_len + t) * f_dim..(n * t_len + t + 1) * f_dim];
                for f in 0..f_dim {
                    xt[f] = x.at(n, f, t);
                }
                let mut a = bias.to_vec();
                for (r, av) in a.iter_mut().enumerate() {
                    let wrow = &wx[r * f_dim..(r + 1) * f_dim];
                    *av += wrow.iter().zip(xt.iter()).map(|(p, q)| p * q).sum::<f64>();
                    let hrow = &wh[r * h_dim..(r + 1) * h_dim];
                    *av += hrow.iter().zip(&h_prev).map(|(p, q)| p * q).sum::<f64>();
                }
                let gt = &mut gates[(n * t_len + t) * 4 * h_dim..(n * t_len + t + 1) * 4 * h_dim];
                let ct = &mut cs[(n * t_len + t) * h_dim..(n * t_len + t + 1) * h_dim];
                let ht = &mut hs[(n * t_len + t) * h_dim..(n * t_len + t + 1) * h_dim];
                for j in 0..h_dim {
                    let ig = sigmoid(a[j]);
                    let fg = sigmoid(a[h_dim + j]);
                    let gg = a[2 * h_dim + j].tanh();
                    let og = sigmoid(a[3 * h_dim + j]);
                    gt[j] = ig;
                    gt[h_dim + j] = fg;
                    gt[2 * h_dim + j] = gg;
                    gt[3 * h_dim + j] = og;
                    ct[j] = fg * c_prev[j] + ig * gg;
                    ht[j] = og * ct[j].tanh();
                }
                h_prev.copy_from_slice(ht);
                c_prev.copy_from_slice(ct);
                for j in 0..h_dim {
                    *out.at_mut(n, j, t) = ht[j];
                }
            }
        }
        if phase.is_train() {
            self.cache = Some(LstmCache {
                xs,
                gates,
                c: cs,
                h: hs,
                n: n_batch,
                t: t_len,
            });
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("lstm: backward without a preceding train-phase forward".into()))?;
        let (n_batch, t_len, h_dim, f_dim) = (cache.n, cache.t, self.hidden, self.input_dim);
        let wx = &self.wx.value;
        let wh = &self.wh.value;
        let mut gx = Tensor3::zeros(n_batch, f_dim, t_len);
        let mut da = vec![0.0; 4 * h_dim];
        let zeros_h = vec![0.0; h_dim];

        for n in 0..n_batch {
            let mut dh_next = vec![0.0; h_dim];
            let mut dc_next = vec![0.0; h_dim];
            for t in (0..t_len).rev() {
                let gt = &cache.gates[(n * t_len + t) * 4 * h_dim..(n * t_len + t + 1) * 4 * h_dim];
                let ct = &cache.c[(n * t_len + t) * h_dim..(n * t_len + t + 1) * h_dim];
                let c_prev = if t > 0 {
                    &cache.c[(n * t_len + t - 1) * h_dim..(n * t_len + t) * h_dim]
                } else {
                    &zeros_h[..]
                };
                let h_prev = if t > 0 {
                    &cache.h[(n * t_len + t - 1) * h_dim..(n * t_len + t) * h_dim]
                } else {
                    &zeros_h[..]
                };
                let xt = &cache.xs[(n * t_len + t) * f_dim..(n * t_len + t + 1) * f_dim];

                for j in 0..h_dim {
                    let (ig, fg, gg, og) = (gt[j], gt[h_dim + j], gt[2 * h_dim + j], gt[3 * h_dim + j]);
                    let tanh_c = ct[j].tanh();
                    let dh = grad_out.at(n, j, t) + dh_next[j];
                    let dc = dc_next[j] + dh * og * (1.0 - tanh_c * tanh_c);
                    da[j] = dc * gg * ig * (1.0 - ig);
                    da[h_dim + j] = dc * c_prev[j] * fg * (1.0 - fg);
                    da[2 * h_dim + j] = dc * ig * (1.0 - gg * gg);
                    da[3 * h_dim + j] = dh * tanh_c * og * (1.0 - og);
                    dc_next[j] = dc * fg;
                }

                for (r, &dav) in da.iter().enumerate() {
                    self.b.grad[r] += dav;
                    let gwx = &mut self.wx.grad[r * f_dim..(r + 1) * f_dim];
                    for (g, &xv) in gwx.iter_mut().zip(xt) {
                        *g += dav * xv;
                    }
                    let gwh = &mut self.wh.grad[r * h_dim..(r + 1) * h_dim];
                    for (g, &hv) in gwh.iter_mut().zip(h_prev) {
                        *g += dav * hv;
                    }
                }
                for f in 0..f_dim {
                    let mut acc = 0.0;
                    for (r, &dav) in da.iter().enumerate() {
                        acc += wx[r * f_dim + f] * dav;
                    }
                    *gx.at_mut(n, f, t) = acc;
                }
                for j in 0..h_dim {
                    let mut acc = 0.0;
                    for (r, &dav) in da.iter().enumerate() {
                        acc += wh[r * h_dim + j] * dav;
                    }
                    dh_next[j] = acc;
                }
            }
        }
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        f(&format!("{prefix}.wx"), &mut self.wx);
        f(&format!("{prefix}.wh"), &mut self.wh);
        f(&format!("{prefix}.bias"), &mut self.b);
    }
}

fn reverse_time(x: &Tensor3) -> Tensor3 {
    let mut out = x.clone();
    for n in 0..x.n {
        for c in 0..x.c {
            out.row_mut(n, c).reverse();
        }
    }
    out
}

/// Forward and time-reversed LSTM passes, hidden sequences concatenated on
/// the channel axis: `[N, F, T]` -> `[N, 2H, T]`, rows 0..H forward.
pub struct BiLstm {
    pub fwd: Lstm,
    pub bwd: Lstm,
}

impl BiLstm {
    pub fn new(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        Ok(BiLstm {
            fwd: Lstm::new(input_dim, hidden, rng)?,
            bwd: Lstm::new(input_dim, hidden, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    pub fn forward(&mut self, x: &Tensor3, phase: &Phase) -> Result<Tensor3> {
        let h_dim = self.fwd.hidden;
        let yf = self.fwd.forward(x, phase)?;
        let yb_rev = self.bwd.forward(&reverse_time(x), phase)?;
        let yb = reverse_time(&yb_rev);
        let mut out = Tensor3::zeros(x.n, 2 * h_dim, x.t);
        for n in 0..x.n {
            for j in 0..h_dim {
                out.row_mut(n, j).copy_from_slice(yf.row(n, j));
                out.row_mut(n, h_dim + j).copy_from_slice(yb.row(n, j));
            }
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let h_dim = self.fwd.hidden;
        let (n_batch, t_len) = (grad_out.n, grad_out.t);
        let mut go_f = Tensor3::zeros(n_batch, h_dim, t_len);
        let mut go_b = Tensor3::zeros(n_batch, h_dim, t_len);
        for n in 0..n_batch {
            for j in 0..h_dim {
                go_f.row_mut(n, j).copy_from_slice(grad_out.row(n, j));
                go_b.row_mut(n, j).copy_from_slice(grad_out.row(n, h_dim + j));
            }
        }
        let gx_f = self.fwd.backward(&go_f)?;
        let gx_b_rev = self.bwd.backward(&reverse_time(&go_b))?;
        let gx_b = reverse_time(&gx_b_rev);
        let mut gx = gx_f;
        for (g, &v) in gx.data.iter_mut().zip(&gx_b.data) {
            *g += v;
        }
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        self.fwd.for_each_param(&format!("{prefix}.fwd"), f);
        self.bwd.for_each_param(&format!("{prefix}.bwd"), f);
    }
}
