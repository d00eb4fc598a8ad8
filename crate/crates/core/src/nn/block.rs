//! The convolutional block: a pyramid of dilated depthwise-separable
//! series, each wrapped in a residual connection, followed by average
//! pooling. One series is [depthwise conv -> pointwise conv -> batchnorm ->
//! ReLU -> spatial dropout]; its input is added back to its output, through
//! a 1x1 projection when the channel counts differ.

use rand_chacha::ChaCha8Rng;

use super::layers::{AvgPool1d, BatchNorm1d, DepthwiseConv1d, PointwiseConv1d, Relu, SpatialDropout};
use super::tensor::Tensor3;
use super::{BufferFn, ParamFn, Phase};
use crate::error::{Error, Result};

/// Shape of one block. `dilations` has one entry per series; its length is
/// the series count.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockSpec {
    pub kernel: usize,
    pub channels: usize,
    pub dilations: Vec<usize>,
    pub dropout_rate: f64,
    pub pool: usize,
}

impl ConvBlockSpec {
    /// Default shape: four series, kernel 3, 16 channels, dilations
    /// 1,2,4,8, dropout 0.1, with the given pool width.
    pub fn with_pool(pool: usize) -> Self {
        ConvBlockSpec {
            kernel: 3,
            channels: 16,
            dilations: vec![1, 2, 4, 8],
            dropout_rate: 0.1,
            pool,
        }
    }

    pub fn n_series(&self) -> usize {
        self.dilations.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dilations.is_empty() {
            return Err(Error::InvalidConfig(
                "conv block needs at least one series (empty dilation list)".into(),
            ));
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::InvalidConfig(format!(
                "conv kernel must be odd, got {}",
                self.kernel
            )));
        }
        if self.channels == 0 || self.pool == 0 {
            return Err(Error::InvalidConfig(
                "conv block channels and pool must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

struct Series {
    dw: DepthwiseConv1d,
    pw: PointwiseConv1d,
    bn: BatchNorm1d,
    relu: Relu,
    dropout: SpatialDropout,
    /// Residual projection, present only when input and output channel
    /// counts differ (the first series of the first block: 1 -> 16).
    proj: Option<PointwiseConv1d>,
}

pub struct ConvBlock {
    pub spec: ConvBlockSpec,
    pub in_channels: usize,
    series: Vec<Series>,
    pool: AvgPool1d,
}

impl ConvBlock {
    pub fn new(in_channels: usize, spec: ConvBlockSpec, rng: &mut ChaCha8Rng) -> Result<Self> {
        spec.validate()?;
        let mut series = Vec::with_capacity(spec.n_series());
        let mut cur_ch = in_channels;
        for &dilation in &spec.dilations {
            let proj = if cur_ch != spec.channels {
                Some(PointwiseConv1d::new(cur_ch, spec.channels, rng)?)
            } else {
                None
            };
            series.push(Series {
                dw: DepthwiseConv1d::new(cur_ch, spec.kernel, dilation, rng)?,
                pw: PointwiseConv1d::new(cur_ch, spec.channels, rng)?,
                bn: BatchNorm1d::new(spec.channels),
                relu: Relu::new(),
                dropout: SpatialDropout::new(spec.dropout_rate)?,
                proj,
            });
            cur_ch = spec.channels;
        }
        Ok(ConvBlock {
            pool: AvgPool1d::new(spec.pool)?,
            spec,
            in_channels,
            series,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.spec.channels
    }

    pub fn forward(&mut self, x: &Tensor3, phase: &mut Phase) -> Result<Tensor3> {
        let mut cur = x.clone();
        for s in &mut self.series {
            let y = s.dw.forward(&cur, phase)?;
            let y = s.pw.forward(&y, phase)?;
            let y = s.bn.forward(&y, phase)?;
            let y = s.relu.forward(y, phase);
            let mut y = s.dropout.forward(y, phase);
            match &mut s.proj {
                Some(p) => {
                    let r = p.forward(&cur, phase)?;
                    for (a, &b) in y.data.iter_mut().zip(&r.data) {
                        *a += b;
                    }
                }
                None => {
                    for (a, &b) in y.data.iter_mut().zip(&cur.data) {
                        *a += b;
                    }
                }
            }
            cur = y;
        }
        self.pool.forward(&cur)
    }

    pub fn backward(&mut self, grad_out: &Tensor3) -> Result<Tensor3> {
        let mut gx = self.pool.backward(grad_out)?;
        for s in self.series.iter_mut().rev() {
            let through = s.dropout.backward(gx.clone())?;
            let through = s.relu.backward(through)?;
            let through = s.bn.backward(&through)?;
            let through = s.pw.backward(&through)?;
            let through = s.dw.backward(&through)?;
            // Residual path: identity passes gx straight through; a
            // projection transforms it.
            let skip = match &mut s.proj {
                Some(p) => p.backward(&gx)?,
                None => gx,
            };
            gx = through;
            for (a, &b) in gx.data.iter_mut().zip(&skip.data) {
                *a += b;
            }
        }
        Ok(gx)
    }

    pub fn for_each_param(&mut self, prefix: &str, f: &mut ParamFn) {
        for (i, s) in self.series.iter_mut().enumerate() {
            s.dw.for_each_param(&format!("{prefix}.series{i}.dw"), f);
            s.pw.for_each_param(&format!("{prefix}.series{i}.pw"), f);
            s.bn.for_each_param(&format!("{prefix}.series{i}.bn"), f);
            if let Some(p) = &mut s.proj {
                p.for_each_param(&format!("{prefix}.series{i}.proj"), f);
            }
        }
    }

    pub fn for_each_buffer(&mut self, prefix: &str, f: &mut BufferFn) {
        for (i, s) in self.series.iter_mut().enumerate() {
            s.bn.for_each_buffer(&format!("{prefix}.series{i}.bn"), f);
        }
    }
}
