//! Flat row-major tensors sized for this workload: batched channel-time
//! activations and plain matrices. No views, no broadcasting.

use crate::error::{Error, Result};

/// `[batch, channel, time]`, row-major, time contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    pub n: usize,
    pub c: usize,
    pub t: usize,
    pub data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(n: usize, c: usize, t: usize) -> Self {
        Tensor3 {
            n,
            c,
            t,
            data: vec![0.0; n * c * t],
        }
    }

    pub fn from_vec(n: usize, c: usize, t: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * c * t {
            return Err(Error::InvalidInput(format!(
                "tensor data length {} does not match shape {n}x{c}x{t}",
                data.len()
            )));
        }
        Ok(Tensor3 { n, c, t, data })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Number of `(batch, channel)` rows.
    pub fn rows(&self) -> usize {
        self.n * self.c
    }

    pub fn row(&self, n: usize, c: usize) -> &[f64] {
        let off = (n * self.c + c) * self.t;
        &self.data[off..off + self.t]
    }

    pub fn row_mut(&mut self, n: usize, c: usize) -> &mut [f64] {
        let off = (n * self.c + c) * self.t;
        &mut self.data[off..off + self.t]
    }

    pub fn at(&self, n: usize, c: usize, t: usize) -> f64 {
        self.data[(n * self.c + c) * self.t + t]
    }

    pub fn at_mut(&mut self, n: usize, c: usize, t: usize) -> &mut f64 {
        &mut self.data[(n * self.c + c) * self.t + t]
    }
}

/// Plain `[rows, cols]` row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidInput(format!(
                "matrix data length {} does not match shape {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Tensor2 { rows, cols, data })
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}
