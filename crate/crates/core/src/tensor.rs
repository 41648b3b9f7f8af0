//! Dense row-major f32 tensor, the engine's sole runtime value.
//!
//! Rank 4 (NCHW) is used for feature maps, rank 2 for token matrices and
//! weight matrices, rank 1 for biases and gains.

use crate::error::{Error, Result};

/// Dense row-major array of 32-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Builds a tensor from a shape and matching flat data.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::invalid(format!("zero dim in shape {shape:?}")));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} wants {numel} elements, data has {}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![0.0; numel] }
    }

    pub fn full(shape: Vec<usize>, value: f32) -> Self {
        let numel = shape.iter().product();
        Tensor { shape, data: vec![value; numel] }
    }

    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(usize) -> f32) -> Self {
        let numel: usize = shape.iter().product();
        Tensor { shape, data: (0..numel).map(|i| f(i)).collect() }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Dimensions of an NCHW tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match self.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            other => Err(Error::shape(format!("expected rank-4 NCHW, got {other:?}"))),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            other => Err(Error::shape(format!("expected rank-2, got {other:?}"))),
        }
    }

    #[inline]
    pub fn at4(&self, n: usize, c: usize, h: usize, w: usize) -> f32 {
        self.data[self.offset4(n, c, h, w)]
    }

    /// Flat offset of (n, c, h, w).
    #[inline]
    pub fn offset4(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.shape[1] + c) * self.shape[2] + h) * self.shape[3] + w
    }

    pub fn map(&self, f: impl Fn(f32) -> f32 + Sync) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Channel slice [c0, c0+len) of an NCHW tensor.
    pub fn slice_channels(&self, c0: usize, len: usize) -> Result<Tensor> {
        let (n, c, h, w) = self.dims4()?;
        if c0 + len > c {
            return Err(Error::shape(format!(
                "channel slice {c0}..{} out of {c} channels",
                c0 + len
            )));
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * len * plane);
        for ni in 0..n {
            let base = (ni * c + c0) * plane;
            data.extend_from_slice(&self.data[base..base + len * plane]);
        }
        Tensor::new(vec![n, len, h, w], data)
    }

    /// Concatenates NCHW tensors along the channel axis, in argument order.
    pub fn concat_channels(parts: &[&Tensor]) -> Result<Tensor> {
        let (n, _, h, w) = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?
            .dims4()?;
        let mut total_c = 0;
        for p in parts {
            let (pn, pc, ph, pw) = p.dims4()?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(Error::shape(format!(
                    "concat expects matching N/H/W, got {:?} vs {:?}",
                    p.shape(),
                    parts[0].shape()
                )));
            }
            total_c += pc;
        }
        let plane = h * w;
        let mut data = Vec::with_capacity(n * total_c * plane);
        for ni in 0..n {
            for p in parts {
                let pc = p.shape()[1];
                let base = ni * pc * plane;
                data.extend_from_slice(&p.data[base..base + pc * plane]);
            }
        }
        Tensor::new(vec![n, total_c, h, w], data)
    }

    /// Mirrors an NCHW tensor left-right.
    pub fn flip_h(&self) -> Tensor {
        let (n, c, h, w) = self.dims4().expect("flip_h expects NCHW");
        let mut out = vec![0.0f32; self.data.len()];
        for img in 0..n * c {
            let base = img * h * w;
            for row in 0..h {
                let r = base + row * w;
                for col in 0..w {
                    out[r + col] = self.data[r + (w - 1 - col)];
                }
            }
        }
        Tensor { shape: self.shape.clone(), data: out }
    }

    /// Mirrors an NCHW tensor top-bottom.
    pub fn flip_v(&self) -> Tensor {
        let (n, c, h, w) = self.dims4().expect("flip_v expects NCHW");
        let mut out = vec![0.0f32; self.data.len()];
        for img in 0..n * c {
            let base = img * h * w;
            for row in 0..h {
                let src = base + (h - 1 - row) * w;
                let dst = base + row * w;
                out[dst..dst + w].copy_from_slice(&self.data[src..src + w]);
            }
        }
        Tensor { shape: self.shape.clone(), data: out }
    }
}
