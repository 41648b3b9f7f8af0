//! Pooling operations.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::conv::conv_out_dim;

/// Box average pool with zero padding; the divisor is always k*k
/// (padding zeros count toward the mean).
pub fn avg_pool(x: &Tensor, kernel: usize, stride: usize, pad: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if kernel == 0 || stride == 0 {
        return Err(Error::invalid("avg_pool kernel and stride must be >= 1"));
    }
    let oh = conv_out_dim(h, kernel, stride, pad)?;
    let ow = conv_out_dim(w, kernel, stride, pad)?;
    let inv = 1.0 / (kernel * kernel) as f64;
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let xs = x.data();
    let od = out.data_mut();
    for img in 0..n * c {
        let ibase = img * h * w;
        let obase = img * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0f64;
                for ky in 0..kernel {
                    let iy = oy * stride + ky;
                    if iy < pad || iy >= h + pad {
                        continue;
                    }
                    let row = ibase + (iy - pad) * w;
                    for kx in 0..kernel {
                        let ix = ox * stride + kx;
                        if ix < pad || ix >= w + pad {
                            continue;
                        }
                        acc += xs[row + ix - pad] as f64;
                    }
                }
                od[obase + oy * ow + ox] = (acc * inv) as f32;
            }
        }
    }
    Ok(out)
}

/// 2x2 max pool, stride 2. Odd trailing rows/columns are dropped.
pub fn max_pool_2x2(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::shape(format!("max_pool_2x2 underflow on {h}x{w}")));
    }
    let mut out = Tensor::zeros(vec![n, c, oh, ow]);
    let xs = x.data();
    let od = out.data_mut();
    for img in 0..n * c {
        let ibase = img * h * w;
        let obase = img * oh * ow;
        for oy in 0..oh {
            let r0 = ibase + 2 * oy * w;
            let r1 = r0 + w;
            for ox in 0..ow {
                let x0 = 2 * ox;
                let m = xs[r0 + x0]
                    .max(xs[r0 + x0 + 1])
                    .max(xs[r1 + x0])
                    .max(xs[r1 + x0 + 1]);
                od[obase + oy * ow + ox] = m;
            }
        }
    }
    Ok(out)
}

/// Mean over all spatial positions, per (image, channel); f64 accumulation
/// in ascending index order.
pub fn global_avg_pool(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let plane = h * w;
    let mut out = Tensor::zeros(vec![n, c, 1, 1]);
    let xs = x.data();
    let od = out.data_mut();
    for img in 0..n * c {
        let base = img * plane;
        let mut acc = 0.0f64;
        for i in 0..plane {
            acc += xs[base + i] as f64;
        }
        od[img] = (acc / plane as f64) as f32;
    }
    Ok(out)
}

/// Average pool onto a bins×bins output grid (PyTorch adaptive_avg_pool2d
/// bin edges: bin i covers [floor(i*h/bins), ceil((i+1)*h/bins))).
pub fn adaptive_avg_pool(x: &Tensor, bins: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if bins == 0 {
        return Err(Error::invalid("adaptive pool bins must be >= 1"));
    }
    if bins > h || bins > w {
        return Err(Error::shape(format!(
            "adaptive pool bins {bins} exceed spatial {h}x{w}"
        )));
    }
    let mut out = Tensor::zeros(vec![n, c, bins, bins]);
    let xs = x.data();
    let od = out.data_mut();
    let edge = |i: usize, len: usize| -> (usize, usize) {
        (i * len / bins, ((i + 1) * len + bins - 1) / bins)
    };
    for img in 0..n * c {
        let ibase = img * h * w;
        let obase = img * bins * bins;
        for by in 0..bins {
            let (y0, y1) = edge(by, h);
            for bx in 0..bins {
                let (x0, x1) = edge(bx, w);
                let mut acc = 0.0f64;
                for y in y0..y1 {
                    let row = ibase + y * w;
                    for x in x0..x1 {
                        acc += xs[row + x] as f64;
                    }
                }
                let count = ((y1 - y0) * (x1 - x0)) as f64;
                od[obase + by * bins + bx] = (acc / count) as f32;
            }
        }
    }
    Ok(out)
}
