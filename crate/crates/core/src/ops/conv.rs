//! 2-D convolution and folded batch-norm.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Output extent of a convolution along one axis.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> Result<usize> {
    let padded = input + 2 * pad;
    if padded < kernel {
        return Err(Error::shape(format!(
            "kernel {kernel} exceeds padded input {padded}"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Grouped 2-D convolution over an NCHW tensor.
///
/// `weight` has shape (c_out, c_in/groups, kh, kw); `bias`, when present, has
/// one value per output channel. Each output element accumulates its taps in
/// f64, ascending over (channel, kh, kw), so the result does not depend on
/// the parallel schedule of the outer (image, channel) loop.
pub fn conv2d(
    x: &Tensor,
    weight: &Tensor,
    bias: Option<&[f32]>,
    stride: usize,
    pad: usize,
    groups: usize,
) -> Result<Tensor> {
    let (n, c_in, h, w) = x.dims4()?;
    let wdims = weight.shape();
    if wdims.len() != 4 {
        return Err(Error::shape(format!("weight must be rank 4, got {wdims:?}")));
    }
    let (c_out, wc, kh, kw) = (wdims[0], wdims[1], wdims[2], wdims[3]);
    if groups == 0 || c_in % groups != 0 || c_out % groups != 0 {
        return Err(Error::shape(format!(
            "groups {groups} must divide c_in {c_in} and c_out {c_out}"
        )));
    }
    if wc != c_in / groups {
        return Err(Error::shape(format!(
            "weight expects {wc} input channels per group, input supplies {} ({} channels, {groups} groups)",
            c_in / groups,
            c_in
        )));
    }
    if let Some(b) = bias {
        if b.len() != c_out {
            return Err(Error::shape(format!(
                "bias length {} != c_out {c_out}",
                b.len()
            )));
        }
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be >= 1"));
    }
    let oh = conv_out_dim(h, kh, stride, pad)?;
    let ow = conv_out_dim(w, kw, stride, pad)?;

    let mut out = Tensor::zeros(vec![n, c_out, oh, ow]);
    let xs = x.data();
    let ws = weight.data();
    let cpg_in = c_in / groups;
    let cpg_out = c_out / groups;

    // One independent task per (image, output channel) pair.
    out.data_mut()
        .par_chunks_mut(oh * ow)
        .enumerate()
        .for_each(|(task, plane)| {
            let ni = task / c_out;
            let co = task % c_out;
            let group = co / cpg_out;
            let b = bias.map_or(0.0f64, |b| b[co] as f64);
            let wbase = co * cpg_in * kh * kw;
            // Valid ox range per kx: ox*stride + kx - pad must land in [0, w).
            let ox_range: Vec<(usize, usize)> = (0..kw)
                .map(|kx| {
                    let lo = pad.saturating_sub(kx).div_ceil(stride);
                    let hi = if w + pad > kx {
                        (((w + pad - kx - 1) / stride) + 1).min(ow)
                    } else {
                        0
                    };
                    (lo.min(ow), hi)
                })
                .collect();
            let mut acc = vec![0.0f64; ow];
            for oy in 0..oh {
                acc.fill(b);
                for cig in 0..cpg_in {
                    let ci = group * cpg_in + cig;
                    let xplane = ((ni * c_in) + ci) * h * w;
                    for ky in 0..kh {
                        let iy = oy * stride + ky;
                        if iy < pad || iy >= h + pad {
                            continue;
                        }
                        let xrow = xplane + (iy - pad) * w;
                        let wrow = wbase + (cig * kh + ky) * kw;
                        for kx in 0..kw {
                            let wv = ws[wrow + kx] as f64;
                            let (lo, hi) = ox_range[kx];
                            if lo >= hi {
                                continue;
                            }
                            // ix = ox*stride + kx - pad, in-bounds for lo..hi
                            let base = xrow + lo * stride + kx - pad;
                            if stride == 1 {
                                let row = &xs[base..base + (hi - lo)];
                                let dst = &mut acc[lo..hi];
                                for (a, &v) in dst.iter_mut().zip(row) {
                                    *a += wv * v as f64;
                                }
                            } else {
                                for (i, a) in acc[lo..hi].iter_mut().enumerate() {
                                    *a += wv * xs[base + i * stride] as f64;
                                }
                            }
                        }
                    }
                }
                for ox in 0..ow {
                    plane[oy * ow + ox] = acc[ox] as f32;
                }
            }
        });
    Ok(out)
}

/// Per-channel affine (folded batch-norm): y = scale[c] * x + shift[c].
pub fn batch_norm(x: &Tensor, scale: &[f32], shift: &[f32]) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if scale.len() != c || shift.len() != c {
        return Err(Error::shape(format!(
            "bn params for {} / {} channels, tensor has {c}",
            scale.len(),
            shift.len()
        )));
    }
    let plane = h * w;
    let mut out = x.clone();
    for ni in 0..n {
        for ci in 0..c {
            let base = (ni * c + ci) * plane;
            let (s, t) = (scale[ci], shift[ci]);
            for v in &mut out.data_mut()[base..base + plane] {
                *v = s * *v + t;
            }
        }
    }
    Ok(out)
}
