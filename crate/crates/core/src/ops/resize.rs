//! Bilinear interpolation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Bilinear resize of an NCHW tensor, align-corners = false.
///
/// Output pixel centers map to source coordinates
///   src = (dst + 0.5) * (in_len / out_len) - 0.5
/// and the four neighbouring source pixels are blended with weights given by
/// the fractional parts; coordinates are clamped at the borders.
pub fn bilinear_resize(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize target must be >= 1"));
    }
    if (out_h, out_w) == (h, w) {
        return Ok(x.clone());
    }
    // Precompute per-axis source indices and weights.
    let axis = |out_len: usize, in_len: usize| -> Vec<(usize, usize, f32)> {
        let scale = in_len as f64 / out_len as f64;
        (0..out_len)
            .map(|i| {
                let src = (i as f64 + 0.5) * scale - 0.5;
                let src = src.max(0.0);
                let i0 = (src.floor() as usize).min(in_len - 1);
                let i1 = (i0 + 1).min(in_len - 1);
                let frac = (src - i0 as f64) as f32;
                (i0, i1, frac)
            })
            .collect()
    };
    let ys = axis(out_h, h);
    let xs = axis(out_w, w);

    let mut out = Tensor::zeros(vec![n, c, out_h, out_w]);
    let src = x.data();
    out.data_mut()
        .par_chunks_mut(out_h * out_w)
        .enumerate()
        .for_each(|(img, plane)| {
            let base = img * h * w;
            for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
                let r0 = base + y0 * w;
                let r1 = base + y1 * w;
                let orow = oy * out_w;
                for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                    let top = src[r0 + x0] + fx * (src[r0 + x1] - src[r0 + x0]);
                    let bot = src[r1 + x0] + fx * (src[r1 + x1] - src[r1 + x0]);
                    plane[orow + ox] = top + fy * (bot - top);
                }
            }
        });
    Ok(out)
}
