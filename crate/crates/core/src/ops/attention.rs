//! Large-window patch attention.
//!
//! Each P×P query patch attends to a pooled (R·P)×(R·P) context window
//! centred on it: the window is average-pooled down to P×P tokens, the
//! tokens are mixed by a learned matrix over the token axis, and multi-head
//! softmax attention maps the query tokens onto the mixed context.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ops::act::softmax_rows;
use crate::ops::linear::linear;
use crate::tensor::Tensor;

/// Parameters of one large-window attention branch.
#[derive(Debug, Clone)]
pub struct LawinParams {
    /// Token-mixing matrix, (P², P²).
    pub mixer_w: Tensor,
    /// Token-mixing bias, length P².
    pub mixer_b: Vec<f32>,
    /// Query/key/value/output projections, each (D, D).
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
    pub bq: Vec<f32>,
    pub bk: Vec<f32>,
    pub bv: Vec<f32>,
    pub bo: Vec<f32>,
}

impl LawinParams {
    /// Identity mixer and identity Q/K/V/O projections with zero biases.
    pub fn identity(patch: usize, dim: usize) -> Self {
        let toks = patch * patch;
        let eye = |n: usize| {
            Tensor::from_fn(vec![n, n], |i| if i / n == i % n { 1.0 } else { 0.0 })
        };
        LawinParams {
            mixer_w: eye(toks),
            mixer_b: vec![0.0; toks],
            wq: eye(dim),
            wk: eye(dim),
            wv: eye(dim),
            wo: eye(dim),
            bq: vec![0.0; dim],
            bk: vec![0.0; dim],
            bv: vec![0.0; dim],
            bo: vec![0.0; dim],
        }
    }
}

/// Applies large-window attention; output shape equals `q_feat` shape.
///
/// `q_feat` and `ctx_feat` must share shape with spatial dims divisible by
/// `patch`; callers pad beforehand. `ratio` scales the context window and
/// `heads` must divide the channel count.
pub fn lawin_attention(
    q_feat: &Tensor,
    ctx_feat: &Tensor,
    patch: usize,
    ratio: usize,
    heads: usize,
    params: &LawinParams,
) -> Result<Tensor> {
    let (n, d, h, w) = q_feat.dims4()?;
    if ctx_feat.shape() != q_feat.shape() {
        return Err(Error::shape(format!(
            "context shape {:?} != query shape {:?}",
            ctx_feat.shape(),
            q_feat.shape()
        )));
    }
    if patch == 0 || ratio == 0 || heads == 0 {
        return Err(Error::invalid("patch, ratio and heads must be >= 1"));
    }
    if h % patch != 0 || w % patch != 0 {
        return Err(Error::invalid(format!(
            "spatial dims {h}x{w} not divisible by patch {patch}; pad upstream"
        )));
    }
    if d % heads != 0 {
        return Err(Error::invalid(format!(
            "channels {d} not divisible by heads {heads}"
        )));
    }
    let toks = patch * patch;
    if params.mixer_w.shape() != [toks, toks] {
        return Err(Error::shape(format!(
            "mixer shape {:?}, expected [{toks}, {toks}]",
            params.mixer_w.shape()
        )));
    }
    for (name, m) in [("wq", &params.wq), ("wk", &params.wk), ("wv", &params.wv), ("wo", &params.wo)] {
        if m.shape() != [d, d] {
            return Err(Error::shape(format!(
                "{name} shape {:?}, expected [{d}, {d}]",
                m.shape()
            )));
        }
    }
    let d_head = d / heads;
    let scale = 1.0 / (d_head as f32).sqrt();
    let (ph, pw) = (h / patch, w / patch);
    let plane = h * w;
    let qdata = q_feat.data();
    let cdata = ctx_feat.data();

    let mut out = Tensor::zeros(vec![n, d, h, w]);
    // SAFETY-free parallelism: collect per-patch results, then scatter.
    let patch_results: Vec<(usize, Vec<f32>)> = (0..n * ph * pw)
        .into_par_iter()
        .map(|task| {
            let ni = task / (ph * pw);
            let py = (task / pw) % ph;
            let px = task % pw;
            let y0 = (py * patch) as isize;
            let x0 = (px * patch) as isize;

            // Query tokens, (toks, d).
            let mut xq = vec![0.0f32; toks * d];
            for ty in 0..patch {
                for tx in 0..patch {
                    let t = ty * patch + tx;
                    let sy = y0 as usize + ty;
                    let sx = x0 as usize + tx;
                    for ci in 0..d {
                        xq[t * d + ci] = qdata[(ni * d + ci) * plane + sy * w + sx];
                    }
                }
            }

            // Pooled context tokens, (toks, d): average R×R cells of the
            // (R·P)² window centred on the patch, zeros outside the image.
            let off = ((ratio - 1) * patch / 2) as isize;
            let cy0 = y0 - off;
            let cx0 = x0 - off;
            let inv = 1.0 / (ratio * ratio) as f64;
            let mut ctx = vec![0.0f32; toks * d];
            for ty in 0..patch {
                for tx in 0..patch {
                    let t = ty * patch + tx;
                    for ci in 0..d {
                        let base = (ni * d + ci) * plane;
                        let mut acc = 0.0f64;
                        for ry in 0..ratio {
                            let sy = cy0 + (ty * ratio + ry) as isize;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            for rx in 0..ratio {
                                let sx = cx0 + (tx * ratio + rx) as isize;
                                if sx < 0 || sx >= w as isize {
                                    continue;
                                }
                                acc += cdata[base + sy as usize * w + sx as usize] as f64;
                            }
                        }
                        ctx[t * d + ci] = (acc * inv) as f32;
                    }
                }
            }

            let xq = Tensor::new(vec![toks, d], xq).expect("query token matrix");
            let ctx = Tensor::new(vec![toks, d], ctx).expect("context token matrix");

            // Token mixing over the token axis.
            let mixed = {
                let mut m = crate::ops::linear::matmul(&params.mixer_w, &ctx).expect("mixer");
                for t in 0..toks {
                    let b = params.mixer_b[t];
                    for v in &mut m.data_mut()[t * d..(t + 1) * d] {
                        *v += b;
                    }
                }
                m
            };

            let q = linear(&xq, &params.wq, Some(&params.bq)).expect("q proj");
            let k = linear(&mixed, &params.wk, Some(&params.bk)).expect("k proj");
            let v = linear(&mixed, &params.wv, Some(&params.bv)).expect("v proj");

            // Per-head scaled dot-product attention.
            let mut attended = vec![0.0f32; toks * d];
            for head in 0..heads {
                let hbase = head * d_head;
                let mut logits = vec![0.0f32; toks * toks];
                for qi in 0..toks {
                    for kj in 0..toks {
                        let mut acc = 0.0f64;
                        for e in 0..d_head {
                            acc += q.data()[qi * d + hbase + e] as f64
                                * k.data()[kj * d + hbase + e] as f64;
                        }
                        logits[qi * toks + kj] = acc as f32 * scale;
                    }
                }
                softmax_rows(&mut logits, toks, toks);
                for qi in 0..toks {
                    for e in 0..d_head {
                        let mut acc = 0.0f64;
                        for kj in 0..toks {
                            acc += logits[qi * toks + kj] as f64
                                * v.data()[kj * d + hbase + e] as f64;
                        }
                        attended[qi * d + hbase + e] = acc as f32;
                    }
                }
            }
            let attended = Tensor::new(vec![toks, d], attended).expect("attended tokens");
            let out_tokens = linear(&attended, &params.wo, Some(&params.bo)).expect("o proj");
            (task, out_tokens.into_data())
        })
        .collect();

    let od = out.data_mut();
    for (task, tokens) in patch_results {
        let ni = task / (ph * pw);
        let py = (task / pw) % ph;
        let px = task % pw;
        for ty in 0..patch {
            for tx in 0..patch {
                let t = ty * patch + tx;
                let sy = py * patch + ty;
                let sx = px * patch + tx;
                for ci in 0..d {
                    od[(ni * d + ci) * plane + sy * w + sx] = tokens[t * d + ci];
                }
            }
        }
    }
    Ok(out)
}
