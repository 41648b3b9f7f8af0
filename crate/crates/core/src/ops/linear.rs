//! Token-matrix products with f64 accumulation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// C = A (r×k) · B (k×c). Each output element accumulates over ascending k
/// in f64; rows are independent tasks.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (ar, ak) = a.dims2()?;
    let (bk, bc) = b.dims2()?;
    if ak != bk {
        return Err(Error::shape(format!(
            "matmul inner dims differ: {ak} vs {bk}"
        )));
    }
    let mut out = Tensor::zeros(vec![ar, bc]);
    let ad = a.data();
    let bd = b.data();
    out.data_mut()
        .par_chunks_mut(bc)
        .enumerate()
        .for_each(|(r, row)| {
            let mut acc = vec![0.0f64; bc];
            let abase = r * ak;
            for k in 0..ak {
                let av = ad[abase + k] as f64;
                let bbase = k * bc;
                for c in 0..bc {
                    acc[c] += av * bd[bbase + c] as f64;
                }
            }
            for c in 0..bc {
                row[c] = acc[c] as f32;
            }
        });
    Ok(out)
}

/// Affine map of token rows: Y = X (tokens×in) · W (in×out) + bias.
pub fn linear(x: &Tensor, weight: &Tensor, bias: Option<&[f32]>) -> Result<Tensor> {
    let mut y = matmul(x, weight)?;
    if let Some(b) = bias {
        let (_, cols) = y.dims2()?;
        if b.len() != cols {
            return Err(Error::shape(format!(
                "bias length {} != output width {cols}",
                b.len()
            )));
        }
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            *v += b[i % cols];
        }
    }
    Ok(y)
}
