//! Squeeze-and-excitation channel gate.

use crate::error::{Error, Result};
use crate::ops::act::sigmoid_scalar;
use crate::ops::pool::global_avg_pool;
use crate::tensor::Tensor;

/// Bottleneck MLP of an SE gate. `fc1` is (reduced, c), `fc2` is (c, reduced).
#[derive(Debug, Clone)]
pub struct SeParams {
    pub fc1_w: Tensor,
    pub fc1_b: Vec<f32>,
    pub fc2_w: Tensor,
    pub fc2_b: Vec<f32>,
}

/// Width of the SE bottleneck: c / reduction, rounded up, at least 1.
pub fn se_reduced_width(channels: usize, reduction: usize) -> usize {
    channels.div_ceil(reduction).max(1)
}

/// y = x ⊙ sigmoid(fc2(relu(fc1(gap(x))))), broadcast over H and W.
pub fn se_gate(x: &Tensor, params: &SeParams, reduction: usize) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    let reduced = se_reduced_width(c, reduction);
    if params.fc1_w.shape() != [reduced, c] {
        return Err(Error::shape(format!(
            "se fc1 shape {:?}, expected [{reduced}, {c}]",
            params.fc1_w.shape()
        )));
    }
    if params.fc2_w.shape() != [c, reduced] {
        return Err(Error::shape(format!(
            "se fc2 shape {:?}, expected [{c}, {reduced}]",
            params.fc2_w.shape()
        )));
    }
    if params.fc1_b.len() != reduced || params.fc2_b.len() != c {
        return Err(Error::shape("se bias lengths do not match"));
    }
    let pooled = global_avg_pool(x)?;
    let plane = h * w;
    let mut out = x.clone();
    for ni in 0..n {
        let pv = &pooled.data()[ni * c..(ni + 1) * c];
        // hidden = relu(fc1 . pooled + b1)
        let mut hidden = vec![0.0f32; reduced];
        for r in 0..reduced {
            let mut acc = params.fc1_b[r] as f64;
            for ci in 0..c {
                acc += params.fc1_w.data()[r * c + ci] as f64 * pv[ci] as f64;
            }
            hidden[r] = (acc as f32).max(0.0);
        }
        for ci in 0..c {
            let mut acc = params.fc2_b[ci] as f64;
            for r in 0..reduced {
                acc += params.fc2_w.data()[ci * reduced + r] as f64 * hidden[r] as f64;
            }
            let gate = sigmoid_scalar(acc as f32);
            let base = (ni * c + ci) * plane;
            for v in &mut out.data_mut()[base..base + plane] {
                *v *= gate;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(c: usize, reduction: usize, fc2_bias: f32) -> SeParams {
        let reduced = se_reduced_width(c, reduction);
        SeParams {
            fc1_w: Tensor::zeros(vec![reduced, c]),
            fc1_b: vec![0.0; reduced],
            fc2_w: Tensor::zeros(vec![c, reduced]),
            fc2_b: vec![fc2_bias; c],
        }
    }

    #[test]
    fn saturated_gate_passes_input_through() {
        let x = Tensor::from_fn(vec![1, 4, 3, 3], |i| (i as f32).sin());
        let y = se_gate(&x, &params(4, 2, 40.0), 2).unwrap();
        for i in 0..x.numel() {
            assert!((y.data()[i] - x.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn neutral_logits_halve_input() {
        let x = Tensor::from_fn(vec![2, 3, 2, 2], |i| i as f32 - 5.0);
        let y = se_gate(&x, &params(3, 16, 0.0), 16).unwrap();
        for i in 0..x.numel() {
            assert!((y.data()[i] - 0.5 * x.data()[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn gate_is_constant_across_spatial_positions() {
        let mut seed = 42u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((seed >> 33) as f32 / (1u64 << 31) as f32) - 1.0
        };
        let c = 5;
        let reduced = se_reduced_width(c, 4);
        let p = SeParams {
            fc1_w: Tensor::from_fn(vec![reduced, c], |_| rnd()),
            fc1_b: (0..reduced).map(|_| rnd()).collect(),
            fc2_w: Tensor::from_fn(vec![c, reduced], |_| rnd()),
            fc2_b: (0..c).map(|_| rnd()).collect(),
        };
        let x = Tensor::from_fn(vec![1, c, 4, 4], |_| rnd() + 2.0);
        let y = se_gate(&x, &p, 4).unwrap();
        for ci in 0..c {
            let base = ci * 16;
            let ratio0 = y.data()[base] / x.data()[base];
            for i in 1..16 {
                let r = y.data()[base + i] / x.data()[base + i];
                assert!((r - ratio0).abs() < 1e-5, "channel {ci} ratios differ");
            }
        }
    }
}
