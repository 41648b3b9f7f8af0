//! Square padding and resizing with exact inverse bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::bilinear_resize;
use crate::postproc::BinaryMask;
use crate::tensor::Tensor;

/// Forward-mapping record: original dims, padded square side, resize target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub orig_h: usize,
    pub orig_w: usize,
    pub side: usize,
    pub target: usize,
}

impl Geometry {
    pub fn pad_bottom(&self) -> usize {
        self.side - self.orig_h
    }

    pub fn pad_right(&self) -> usize {
        self.side - self.orig_w
    }

    pub fn scale(&self) -> f64 {
        self.target as f64 / self.side as f64
    }

    pub fn is_identity(&self) -> bool {
        self.orig_h == self.side && self.orig_w == self.side && self.side == self.target
    }
}

/// Zero-pads an N×C×H×W image on the right/bottom into a square, then
/// bilinearly resizes it to target×target.
pub fn pad_resize(image: &Tensor, target: usize) -> Result<(Tensor, Geometry)> {
    if target == 0 || target % 32 != 0 {
        return Err(Error::invalid(format!("target {target} must be a positive multiple of 32")));
    }
    let (n, c, h, w) = image.dims4()?;
    let side = h.max(w);
    let geometry = Geometry { orig_h: h, orig_w: w, side, target };
    let squared = if side == h && side == w {
        image.clone()
    } else {
        let mut out = Tensor::zeros(vec![n, c, side, side]);
        let src = image.data();
        let dst = out.data_mut();
        for img in 0..n * c {
            for row in 0..h {
                let s = img * h * w + row * w;
                let d = img * side * side + row * side;
                dst[d..d + w].copy_from_slice(&src[s..s + w]);
            }
        }
        out
    };
    Ok((bilinear_resize(&squared, target, target)?, geometry))
}

/// Maps a target×target mask back to the original resolution: bilinear
/// resize to the padded square, round at 0.5, crop the padding.
pub fn invert_mask(mask: &BinaryMask, geometry: &Geometry) -> Result<BinaryMask> {
    let (h, w) = mask.dims();
    if (h, w) != (geometry.target, geometry.target) {
        return Err(Error::shape(format!(
            "mask is {h}x{w}, geometry expects {0}x{0}",
            geometry.target
        )));
    }
    let as_tensor = Tensor::new(
        vec![1, 1, h, w],
        mask.data().iter().map(|&v| v as f32).collect(),
    )?;
    let back = bilinear_resize(&as_tensor, geometry.side, geometry.side)?;
    let (oh, ow) = (geometry.orig_h, geometry.orig_w);
    let mut data = Vec::with_capacity(oh * ow);
    for y in 0..oh {
        for x in 0..ow {
            data.push(u8::from(back.data()[y * geometry.side + x] >= 0.5));
        }
    }
    BinaryMask::new(oh, ow, data)
}

/// One loaded input: id, preprocessed image, inverse-mapping geometry, and
/// the ground-truth mask when present.
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: Tensor,
    pub geometry: Geometry,
    pub mask: Option<BinaryMask>,
}
