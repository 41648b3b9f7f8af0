//! End-to-end inference pipeline: geometry, ensemble forward, compression,
//! thresholding, hole filling, inverse mapping.

use crate::error::Result;
use crate::graph::NetSpec;
use crate::net::{forward, WeightStore};
use crate::postproc::{
    compress, fill_holes, mean_probmaps, threshold, BinaryMask, CompressMethod, ProbMap, TtaMode,
};
use crate::dataio::geometry::{invert_mask, pad_resize};
use crate::tensor::Tensor;

/// Inference settings shared by every image of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceOptions {
    pub tta: TtaMode,
    pub compress: CompressMethod,
    /// Apply hole filling to the thresholded mask.
    pub fill: bool,
    /// Square side images are padded and resized to before the forward pass.
    pub target: usize,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        InferenceOptions {
            tta: TtaMode::None,
            compress: CompressMethod::Tanh,
            fill: true,
            target: 512,
        }
    }
}

/// Ensemble probability map of one preprocessed (square) image: every fold
/// store × every TTA variant, averaged in fixed order.
pub fn ensemble_probmap(
    net: &NetSpec,
    stores: &[WeightStore],
    image: &Tensor,
    opts: &InferenceOptions,
) -> Result<ProbMap> {
    let mut maps = Vec::with_capacity(stores.len() * opts.tta.variants().len());
    for store in stores {
        for variant in opts.tta.variants() {
            let logits = forward(net, store, &variant.apply(image))?.main;
            maps.push(compress(&variant.apply(&logits), opts.compress)?);
        }
    }
    mean_probmaps(&maps)
}

/// Full pipeline for one image at its native resolution: pad/resize,
/// ensemble forward, compress, threshold, optional hole fill, inverse
/// mapping back to the original dims.
pub fn infer_mask(
    net: &NetSpec,
    stores: &[WeightStore],
    image: &Tensor,
    opts: &InferenceOptions,
) -> Result<BinaryMask> {
    let (resized, geometry) = pad_resize(image, opts.target)?;
    let prob = ensemble_probmap(net, stores, &resized, opts)?;
    let mut mask = threshold(&prob);
    if opts.fill {
        mask = fill_holes(&mask);
    }
    invert_mask(&mask, &geometry)
}
