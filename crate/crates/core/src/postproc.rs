//! Prediction post-processing: logit compression, thresholding, hole
//! filling, the dice metric, and test-time-augmentation ensembling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::sigmoid_scalar;
use crate::tensor::Tensor;

/// H×W map of probabilities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap {
    h: usize,
    w: usize,
    data: Vec<f32>,
}

impl ProbMap {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::shape(format!(
                "{h}x{w} prob map wants {} values, got {}",
                h * w,
                data.len()
            )));
        }
        if data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        Ok(ProbMap { h, w, data })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// H×W binary mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    h: usize,
    w: usize,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(h: usize, w: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::shape(format!(
                "{h}x{w} mask wants {} values, got {}",
                h * w,
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::invalid("mask values must be 0 or 1"));
        }
        Ok(BinaryMask { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        BinaryMask { h, w, data: vec![0; h * w] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// Logit-to-probability compression method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CompressMethod {
    Sigmoid,
    /// tanh followed by per-image min-max normalization into [0, 1];
    /// a constant map normalizes to all zeros.
    Tanh,
}

impl std::str::FromStr for CompressMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(CompressMethod::Sigmoid),
            "tanh" => Ok(CompressMethod::Tanh),
            other => Err(Error::invalid(format!("unknown compression {other}"))),
        }
    }
}

/// Compresses a 1×1×H×W logit map into a probability map.
pub fn compress(logits: &Tensor, method: CompressMethod) -> Result<ProbMap> {
    let (n, c, h, w) = logits.dims4()?;
    if n != 1 || c != 1 {
        return Err(Error::shape(format!(
            "compress expects 1×1×H×W logits, got {:?}",
            logits.shape()
        )));
    }
    let data = match method {
        CompressMethod::Sigmoid => logits.data().iter().map(|&v| sigmoid_scalar(v)).collect(),
        CompressMethod::Tanh => {
            let t: Vec<f32> = logits.data().iter().map(|&v| v.tanh()).collect();
            let (mut lo, mut hi) = (f32::MAX, f32::MIN);
            for &v in &t {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi > lo {
                // x/x == 1 exactly in IEEE, so the max pixel lands on 1.0.
                let range = hi - lo;
                t.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
            } else {
                vec![0.0; t.len()]
            }
        }
    };
    ProbMap::new(h, w, data)
}

/// Rounds probabilities at 0.5 (half goes up).
pub fn threshold(p: &ProbMap) -> BinaryMask {
    BinaryMask {
        h: p.h,
        w: p.w,
        data: p.data.iter().map(|&v| u8::from(v >= 0.5)).collect(),
    }
}

/// Fills enclosed holes: background flooded from outside the image border
/// (4-connectivity) stays background, every other 0-pixel becomes 1. This is
/// the flood-fill / invert / OR recipe with the fill seeded at the padded
/// corner so it reaches all border-touching background.
pub fn fill_holes(mask: &BinaryMask) -> BinaryMask {
    let (h, w) = mask.dims();
    let mut reached = vec![false; h * w];
    let mut queue: Vec<usize> = Vec::new();
    // Seed with every border background pixel (the virtual outside ring).
    for x in 0..w {
        for y in [0, h - 1] {
            let i = y * w + x;
            if mask.data[i] == 0 && !reached[i] {
                reached[i] = true;
                queue.push(i);
            }
        }
    }
    for y in 0..h {
        for x in [0, w - 1] {
            let i = y * w + x;
            if mask.data[i] == 0 && !reached[i] {
                reached[i] = true;
                queue.push(i);
            }
        }
    }
    while let Some(i) = queue.pop() {
        let (y, x) = (i / w, i % w);
        let mut push = |j: usize| {
            if mask.data[j] == 0 && !reached[j] {
                reached[j] = true;
                queue.push(j);
            }
        };
        if y > 0 {
            push(i - w);
        }
        if y + 1 < h {
            push(i + w);
        }
        if x > 0 {
            push(i - 1);
        }
        if x + 1 < w {
            push(i + 1);
        }
    }
    let data = (0..h * w)
        .map(|i| if mask.data[i] == 1 || !reached[i] { 1 } else { 0 })
        .collect();
    BinaryMask { h, w, data }
}

/// Dice coefficient 2|a∩b| / (|a|+|b|); two empty masks score 1.
pub fn dice(pred: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::shape(format!(
            "dice dims {:?} vs {:?}",
            pred.dims(),
            gt.dims()
        )));
    }
    let inter = pred
        .data
        .iter()
        .zip(&gt.data)
        .filter(|&(&a, &b)| a == 1 && b == 1)
        .count();
    let total = pred.count_ones() + gt.count_ones();
    if total == 0 {
        Ok(1.0)
    } else {
        Ok(2.0 * inter as f64 / total as f64)
    }
}

/// Test-time augmentation mode (which flipped variants join the ensemble).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TtaMode {
    None,
    HFlip,
    VFlip,
    /// Identity, horizontal, vertical and double flip.
    HVFlip,
}

impl std::str::FromStr for TtaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(TtaMode::None),
            "h" | "hflip" => Ok(TtaMode::HFlip),
            "v" | "vflip" => Ok(TtaMode::VFlip),
            "hv" | "hvflip" => Ok(TtaMode::HVFlip),
            other => Err(Error::invalid(format!("unknown tta mode {other}"))),
        }
    }
}

/// One flip variant: apply to the input, un-apply to the logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlipVariant {
    Identity,
    Horizontal,
    Vertical,
    Both,
}

impl FlipVariant {
    pub fn apply(&self, t: &Tensor) -> Tensor {
        match self {
            FlipVariant::Identity => t.clone(),
            FlipVariant::Horizontal => t.flip_h(),
            FlipVariant::Vertical => t.flip_v(),
            FlipVariant::Both => t.flip_h().flip_v(),
        }
    }
    // Flips are involutions, so un-applying is applying again.
}

impl TtaMode {
    pub fn variants(&self) -> Vec<FlipVariant> {
        match self {
            TtaMode::None => vec![FlipVariant::Identity],
            TtaMode::HFlip => vec![FlipVariant::Identity, FlipVariant::Horizontal],
            TtaMode::VFlip => vec![FlipVariant::Identity, FlipVariant::Vertical],
            TtaMode::HVFlip => vec![
                FlipVariant::Identity,
                FlipVariant::Horizontal,
                FlipVariant::Vertical,
                FlipVariant::Both,
            ],
        }
    }
}

/// Mean of probability maps, accumulated in f64 in the given order.
pub fn mean_probmaps(maps: &[ProbMap]) -> Result<ProbMap> {
    let first = maps.first().ok_or_else(|| Error::invalid("empty ensemble"))?;
    let (h, w) = first.dims();
    let mut acc = vec![0.0f64; h * w];
    for m in maps {
        if m.dims() != (h, w) {
            return Err(Error::shape("ensemble maps must share dims"));
        }
        for (a, &v) in acc.iter_mut().zip(m.data()) {
            *a += v as f64;
        }
    }
    let inv = 1.0 / maps.len() as f64;
    ProbMap::new(h, w, acc.iter().map(|&v| (v * inv) as f32).collect())
}

/// Runs every fold model over every enabled flip variant of `image`,
/// un-flips the logits, compresses each run, and averages the probability
/// maps (folds outermost, variants innermost, fixed order).
pub fn tta_ensemble<M>(
    models: &[M],
    image: &Tensor,
    mode: TtaMode,
    method: CompressMethod,
) -> Result<ProbMap>
where
    M: Fn(&Tensor) -> Result<Tensor>,
{
    if models.is_empty() {
        return Err(Error::invalid("ensemble needs at least one model"));
    }
    let mut maps = Vec::with_capacity(models.len() * mode.variants().len());
    for model in models {
        for variant in mode.variants() {
            let logits = model(&variant.apply(image))?;
            let restored = variant.apply(&logits);
            maps.push(compress(&restored, method)?);
        }
    }
    mean_probmaps(&maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logits_1x1(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f32) -> Tensor {
        Tensor::from_fn(vec![1, 1, h, w], |i| f(i / w, i % w))
    }

    #[test]
    fn sigmoid_of_zero_logits_is_half() {
        let p = compress(&logits_1x1(2, 2, |_, _| 0.0), CompressMethod::Sigmoid).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn tanh_minmax_normalizes_by_hand() {
        let t = Tensor::new(vec![1, 1, 1, 3], vec![-1.0, 0.0, 3.0]).unwrap();
        let p = compress(&t, CompressMethod::Tanh).unwrap();
        let lo = (-1.0f64).tanh();
        let hi = 3.0f64.tanh();
        let mid = ((0.0 - lo) / (hi - lo)) as f32;
        assert_eq!(p.data()[0], 0.0);
        assert!((p.data()[1] - mid).abs() < 1e-6, "{} vs {mid}", p.data()[1]);
        assert_eq!(p.data()[2], 1.0);
    }

    #[test]
    fn tanh_of_constant_logits_is_all_zeros() {
        let p = compress(&logits_1x1(3, 3, |_, _| 2.5), CompressMethod::Tanh).unwrap();
        assert!(p.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigmoid_is_order_preserving_and_tanh_keeps_argmax() {
        let mut seed = 5u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f32 / (1u64 << 31) as f32) - 1.0
        };
        for _ in 0..50 {
            let logits = logits_1x1(6, 6, |_, _| 4.0 * rnd());
            let s = compress(&logits, CompressMethod::Sigmoid).unwrap();
            let t = compress(&logits, CompressMethod::Tanh).unwrap();
            let argmax = |d: &[f32]| {
                d.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0
            };
            let la = argmax(logits.data());
            assert_eq!(argmax(s.data()), la);
            assert_eq!(argmax(t.data()), la);
            for i in 0..36 {
                for j in 0..36 {
                    if logits.data()[i] < logits.data()[j] {
                        assert!(s.data()[i] <= s.data()[j]);
                    }
                }
            }
        }
    }

    #[test]
    fn compression_methods_can_disagree_on_masks() {
        // All-positive logits: sigmoid rounds everything to 1, tanh-minmax
        // sends the minimum to 0.
        let logits = logits_1x1(4, 4, |y, x| 1.0 + (y * 4 + x) as f32 * 0.5);
        let s = threshold(&compress(&logits, CompressMethod::Sigmoid).unwrap());
        let t = threshold(&compress(&logits, CompressMethod::Tanh).unwrap());
        assert!(s.data().iter().all(|&v| v == 1));
        assert!(t.data().iter().any(|&v| v == 0));
        assert_ne!(s, t);
    }

    #[test]
    fn fill_holes_fills_ring_center() {
        let mut mask = BinaryMask::zeros(5, 5);
        for (y, x) in [
            (1usize, 1usize), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3),
        ] {
            mask.data_mut()[y * 5 + x] = 1;
        }
        let filled = fill_holes(&mask);
        assert_eq!(filled.data()[2 * 5 + 2], 1);
        // The outside stays background.
        assert_eq!(filled.data()[0], 0);
        assert_eq!(filled.count_ones(), 9);
    }

    #[test]
    fn fill_holes_keeps_channel_to_border_open() {
        // A pocket connected to the top edge through a 1-pixel channel.
        let rows = [
            [1u8, 0, 1, 1, 1],
            [1, 0, 0, 0, 1],
            [1, 1, 1, 0, 1],
            [1, 1, 1, 0, 1],
            [1, 1, 1, 1, 1],
        ];
        let mask = BinaryMask::new(5, 5, rows.concat()).unwrap();
        let filled = fill_holes(&mask);
        assert_eq!(filled, mask);
    }

    #[test]
    fn fill_holes_on_empty_mask_is_identity() {
        let mask = BinaryMask::zeros(6, 7);
        assert_eq!(fill_holes(&mask), mask);
    }

    #[test]
    fn fill_holes_is_idempotent_on_random_masks() {
        let mut seed = 99u64;
        for _ in 0..50 {
            let mut mask = BinaryMask::zeros(16, 16);
            for v in mask.data_mut() {
                seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
                *v = ((seed >> 40) & 1) as u8;
            }
            let once = fill_holes(&mask);
            assert_eq!(fill_holes(&once), once);
        }
    }

    #[test]
    fn dice_reference_points() {
        let a = BinaryMask::new(2, 2, vec![1, 1, 0, 0]).unwrap();
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        let b = BinaryMask::new(2, 2, vec![0, 0, 1, 1]).unwrap();
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        let empty = BinaryMask::zeros(2, 2);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        // |gt| = 4, pred covers 2 of them and nothing else.
        let gt = BinaryMask::new(2, 4, vec![1, 1, 1, 1, 0, 0, 0, 0]).unwrap();
        let pred = BinaryMask::new(2, 4, vec![1, 1, 0, 0, 0, 0, 0, 0]).unwrap();
        let d = dice(&pred, &gt).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
        // Symmetry.
        assert_eq!(dice(&gt, &pred).unwrap(), d);
    }

    #[test]
    fn dice_rejects_dim_mismatch() {
        let a = BinaryMask::zeros(2, 2);
        let b = BinaryMask::zeros(2, 3);
        assert!(dice(&a, &b).is_err());
    }

    #[test]
    fn tta_single_model_no_flips_equals_plain_compress() {
        let model = |x: &Tensor| -> crate::error::Result<Tensor> {
            Ok(x.map(|v| 2.0 * v - 0.3))
        };
        let img = Tensor::from_fn(vec![1, 1, 4, 4], |i| (i as f32 * 0.7).sin());
        let direct = compress(&model(&img).unwrap(), CompressMethod::Sigmoid).unwrap();
        let ens = tta_ensemble(&[model], &img, TtaMode::None, CompressMethod::Sigmoid).unwrap();
        assert_eq!(direct, ens);
    }

    #[test]
    fn tta_hflip_on_symmetric_model_output_changes_nothing() {
        // Model ignores the input and emits a horizontally symmetric map;
        // un-flipping that map reproduces it, so the average equals it.
        let sym = Tensor::from_fn(vec![1, 1, 4, 4], |i| {
            let x = i % 4;
            let xm = x.min(3 - x) as f32;
            xm + (i / 4) as f32
        });
        let sym2 = sym.clone();
        let model = move |_x: &Tensor| -> crate::error::Result<Tensor> { Ok(sym2.clone()) };
        let img = Tensor::zeros(vec![1, 1, 4, 4]);
        let ens = tta_ensemble(&[model], &img, TtaMode::HFlip, CompressMethod::Sigmoid).unwrap();
        let direct = compress(&sym, CompressMethod::Sigmoid).unwrap();
        for i in 0..16 {
            assert!((ens.data()[i] - direct.data()[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn ensemble_of_constant_folds_averages() {
        let m1 = |_: &Tensor| -> crate::error::Result<Tensor> {
            // sigmoid(x) = 0.2  =>  x = ln(0.25)
            Ok(Tensor::full(vec![1, 1, 2, 2], (0.2f32 / 0.8).ln()))
        };
        let m2 = |_: &Tensor| -> crate::error::Result<Tensor> {
            Ok(Tensor::full(vec![1, 1, 2, 2], (0.6f32 / 0.4).ln()))
        };
        let models: Vec<Box<dyn Fn(&Tensor) -> crate::error::Result<Tensor>>> =
            vec![Box::new(m1), Box::new(m2)];
        let img = Tensor::zeros(vec![1, 1, 2, 2]);
        let ens = tta_ensemble(&models, &img, TtaMode::None, CompressMethod::Sigmoid).unwrap();
        for &v in ens.data() {
            assert!((v - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_fold_set_is_an_error() {
        let models: Vec<fn(&Tensor) -> crate::error::Result<Tensor>> = vec![];
        let img = Tensor::zeros(vec![1, 1, 2, 2]);
        assert!(tta_ensemble(&models, &img, TtaMode::None, CompressMethod::Sigmoid).is_err());
    }

    #[test]
    fn ensemble_mean_is_order_invariant() {
        let mk = |s: f32| {
            ProbMap::new(3, 3, (0..9).map(|i| (i as f32 * s).sin() * 0.5 + 0.5).collect())
                .unwrap()
        };
        let maps = vec![mk(0.3), mk(0.7), mk(1.1), mk(2.9)];
        let fwd = mean_probmaps(&maps).unwrap();
        let mut rev = maps;
        rev.reverse();
        let bwd = mean_probmaps(&rev).unwrap();
        for i in 0..9 {
            assert!((fwd.data()[i] - bwd.data()[i]).abs() < 1e-7);
        }
    }
}
