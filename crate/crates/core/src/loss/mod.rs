//! Composite segmentation loss with analytic gradients.
//!
//! The total loss couples the main output O, the deep-supervision outputs
//! D1/D2 and the boundary output B against a binary ground truth G:
//!
//!   L = l(G,O) + Σ_i l(G,D_i) + bce(G_B, B),   l = wbce + wiou
//!
//! where wbce / wiou are pixel-weighted by W = 1 + 5·|mean31(G) − G| and
//! the boundary term is plain (unweighted) BCE against the morphological
//! gradient of G. Everything here runs in f64 so the finite-difference
//! verifier can resolve relative errors below 1e-6.

pub mod gradcheck;

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub use gradcheck::{grad_check, GradCheckConfig, GradCheckReport};

/// H×W map of f64 values (logits, masks, weights, gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    h: usize,
    w: usize,
    data: Vec<f64>,
}

impl LossMap {
    pub fn new(h: usize, w: usize, data: Vec<f64>) -> Result<Self> {
        if h == 0 || w == 0 {
            return Err(Error::invalid("loss map dims must be >= 1"));
        }
        if data.len() != h * w {
            return Err(Error::shape(format!(
                "{h}x{w} map wants {} values, got {}",
                h * w,
                data.len()
            )));
        }
        Ok(LossMap { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        LossMap { h, w, data: vec![0.0; h * w] }
    }

    pub fn from_fn(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(h * w);
        for y in 0..h {
            for x in 0..w {
                data.push(f(y, x));
            }
        }
        LossMap { h, w, data }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.h, self.w)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    fn same_dims(&self, other: &LossMap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "map dims {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    if x >= 0.0 {
        1.0 / (1.0 + e)
    } else {
        e / (1.0 + e)
    }
}

/// Stable per-pixel BCE from logits: max(x,0) − x·g + ln(1 + exp(−|x|)).
#[inline]
fn bce_term(x: f64, g: f64) -> f64 {
    x.max(0.0) - x * g + (-x.abs()).exp().ln_1p()
}

/// Border-emphasis weight map W = 1 + 5·|mean_{31×31}(G) − G|, values in
/// [1, 6]. The mean uses stride 1, pad 15 and divides by the in-image tap
/// count, so constant masks give exactly W ≡ 1 everywhere; evaluated via a
/// summed-area table, exact for 0/1 masks.
pub fn pixel_weight_map(g: &LossMap) -> Result<LossMap> {
    if !g.is_binary() {
        return Err(Error::invalid("weight map needs a binary ground truth"));
    }
    const R: i64 = 15;
    let (h, w) = g.dims();
    let (hi, wi) = (h as i64, w as i64);
    // sat[y][x] = sum of g over [0,y) × [0,x)
    let mut sat = vec![0.0f64; (h + 1) * (w + 1)];
    for y in 0..h {
        for x in 0..w {
            sat[(y + 1) * (w + 1) + (x + 1)] = g.data[y * w + x]
                + sat[y * (w + 1) + (x + 1)]
                + sat[(y + 1) * (w + 1) + x]
                - sat[y * (w + 1) + x];
        }
    }
    let mut out = LossMap::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let y0 = (y as i64 - R).clamp(0, hi) as usize;
            let x0 = (x as i64 - R).clamp(0, wi) as usize;
            let y1 = (y as i64 + R + 1).clamp(0, hi) as usize;
            let x1 = (x as i64 + R + 1).clamp(0, wi) as usize;
            let sum = sat[y1 * (w + 1) + x1] + sat[y0 * (w + 1) + x0]
                - sat[y0 * (w + 1) + x1]
                - sat[y1 * (w + 1) + x0];
            let count = ((y1 - y0) * (x1 - x0)) as f64;
            let mean = sum / count;
            out.data[y * w + x] = 1.0 + 5.0 * (mean - g.data[y * w + x]).abs();
        }
    }
    Ok(out)
}

/// Weighted BCE: Σ W·bce(x, g) / Σ W.
pub fn weighted_bce(logits: &LossMap, g: &LossMap, w: &LossMap) -> Result<f64> {
    logits.same_dims(g)?;
    logits.same_dims(w)?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for i in 0..logits.data.len() {
        num += w.data[i] * bce_term(logits.data[i], g.data[i]);
        den += w.data[i];
    }
    Ok(num / den)
}

/// d(weighted_bce)/d(logits): W·(σ(x) − g) / Σ W.
pub fn weighted_bce_grad(logits: &LossMap, g: &LossMap, w: &LossMap) -> Result<LossMap> {
    logits.same_dims(g)?;
    logits.same_dims(w)?;
    let den: f64 = w.data.iter().sum();
    let (h, wd) = logits.dims();
    let mut out = LossMap::zeros(h, wd);
    for i in 0..logits.data.len() {
        out.data[i] = w.data[i] * (sigmoid(logits.data[i]) - g.data[i]) / den;
    }
    Ok(out)
}

/// Weighted IoU loss: 1 − (inter + 1) / (union − inter + 1) with
/// inter = Σ W·P·G and union = Σ W·(P + G), P = σ(logits).
pub fn weighted_iou(logits: &LossMap, g: &LossMap, w: &LossMap) -> Result<f64> {
    logits.same_dims(g)?;
    logits.same_dims(w)?;
    let (a, b) = wiou_parts(logits, g, w);
    Ok(1.0 - a / b)
}

fn wiou_parts(logits: &LossMap, g: &LossMap, w: &LossMap) -> (f64, f64) {
    let mut inter = 0.0f64;
    let mut rest = 0.0f64; // union − inter = Σ W·(P + G − P·G)
    for i in 0..logits.data.len() {
        let p = sigmoid(logits.data[i]);
        let gv = g.data[i];
        inter += w.data[i] * p * gv;
        rest += w.data[i] * (p + gv - p * gv);
    }
    (inter + 1.0, rest + 1.0)
}

/// d(weighted_iou)/d(logits).
pub fn weighted_iou_grad(logits: &LossMap, g: &LossMap, w: &LossMap) -> Result<LossMap> {
    logits.same_dims(g)?;
    logits.same_dims(w)?;
    let (a, b) = wiou_parts(logits, g, w);
    let (h, wd) = logits.dims();
    let mut out = LossMap::zeros(h, wd);
    for i in 0..logits.data.len() {
        let p = sigmoid(logits.data[i]);
        let s = p * (1.0 - p);
        let gv = g.data[i];
        let da = w.data[i] * gv * s;
        let db = w.data[i] * (1.0 - gv) * s;
        // L = 1 − a/b with a' = da, b' = db per pixel.
        out.data[i] = (a * db - da * b) / (b * b);
    }
    Ok(out)
}

/// Plain mean BCE over all pixels (the boundary term).
pub fn bce_mean(logits: &LossMap, g: &LossMap) -> Result<f64> {
    logits.same_dims(g)?;
    let n = logits.data.len() as f64;
    let mut acc = 0.0f64;
    for i in 0..logits.data.len() {
        acc += bce_term(logits.data[i], g.data[i]);
    }
    Ok(acc / n)
}

pub fn bce_mean_grad(logits: &LossMap, g: &LossMap) -> Result<LossMap> {
    logits.same_dims(g)?;
    let n = logits.data.len() as f64;
    let (h, w) = logits.dims();
    let mut out = LossMap::zeros(h, w);
    for i in 0..logits.data.len() {
        out.data[i] = (sigmoid(logits.data[i]) - g.data[i]) / n;
    }
    Ok(out)
}

/// Ground-truth boundary band: dilate3×3(G) XOR erode3×3(G), both with zero
/// padding (so erosion shrinks masks at the image border).
pub fn boundary_target(g: &LossMap) -> Result<LossMap> {
    if !g.is_binary() {
        return Err(Error::invalid("boundary target needs a binary mask"));
    }
    let (h, w) = g.dims();
    let at = |y: i64, x: i64| -> f64 {
        if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
            0.0
        } else {
            g.data[y as usize * w + x as usize]
        }
    };
    let mut out = LossMap::zeros(h, w);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut any = false;
            let mut all = true;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let v = at(y + dy, x + dx);
                    any |= v == 1.0;
                    all &= v == 1.0;
                }
            }
            let dilated = any as u8;
            let eroded = all as u8;
            out.data[y as usize * w + x as usize] = (dilated ^ eroded) as f64;
        }
    }
    Ok(out)
}

/// Which optional loss terms participate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LossFlags {
    pub deep1: bool,
    pub deep2: bool,
    pub boundary: bool,
}

/// Logit maps and targets entering the composite loss.
#[derive(Debug, Clone)]
pub struct LossInputs {
    pub main: LossMap,
    pub deep1: Option<LossMap>,
    pub deep2: Option<LossMap>,
    pub boundary: Option<LossMap>,
    /// Binary ground-truth mask.
    pub gt: LossMap,
    /// Binary ground-truth boundary; defaults to boundary_target(gt) when
    /// absent and the boundary term is enabled.
    pub gt_boundary: Option<LossMap>,
}

/// Per-term values and gradients of the composite loss.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: f64,
    pub main_wbce: f64,
    pub main_wiou: f64,
    /// (wbce, wiou) for each enabled deep output, deep1 first.
    pub deep: Vec<(f64, f64)>,
    pub boundary_bce: Option<f64>,
    pub grad_main: LossMap,
    pub grad_deep: Vec<LossMap>,
    pub grad_boundary: Option<LossMap>,
}

/// Evaluates the composite loss and its analytic gradients.
pub fn composite_loss(inputs: &LossInputs, flags: LossFlags) -> Result<LossBreakdown> {
    if !inputs.gt.is_binary() {
        return Err(Error::invalid("ground truth must be binary"));
    }
    let w = pixel_weight_map(&inputs.gt)?;
    let term = |logits: &LossMap| -> Result<(f64, f64, LossMap)> {
        let wbce = weighted_bce(logits, &inputs.gt, &w)?;
        let wiou = weighted_iou(logits, &inputs.gt, &w)?;
        let mut grad = weighted_bce_grad(logits, &inputs.gt, &w)?;
        let giou = weighted_iou_grad(logits, &inputs.gt, &w)?;
        for i in 0..grad.data.len() {
            grad.data[i] += giou.data[i];
        }
        Ok((wbce, wiou, grad))
    };

    let (main_wbce, main_wiou, grad_main) = term(&inputs.main)?;
    let mut total = main_wbce + main_wiou;

    let mut deep = Vec::new();
    let mut grad_deep = Vec::new();
    for (enabled, tensor, name) in [
        (flags.deep1, inputs.deep1.as_ref(), "deep1"),
        (flags.deep2, inputs.deep2.as_ref(), "deep2"),
    ] {
        if !enabled {
            continue;
        }
        let logits = tensor
            .ok_or_else(|| Error::invalid(format!("{name} enabled but logits missing")))?;
        let (b, i, g) = term(logits)?;
        total += b + i;
        deep.push((b, i));
        grad_deep.push(g);
    }

    let (boundary_bce, grad_boundary) = if flags.boundary {
        let logits = inputs
            .boundary
            .as_ref()
            .ok_or_else(|| Error::invalid("boundary enabled but logits missing"))?;
        let gb = match &inputs.gt_boundary {
            Some(gb) => gb.clone(),
            None => boundary_target(&inputs.gt)?,
        };
        let v = bce_mean(logits, &gb)?;
        total += v;
        (Some(v), Some(bce_mean_grad(logits, &gb)?))
    } else {
        (None, None)
    };

    Ok(LossBreakdown {
        total,
        main_wbce,
        main_wiou,
        deep,
        boundary_bce,
        grad_main,
        grad_deep,
        grad_boundary,
    })
}

/// Evaluates only the scalar total (used by the finite-difference verifier).
pub fn composite_loss_value(inputs: &LossInputs, flags: LossFlags) -> Result<f64> {
    Ok(composite_loss(inputs, flags)?.total)
}

/// Named per-term values, handy for reports.
pub fn breakdown_terms(b: &LossBreakdown) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("main_wbce".into(), b.main_wbce);
    m.insert("main_wiou".into(), b.main_wiou);
    for (i, (wb, wi)) in b.deep.iter().enumerate() {
        m.insert(format!("deep{}_wbce", i + 1), *wb);
        m.insert(format!("deep{}_wiou", i + 1), *wi);
    }
    if let Some(v) = b.boundary_bce {
        m.insert("boundary_bce".into(), v);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(h: usize, w: usize, v: f64) -> LossMap {
        LossMap::from_fn(h, w, |_, _| v)
    }

    #[test]
    fn weight_map_is_one_on_constant_masks() {
        for v in [0.0, 1.0] {
            let g = constant(9, 9, v);
            let w = pixel_weight_map(&g).unwrap();
            assert!(w.data().iter().all(|&x| (x - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn weight_map_single_center_pixel() {
        // 33×33 with one set pixel: the 31×31 mean at the pixel is 1/961.
        let mut g = LossMap::zeros(33, 33);
        g.data_mut()[16 * 33 + 16] = 1.0;
        let w = pixel_weight_map(&g).unwrap();
        let expect = 1.0 + 5.0 * (1.0 - 1.0 / 961.0);
        assert!((w.data()[16 * 33 + 16] - expect).abs() < 1e-12);
        assert!(w.data().iter().all(|&x| (1.0..=6.0).contains(&x)));
    }

    #[test]
    fn weight_map_rejects_non_binary() {
        let g = constant(4, 4, 0.5);
        assert!(pixel_weight_map(&g).is_err());
    }

    #[test]
    fn wbce_zero_logits_all_ones_is_ln2() {
        let logits = constant(4, 4, 0.0);
        let g = constant(4, 4, 1.0);
        let w = constant(4, 4, 1.0);
        let v = weighted_bce(&logits, &g, &w).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-12, "{v}");
    }

    #[test]
    fn wbce_confident_correct_logits_vanish() {
        // Every pixel contributes ln(1 + e^-20) ≈ e^-20 ≈ 2.06e-9.
        let g = LossMap::from_fn(4, 4, |y, x| ((y + x) % 2) as f64);
        let logits = LossMap::from_fn(4, 4, |y, x| if (y + x) % 2 == 1 { 20.0 } else { -20.0 });
        let w = constant(4, 4, 1.0);
        let v = weighted_bce(&logits, &g, &w).unwrap();
        let expect = (1.0 + (-20.0f64).exp()).ln();
        assert!((v - expect).abs() < 1e-15, "{v} vs {expect}");
        assert!(v < 1e-8);
    }

    #[test]
    fn wbce_matches_per_pixel_scalar_oracle() {
        let mut seed = 1u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..100 {
            let logits = LossMap::from_fn(4, 4, |_, _| 3.0 * rnd());
            let g = LossMap::from_fn(4, 4, |_, _| if rnd() > 0.0 { 1.0 } else { 0.0 });
            let w = pixel_weight_map(&g).unwrap();
            let got = weighted_bce(&logits, &g, &w).unwrap();
            // Oracle: direct definition through probabilities.
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in 0..16 {
                let p = 1.0 / (1.0 + (-logits.data()[i]).exp());
                let gv = g.data()[i];
                num += w.data()[i] * -(gv * p.ln() + (1.0 - gv) * (1.0 - p).ln());
                den += w.data()[i];
            }
            assert!((got - num / den).abs() < 1e-9, "{got} vs {}", num / den);
        }
    }

    #[test]
    fn wiou_reference_points() {
        let w = constant(4, 4, 1.0);
        // Perfect prediction on 8 foreground pixels.
        let g = LossMap::from_fn(4, 4, |y, _| if y < 2 { 1.0 } else { 0.0 });
        let perfect = LossMap::from_fn(4, 4, |y, _| if y < 2 { 40.0 } else { -40.0 });
        let v = weighted_iou(&perfect, &g, &w).unwrap();
        assert!(v.abs() < 1e-6, "{v}");
        // All-negative prediction: 1 − 1/(8+1).
        let empty = constant(4, 4, -40.0);
        let v = weighted_iou(&empty, &g, &w).unwrap();
        assert!((v - (1.0 - 1.0 / 9.0)).abs() < 1e-6, "{v}");
        // Empty prediction against an empty mask: 1 − 1/1 = 0.
        let zeros = constant(4, 4, 0.0);
        let v = weighted_iou(&empty, &zeros, &w).unwrap();
        assert!(v.abs() < 1e-6, "{v}");
    }

    #[test]
    fn wiou_matches_per_pixel_scalar_oracle() {
        let mut seed = 2u64;
        let mut rnd = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for _ in 0..100 {
            let logits = LossMap::from_fn(4, 4, |_, _| 3.0 * rnd());
            let g = LossMap::from_fn(4, 4, |_, _| if rnd() > 0.0 { 1.0 } else { 0.0 });
            let w = pixel_weight_map(&g).unwrap();
            let got = weighted_iou(&logits, &g, &w).unwrap();
            let mut inter = 0.0f64;
            let mut union = 0.0f64;
            for i in 0..16 {
                let p = 1.0 / (1.0 + (-logits.data()[i]).exp());
                inter += w.data()[i] * p * g.data()[i];
                union += w.data()[i] * (p + g.data()[i]);
            }
            let expect = 1.0 - (inter + 1.0) / (union - inter + 1.0);
            assert!((got - expect).abs() < 1e-9);
            assert!((0.0..1.0).contains(&got));
        }
    }

    #[test]
    fn boundary_target_empty_mask_is_empty() {
        let g = LossMap::zeros(5, 5);
        let b = boundary_target(&g).unwrap();
        assert!(b.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_target_centered_square_matches_morphology_oracle() {
        // 3×3 square centred in 5×5. Independent oracle: brute-force
        // morphology with explicit neighbourhood scans.
        let g = LossMap::from_fn(5, 5, |y, x| {
            if (1..=3).contains(&y) && (1..=3).contains(&x) {
                1.0
            } else {
                0.0
            }
        });
        let got = boundary_target(&g).unwrap();
        let oracle = morphological_gradient_oracle(&g);
        assert_eq!(got.data(), oracle.data());
        // Dilation covers the full 5×5, erosion keeps only the centre.
        let set: f64 = got.data().iter().sum();
        assert_eq!(set, 24.0);
    }

    #[test]
    fn boundary_target_full_mask_is_border_band() {
        let g = constant(5, 5, 1.0);
        let b = boundary_target(&g).unwrap();
        for y in 0..5 {
            for x in 0..5 {
                let expect = if y == 0 || x == 0 || y == 4 || x == 4 { 1.0 } else { 0.0 };
                assert_eq!(b.data()[y * 5 + x], expect, "({y},{x})");
            }
        }
        assert_eq!(b.data().iter().sum::<f64>(), 16.0);
    }

    fn morphological_gradient_oracle(g: &LossMap) -> LossMap {
        let (h, w) = g.dims();
        let get = |y: i64, x: i64| -> f64 {
            if y < 0 || x < 0 || y >= h as i64 || x >= w as i64 {
                0.0
            } else {
                g.data()[y as usize * w + x as usize]
            }
        };
        LossMap::from_fn(h, w, |y, x| {
            let mut dil = 0.0;
            let mut ero = 1.0;
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let v = get(y as i64 + dy, x as i64 + dx);
                    dil = f64::max(dil, v);
                    ero = f64::min(ero, v);
                }
            }
            if dil != ero {
                1.0
            } else {
                0.0
            }
        })
    }

    #[test]
    fn composite_with_all_flags_off_is_main_term_only() {
        let g = LossMap::from_fn(6, 6, |y, x| ((y * x) % 2) as f64);
        let o = LossMap::from_fn(6, 6, |y, x| (y as f64 - x as f64) * 0.3);
        let inputs = LossInputs {
            main: o.clone(),
            deep1: None,
            deep2: None,
            boundary: None,
            gt: g.clone(),
            gt_boundary: None,
        };
        let b = composite_loss(&inputs, LossFlags::default()).unwrap();
        let w = pixel_weight_map(&g).unwrap();
        let expect =
            weighted_bce(&o, &g, &w).unwrap() + weighted_iou(&o, &g, &w).unwrap();
        assert!((b.total - expect).abs() < 1e-12);
        assert!(b.deep.is_empty() && b.boundary_bce.is_none());
    }

    #[test]
    fn composite_with_identical_maps_is_term_sum() {
        // D1 = D2 = O: total = 3·l(G,O) + bce(O, G_B).
        let g = LossMap::from_fn(8, 8, |y, x| if (y / 2 + x / 3) % 2 == 0 { 1.0 } else { 0.0 });
        let o = LossMap::from_fn(8, 8, |y, x| ((y * 7 + x * 3) % 11) as f64 * 0.2 - 1.0);
        let inputs = LossInputs {
            main: o.clone(),
            deep1: Some(o.clone()),
            deep2: Some(o.clone()),
            boundary: Some(o.clone()),
            gt: g.clone(),
            gt_boundary: None,
        };
        let flags = LossFlags { deep1: true, deep2: true, boundary: true };
        let b = composite_loss(&inputs, flags).unwrap();
        let w = pixel_weight_map(&g).unwrap();
        let l = weighted_bce(&o, &g, &w).unwrap() + weighted_iou(&o, &g, &w).unwrap();
        let gb = boundary_target(&g).unwrap();
        let expect = 3.0 * l + bce_mean(&o, &gb).unwrap();
        assert!((b.total - expect).abs() < 1e-9, "{} vs {expect}", b.total);
    }

    #[test]
    fn perfect_predictions_have_negligible_loss() {
        let g = LossMap::from_fn(8, 8, |y, x| if y >= 3 && x < 5 { 1.0 } else { 0.0 });
        let o = LossMap::from_fn(8, 8, |y, x| if g.data()[y * 8 + x] == 1.0 { 40.0 } else { -40.0 });
        let gb = boundary_target(&g).unwrap();
        let bl = LossMap::from_fn(8, 8, |y, x| if gb.data()[y * 8 + x] == 1.0 { 40.0 } else { -40.0 });
        let inputs = LossInputs {
            main: o.clone(),
            deep1: Some(o.clone()),
            deep2: Some(o),
            boundary: Some(bl),
            gt: g,
            gt_boundary: Some(gb),
        };
        let flags = LossFlags { deep1: true, deep2: true, boundary: true };
        let b = composite_loss(&inputs, flags).unwrap();
        assert!(b.total < 1e-6, "{}", b.total);
    }

    #[test]
    fn enabled_flag_with_missing_tensor_is_a_named_error() {
        let g = LossMap::zeros(4, 4);
        let inputs = LossInputs {
            main: LossMap::zeros(4, 4),
            deep1: None,
            deep2: None,
            boundary: None,
            gt: g,
            gt_boundary: None,
        };
        let err =
            composite_loss(&inputs, LossFlags { deep1: true, ..Default::default() }).unwrap_err();
        assert!(err.to_string().contains("deep1"), "{err}");
    }

    #[test]
    fn total_is_sum_of_parts_and_parts_are_nonnegative() {
        let g = LossMap::from_fn(8, 8, |y, x| ((y + 2 * x) % 3 == 0) as u8 as f64);
        let mk = |s: f64| LossMap::from_fn(8, 8, |y, x| ((y * 13 + x * 7) % 9) as f64 * s - 1.0);
        let inputs = LossInputs {
            main: mk(0.3),
            deep1: Some(mk(0.2)),
            deep2: Some(mk(0.4)),
            boundary: Some(mk(0.25)),
            gt: g,
            gt_boundary: None,
        };
        let flags = LossFlags { deep1: true, deep2: true, boundary: true };
        let b = composite_loss(&inputs, flags).unwrap();
        let mut sum = b.main_wbce + b.main_wiou + b.boundary_bce.unwrap();
        for (wb, wi) in &b.deep {
            sum += wb + wi;
            assert!(*wb >= 0.0 && *wi >= 0.0);
        }
        assert!(b.main_wbce >= 0.0 && b.main_wiou >= 0.0);
        assert!(b.boundary_bce.unwrap() >= 0.0);
        assert!((b.total - sum).abs() < 1e-9);
    }

    #[test]
    fn loss_is_equivariant_under_flips() {
        // Horizontal flips commute with the symmetric mean pool, so every
        // term is unchanged when all maps flip together.
        let g = LossMap::from_fn(8, 8, |y, x| ((y * 3 + x) % 4 == 0) as u8 as f64);
        let o = LossMap::from_fn(8, 8, |y, x| ((y * 11 + x * 5) % 7) as f64 * 0.3 - 0.9);
        let flip = |m: &LossMap| {
            let (h, w) = m.dims();
            LossMap::from_fn(h, w, |y, x| m.data()[y * w + (w - 1 - x)])
        };
        let flags = LossFlags { deep1: false, deep2: false, boundary: true };
        let a = composite_loss(
            &LossInputs {
                main: o.clone(),
                deep1: None,
                deep2: None,
                boundary: Some(o.clone()),
                gt: g.clone(),
                gt_boundary: None,
            },
            flags,
        )
        .unwrap();
        let b = composite_loss(
            &LossInputs {
                main: flip(&o),
                deep1: None,
                deep2: None,
                boundary: Some(flip(&o)),
                gt: flip(&g),
                gt_boundary: None,
            },
            flags,
        )
        .unwrap();
        assert!((a.total - b.total).abs() < 1e-9);
        assert!((a.main_wbce - b.main_wbce).abs() < 1e-9);
        assert!((a.main_wiou - b.main_wiou).abs() < 1e-9);
    }

    #[test]
    fn wbce_grad_at_symmetric_point() {
        // Zero logits, empty mask: the wbce gradient is σ(0)·W/ΣW = 0.5/N.
        let logits = LossMap::zeros(4, 4);
        let g = LossMap::zeros(4, 4);
        let w = pixel_weight_map(&g).unwrap();
        let grad = weighted_bce_grad(&logits, &g, &w).unwrap();
        for &v in grad.data() {
            assert!((v - 0.5 / 16.0).abs() < 1e-12);
        }
    }
}
