//! Finite-difference verification of the analytic loss gradients.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::{composite_loss, composite_loss_value, boundary_target, LossFlags, LossInputs, LossMap};

/// Configuration of one verification run.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub flags: LossFlags,
    /// Random coordinates probed per tensor (capped at the pixel count).
    pub coords_per_tensor: usize,
    /// Central-difference step.
    pub step: f64,
}

impl GradCheckConfig {
    pub fn new(seed: u64, side: usize, flags: LossFlags) -> Self {
        GradCheckConfig {
            seed,
            height: side,
            width: side,
            flags,
            coords_per_tensor: 64,
            step: 1e-5,
        }
    }
}

/// Outcome of one verification run.
#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub shape: (usize, usize),
    pub flags: Vec<String>,
    pub coords_per_tensor: usize,
    /// Worst relative error across every probed coordinate of every tensor.
    pub max_rel_err: f64,
    /// Worst relative error per gradient tensor (absent tensors are absent).
    pub per_tensor: BTreeMap<String, f64>,
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn random_map(rng: &mut ChaCha8Rng, h: usize, w: usize, lo: f64, hi: f64) -> LossMap {
    let mut m = LossMap::zeros(h, w);
    for v in m.data_mut() {
        *v = lo + (hi - lo) * unit_f64(rng.next_u64());
    }
    m
}

fn random_mask(rng: &mut ChaCha8Rng, h: usize, w: usize) -> LossMap {
    let mut m = LossMap::zeros(h, w);
    for v in m.data_mut() {
        *v = (rng.next_u64() & 1) as f64;
    }
    m
}

fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Compares the analytic gradient of every enabled logit tensor against
/// central finite differences on seeded random inputs.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.height == 0 || cfg.width == 0 {
        return Err(Error::invalid("grad check needs a non-empty shape"));
    }
    let (h, w) = (cfg.height, cfg.width);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gt = random_mask(&mut rng, h, w);
    let gt_boundary = boundary_target(&gt)?;
    let mut inputs = LossInputs {
        main: random_map(&mut rng, h, w, -3.0, 3.0),
        deep1: cfg.flags.deep1.then(|| random_map(&mut rng, h, w, -3.0, 3.0)),
        deep2: cfg.flags.deep2.then(|| random_map(&mut rng, h, w, -3.0, 3.0)),
        boundary: cfg.flags.boundary.then(|| random_map(&mut rng, h, w, -3.0, 3.0)),
        gt,
        gt_boundary: Some(gt_boundary),
    };

    let breakdown = composite_loss(&inputs, cfg.flags)?;
    // (report key, analytic gradient) per enabled tensor.
    let mut targets: Vec<(String, LossMap)> = vec![("O".into(), breakdown.grad_main.clone())];
    let mut deep_iter = breakdown.grad_deep.iter();
    if cfg.flags.deep1 {
        targets.push(("D1".into(), deep_iter.next().expect("deep1 grad").clone()));
    }
    if cfg.flags.deep2 {
        targets.push(("D2".into(), deep_iter.next().expect("deep2 grad").clone()));
    }
    if cfg.flags.boundary {
        targets.push(("B".into(), breakdown.grad_boundary.clone().expect("boundary grad")));
    }

    let n_pixels = h * w;
    let n_coords = cfg.coords_per_tensor.min(n_pixels).max(1);
    let mut per_tensor = BTreeMap::new();
    let mut max_rel = 0.0f64;

    for (key, analytic) in &targets {
        // Distinct random coordinates.
        let mut coords: Vec<usize> = Vec::with_capacity(n_coords);
        while coords.len() < n_coords {
            let c = (rng.next_u64() % n_pixels as u64) as usize;
            if !coords.contains(&c) {
                coords.push(c);
            }
        }
        let mut worst = 0.0f64;
        for &coord in &coords {
            let get = |inputs: &LossInputs, key: &str| -> f64 {
                match key {
                    "O" => inputs.main.data()[coord],
                    "D1" => inputs.deep1.as_ref().unwrap().data()[coord],
                    "D2" => inputs.deep2.as_ref().unwrap().data()[coord],
                    "B" => inputs.boundary.as_ref().unwrap().data()[coord],
                    _ => unreachable!(),
                }
            };
            let set = |inputs: &mut LossInputs, key: &str, v: f64| match key {
                "O" => inputs.main.data_mut()[coord] = v,
                "D1" => inputs.deep1.as_mut().unwrap().data_mut()[coord] = v,
                "D2" => inputs.deep2.as_mut().unwrap().data_mut()[coord] = v,
                "B" => inputs.boundary.as_mut().unwrap().data_mut()[coord] = v,
                _ => unreachable!(),
            };
            let original = get(&inputs, key);
            set(&mut inputs, key, original + cfg.step);
            let plus = composite_loss_value(&inputs, cfg.flags)?;
            set(&mut inputs, key, original - cfg.step);
            let minus = composite_loss_value(&inputs, cfg.flags)?;
            set(&mut inputs, key, original);
            let fd = (plus - minus) / (2.0 * cfg.step);
            worst = worst.max(rel_err(analytic.data()[coord], fd));
        }
        per_tensor.insert(key.clone(), worst);
        max_rel = max_rel.max(worst);
    }

    let mut flags = Vec::new();
    if cfg.flags.deep1 {
        flags.push("deep1".into());
    }
    if cfg.flags.deep2 {
        flags.push("deep2".into());
    }
    if cfg.flags.boundary {
        flags.push("boundary".into());
    }
    Ok(GradCheckReport {
        seed: cfg.seed,
        shape: (h, w),
        flags,
        coords_per_tensor: n_coords,
        max_rel_err: max_rel,
        per_tensor,
    })
}
