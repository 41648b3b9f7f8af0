//! `eval`: per-image and mean dice between prediction and ground-truth
//! mask directories, matched by file stem.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use hardnet_core::dataio::read_mask;
use hardnet_core::postproc::dice;
use serde::Serialize;

#[derive(clap::Args)]
pub struct Args {
    /// Directory of predicted P5 masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth P5 masks.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_parser = ["json", "table"], default_value = "table")]
    pub format: String,
}

#[derive(Serialize)]
struct EvalReport {
    mean_dice: f64,
    per_image: BTreeMap<String, f64>,
}

fn mask_stems(dir: &Path) -> anyhow::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in
        std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?
    {
        let path = entry?.path();
        if path.extension().is_some_and(|x| x == "pgm") {
            if let Some(stem) = path.file_stem() {
                out.insert(stem.to_string_lossy().into_owned(), path);
            }
        }
    }
    Ok(out)
}

pub fn run(args: &Args) -> anyhow::Result<i32> {
    let preds = mask_stems(&args.pred)?;
    let gts = mask_stems(&args.gt)?;

    let mut partial = false;
    for stem in preds.keys() {
        if !gts.contains_key(stem) {
            eprintln!("no ground truth for {stem}; excluded");
            partial = true;
        }
    }
    for stem in gts.keys() {
        if !preds.contains_key(stem) {
            eprintln!("no prediction for {stem}; excluded");
            partial = true;
        }
    }

    let mut per_image = BTreeMap::new();
    for (stem, pred_path) in &preds {
        let Some(gt_path) = gts.get(stem) else { continue };
        let outcome = read_mask(pred_path).and_then(|p| {
            let g = read_mask(gt_path)?;
            dice(&p, &g)
        });
        match outcome {
            Ok(d) => {
                per_image.insert(stem.clone(), d);
            }
            Err(e) => {
                eprintln!("failed: {stem}: {e}; excluded");
                partial = true;
            }
        }
    }
    if per_image.is_empty() {
        eprintln!("config error: no matching mask pairs between {} and {}",
            args.pred.display(), args.gt.display());
        return Ok(2);
    }

    let mean: f64 = per_image.values().sum::<f64>() / per_image.len() as f64;
    let report = EvalReport { mean_dice: mean, per_image };
    match args.format.as_str() {
        "json" => println!("{}", serde_json::to_string_pretty(&report)?),
        _ => {
            for (stem, d) in &report.per_image {
                println!("{stem:<32} {d:.4}");
            }
            println!("{:<32} {:.4}", "mean", report.mean_dice);
        }
    }
    Ok(if partial { 4 } else { 0 })
}
