//! `infer`: run the segmentation pipeline over a directory of P6 images.

use std::path::PathBuf;

use anyhow::Context;
use hardnet_core::dataio::{load_weights, read_image, write_mask};
use hardnet_core::graph::{NetSpec, Plan};
use hardnet_core::net::{init_weights, WeightStore};
use hardnet_core::pipeline::{infer_mask, InferenceOptions};
use hardnet_core::postproc::{CompressMethod, TtaMode};
use rayon::prelude::*;

use crate::manifest::{file_ref, write_manifest, FileRef, RunManifest};

#[derive(clap::Args)]
pub struct Args {
    /// Network config JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// Weight container(s); several form a fold ensemble.
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<PathBuf>,
    /// Directory of P6 input images (*.ppm).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for P5 masks and the run manifest.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "none", value_parser = ["none", "h", "v", "hv"])]
    pub tta: String,
    #[arg(long, default_value = "tanh", value_parser = ["tanh", "sigmoid"])]
    pub compress: String,
    /// Skip hole filling.
    #[arg(long)]
    pub no_fill: bool,
    /// Initialize one weight store from this seed instead of --weights.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Square side images are padded and resized to.
    #[arg(long, default_value_t = 512)]
    pub size: usize,
}

pub fn run(args: &Args) -> anyhow::Result<i32> {
    let net = match NetSpec::load(&args.spec) {
        Ok(net) => net,
        Err(e) => {
            eprintln!("config error in {}: {e}", args.spec.display());
            return Ok(2);
        }
    };
    let plan = match Plan::build(&net, (1, net.input_channels, args.size, args.size)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(2);
        }
    };

    let mut stores: Vec<WeightStore> = Vec::new();
    if args.weights.is_empty() {
        match args.seed {
            Some(seed) => stores.push(init_weights(&net, seed)?),
            None => {
                eprintln!("config error: provide --weights or --seed");
                return Ok(2);
            }
        }
    } else {
        for path in &args.weights {
            let store = match load_weights(path) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("missing artifact: {} ({e})", path.display());
                    return Ok(3);
                }
            };
            if let Err(e) = store.validate_for(&plan) {
                eprintln!("missing artifact: {}: {e}", path.display());
                return Ok(3);
            }
            stores.push(store);
        }
    }

    let opts = InferenceOptions {
        tta: args.tta.parse::<TtaMode>()?,
        compress: args.compress.parse::<CompressMethod>()?,
        fill: !args.no_fill,
        target: args.size,
    };

    let mut inputs: Vec<PathBuf> = std::fs::read_dir(&args.input)
        .with_context(|| format!("reading input dir {}", args.input.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ppm"))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        eprintln!("config error: no .ppm images in {}", args.input.display());
        return Ok(2);
    }
    std::fs::create_dir_all(&args.output)?;

    let results: Vec<(PathBuf, Result<(), String>)> = inputs
        .par_iter()
        .map(|path| {
            let outcome = (|| -> Result<(), String> {
                let image = read_image(path).map_err(|e| e.to_string())?;
                let mask =
                    infer_mask(&net, &stores, &image, &opts).map_err(|e| e.to_string())?;
                let stem = path.file_stem().unwrap_or_default().to_string_lossy();
                let out_path = args.output.join(format!("{stem}.pgm"));
                write_mask(&out_path, &mask).map_err(|e| e.to_string())
            })();
            (path.clone(), outcome)
        })
        .collect();

    let mut failed = 0usize;
    for (path, outcome) in &results {
        if let Err(msg) = outcome {
            eprintln!("failed: {}: {msg}", path.display());
            failed += 1;
        }
    }

    let image_refs: Vec<FileRef> = inputs
        .iter()
        .filter(|p| results.iter().any(|(rp, r)| rp == *p && r.is_ok()))
        .map(|p| file_ref(p))
        .collect::<anyhow::Result<_>>()?;
    let weight_refs: Vec<FileRef> = args
        .weights
        .iter()
        .map(|p| file_ref(p))
        .collect::<anyhow::Result<_>>()?;
    let manifest = RunManifest {
        command: "infer".into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        netspec: file_ref(&args.spec)?,
        weights: weight_refs,
        seed: args.seed,
        tta: args.tta.clone(),
        compress: args.compress.clone(),
        fill: !args.no_fill,
        size: args.size,
        images: image_refs,
    };
    write_manifest(&args.output, &manifest)?;

    eprintln!(
        "{} of {} images segmented into {}",
        inputs.len() - failed,
        inputs.len(),
        args.output.display()
    );
    Ok(if failed > 0 { 4 } else { 0 })
}
