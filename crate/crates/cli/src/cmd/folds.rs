//! `split-folds`: seeded k-fold assignment of sample ids.

use std::path::PathBuf;

use anyhow::Context;
use hardnet_core::dataio::split_folds;

#[derive(clap::Args)]
pub struct Args {
    /// File with one sample id per line.
    #[arg(long)]
    pub list: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the assignment JSON here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &Args) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&args.list)
        .with_context(|| format!("reading id list {}", args.list.display()))?;
    let ids: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    let assignment = match split_folds(&ids, args.k, args.seed) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(2);
        }
    };
    let json = serde_json::to_string_pretty(&assignment)?;
    match &args.out {
        Some(path) => {
            let tmp = path.with_extension("tmp-write");
            std::fs::write(&tmp, json.as_bytes())?;
            std::fs::rename(&tmp, path)?;
        }
        None => println!("{json}"),
    }
    Ok(0)
}
