//! `gradcheck`: finite-difference verification of the loss gradients.

use hardnet_core::loss::{grad_check, GradCheckConfig, LossFlags};

const TOLERANCE: f64 = 1e-6;

#[derive(clap::Args)]
pub struct Args {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Square map side (at most 32).
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    /// Enabled loss terms, comma separated: d1, d2, b. Empty = main only.
    #[arg(long, default_value = "d1,d2,b", allow_hyphen_values = true)]
    pub flags: String,
}

fn parse_flags(text: &str) -> anyhow::Result<LossFlags> {
    let mut flags = LossFlags::default();
    for piece in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match piece {
            "d1" => flags.deep1 = true,
            "d2" => flags.deep2 = true,
            "b" => flags.boundary = true,
            other => anyhow::bail!("unknown loss flag {other:?} (use d1, d2, b)"),
        }
    }
    Ok(flags)
}

pub fn run(args: &Args) -> anyhow::Result<i32> {
    if args.size == 0 || args.size > 32 {
        eprintln!("config error: size must lie in 1..=32");
        return Ok(2);
    }
    let flags = match parse_flags(&args.flags) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("config error: {e}");
            return Ok(2);
        }
    };
    let report = grad_check(&GradCheckConfig::new(args.seed, args.size, flags))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.max_rel_err < TOLERANCE {
        Ok(0)
    } else {
        eprintln!(
            "gradient check failed: max relative error {} >= {TOLERANCE}",
            report.max_rel_err
        );
        Ok(1)
    }
}
