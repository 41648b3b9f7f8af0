//! `analyze`: cost report for a network config, or a side-by-side block
//! comparison when --compare is given.

use std::path::PathBuf;

use anyhow::Context;
use hardnet_core::graph::{analyze, compare_blocks, BlockSpec, CostReport, NetSpec};

#[derive(clap::Args)]
pub struct Args {
    /// Network config JSON (or a bare block spec when --compare is given).
    #[arg(long)]
    pub spec: PathBuf,
    /// Square input side.
    #[arg(long, default_value_t = 512)]
    pub input_size: usize,
    /// Input channels for block comparisons (networks carry their own).
    #[arg(long, default_value_t = 256)]
    pub input_channels: usize,
    /// Second block spec JSON; switches to comparison mode.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    #[arg(long, value_parser = ["json", "table"], default_value = "table")]
    pub format: String,
}

fn load_block_spec(path: &PathBuf) -> anyhow::Result<BlockSpec> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading block spec {}", path.display()))?;
    let spec: BlockSpec = serde_json::from_str(&text)
        .with_context(|| format!("parsing block spec {}", path.display()))?;
    spec.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(spec)
}

fn print_report_table(report: &CostReport) {
    println!("{:<28} {:>14} {:>14} {:>10}", "layer", "macs", "cio", "params");
    for row in &report.rows {
        println!(
            "{:<28} {:>14} {:>14} {:>10}",
            row.name, row.macs, row.cio, row.params
        );
    }
    println!(
        "{:<28} {:>14} {:>14} {:>10}   moc {:.3}",
        "total", report.totals.macs, report.totals.cio, report.totals.params, report.totals.moc
    );
}

pub fn run(args: &Args) -> anyhow::Result<i32> {
    match &args.compare {
        None => {
            let net = match NetSpec::load(&args.spec) {
                Ok(net) => net,
                Err(e) => {
                    eprintln!("config error in {}: {e}", args.spec.display());
                    return Ok(2);
                }
            };
            let report = match analyze(
                &net,
                (1, net.input_channels, args.input_size, args.input_size),
            ) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Ok(2);
                }
            };
            match args.format.as_str() {
                "json" => println!("{}", serde_json::to_string_pretty(&report)?),
                _ => print_report_table(&report),
            }
            Ok(0)
        }
        Some(other) => {
            let (a, b) = match (load_block_spec(&args.spec), load_block_spec(other)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    eprintln!("config error: {e:#}");
                    return Ok(2);
                }
            };
            let shape = (1, args.input_channels, args.input_size, args.input_size);
            let cmp = match compare_blocks(&a, &b, shape) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return Ok(2);
                }
            };
            match args.format.as_str() {
                "json" => println!("{}", serde_json::to_string_pretty(&cmp)?),
                _ => {
                    println!("{:<14} {:>16} {:>16}", "", "a", "b");
                    println!("{:<14} {:>16} {:>16}", "macs", cmp.macs_a, cmp.macs_b);
                    println!("{:<14} {:>16} {:>16}", "cio", cmp.cio_a, cmp.cio_b);
                    println!("{:<14} {:>16.3} {:>16.3}", "moc", cmp.moc_a, cmp.moc_b);
                    println!(
                        "{:<14} {:>16} {:>16}",
                        "conv layers", cmp.conv_count_a, cmp.conv_count_b
                    );
                    println!("macs gap: {:.2}%", cmp.macs_gap() * 100.0);
                }
            }
            Ok(0)
        }
    }
}
