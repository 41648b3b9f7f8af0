//! MACs / CIO / MoC cost model.

use serde::Serialize;

use crate::error::Result;
use crate::graph::block::{BlockGraph, BlockSpec, BlockVersion};
use crate::graph::netspec::NetSpec;
use crate::graph::plan::Plan;

/// Cost of one layer.
#[derive(Debug, Clone, Serialize)]
pub struct LayerCost {
    pub name: String,
    pub macs: u64,
    pub cio: u64,
    pub params: u64,
}

/// Aggregate cost figures.
#[derive(Debug, Clone, Serialize)]
pub struct CostTotals {
    pub macs: u64,
    pub cio: u64,
    /// MACs over CIO; compute density per unit of memory traffic.
    pub moc: f64,
    pub params: u64,
}

/// Per-layer and aggregate cost of a network at a given input shape.
#[derive(Debug, Clone, Serialize)]
pub struct CostReport {
    pub rows: Vec<LayerCost>,
    pub totals: CostTotals,
}

impl CostReport {
    fn from_rows(rows: Vec<LayerCost>) -> CostReport {
        let macs: u64 = rows.iter().map(|r| r.macs).sum();
        let cio: u64 = rows.iter().map(|r| r.cio).sum();
        let params: u64 = rows.iter().map(|r| r.params).sum();
        let moc = if cio > 0 { macs as f64 / cio as f64 } else { 0.0 };
        CostReport { rows, totals: CostTotals { macs, cio, moc, params } }
    }
}

/// Computes the per-layer cost report of `net` for an (N, C, H, W) input.
pub fn analyze(net: &NetSpec, input: (usize, usize, usize, usize)) -> Result<CostReport> {
    let plan = Plan::build(net, input)?;
    let rows = plan
        .layers
        .iter()
        .map(|l| LayerCost { name: l.name.clone(), macs: l.macs, cio: l.cio, params: l.params })
        .collect();
    Ok(CostReport::from_rows(rows))
}

/// MACs and CIO of a standalone block at one spatial resolution.
///
/// All block convs run at the input resolution (3×3, stride 1, pad 1; the
/// v2 entry conv is 1×1). The v1 input node is a passthrough and costs
/// nothing by itself; its reads are charged to the consuming layers.
pub fn block_cost(graph: &BlockGraph, batch: usize, h: usize, w: usize) -> (u64, u64) {
    let hw = (h * w) as u64 * batch as u64;
    let mut macs = 0u64;
    let mut cio = 0u64;
    for node in &graph.nodes {
        let kk: u64 = match (node.index, graph.spec.version) {
            (0, BlockVersion::V1) => continue,
            (0, BlockVersion::V2) => 1,
            _ => 9,
        };
        macs += kk * node.c_in as u64 * node.c_out as u64 * hw;
        cio += (node.c_in as u64 + node.c_out as u64) * hw;
    }
    (macs, cio)
}

/// Side-by-side block comparison record.
#[derive(Debug, Clone, Serialize)]
pub struct BlockComparison {
    pub macs_a: u64,
    pub macs_b: u64,
    pub cio_a: u64,
    pub cio_b: u64,
    pub moc_a: f64,
    pub moc_b: f64,
    pub conv_count_a: usize,
    pub conv_count_b: usize,
}

impl BlockComparison {
    /// Relative MACs gap |a − b| / a.
    pub fn macs_gap(&self) -> f64 {
        (self.macs_a as f64 - self.macs_b as f64).abs() / self.macs_a as f64
    }
}

/// Analyzes two block specs on the same (N, C, H, W) input tensor.
pub fn compare_blocks(
    a: &BlockSpec,
    b: &BlockSpec,
    input: (usize, usize, usize, usize),
) -> Result<BlockComparison> {
    let (n, c, h, w) = input;
    let ga = BlockGraph::build(a, c)?;
    let gb = BlockGraph::build(b, c)?;
    let (macs_a, cio_a) = block_cost(&ga, n, h, w);
    let (macs_b, cio_b) = block_cost(&gb, n, h, w);
    Ok(BlockComparison {
        macs_a,
        macs_b,
        cio_a,
        cio_b,
        moc_a: macs_a as f64 / cio_a as f64,
        moc_b: macs_b as f64 / cio_b as f64,
        conv_count_a: ga.conv_count(),
        conv_count_b: gb.conv_count(),
    })
}
