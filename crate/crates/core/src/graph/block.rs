//! Dense-block connection graphs.
//!
//! A HarDBlockV2 of depth n links conv layer k to layer k−f for every
//! divisor f of n that also divides k, and splits every layer's output into
//! equal growth-width shares, one per outgoing slot. The original power-of-2
//! pattern (v1) is kept for analyzer comparisons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Link-pattern family of a dense block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockVersion {
    /// Power-of-2 links, multiplier-widened channels, full-output reads.
    V1,
    /// Divisor-of-n links with equal-width channel splitting.
    V2,
}

/// Declarative description of one dense block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub version: BlockVersion,
    /// Number of 3×3 conv layers.
    pub depth: usize,
    /// Channels per edge share (v2) or base growth (v1).
    pub growth: usize,
    /// Channel widening per power-of-2 level; v1 only.
    #[serde(default)]
    pub multiplier: Option<f64>,
    #[serde(default)]
    pub csp_wrap: bool,
}

impl BlockSpec {
    pub fn v2(depth: usize, growth: usize) -> Self {
        BlockSpec { version: BlockVersion::V2, depth, growth, multiplier: None, csp_wrap: false }
    }

    pub fn v1(depth: usize, growth: usize, multiplier: f64) -> Self {
        BlockSpec {
            version: BlockVersion::V1,
            depth,
            growth,
            multiplier: Some(multiplier),
            csp_wrap: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 1 {
            return Err(Error::invalid("block depth must be >= 1"));
        }
        if self.growth < 1 {
            return Err(Error::invalid("block growth must be >= 1"));
        }
        if self.version == BlockVersion::V1 {
            match self.multiplier {
                Some(m) if m > 1.0 => {}
                Some(m) => {
                    return Err(Error::invalid(format!("v1 multiplier must be > 1, got {m}")))
                }
                None => return Err(Error::invalid("v1 blocks require a multiplier")),
            }
        }
        Ok(())
    }

    /// Multiplier with the documented default of 1.7 applied.
    pub fn multiplier_or_default(&self) -> f64 {
        self.multiplier.unwrap_or(1.7)
    }
}

/// One incoming edge of a conv layer: a channel range of a source node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputShare {
    pub source: usize,
    /// First channel of the share within the source's output.
    pub chan_start: usize,
    pub chan_len: usize,
}

/// One share routed to the block output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputShare {
    pub layer: usize,
    /// Slot key: the divisor f (v2) or 0 (v1 full output).
    pub slot: usize,
    pub chan_start: usize,
    pub chan_len: usize,
}

/// One node of the block DAG. Node 0 is the block input (v2: the 1×1 entry
/// conv; v1: a passthrough); nodes 1..=n are the 3×3 conv layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerNode {
    pub index: usize,
    pub in_sources: Vec<InputShare>,
    /// (target layer, slot key) pairs for shares consumed downstream.
    pub out_targets: Vec<(usize, usize)>,
    pub c_in: usize,
    pub c_out: usize,
    /// Shares sent to the block output rather than a later layer.
    pub output_routed_shares: usize,
    /// Total outgoing slots of this node.
    pub total_shares: usize,
}

/// Explicit connection graph of one block, with channel assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraph {
    pub spec: BlockSpec,
    /// Channels entering the block (before any CSP split).
    pub in_channels: usize,
    /// Channels bypassing the block when CSP-wrapped; 0 otherwise.
    pub bypass_channels: usize,
    pub nodes: Vec<LayerNode>,
    /// Channels leaving the block (bypass included).
    pub block_out_channels: usize,
    /// Shares concatenated into the block output, ascending (layer, slot);
    /// the CSP bypass, when present, is appended after these.
    pub block_out_concat_order: Vec<OutputShare>,
}

/// Divisors of n in ascending order.
pub fn divisors(n: usize) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::invalid("divisors of 0 are undefined"));
    }
    Ok((1..=n).filter(|f| n % f == 0).collect())
}


/// Largest even integer ≤ x, clamped to at least 2 (v1 channel rounding).
fn round_down_even(x: f64) -> usize {
    (((x / 2.0).floor() as usize) * 2).max(2)
}

impl BlockGraph {
    /// Compiles a block spec into its connection graph for a given number of
    /// input channels. `csp_wrap` on the spec is applied with the default
    /// 0.5 split ratio.
    pub fn build(spec: &BlockSpec, in_channels: usize) -> Result<BlockGraph> {
        spec.validate()?;
        if in_channels < 1 {
            return Err(Error::invalid("block input channels must be >= 1"));
        }
        let graph = match spec.version {
            BlockVersion::V2 => Self::build_v2(spec, in_channels),
            BlockVersion::V1 => Self::build_v1(spec, in_channels),
        }?;
        if spec.csp_wrap {
            graph.wrap_csp(0.5)
        } else {
            Ok(graph)
        }
    }

    fn build_v2(spec: &BlockSpec, in_channels: usize) -> Result<BlockGraph> {
        let n = spec.depth;
        let g = spec.growth;
        let divs = divisors(n)?;
        // Outgoing slots of node k: divisors of gcd(n, k); node 0 divides
        // everything, so it owns one slot per divisor of n.
        let slots = |k: usize| -> Vec<usize> {
            if k == 0 {
                divs.clone()
            } else {
                divs.iter().copied().filter(|f| k % f == 0).collect()
            }
        };
        let mut nodes = Vec::with_capacity(n + 1);
        // Entry conv maps the incoming channels onto the share grid.
        let entry_slots = slots(0);
        nodes.push(LayerNode {
            index: 0,
            in_sources: Vec::new(),
            out_targets: Vec::new(),
            c_in: in_channels,
            c_out: g * entry_slots.len(),
            output_routed_shares: 0,
            total_shares: entry_slots.len(),
        });
        for k in 1..=n {
            let my_slots = slots(k);
            // Incoming share from k−f, taken from that node's slot f.
            let mut in_sources = Vec::with_capacity(my_slots.len());
            for &f in &my_slots {
                let src = k - f;
                let src_slots = slots(src);
                let pos = src_slots
                    .iter()
                    .position(|&s| s == f)
                    .expect("f divides gcd(n, src) by construction");
                in_sources.push(InputShare {
                    source: src,
                    chan_start: pos * g,
                    chan_len: g,
                });
            }
            nodes.push(LayerNode {
                index: k,
                in_sources,
                out_targets: Vec::new(),
                c_in: g * my_slots.len(),
                c_out: g * my_slots.len(),
                output_routed_shares: 0,
                total_shares: my_slots.len(),
            });
        }
        // Route every slot: to layer k+f when it exists, else to the output.
        let mut concat = Vec::new();
        for k in 0..=n {
            let my_slots = slots(k);
            for (pos, &f) in my_slots.iter().enumerate() {
                let target = k + f;
                if target <= n && target >= 1 {
                    nodes[k].out_targets.push((target, f));
                } else {
                    nodes[k].output_routed_shares += 1;
                    concat.push(OutputShare {
                        layer: k,
                        slot: f,
                        chan_start: pos * g,
                        chan_len: g,
                    });
                }
            }
        }
        concat.sort_by_key(|s| (s.layer, s.slot));
        let block_out = concat.iter().map(|s| s.chan_len).sum();
        Ok(BlockGraph {
            spec: spec.clone(),
            in_channels,
            bypass_channels: 0,
            nodes,
            block_out_channels: block_out,
            block_out_concat_order: concat,
        })
    }

    fn build_v1(spec: &BlockSpec, in_channels: usize) -> Result<BlockGraph> {
        let n = spec.depth;
        let g = spec.growth as f64;
        let m = spec.multiplier_or_default();
        // c_out(k) = g * m^z rounded down to even, z = trailing zeros of k.
        let width = |k: usize| -> usize {
            let z = k.trailing_zeros();
            round_down_even(g * m.powi(z as i32))
        };
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(LayerNode {
            index: 0,
            in_sources: Vec::new(),
            out_targets: Vec::new(),
            c_in: in_channels,
            c_out: in_channels,
            output_routed_shares: 0,
            total_shares: 0,
        });
        for k in 1..=n {
            // Sources k−2^i for every 2^i dividing k, nearest first; each
            // edge reads the source's full output.
            let mut in_sources = Vec::new();
            let mut step = 1usize;
            while k % step == 0 {
                let src = k - step;
                let c = if src == 0 { in_channels } else { width(src) };
                in_sources.push(InputShare { source: src, chan_start: 0, chan_len: c });
                match step.checked_mul(2) {
                    Some(s) if s <= k => step = s,
                    _ => break,
                }
            }
            let c_in = in_sources.iter().map(|s| s.chan_len).sum();
            nodes.push(LayerNode {
                index: k,
                in_sources,
                out_targets: Vec::new(),
                c_in,
                c_out: width(k),
                output_routed_shares: 0,
                total_shares: 0,
            });
        }
        // Invert edges into out_targets (slot key = step).
        for k in 1..=n {
            let edges: Vec<(usize, usize)> = nodes[k]
                .in_sources
                .iter()
                .map(|s| (s.source, k - s.source))
                .collect();
            for (src, step) in edges {
                nodes[src].out_targets.push((k, step));
                nodes[src].total_shares += 1;
            }
        }
        // Output concatenates odd layers and the last layer.
        let mut concat = Vec::new();
        for k in 1..=n {
            if k % 2 == 1 || k == n {
                nodes[k].output_routed_shares = 1;
                nodes[k].total_shares += 1;
                concat.push(OutputShare {
                    layer: k,
                    slot: 0,
                    chan_start: 0,
                    chan_len: nodes[k].c_out,
                });
            }
        }
        let block_out = concat.iter().map(|s| s.chan_len).sum();
        Ok(BlockGraph {
            spec: spec.clone(),
            in_channels,
            bypass_channels: 0,
            nodes,
            block_out_channels: block_out,
            block_out_concat_order: concat,
        })
    }

    /// Splits the block input so `ratio` of it bypasses the block and is
    /// concatenated after the block output. The block side is rebuilt on the
    /// remaining channels (remainder goes to the block path).
    pub fn wrap_csp(&self, ratio: f64) -> Result<BlockGraph> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!("csp ratio must lie in (0,1), got {ratio}")));
        }
        if self.bypass_channels > 0 {
            return Err(Error::invalid("block is already csp-wrapped"));
        }
        let bypass = (self.in_channels as f64 * ratio).floor() as usize;
        let block_part = self.in_channels - bypass;
        if bypass == 0 || block_part == 0 {
            return Err(Error::invalid(format!(
                "cannot split {} channels at ratio {ratio}",
                self.in_channels
            )));
        }
        let mut inner_spec = self.spec.clone();
        inner_spec.csp_wrap = false;
        let mut wrapped = BlockGraph::build(&inner_spec, block_part)?;
        wrapped.spec = self.spec.clone();
        wrapped.in_channels = self.in_channels;
        wrapped.bypass_channels = bypass;
        wrapped.block_out_channels += bypass;
        Ok(wrapped)
    }

    /// Conv layers in this block, entry conv included.
    pub fn conv_count(&self) -> usize {
        let entry = match self.spec.version {
            BlockVersion::V2 => 1,
            BlockVersion::V1 => 0,
        };
        entry + self.spec.depth
    }

    /// Source node indices of conv layer k.
    pub fn sources(&self, k: usize) -> Vec<usize> {
        self.nodes[k].in_sources.iter().map(|s| s.source).collect()
    }
}
