//! Structural layer plan of a network.
//!
//! The plan enumerates every parameterized layer in a fixed order together
//! with its weight tensors and its compute/traffic cost at a given input
//! shape. Weight initialization, weight-store validation and the cost model
//! all walk this one enumeration, so parameter names and counts cannot drift
//! apart.

use crate::error::{Error, Result};
use crate::graph::block::{BlockGraph, BlockVersion};
use crate::graph::netspec::NetSpec;
use crate::ops::se_reduced_width;

/// How a weight tensor is created by seeded initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// Uniform in ±sqrt(1/fan_in).
    FanInUniform { fan_in: usize },
    Zeros,
    Ones,
}

/// One named parameter tensor.
#[derive(Debug, Clone)]
pub struct WeightDef {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: InitKind,
}

impl WeightDef {
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }
}

/// One plan row: a parameterized layer (or the parameterless attention
/// product, which still carries compute cost).
#[derive(Debug, Clone)]
pub struct PlanLayer {
    pub name: String,
    pub weights: Vec<WeightDef>,
    /// Multiply-accumulate count at the planned input shape.
    pub macs: u64,
    /// Input plus output tensor elements (conv-I/O traffic proxy).
    pub cio: u64,
    pub params: u64,
}

/// Fully resolved plan for a network at one input shape.
#[derive(Debug, Clone)]
pub struct Plan {
    pub layers: Vec<PlanLayer>,
    /// Channels and spatial dims of each stage output (after transition).
    pub stage_outputs: Vec<(usize, usize, usize)>,
    /// Spatial size at which decoder features are fused.
    pub fused_hw: (usize, usize),
    /// The block graphs, one per stage, as compiled for this net.
    pub blocks: Vec<BlockGraph>,
}

pub(crate) fn pad_to_multiple(x: usize, p: usize) -> usize {
    x.div_ceil(p) * p
}

struct PlanBuilder {
    layers: Vec<PlanLayer>,
    batch: u64,
}

impl PlanBuilder {
    fn conv(
        &mut self,
        name: String,
        c_in: usize,
        c_out: usize,
        k: usize,
        bn: bool,
        hw_in: (usize, usize),
        hw_out: (usize, usize),
    ) {
        let mut weights = vec![
            WeightDef {
                name: format!("{name}.w"),
                shape: vec![c_out, c_in, k, k],
                init: InitKind::FanInUniform { fan_in: c_in * k * k },
            },
            WeightDef { name: format!("{name}.b"), shape: vec![c_out], init: InitKind::Zeros },
        ];
        if bn {
            weights.push(WeightDef {
                name: format!("{name}.bn.scale"),
                shape: vec![c_out],
                init: InitKind::Ones,
            });
            weights.push(WeightDef {
                name: format!("{name}.bn.shift"),
                shape: vec![c_out],
                init: InitKind::Zeros,
            });
        }
        let macs = self.batch
            * (k * k * c_in * c_out) as u64
            * (hw_out.0 * hw_out.1) as u64;
        let cio = self.batch
            * ((c_in * hw_in.0 * hw_in.1) as u64 + (c_out * hw_out.0 * hw_out.1) as u64);
        self.push(name, weights, macs, cio);
    }

    /// Linear layer over `tokens` rows; weight stored (in, out).
    fn linear(&mut self, name: String, c_in: usize, c_out: usize, tokens: usize) {
        let weights = vec![
            WeightDef {
                name: format!("{name}.w"),
                shape: vec![c_in, c_out],
                init: InitKind::FanInUniform { fan_in: c_in },
            },
            WeightDef { name: format!("{name}.b"), shape: vec![c_out], init: InitKind::Zeros },
        ];
        let macs = self.batch * (tokens * c_in * c_out) as u64;
        let cio = self.batch * (tokens * (c_in + c_out)) as u64;
        self.push(name, weights, macs, cio);
    }

    fn push(&mut self, name: String, weights: Vec<WeightDef>, macs: u64, cio: u64) {
        let params = weights.iter().map(|w| w.numel() as u64).sum();
        self.layers.push(PlanLayer { name, weights, macs, cio, params });
    }
}

impl Plan {
    /// Builds the plan of `net` for an (N, C, H, W) input.
    pub fn build(net: &NetSpec, input: (usize, usize, usize, usize)) -> Result<Plan> {
        net.validate()?;
        let (n, c_img, mut h, mut w) = input;
        if n < 1 || h < 1 || w < 1 {
            return Err(Error::invalid(format!("degenerate input shape {input:?}")));
        }
        if c_img != net.input_channels {
            return Err(Error::invalid(format!(
                "input has {c_img} channels, net expects {}",
                net.input_channels
            )));
        }
        let mut b = PlanBuilder { layers: Vec::new(), batch: n as u64 };
        let mut c = c_img;

        for (i, conv) in net.stem.iter().enumerate() {
            let oh = crate::ops::conv_out_dim(h, conv.kernel, conv.stride, conv.padding)
                .map_err(|_| Error::invalid(format!("stem conv {i}: spatial underflow")))?;
            let ow = crate::ops::conv_out_dim(w, conv.kernel, conv.stride, conv.padding)
                .map_err(|_| Error::invalid(format!("stem conv {i}: spatial underflow")))?;
            if oh == 0 || ow == 0 {
                return Err(Error::invalid(format!("stem conv {i}: spatial underflow")));
            }
            b.conv(
                format!("stem.{i}"),
                c,
                conv.out_channels,
                conv.kernel,
                true,
                (h, w),
                (oh, ow),
            );
            c = conv.out_channels;
            (h, w) = (oh, ow);
        }

        let mut blocks = Vec::new();
        let mut stage_outputs = Vec::new();
        for (i, stage) in net.stages.iter().enumerate() {
            let graph = BlockGraph::build(&stage.block, c)?;
            if stage.block.version == BlockVersion::V2 {
                let entry = &graph.nodes[0];
                b.conv(
                    format!("stage{i}.entry"),
                    entry.c_in,
                    entry.c_out,
                    1,
                    true,
                    (h, w),
                    (h, w),
                );
            }
            for node in graph.nodes.iter().skip(1) {
                b.conv(
                    format!("stage{i}.conv{}", node.index),
                    node.c_in,
                    node.c_out,
                    3,
                    true,
                    (h, w),
                    (h, w),
                );
            }
            let block_out = graph.block_out_channels;
            let compressed = ((block_out as f64 * stage.transition.compress_ratio).floor()
                as usize)
                .max(1);
            b.conv(
                format!("stage{i}.trans.compress"),
                block_out,
                compressed,
                1,
                true,
                (h, w),
                (h, w),
            );
            let reduced = se_reduced_width(compressed, stage.transition.se_reduction);
            // SE gate runs on the pooled channel vector once per image.
            b.push(
                format!("stage{i}.trans.se.fc1"),
                vec![
                    WeightDef {
                        name: format!("stage{i}.trans.se.fc1.w"),
                        shape: vec![reduced, compressed],
                        init: InitKind::FanInUniform { fan_in: compressed },
                    },
                    WeightDef {
                        name: format!("stage{i}.trans.se.fc1.b"),
                        shape: vec![reduced],
                        init: InitKind::Zeros,
                    },
                ],
                n as u64 * (reduced * compressed) as u64,
                n as u64 * (compressed + reduced) as u64,
            );
            b.push(
                format!("stage{i}.trans.se.fc2"),
                vec![
                    WeightDef {
                        name: format!("stage{i}.trans.se.fc2.w"),
                        shape: vec![compressed, reduced],
                        init: InitKind::FanInUniform { fan_in: reduced },
                    },
                    WeightDef {
                        name: format!("stage{i}.trans.se.fc2.b"),
                        shape: vec![compressed],
                        init: InitKind::Zeros,
                    },
                ],
                n as u64 * (compressed * reduced) as u64,
                n as u64 * (reduced + compressed) as u64,
            );
            c = compressed;
            if stage.transition.downsample {
                (h, w) = (h / 2, w / 2);
                if h == 0 || w == 0 {
                    return Err(Error::invalid(format!(
                        "stage {i}: spatial underflow after downsampling"
                    )));
                }
            }
            blocks.push(graph);
            stage_outputs.push((c, h, w));
        }

        // Decoder: project taps, fuse at the largest tap resolution.
        let d = &net.decoder;
        let taps: Vec<(usize, usize, usize)> =
            d.taps.iter().map(|&t| stage_outputs[t]).collect();
        let (fh, fw) = taps
            .iter()
            .map(|&(_, th, tw)| (th, tw))
            .max_by_key(|&(th, tw)| th * tw)
            .expect("taps validated non-empty");
        for (idx, &(tc, th, tw)) in taps.iter().enumerate() {
            b.linear(format!("decoder.proj{idx}"), tc, d.embed_dim, th * tw);
        }
        b.conv(
            "decoder.fuse1".into(),
            taps.len() * d.embed_dim,
            d.embed_dim,
            1,
            false,
            (fh, fw),
            (fh, fw),
        );

        // Attention runs on the fused map padded to a multiple of the patch.
        let (ah, aw) = (pad_to_multiple(fh, d.patch), pad_to_multiple(fw, d.patch));
        let tokens = ah * aw;
        let toks_per_patch = d.patch * d.patch;
        let patches = tokens / toks_per_patch;
        for &r in &d.window_ratios {
            let name = format!("decoder.lawin{r}");
            b.push(
                format!("{name}.mixer"),
                vec![
                    WeightDef {
                        name: format!("{name}.mixer.w"),
                        shape: vec![toks_per_patch, toks_per_patch],
                        init: InitKind::FanInUniform { fan_in: toks_per_patch },
                    },
                    WeightDef {
                        name: format!("{name}.mixer.b"),
                        shape: vec![toks_per_patch],
                        init: InitKind::Zeros,
                    },
                ],
                n as u64 * (tokens * toks_per_patch * d.embed_dim) as u64,
                n as u64 * (2 * tokens * d.embed_dim) as u64,
            );
            for proj in ["q", "k", "v", "o"] {
                b.linear(format!("{name}.{proj}"), d.embed_dim, d.embed_dim, tokens);
            }
            // Parameterless QK^T and AV products: each patch multiplies
            // (P², d) by (d, P²) and back, all heads together.
            b.push(
                format!("{name}.attn"),
                Vec::new(),
                n as u64 * (2 * tokens * toks_per_patch * d.embed_dim) as u64,
                n as u64
                    * (4 * tokens * d.embed_dim + 2 * patches * toks_per_patch * toks_per_patch)
                        as u64,
            );
        }
        for &bins in &d.pool_sizes {
            b.linear(format!("decoder.pool{bins}"), d.embed_dim, d.embed_dim, bins * bins);
        }
        let fuse2_in = (1 + d.window_ratios.len() + d.pool_sizes.len()) * d.embed_dim;
        b.conv("decoder.fuse2".into(), fuse2_in, d.embed_dim, 1, false, (fh, fw), (fh, fw));

        b.conv("head.main".into(), d.embed_dim, 1, 1, false, (fh, fw), (fh, fw));
        if net.heads.deep1 {
            b.conv("head.d1".into(), d.embed_dim, 1, 1, false, (fh, fw), (fh, fw));
        }
        if net.heads.deep2 {
            b.conv("head.d2".into(), d.embed_dim, 1, 1, false, (fh, fw), (fh, fw));
        }
        if net.heads.boundary {
            b.conv("head.boundary".into(), d.embed_dim, 1, 1, false, (fh, fw), (fh, fw));
        }

        Ok(Plan { layers: b.layers, stage_outputs, fused_hw: (fh, fw), blocks })
    }

    /// Total parameter count.
    pub fn param_count(&self) -> u64 {
        self.layers.iter().map(|l| l.params).sum()
    }

    /// All weight definitions in enumeration order.
    pub fn weight_defs(&self) -> impl Iterator<Item = &WeightDef> {
        self.layers.iter().flat_map(|l| l.weights.iter())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::netspec::NetSpec;

    fn tiny_net() -> NetSpec {
        NetSpec::from_json(
            r#"{
            "name": "tiny",
            "input_channels": 3,
            "stem": [{"out_channels": 8, "kernel": 3, "stride": 2, "padding": 1}],
            "stages": [
                {"block": {"version": "v2", "depth": 3, "growth": 4},
                 "transition": {"compress_ratio": 0.75, "se_reduction": 4, "downsample": true}}
            ],
            "decoder": {"embed_dim": 16, "patch": 4, "window_ratios": [2], "taps": [0], "heads": 2},
            "heads": {"main": true, "deep1": true, "deep2": true, "boundary": true}
        }"#,
        )
        .unwrap()
    }

    #[test]
    fn plan_names_are_unique() {
        let plan = Plan::build(&tiny_net(), (1, 3, 64, 64)).unwrap();
        let mut names: Vec<&str> =
            plan.weight_defs().map(|wd| wd.name.as_str()).collect();
        let before = names.len();
        names.sort_unstable();
        names.dedup();
        assert_eq!(before, names.len());
    }

    #[test]
    fn plan_rejects_spatial_underflow() {
        let err = Plan::build(&tiny_net(), (1, 3, 2, 2)).unwrap_err();
        assert!(err.to_string().contains("underflow"), "{err}");
    }

    #[test]
    fn param_shapes_are_spatial_independent() {
        let a = Plan::build(&tiny_net(), (1, 3, 64, 64)).unwrap();
        let b = Plan::build(&tiny_net(), (1, 3, 128, 128)).unwrap();
        let av: Vec<_> = a.weight_defs().map(|w| (&w.name, &w.shape)).collect();
        let bv: Vec<_> = b.weight_defs().map(|w| (&w.name, &w.shape)).collect();
        assert_eq!(av, bv);
    }
}
