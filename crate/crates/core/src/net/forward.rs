//! Forward execution of a network description.

use crate::error::{Error, Result};
use crate::graph::block::{BlockGraph, BlockVersion};
use crate::graph::netspec::NetSpec;
use crate::net::weights::WeightStore;
use crate::ops;
use crate::ops::{LawinParams, SeParams};
use crate::tensor::Tensor;

/// Logit maps and the encoder feature pyramid of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutputs {
    /// Main segmentation logits, N×1×H×W at input resolution.
    pub main: Tensor,
    /// Deep-supervision logits off the pre-attention fused feature.
    pub deep1: Option<Tensor>,
    /// Deep-supervision logits off the post-attention fused feature.
    pub deep2: Option<Tensor>,
    /// Boundary logits, parallel to the main head.
    pub boundary: Option<Tensor>,
    /// Per-stage encoder outputs (after each transition).
    pub pyramid: Vec<Tensor>,
}

#[derive(Clone, Copy)]
enum Act {
    None,
    Relu,
    Gelu,
}

struct Exec<'a> {
    store: &'a WeightStore,
}

impl<'a> Exec<'a> {
    fn conv(
        &self,
        name: &str,
        x: &Tensor,
        stride: usize,
        pad: usize,
        bn: bool,
        act: Act,
    ) -> Result<Tensor> {
        let w = self.store.get(&format!("{name}.w"))?;
        let b = self.store.get(&format!("{name}.b"))?;
        let mut y = ops::conv2d(x, w, Some(b.data()), stride, pad, 1)?;
        if bn {
            let scale = self.store.get(&format!("{name}.bn.scale"))?;
            let shift = self.store.get(&format!("{name}.bn.shift"))?;
            y = ops::batch_norm(&y, scale.data(), shift.data())?;
        }
        Ok(match act {
            Act::None => y,
            Act::Relu => ops::relu(&y),
            Act::Gelu => ops::gelu(&y),
        })
    }

    /// Applies a stored (in, out) linear layer to token rows.
    fn linear(&self, name: &str, tokens: &Tensor) -> Result<Tensor> {
        let w = self.store.get(&format!("{name}.w"))?;
        let b = self.store.get(&format!("{name}.b"))?;
        ops::linear(tokens, w, Some(b.data()))
    }

    fn lawin_params(&self, name: &str) -> Result<LawinParams> {
        let vecf = |suffix: &str| -> Result<Vec<f32>> {
            Ok(self.store.get(&format!("{name}.{suffix}"))?.data().to_vec())
        };
        Ok(LawinParams {
            mixer_w: self.store.get(&format!("{name}.mixer.w"))?.clone(),
            mixer_b: vecf("mixer.b")?,
            wq: self.store.get(&format!("{name}.q.w"))?.clone(),
            wk: self.store.get(&format!("{name}.k.w"))?.clone(),
            wv: self.store.get(&format!("{name}.v.w"))?.clone(),
            wo: self.store.get(&format!("{name}.o.w"))?.clone(),
            bq: vecf("q.b")?,
            bk: vecf("k.b")?,
            bv: vecf("v.b")?,
            bo: vecf("o.b")?,
        })
    }
}

/// (1, C, H, W) → (H·W, C) token matrix.
fn nchw_to_tokens(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = x.dims4()?;
    if n != 1 {
        return Err(Error::shape("token reshape expects a single image"));
    }
    let plane = h * w;
    let mut data = vec![0.0f32; plane * c];
    let xs = x.data();
    for ci in 0..c {
        let base = ci * plane;
        for p in 0..plane {
            data[p * c + ci] = xs[base + p];
        }
    }
    Tensor::new(vec![plane, c], data)
}

/// (H·W, C) token matrix → (1, C, H, W).
fn tokens_to_nchw(tokens: &Tensor, h: usize, w: usize) -> Result<Tensor> {
    let (rows, c) = tokens.dims2()?;
    if rows != h * w {
        return Err(Error::shape(format!("{rows} tokens cannot fill {h}x{w}")));
    }
    let mut data = vec![0.0f32; c * h * w];
    let ts = tokens.data();
    for ci in 0..c {
        let base = ci * h * w;
        for p in 0..h * w {
            data[base + p] = ts[p * c + ci];
        }
    }
    Tensor::new(vec![1, c, h, w], data)
}

/// Symmetric zero-pad of spatial dims up to (ah, aw); returns offsets.
fn pad_spatial(x: &Tensor, ah: usize, aw: usize) -> Result<(Tensor, usize, usize)> {
    let (n, c, h, w) = x.dims4()?;
    if (ah, aw) == (h, w) {
        return Ok((x.clone(), 0, 0));
    }
    let top = (ah - h) / 2;
    let left = (aw - w) / 2;
    let mut out = Tensor::zeros(vec![n, c, ah, aw]);
    let xs = x.data();
    let od = out.data_mut();
    for img in 0..n * c {
        let ibase = img * h * w;
        let obase = img * ah * aw;
        for row in 0..h {
            let src = ibase + row * w;
            let dst = obase + (row + top) * aw + left;
            od[dst..dst + w].copy_from_slice(&xs[src..src + w]);
        }
    }
    Ok((out, top, left))
}

fn crop_spatial(x: &Tensor, top: usize, left: usize, h: usize, w: usize) -> Result<Tensor> {
    let (n, c, ah, aw) = x.dims4()?;
    let mut out = Tensor::zeros(vec![n, c, h, w]);
    let xs = x.data();
    let od = out.data_mut();
    for img in 0..n * c {
        let ibase = img * ah * aw;
        let obase = img * h * w;
        for row in 0..h {
            let src = ibase + (row + top) * aw + left;
            od[obase + row * w..obase + (row + 1) * w].copy_from_slice(&xs[src..src + w]);
        }
    }
    Ok(out)
}

fn slice_image(x: &Tensor, ni: usize) -> Result<Tensor> {
    let (_, c, h, w) = x.dims4()?;
    let span = c * h * w;
    Tensor::new(vec![1, c, h, w], x.data()[ni * span..(ni + 1) * span].to_vec())
}

fn stack_images(parts: Vec<Tensor>) -> Result<Tensor> {
    let (_, c, h, w) = parts[0].dims4()?;
    let mut data = Vec::with_capacity(parts.len() * c * h * w);
    for p in &parts {
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![parts.len(), c, h, w], data)
}

/// Runs the full network on a square N×C×H×W image batch with H divisible
/// by 32, producing logit maps at input resolution.
pub fn forward(net: &NetSpec, store: &WeightStore, image: &Tensor) -> Result<ForwardOutputs> {
    let (n, c, h, w) = image.dims4().map_err(|_| {
        Error::shape(format!("forward expects NCHW input, got {:?}", image.shape()))
    })?;
    if c != net.input_channels {
        return Err(Error::shape(format!(
            "input has {c} channels, net expects {}",
            net.input_channels
        )));
    }
    if h != w {
        return Err(Error::invalid(format!("input must be square, got {h}x{w}")));
    }
    if h % 32 != 0 {
        return Err(Error::invalid(format!("input side {h} must be divisible by 32")));
    }
    let mut per_image = Vec::with_capacity(n);
    for ni in 0..n {
        per_image.push(forward_single(net, store, &slice_image(image, ni)?)?);
    }
    if n == 1 {
        return Ok(per_image.pop().expect("one image"));
    }
    let first = &per_image[0];
    let take = |f: fn(&ForwardOutputs) -> Option<&Tensor>| -> Result<Option<Tensor>> {
        if f(first).is_none() {
            return Ok(None);
        }
        let parts: Vec<Tensor> = per_image
            .iter()
            .map(|o| f(o).expect("head present on every image").clone())
            .collect();
        Ok(Some(stack_images(parts)?))
    };
    let main = stack_images(per_image.iter().map(|o| o.main.clone()).collect())?;
    let deep1 = take(|o| o.deep1.as_ref())?;
    let deep2 = take(|o| o.deep2.as_ref())?;
    let boundary = take(|o| o.boundary.as_ref())?;
    let mut pyramid = Vec::new();
    for level in 0..first.pyramid.len() {
        pyramid.push(stack_images(
            per_image.iter().map(|o| o.pyramid[level].clone()).collect(),
        )?);
    }
    Ok(ForwardOutputs { main, deep1, deep2, boundary, pyramid })
}

fn forward_single(net: &NetSpec, store: &WeightStore, image: &Tensor) -> Result<ForwardOutputs> {
    let exec = Exec { store };
    let (_, _, in_h, in_w) = image.dims4()?;
    let mut x = image.clone();

    for (i, conv) in net.stem.iter().enumerate() {
        x = exec.conv(
            &format!("stem.{i}"),
            &x,
            conv.stride,
            conv.padding,
            true,
            Act::Relu,
        )?;
    }

    let mut pyramid = Vec::with_capacity(net.stages.len());
    for (i, stage) in net.stages.iter().enumerate() {
        let c = x.shape()[1];
        let graph = BlockGraph::build(&stage.block, c)?;
        let (bypass, block_in) = if graph.bypass_channels > 0 {
            let b = graph.bypass_channels;
            (Some(x.slice_channels(0, b)?), x.slice_channels(b, c - b)?)
        } else {
            (None, x)
        };

        let mut node_out: Vec<Tensor> = Vec::with_capacity(graph.nodes.len());
        match stage.block.version {
            BlockVersion::V2 => {
                node_out.push(exec.conv(
                    &format!("stage{i}.entry"),
                    &block_in,
                    1,
                    0,
                    true,
                    Act::Relu,
                )?);
            }
            BlockVersion::V1 => node_out.push(block_in),
        }
        for node in graph.nodes.iter().skip(1) {
            let gathered: Vec<Tensor> = node
                .in_sources
                .iter()
                .map(|s| node_out[s.source].slice_channels(s.chan_start, s.chan_len))
                .collect::<Result<_>>()?;
            let refs: Vec<&Tensor> = gathered.iter().collect();
            let input = Tensor::concat_channels(&refs)?;
            node_out.push(exec.conv(
                &format!("stage{i}.conv{}", node.index),
                &input,
                1,
                1,
                true,
                Act::Relu,
            )?);
        }

        let mut parts: Vec<Tensor> = graph
            .block_out_concat_order
            .iter()
            .map(|s| node_out[s.layer].slice_channels(s.chan_start, s.chan_len))
            .collect::<Result<_>>()?;
        if let Some(b) = bypass {
            parts.push(b);
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        let block_out = Tensor::concat_channels(&refs)?;

        x = exec.conv(
            &format!("stage{i}.trans.compress"),
            &block_out,
            1,
            0,
            true,
            Act::Relu,
        )?;
        let se = SeParams {
            fc1_w: store.get(&format!("stage{i}.trans.se.fc1.w"))?.clone(),
            fc1_b: store.get(&format!("stage{i}.trans.se.fc1.b"))?.data().to_vec(),
            fc2_w: store.get(&format!("stage{i}.trans.se.fc2.w"))?.clone(),
            fc2_b: store.get(&format!("stage{i}.trans.se.fc2.b"))?.data().to_vec(),
        };
        x = ops::se_gate(&x, &se, stage.transition.se_reduction)?;
        if stage.transition.downsample {
            x = ops::max_pool_2x2(&x)?;
        }
        pyramid.push(x.clone());
    }

    // Decoder: per-scale projection to the embed dim, fusion at the largest
    // tap resolution.
    let d = &net.decoder;
    let taps: Vec<&Tensor> = d.taps.iter().map(|&t| &pyramid[t]).collect();
    let (fh, fw) = taps
        .iter()
        .map(|t| (t.shape()[2], t.shape()[3]))
        .max_by_key(|&(th, tw)| th * tw)
        .expect("taps validated non-empty");
    let mut projected = Vec::with_capacity(taps.len());
    for (idx, tap) in taps.iter().enumerate() {
        let (_, _, th, tw) = tap.dims4()?;
        let tokens = nchw_to_tokens(tap)?;
        let emb = exec.linear(&format!("decoder.proj{idx}"), &tokens)?;
        let map = tokens_to_nchw(&emb, th, tw)?;
        projected.push(ops::bilinear_resize(&map, fh, fw)?);
    }
    let refs: Vec<&Tensor> = projected.iter().collect();
    let fused = exec.conv("decoder.fuse1", &Tensor::concat_channels(&refs)?, 1, 0, false, Act::Gelu)?;

    // Large-window attention branches on the padded fused map.
    let ah = fh.div_ceil(d.patch) * d.patch;
    let aw = fw.div_ceil(d.patch) * d.patch;
    let (padded, top, left) = pad_spatial(&fused, ah, aw)?;
    let mut branches: Vec<Tensor> = vec![fused.clone()];
    for &r in &d.window_ratios {
        let params = exec.lawin_params(&format!("decoder.lawin{r}"))?;
        let att = ops::lawin_attention(&padded, &padded, d.patch, r, d.heads, &params)?;
        branches.push(crop_spatial(&att, top, left, fh, fw)?);
    }
    // Pyramid-pool branches: pooled context re-broadcast over the map.
    for &bins in &d.pool_sizes {
        let pooled = ops::adaptive_avg_pool(&fused, bins)?;
        let tokens = nchw_to_tokens(&pooled)?;
        let mixed = ops::gelu(&exec.linear(&format!("decoder.pool{bins}"), &tokens)?);
        let map = tokens_to_nchw(&mixed, bins, bins)?;
        branches.push(ops::bilinear_resize(&map, fh, fw)?);
    }
    let refs: Vec<&Tensor> = branches.iter().collect();
    let fused2 = exec.conv("decoder.fuse2", &Tensor::concat_channels(&refs)?, 1, 0, false, Act::Gelu)?;

    let head = |name: &str, feat: &Tensor| -> Result<Tensor> {
        let logits = exec.conv(name, feat, 1, 0, false, Act::None)?;
        ops::bilinear_resize(&logits, in_h, in_w)
    };
    let main = head("head.main", &fused2)?;
    let deep1 = if net.heads.deep1 { Some(head("head.d1", &fused)?) } else { None };
    let deep2 = if net.heads.deep2 { Some(head("head.d2", &fused2)?) } else { None };
    let boundary =
        if net.heads.boundary { Some(head("head.boundary", &fused2)?) } else { None };

    Ok(ForwardOutputs { main, deep1, deep2, boundary, pyramid })
}
