//! Named parameter storage and seeded initialization.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::graph::plan::{InitKind, Plan};
use crate::graph::NetSpec;
use crate::tensor::Tensor;

/// Where a weight store came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    File(std::path::PathBuf),
    SeededInit,
}

/// Map of parameter name to tensor.
#[derive(Debug, Clone)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
    pub provenance: Provenance,
    /// Set when the store was produced by seeded initialization.
    pub seed: Option<u64>,
}

impl WeightStore {
    pub fn empty(provenance: Provenance) -> Self {
        WeightStore { tensors: BTreeMap::new(), provenance, seed: None }
    }

    /// Inserts a tensor; duplicate names are an error.
    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        if self.tensors.contains_key(name) {
            return Err(Error::invalid(format!("duplicate weight name {name}")));
        }
        self.tensors.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::MissingWeights(vec![name.to_string()]))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Name-sorted iteration.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn total_params(&self) -> u64 {
        self.tensors.values().map(|t| t.numel() as u64).sum()
    }

    /// Checks that every parameter the plan demands resolves, reporting all
    /// missing names at once.
    pub fn validate_for(&self, plan: &Plan) -> Result<()> {
        let missing: Vec<String> = plan
            .weight_defs()
            .filter(|wd| !self.tensors.contains_key(&wd.name))
            .map(|wd| wd.name.clone())
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingWeights(missing))
        }
    }
}

/// u64 → f64 in [0, 1): the top 53 bits scaled by 2^-53.
fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// A spatial size large enough that the structural walk cannot underflow;
/// weight shapes do not depend on it.
fn nominal_side(net: &NetSpec) -> usize {
    64usize << (net.stem.len() + net.stages.len()).min(18)
}

/// Creates every parameter of `net` from a ChaCha8 stream seeded with
/// `seed`. Weights draw uniformly from ±sqrt(1/fan_in) in plan enumeration
/// order (row-major within each tensor); biases are zero and folded
/// batch-norm starts as the identity, consuming no draws.
pub fn init_weights(net: &NetSpec, seed: u64) -> Result<WeightStore> {
    let side = nominal_side(net);
    let plan = Plan::build(net, (1, net.input_channels, side, side))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = WeightStore::empty(Provenance::SeededInit);
    store.seed = Some(seed);
    for def in plan.weight_defs() {
        let numel = def.numel();
        let tensor = match def.init {
            InitKind::FanInUniform { fan_in } => {
                let limit = (1.0 / fan_in as f64).sqrt();
                let mut data = Vec::with_capacity(numel);
                for _ in 0..numel {
                    let u = unit_f64(rng.next_u64());
                    data.push(((2.0 * u - 1.0) * limit) as f32);
                }
                Tensor::new(def.shape.clone(), data)?
            }
            InitKind::Zeros => Tensor::zeros(def.shape.clone()),
            InitKind::Ones => Tensor::full(def.shape.clone(), 1.0),
        };
        store.insert(&def.name, tensor)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NetSpec;

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
    fn same_seed_is_bitwise_identical() {
        let net = tiny_net();
        let a = init_weights(&net, 7).unwrap();
        let b = init_weights(&net, 7).unwrap();
        for ((na, ta), (nb, tb)) in a.iter().zip(b.iter()) {
            assert_eq!(na, nb);
            assert_eq!(ta.data(), tb.data());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let net = tiny_net();
        let a = init_weights(&net, 0).unwrap();
        let b = init_weights(&net, 1).unwrap();
        let any_diff = a
            .iter()
            .zip(b.iter())
            .any(|((_, ta), (_, tb))| ta.data() != tb.data());
        assert!(any_diff);
    }

    #[test]
    fn param_count_matches_plan() {
        let net = tiny_net();
        let store = init_weights(&net, 3).unwrap();
        let plan = Plan::build(&net, (1, 3, 64, 64)).unwrap();
        assert_eq!(store.total_params(), plan.param_count());
    }

    #[test]
    fn missing_weights_are_listed_by_name() {
        let net = tiny_net();
        let plan = Plan::build(&net, (1, 3, 64, 64)).unwrap();
        let mut store = init_weights(&net, 0).unwrap();
        store.tensors.remove("stage0.conv2.w");
        store.tensors.remove("head.main.b");
        let err = store.validate_for(&plan).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("stage0.conv2.w") && msg.contains("head.main.b"), "{msg}");
    }

    #[test]
    fn weights_respect_fan_in_limit() {
        let net = tiny_net();
        let store = init_weights(&net, 11).unwrap();
        let w = store.get("stage0.conv1.w").unwrap();
        let fan_in = w.shape()[1] * w.shape()[2] * w.shape()[3];
        let limit = (1.0 / fan_in as f32).sqrt();
        assert!(w.data().iter().all(|v| v.abs() <= limit));
        assert!(w.data().iter().any(|v| v.abs() > 0.1 * limit));
    }
}
