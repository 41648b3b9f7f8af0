//! Declarative network description and its JSON file format.
//!
//! Top-level keys are `name`, `input_channels`, `stem`, `stages`, `decoder`
//! and `heads`; unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::block::BlockSpec;

/// One stem convolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvDesc {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

/// Block-output transition: 1×1 compression conv, SE gate, optional 2×2
/// max-pool downsampling.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub compress_ratio: f64,
    pub se_reduction: usize,
    pub downsample: bool,
}

/// One encoder stage: a dense block followed by its transition.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub block: BlockSpec,
    pub transition: TransitionSpec,
}

fn default_pool_sizes() -> Vec<usize> {
    vec![1]
}

/// Decoder configuration (large-window attention over fused pyramid taps).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderSpec {
    pub embed_dim: usize,
    pub patch: usize,
    pub window_ratios: Vec<usize>,
    /// Pyramid-pool branch bin sizes; 1 = global average branch.
    #[serde(default = "default_pool_sizes")]
    pub pool_sizes: Vec<usize>,
    /// Stage indices whose outputs feed the decoder.
    pub taps: Vec<usize>,
    pub heads: usize,
}

/// Which prediction heads the network carries.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadsSpec {
    pub main: bool,
    #[serde(default)]
    pub deep1: bool,
    #[serde(default)]
    pub deep2: bool,
    #[serde(default)]
    pub boundary: bool,
}

/// Whole-network description: stem, staged encoder, decoder, heads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub name: String,
    pub input_channels: usize,
    pub stem: Vec<ConvDesc>,
    pub stages: Vec<StageSpec>,
    pub decoder: DecoderSpec,
    pub heads: HeadsSpec,
}

impl NetSpec {
    /// Parses and validates a netspec JSON document.
    pub fn from_json(text: &str) -> Result<NetSpec> {
        let spec: NetSpec =
            serde_json::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &std::path::Path) -> Result<NetSpec> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Serializes with all defaults materialized.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("netspec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels < 1 {
            return Err(Error::ConfigInvalid("input_channels must be >= 1".into()));
        }
        for (i, conv) in self.stem.iter().enumerate() {
            if conv.out_channels < 1 || conv.kernel < 1 || conv.stride < 1 {
                return Err(Error::ConfigInvalid(format!(
                    "stem conv {i} has a zero dimension"
                )));
            }
        }
        if self.stages.is_empty() {
            return Err(Error::ConfigInvalid("stages must not be empty".into()));
        }
        for (i, stage) in self.stages.iter().enumerate() {
            stage
                .block
                .validate()
                .map_err(|e| Error::ConfigInvalid(format!("stage {i}: {e}")))?;
            let t = &stage.transition;
            if !(t.compress_ratio > 0.0 && t.compress_ratio <= 1.0) {
                return Err(Error::ConfigInvalid(format!(
                    "stage {i}: compress_ratio must lie in (0, 1], got {}",
                    t.compress_ratio
                )));
            }
            if t.se_reduction < 1 {
                return Err(Error::ConfigInvalid(format!(
                    "stage {i}: se_reduction must be >= 1"
                )));
            }
        }
        let d = &self.decoder;
        if d.embed_dim < 1 || d.patch < 1 || d.heads < 1 {
            return Err(Error::ConfigInvalid("decoder dims must be >= 1".into()));
        }
        if d.embed_dim % d.heads != 0 {
            return Err(Error::ConfigInvalid(format!(
                "embed_dim {} not divisible by heads {}",
                d.embed_dim, d.heads
            )));
        }
        if d.taps.is_empty() {
            return Err(Error::ConfigInvalid("decoder needs at least one tap".into()));
        }
        for &tap in &d.taps {
            if tap >= self.stages.len() {
                return Err(Error::ConfigInvalid(format!(
                    "decoder tap {tap} references a missing stage (have {})",
                    self.stages.len()
                )));
            }
        }
        if d.window_ratios.iter().any(|&r| r < 1) {
            return Err(Error::ConfigInvalid("window ratios must be >= 1".into()));
        }
        if d.pool_sizes.iter().any(|&p| p < 1) {
            return Err(Error::ConfigInvalid("pool sizes must be >= 1".into()));
        }
        if !self.heads.main {
            return Err(Error::ConfigInvalid("the main head is mandatory".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
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
        }"#
        .to_string()
    }

    #[test]
    fn minimal_spec_parses_with_defaults() {
        let spec = NetSpec::from_json(&minimal_json()).unwrap();
        assert_eq!(spec.decoder.pool_sizes, vec![1]);
        assert!(!spec.stages[0].block.csp_wrap);
        // Defaults are echoed on re-serialization.
        let echoed = spec.to_json_pretty();
        assert!(echoed.contains("pool_sizes"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = minimal_json().replace("\"name\": \"tiny\"", "\"name\": \"tiny\", \"zzz\": 1");
        let err = NetSpec::from_json(&bad).unwrap_err();
        assert!(matches!(err, Error::ConfigParse(_)), "{err}");
        assert!(err.to_string().contains("zzz"));
    }

    #[test]
    fn empty_stages_is_semantic_error() {
        let bad = regex_lite_replace(&minimal_json());
        let err = NetSpec::from_json(&bad).unwrap_err();
        assert!(matches!(err, Error::ConfigInvalid(_)), "{err}");
    }

    fn regex_lite_replace(json: &str) -> String {
        // Drop the stage list contents.
        let start = json.find("\"stages\": [").unwrap() + "\"stages\": [".len();
        let end = json[start..].find("],").unwrap() + start;
        format!("{}{}", &json[..start], &json[end..])
    }

    #[test]
    fn bad_tap_reference_names_the_tap() {
        let bad = minimal_json().replace("\"taps\": [0]", "\"taps\": [99]");
        let err = NetSpec::from_json(&bad).unwrap_err();
        assert!(err.to_string().contains("99"), "{err}");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = NetSpec::from_json("{ \"name\": ").unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }
}
