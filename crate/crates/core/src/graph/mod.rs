//! Block-specification compiler and cost model.

pub mod block;
pub mod cost;
pub mod netspec;
pub mod plan;

pub use block::{divisors, BlockGraph, BlockSpec, BlockVersion, InputShare, LayerNode, OutputShare};
pub use cost::{analyze, block_cost, compare_blocks, BlockComparison, CostReport, LayerCost};
pub use netspec::{ConvDesc, DecoderSpec, HeadsSpec, NetSpec, StageSpec, TransitionSpec};
pub use plan::{InitKind, Plan, PlanLayer, WeightDef};
