//! Network execution: parameter stores and the forward pass.

pub mod forward;
pub mod weights;

pub use forward::{forward, ForwardOutputs};
pub use weights::{init_weights, Provenance, WeightStore};
