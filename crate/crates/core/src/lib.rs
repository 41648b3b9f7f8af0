//! HarDNetV2 block-graph compiler, MACs/CIO cost model, deterministic
//! inference engine for the HarDNet-DFUS segmentation network, composite
//! segmentation loss with gradient verification, post-processing, and
//! dataset plumbing.

pub mod dataio;
pub mod error;
pub mod graph;
pub mod loss;
pub mod net;
pub mod ops;
pub mod pipeline;
pub mod postproc;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::Tensor;
