//! Deterministic tensor operations.
//!
//! Every op is a pure function of its inputs. Accumulations run in f64 in a
//! fixed ascending index order per output element, so results are
//! bit-identical regardless of how many worker threads execute the outer
//! loops.

mod act;
mod attention;
mod conv;
mod linear;
mod pool;
mod resize;
mod se;

pub use act::{gelu, relu, sigmoid, sigmoid_scalar, softmax_rows, tanh_unit};
pub use attention::{lawin_attention, LawinParams};
pub use conv::{batch_norm, conv2d, conv_out_dim};
pub use linear::{linear, matmul};
pub use pool::{adaptive_avg_pool, avg_pool, global_avg_pool, max_pool_2x2};
pub use resize::bilinear_resize;
pub use se::{se_gate, se_reduced_width, SeParams};
