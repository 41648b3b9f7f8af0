//! Image/mask I/O, geometric preprocessing, fold splits and weight files.

pub mod container;
pub mod folds;
pub mod geometry;
pub mod netpbm;

pub use container::{crc32, load_weights, save_weights};
pub use folds::{split_folds, FoldAssignment};
pub use geometry::{invert_mask, pad_resize, Geometry, Sample};
pub use netpbm::{read_image, read_mask, write_image, write_mask};
