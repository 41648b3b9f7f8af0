pub mod analyze;
pub mod eval;
pub mod folds;
pub mod gradcheck;
pub mod infer;
