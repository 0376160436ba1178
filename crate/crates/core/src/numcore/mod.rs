//! Dense tensors, the differentiation tape, Adam and finite differences.

pub mod adam;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error};
pub use ops::softmax;
pub use params::{ParamId, ParamSet};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;
