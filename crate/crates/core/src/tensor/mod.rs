//! Dense tensors with reverse-mode differentiation, the Adam optimizer and a
//! checkpoint container.

mod adam;
pub(crate) mod array;
pub mod gradcheck;
mod graph;
pub mod nn;
mod params;
mod scalar;

pub use adam::Adam;
pub use array::{numel, Tensor};
pub use graph::{Graph, Var};
pub use params::{container_paths, read_tensors, write_tensors, Bound, ParamSet};
pub use scalar::Scalar;
