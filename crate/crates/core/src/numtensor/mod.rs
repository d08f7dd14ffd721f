//! Dense `f64` arrays and the handful of kernels the fusion operators need.

mod conv;
mod ops;
mod rng;
mod tensor;

pub use conv::{circular_convolve, circular_correlate, ConvMode};
pub use ops::{hadamard, matvec, outer, tanh_map, vecmat};
pub use rng::Rng;
pub use tensor::Tensor;
