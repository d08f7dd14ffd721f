//! VQA head: modality projections, fusion, classifier.
//!
//! The classifier is one hidden affine layer followed by the answer layer.
//! When the fusion is the Tucker decomposition, the hidden layer doubles as
//! its output factor `W_o`, so it is not duplicated inside the fusion.

mod checkpoint;
mod count;
mod model;
mod spec;

pub use checkpoint::{
    checkpoint_from_str, checkpoint_to_string, load_model, save_model, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use count::{count_params, ParamBreakdown, MUTAN_BIAS_BLOCKS};
pub use model::{argmax, build_model, cross_entropy, Linear, ModelParams};
pub use spec::{FusionSpec, ModelSpec};
