//! Image–text fusion operators for visual question answering heads.
//!
//! Layers, bottom-up:
//!
//! * [`numtensor`]: dense `f64` tensors, affine maps, circular convolution and
//!   a seeded portable RNG;
//! * [`sketch`]: Count Sketch projections and the explicit outer-product sketch;
//! * [`fusion`]: element-wise, compact bilinear (MCB) and Tucker (MUTAN) fusion
//!   with vector–Jacobian products;
//! * [`vqahead`]: projections → fusion → classifier, checkpoints and exact
//!   parameter accounting;
//! * [`synth`]: synthetic bilinear classification tasks and an Adam trainer.

#![forbid(unsafe_code)]

pub mod container;
pub mod error;
pub mod fusion;
pub mod gradcheck;
pub mod numtensor;
pub mod sketch;
pub mod synth;
pub mod vqahead;

pub use error::{Error, Result};
