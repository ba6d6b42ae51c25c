//! Sparse long-range temporal attention over per-frame object queries.
//!
//! The crate is organised bottom-up:
//!
//! - [`numeric`]: dense `f64` matrices, deterministic matmul, row softmax, MLPs, LTF files.
//! - [`mask`]: window, dilated, random, global and shift-window allow-lists.
//! - [`query`]: positional embeddings and assembly of the encoder input.
//! - [`engine`]: masked attention (dense reference and sparse gather), layer stacking, MAC accounting.
//! - [`heads`]: segmentation and score heads plus inference-time selection.
//! - [`analysis`]: multi-layer reachability and analytic cost reports.
//! - [`fixtures`], [`pipeline`], [`bench`]: synthetic scenes, end-to-end runs and sweeps.

pub mod analysis;
pub mod bench;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod heads;
pub mod mask;
pub mod numeric;
pub mod pipeline;
pub mod query;
pub mod rng;

pub use error::{Error, Result};
