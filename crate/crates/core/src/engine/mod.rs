//! Masked attention layers and their stacking.
//!
//! One layer maps input features `X` to
//! `softmax(M + Q·Kᵀ [/ √width]) · V + X` with `Q`, `K`, `V` affine projections
//! of `X` and `M` the additive form of the layer's allow-list. The dense path
//! is the reference; the sparse gather path does work proportional to the
//! number of permitted pairs.

mod attention;
mod module;
mod params;
mod rolled;

pub use attention::{
    attention_dense, attention_dense_counted, attention_sparse, attention_sparse_counted,
    feed_forward, layer_norm, MacCount, SOFTMAX_OPS_PER_PAIR,
};
pub use module::{ltca_forward, pair_count, LtcaModule, Path};
pub use params::{AttentionOptions, LayerConfig, LayerParams, LtcaConfig};
pub use rolled::{attention_rolled, attention_rolled_counted, RolledPattern};
