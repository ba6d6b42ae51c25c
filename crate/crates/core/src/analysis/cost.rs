//! Analytic multiply-accumulate counts. Per attention layer over `n` queries of
//! width `D` with `h` heads and `P` permitted pairs:
//!
//! ```text
//! transforms = 3·n·D²
//! attention  = P·(2·D + 2·h)     (logit and value MACs, exp + normalise per head)
//! residual   = n·D
//! ```
//!
//! A feed-forward block adds `n·Σ(in·out)` plus another `n·D` residual. These
//! are the same quantities the engine's counters tally while executing the
//! sparse path.

use serde::Serialize;

use crate::engine::{LtcaConfig, MacCount, SOFTMAX_OPS_PER_PAIR};
use crate::error::Result;
use crate::mask::{realize, Geometry, MaskSpec};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub mask: String,
    pub pairs: usize,
    pub macs: MacCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub geometry: Geometry,
    pub width: usize,
    pub heads: usize,
    pub layers: Vec<LayerCost>,
    pub total: u64,
}

fn layer_macs(pairs: usize, g: Geometry, d: usize, heads: usize) -> MacCount {
    let n = g.total() as u64;
    let d = d as u64;
    MacCount {
        transforms: 3 * n * d * d,
        attention: pairs as u64 * (2 * d + SOFTMAX_OPS_PER_PAIR * heads as u64),
        residual: n * d,
        feed_forward: 0,
    }
}

/// Attention-only layers, one per spec.
pub fn cost_report(specs: &[MaskSpec], g: Geometry, d: usize, heads: usize) -> Result<CostReport> {
    let mut layers = Vec::with_capacity(specs.len());
    for spec in specs {
        let pairs = realize(spec, g)?.pair_count();
        layers.push(LayerCost {
            mask: spec.label(),
            pairs,
            macs: layer_macs(pairs, g, d, heads),
        });
    }
    let total = layers.iter().map(|l| l.macs.total()).sum();
    Ok(CostReport {
        geometry: g,
        width: d,
        heads,
        layers,
        total,
    })
}

/// Analytic count for a whole config, including feed-forward blocks.
pub fn analytic_macs(cfg: &LtcaConfig, g: Geometry) -> Result<MacCount> {
    let mut total = MacCount::default();
    let n = g.total() as u64;
    for layer in &cfg.layers {
        let d = layer.params.width();
        let pairs = realize(&layer.mask, g)?.pair_count();
        total += layer_macs(pairs, g, d, cfg.options.heads);
        if let Some(mlp) = &layer.feed_forward {
            total += MacCount {
                feed_forward: n * mlp.macs_per_row(),
                residual: n * d as u64,
                ..Default::default()
            };
        }
    }
    Ok(total)
}
