use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskSpec;
use crate::numeric::{Matrix, MlpParams};
use crate::rng::SplitMix64;

/// Query/key/value projections of one layer, each `x · w + b` with `w` of shape `D × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub bq: Vec<f64>,
    pub bk: Vec<f64>,
    pub bv: Vec<f64>,
}

impl LayerParams {
    pub fn new(
        wq: Matrix,
        wk: Matrix,
        wv: Matrix,
        bq: Vec<f64>,
        bk: Vec<f64>,
        bv: Vec<f64>,
    ) -> Result<Self> {
        let p = Self {
            wq,
            wk,
            wv,
            bq,
            bk,
            bv,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity(d: usize) -> Self {
        Self {
            wq: Matrix::identity(d),
            wk: Matrix::identity(d),
            wv: Matrix::identity(d),
            bq: vec![0.0; d],
            bk: vec![0.0; d],
            bv: vec![0.0; d],
        }
    }

    /// Identity query/key projections and a zero value projection: the layer
    /// reduces to its residual.
    pub fn zero_value(d: usize) -> Self {
        Self {
            wv: Matrix::zeros(d, d),
            ..Self::identity(d)
        }
    }

    /// Entries uniform in `[-scale, scale)`.
    pub fn random(d: usize, scale: f64, rng: &mut SplitMix64) -> Self {
        let mut mat = || Matrix::from_fn(d, d, |_, _| scale * rng.next_signed());
        let (wq, wk, wv) = (mat(), mat(), mat());
        let mut vec = || {
            (0..d)
                .map(|_| scale * rng.next_signed())
                .collect::<Vec<_>>()
        };
        let (bq, bk, bv) = (vec(), vec(), vec());
        Self {
            wq,
            wk,
            wv,
            bq,
            bk,
            bv,
        }
    }

    pub fn width(&self) -> usize {
        self.wq.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.wq.rows();
        for (name, m) in [("wq", &self.wq), ("wk", &self.wk), ("wv", &self.wv)] {
            if m.shape() != (d, d) {
                return Err(Error::shape(
                    "LayerParams",
                    format!("{name} is {:?}, expected {d}x{d}", m.shape()),
                ));
            }
            if !m.is_finite() {
                return Err(Error::param(format!("{name} has non-finite entries")));
            }
        }
        for (name, b) in [("bq", &self.bq), ("bk", &self.bk), ("bv", &self.bv)] {
            if b.len() != d {
                return Err(Error::shape(
                    "LayerParams",
                    format!("{name} has length {}, expected {d}", b.len()),
                ));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::param(format!("{name} has non-finite entries")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionOptions {
    /// Divide logits by `sqrt(head width)`.
    pub scale_scores: bool,
    /// Heads split the width evenly; outputs are concatenated.
    pub heads: usize,
}

impl Default for AttentionOptions {
    fn default() -> Self {
        Self {
            scale_scores: true,
            heads: 1,
        }
    }
}

impl AttentionOptions {
    pub(crate) fn head_width(&self, d: usize) -> Result<usize> {
        if self.heads == 0 || !d.is_multiple_of(self.heads) {
            return Err(Error::param(format!(
                "width {d} is not divisible into {} heads",
                self.heads
            )));
        }
        Ok(d / self.heads)
    }

    pub(crate) fn logit_scale(&self, head_width: usize) -> f64 {
        if self.scale_scores {
            1.0 / (head_width as f64).sqrt()
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfig {
    pub params: LayerParams,
    pub mask: MaskSpec,
    /// Position-wise `x + mlp(x)` after attention; off unless set.
    pub feed_forward: Option<MlpParams>,
}

impl LayerConfig {
    pub fn new(params: LayerParams, mask: MaskSpec) -> Self {
        Self {
            params,
            mask,
            feed_forward: None,
        }
    }
}

/// A stack of masked attention layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LtcaConfig {
    pub layers: Vec<LayerConfig>,
    pub options: AttentionOptions,
    /// Post-norm (no affine) after attention and after the feed-forward block.
    pub layer_norm: bool,
}

impl LtcaConfig {
    pub fn new(layers: Vec<LayerConfig>) -> Self {
        Self {
            layers,
            options: AttentionOptions::default(),
            layer_norm: false,
        }
    }

    /// Width shared by all layers, if any.
    pub fn width(&self) -> Option<usize> {
        self.layers.first().map(|l| l.params.width())
    }

    /// Every layer with its random components reseeded to `seed + layer`.
    pub fn reseeded(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        for (l, layer) in cfg.layers.iter_mut().enumerate() {
            layer.mask = layer.mask.with_seed(seed.wrapping_add(l as u64));
        }
        cfg
    }
}
