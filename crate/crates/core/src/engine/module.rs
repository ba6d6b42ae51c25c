use super::attention::{
    attention_dense_counted, attention_sparse_counted, feed_forward, layer_norm, MacCount,
};
use super::params::LtcaConfig;
use crate::error::{Error, Result};
use crate::mask::{realize, AllowList, Geometry, MaskSpec};
use crate::numeric::Matrix;
use crate::query::QueryBundle;

/// Which attention kernel a forward pass uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Path {
    Dense,
    Sparse,
}

/// A config bound to one geometry, with every layer's allow-list realised.
#[derive(Debug, Clone)]
pub struct LtcaModule {
    config: LtcaConfig,
    geometry: Geometry,
    masks: Vec<AllowList>,
}

impl LtcaModule {
    /// Realises each layer's mask and rejects any query left without a key.
    pub fn new(config: LtcaConfig, geometry: Geometry) -> Result<Self> {
        if let Some(d) = config.width() {
            config.options.head_width(d)?;
        }
        let mut masks = Vec::with_capacity(config.layers.len());
        for (l, layer) in config.layers.iter().enumerate() {
            layer.params.validate()?;
            if layer.params.width() != config.width().unwrap_or(0) {
                return Err(Error::shape(
                    "LtcaModule::new",
                    format!("layer {l} width differs from layer 0"),
                ));
            }
            let mask = realize(&layer.mask, geometry)?;
            if let Some(row) = mask.first_empty_row() {
                return Err(Error::Param(format!(
                    "layer {l} ({}): query {row} has no permitted key",
                    layer.mask.label()
                )));
            }
            masks.push(mask);
        }
        Ok(Self {
            config,
            geometry,
            masks,
        })
    }

    pub fn config(&self) -> &LtcaConfig {
        &self.config
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn masks(&self) -> &[AllowList] {
        &self.masks
    }

    pub fn forward(&self, x: &QueryBundle) -> Result<QueryBundle> {
        self.forward_with(x, Path::Sparse, &mut MacCount::default())
    }

    /// Runs all layers, accumulating executed work into `counter`.
    pub fn forward_with(
        &self,
        x: &QueryBundle,
        path: Path,
        counter: &mut MacCount,
    ) -> Result<QueryBundle> {
        if x.geometry != self.geometry {
            return Err(Error::shape(
                "LtcaModule::forward",
                format!("input {} vs module {}", x.geometry, self.geometry),
            ));
        }
        let opts = &self.config.options;
        let mut h = x.clone();
        for (layer, mask) in self.config.layers.iter().zip(&self.masks) {
            h = match path {
                Path::Dense => attention_dense_counted(&h, &layer.params, mask, opts, counter)?,
                Path::Sparse => attention_sparse_counted(&h, &layer.params, mask, opts, counter)?,
            };
            if self.config.layer_norm {
                h.features = layer_norm(&h.features);
            }
            if let Some(mlp) = &layer.feed_forward {
                h.features = feed_forward(&h.features, mlp, counter)?;
                if self.config.layer_norm {
                    h.features = layer_norm(&h.features);
                }
            }
        }
        Ok(h)
    }

    /// Forward pass split into `(global rows, object rows)`.
    pub fn run(&self, x: &QueryBundle) -> Result<(Matrix, Matrix)> {
        Ok(self.forward(x)?.split())
    }
}

/// Sparse forward pass of `cfg` over `x`, split at `N2`.
pub fn ltca_forward(x: &QueryBundle, cfg: &LtcaConfig) -> Result<(Matrix, Matrix)> {
    LtcaModule::new(cfg.clone(), x.geometry)?.run(x)
}

/// Exact number of permitted pairs of the realised spec.
pub fn pair_count(spec: &MaskSpec, g: Geometry) -> Result<usize> {
    Ok(realize(spec, g)?.pair_count())
}
