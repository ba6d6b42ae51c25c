use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Nonlinearity applied between MLP layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Gelu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            // tanh approximation
            Activation::Gelu => {
                let c = (2.0 / std::f64::consts::PI).sqrt();
                0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
            }
            Activation::Identity => x,
        }
    }
}

/// One affine layer, `y = x · weight + bias` with `weight` of shape `in × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn new(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::shape(
                "Linear::new",
                format!(
                    "bias length {} vs output width {}",
                    bias.len(),
                    weight.cols()
                ),
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn identity(width: usize) -> Self {
        Self {
            weight: Matrix::identity(width),
            bias: vec![0.0; width],
        }
    }

    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Matrix::zeros(input, output),
            bias: vec![0.0; output],
        }
    }

    pub fn input_width(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_width(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        x.affine(&self.weight, &self.bias)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layers: Vec<Linear>,
    activation: Activation,
}

impl MlpParams {
    /// Checks that layer widths chain.
    pub fn new(layers: Vec<Linear>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::param("an MLP needs at least one layer"));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_width() != pair[1].input_width() {
                return Err(Error::shape(
                    "MlpParams::new",
                    format!(
                        "layer {i} outputs {} but layer {} takes {}",
                        pair[0].output_width(),
                        i + 1,
                        pair[1].input_width()
                    ),
                ));
            }
        }
        Ok(Self { layers, activation })
    }

    pub fn identity(width: usize, depth: usize) -> Self {
        Self {
            layers: vec![Linear::identity(width); depth.max(1)],
            activation: Activation::Identity,
        }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].output_width()
    }

    /// Multiply-accumulates per input row.
    pub fn macs_per_row(&self) -> u64 {
        self.layers
            .iter()
            .map(|l| (l.input_width() * l.output_width()) as u64)
            .sum()
    }

    /// Affine + activation for every layer except the last, which stays affine.
    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_width() {
            return Err(Error::shape(
                "mlp_apply",
                format!(
                    "input width {} vs MLP input {}",
                    x.cols(),
                    self.input_width()
                ),
            ));
        }
        let last = self.layers.len() - 1;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(&h)?;
            if i != last {
                h = h.map(|v| self.activation.apply(v));
            }
        }
        Ok(h)
    }
}
