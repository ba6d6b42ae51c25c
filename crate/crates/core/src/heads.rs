//! Segmentation and score heads, and inference-time selection.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{dot, logistic, Matrix, MlpParams};

/// Per-frame mask features, stored as one `(T·H·W) × D` matrix with pixels in
/// row-major `(y, x)` order inside each frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskFeatureVolume {
    t: usize,
    height: usize,
    width: usize,
    /// Downsampling factor relative to the input frames.
    pub stride: usize,
    data: Matrix,
}

impl MaskFeatureVolume {
    pub fn new(t: usize, height: usize, width: usize, stride: usize, data: Matrix) -> Result<Self> {
        if data.rows() != t * height * width {
            return Err(Error::shape(
                "MaskFeatureVolume::new",
                format!("{} rows for {t} frames of {height}x{width}", data.rows()),
            ));
        }
        if !data.is_finite() {
            return Err(Error::param("mask features must be finite"));
        }
        Ok(Self {
            t,
            height,
            width,
            stride,
            data,
        })
    }

    pub fn frames(&self) -> usize {
        self.t
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.data.cols()
    }

    pub fn pixels_per_frame(&self) -> usize {
        self.height * self.width
    }

    /// Feature vector at frame `t` (0-based), pixel `(y, x)`.
    #[inline]
    pub fn pixel(&self, t: usize, y: usize, x: usize) -> &[f64] {
        self.data.row((t * self.height + y) * self.width + x)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.data
    }
}

/// Mask logits indexed `(query, frame, y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskLogits {
    pub queries: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl MaskLogits {
    #[inline]
    pub fn get(&self, i: usize, t: usize, y: usize, x: usize) -> f64 {
        self.data[((i * self.frames + t) * self.height + y) * self.width + x]
    }

    /// The `H·W` logits of query `i` at frame `t`.
    pub fn frame(&self, i: usize, t: usize) -> &[f64] {
        let n = self.height * self.width;
        let start = (i * self.frames + t) * n;
        &self.data[start..start + n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Foreground where `sigmoid(logit) > 0.5`; a logit of exactly 0 is background.
    pub fn binarize(&self, i: usize, t: usize) -> Vec<bool> {
        self.frame(i, t)
            .iter()
            .map(|&l| logistic(l) > 0.5)
            .collect()
    }

    /// `(y, x)` of the largest logit; ties go to the first pixel in raster order.
    pub fn argmax_pixel(&self, i: usize, t: usize) -> (usize, usize) {
        let f = self.frame(i, t);
        let mut best = 0;
        for (p, &v) in f.iter().enumerate() {
            if v > f[best] {
                best = p;
            }
        }
        (best / self.width, best % self.width)
    }

    /// `(N2·T) × (H·W)` view for LTF export; row `i * T + t`.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_vec(
            self.queries * self.frames,
            self.height * self.width,
            self.data.clone(),
        )
        .expect("consistent shape")
    }

    /// Binary PGM (`P5`, maxval 255) of the binarised mask.
    pub fn to_pgm(&self, i: usize, t: usize) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(
            self.binarize(i, t)
                .into_iter()
                .map(|fg| if fg { 255u8 } else { 0 }),
        );
        out
    }

    /// L2 norm over all logits.
    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `logit(i, t, p) = dot(F_t[p], hs(global_out[i]))`.
pub fn segment(fm: &MaskFeatureVolume, global_out: &Matrix, hs: &MlpParams) -> Result<MaskLogits> {
    let d = fm.channels();
    if hs.input_width() != global_out.cols() || hs.output_width() != d {
        return Err(Error::shape(
            "segment",
            format!(
                "head maps {} -> {}, queries have width {}, features {}",
                hs.input_width(),
                hs.output_width(),
                global_out.cols(),
                d
            ),
        ));
    }
    let kernels = hs.apply(global_out)?;
    let per_frame = fm.pixels_per_frame();
    let mut data = Vec::with_capacity(kernels.rows() * fm.frames() * per_frame);
    for i in 0..kernels.rows() {
        let k = kernels.row(i);
        for t in 0..fm.frames() {
            for p in 0..per_frame {
                data.push(dot(fm.data.row(t * per_frame + p), k));
            }
        }
    }
    Ok(MaskLogits {
        queries: kernels.rows(),
        frames: fm.frames(),
        height: fm.height(),
        width: fm.width(),
        data,
    })
}

/// Raw and logistic-squashed scores, one per global query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

/// `score_i = logistic(hc([global_out[i] ; sentence]))`.
pub fn classify(global_out: &Matrix, sentence: &[f64], hc: &MlpParams) -> Result<Scores> {
    let d = global_out.cols();
    if sentence.len() != d || hc.input_width() != 2 * d || hc.output_width() != 1 {
        return Err(Error::shape(
            "classify",
            format!(
                "head maps {} -> {}, expected {} -> 1 (query width {d}, sentence {})",
                hc.input_width(),
                hc.output_width(),
                2 * d,
                sentence.len()
            ),
        ));
    }
    let joined = Matrix::from_fn(global_out.rows(), 2 * d, |r, c| {
        if c < d {
            global_out.get(r, c)
        } else {
            sentence[c - d]
        }
    });
    let logits = hc.apply(&joined)?.into_data();
    let probs = logits.iter().map(|&l| logistic(l)).collect();
    Ok(Scores { logits, probs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectMode {
    /// Highest score; ties go to the lowest index.
    Single,
    /// Every score strictly above the threshold.
    Multi,
}

impl std::str::FromStr for SelectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(SelectMode::Single),
            "multi" => Ok(SelectMode::Multi),
            _ => Err(Error::param(format!(
                "selection mode must be single or multi, got {s:?}"
            ))),
        }
    }
}

pub const DEFAULT_SIGMA: f64 = 0.5;

pub fn select(scores: &[f64], mode: SelectMode, sigma: f64) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::param("cannot select from an empty prediction set"));
    }
    Ok(match mode {
        SelectMode::Single => {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            vec![best]
        }
        SelectMode::Multi => scores
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > sigma)
            .map(|(i, _)| i)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub masks: MaskLogits,
    pub scores: Scores,
}

impl PredictionSet {
    pub fn new(masks: MaskLogits, scores: Scores) -> Result<Self> {
        if masks.queries != scores.probs.len() {
            return Err(Error::shape(
                "PredictionSet",
                format!("{} masks vs {} scores", masks.queries, scores.probs.len()),
            ));
        }
        Ok(Self { masks, scores })
    }

    pub fn select(&self, mode: SelectMode, sigma: f64) -> Result<Vec<usize>> {
        select(&self.scores.probs, mode, sigma)
    }
}
