//! Synthetic scenes standing in for real frame features.
//!
//! A single blob moves across an `H × W` feature grid. Each pixel's feature is
//! the blob's unit direction scaled by a Gaussian bump around the blob centre,
//! plus uniform noise. Slot 0 of every frame's object embeddings is that same
//! direction, the remaining slots are random unit distractors, and the
//! sentence feature is the direction itself. A dot-product head therefore
//! peaks where the features match the query without any learned weights.
//!
//! All randomness comes from [`SplitMix64`] seeded with the scene seed, in a
//! fixed order: direction, start position, velocity, distractors, noise.
//! Frames are indexed from 0 in files; `centers[t]` belongs to frame `t + 1`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heads::MaskFeatureVolume;
use crate::mask::Geometry;
use crate::numeric::{read_ltf_file, write_ltf_file, Matrix};
use crate::rng::SplitMix64;

pub const MANIFEST: &str = "manifest.json";
const FEATURES_FILE: &str = "mask_features.ltf";
const OBJECTS_FILE: &str = "object_embeddings.ltf";
const SENTENCE_FILE: &str = "sentence.ltf";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticScene {
    pub t: usize,
    pub height: usize,
    pub width: usize,
    pub d: usize,
    pub n1: usize,
    pub n2: usize,
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    /// Gaussian bump width in pixels.
    #[serde(default = "default_sigma")]
    pub bump_sigma: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_noise() -> f64 {
    0.01
}

fn default_sigma() -> f64 {
    1.5
}

fn default_stride() -> usize {
    4
}

impl SyntheticScene {
    /// The checked-in end-to-end scene.
    pub fn golden() -> Self {
        Self {
            t: 8,
            height: 12,
            width: 12,
            d: 8,
            n1: 3,
            n2: 2,
            seed: 7,
            noise: 0.01,
            bump_sigma: 1.5,
            stride: 4,
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.t, self.n1, self.n2)
    }

    fn validate(&self) -> Result<()> {
        self.geometry()?;
        if self.height == 0 || self.width == 0 || self.d == 0 {
            return Err(Error::param("scene grid and width must be non-empty"));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0)
            || !(self.bump_sigma.is_finite() && self.bump_sigma > 0.0)
        {
            return Err(Error::param("scene noise must be >= 0 and bump width > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneData {
    pub scene: SyntheticScene,
    pub features: MaskFeatureVolume,
    /// `T·N1 × D`, frame-major.
    pub object_embeddings: Matrix,
    pub sentence: Vec<f64>,
    pub direction: Vec<f64>,
    /// Blob centre `(y, x)` per frame.
    pub centers: Vec<(usize, usize)>,
}

fn unit_vector(d: usize, rng: &mut SplitMix64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.next_signed()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Integer positions bouncing off the grid edges.
fn trajectory(len: usize, start: usize, velocity: i64, t: usize) -> Vec<usize> {
    let mut pos = start as i64;
    let mut vel = velocity;
    let mut out = Vec::with_capacity(t);
    for _ in 0..t {
        out.push(pos as usize);
        if len > 1 {
            if pos + vel < 0 || pos + vel >= len as i64 {
                vel = -vel;
            }
            pos += vel;
        }
    }
    out
}

pub fn gen_scene(scene: &SyntheticScene) -> Result<SceneData> {
    scene.validate()?;
    let SyntheticScene {
        t,
        height,
        width,
        d,
        n1,
        ..
    } = *scene;
    let mut rng = SplitMix64::new(scene.seed);
    let direction = unit_vector(d, &mut rng);
    let y0 = rng.below(height as u64) as usize;
    let x0 = rng.below(width as u64) as usize;
    let (vy, vx) = loop {
        let vy = rng.below(3) as i64 - 1;
        let vx = rng.below(3) as i64 - 1;
        if (vy, vx) != (0, 0) {
            break (vy, vx);
        }
    };
    let ys = trajectory(height, y0, vy, t);
    let xs = trajectory(width, x0, vx, t);
    let centers: Vec<(usize, usize)> = ys.into_iter().zip(xs).collect();

    let mut objects = Matrix::zeros(t * n1, d);
    for f in 0..t {
        objects.row_mut(f * n1).copy_from_slice(&direction);
        for s in 1..n1 {
            let v = unit_vector(d, &mut rng);
            objects.row_mut(f * n1 + s).copy_from_slice(&v);
        }
    }

    let two_s2 = 2.0 * scene.bump_sigma * scene.bump_sigma;
    let mut data = Matrix::zeros(t * height * width, d);
    for (f, &(cy, cx)) in centers.iter().enumerate() {
        for y in 0..height {
            for x in 0..width {
                let dy = y as f64 - cy as f64;
                let dx = x as f64 - cx as f64;
                let bump = (-(dy * dy + dx * dx) / two_s2).exp();
                let row = data.row_mut((f * height + y) * width + x);
                for (v, u) in row.iter_mut().zip(&direction) {
                    *v = u * bump + scene.noise * rng.next_signed();
                }
            }
        }
    }
    let features = MaskFeatureVolume::new(t, height, width, scene.stride, data)?;
    Ok(SceneData {
        scene: scene.clone(),
        features,
        object_embeddings: objects,
        sentence: direction.clone(),
        direction,
        centers,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    generator: String,
    frame_indexing: String,
    scene: SyntheticScene,
    centers: Vec<[usize; 2]>,
    mask_features: String,
    object_embeddings: String,
    sentence: String,
}

/// Writes the tensors as LTF files plus `manifest.json` into `dir`.
pub fn write_scene(dir: &Path, data: &SceneData) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_ltf_file(dir.join(FEATURES_FILE), data.features.as_matrix())?;
    write_ltf_file(dir.join(OBJECTS_FILE), &data.object_embeddings)?;
    write_ltf_file(dir.join(SENTENCE_FILE), &Matrix::row_vector(&data.sentence))?;
    let manifest = Manifest {
        format: "ltf: header `ltf <rows> <cols>\\n`, then row-major little-endian f64".into(),
        generator: "splitmix64".into(),
        frame_indexing: "zero-based rows; mask_features row = (t*height + y)*width + x".into(),
        scene: data.scene.clone(),
        centers: data.centers.iter().map(|&(y, x)| [y, x]).collect(),
        mask_features: FEATURES_FILE.into(),
        object_embeddings: OBJECTS_FILE.into(),
        sentence: SENTENCE_FILE.into(),
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Reads a scene written by [`write_scene`]; the direction is taken from the sentence.
pub fn load_scene(dir: &Path) -> Result<SceneData> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let s = manifest.scene;
    s.validate()?;
    let features = MaskFeatureVolume::new(
        s.t,
        s.height,
        s.width,
        s.stride,
        read_ltf_file(dir.join(&manifest.mask_features))?,
    )?;
    let objects = read_ltf_file(dir.join(&manifest.object_embeddings))?;
    let sentence = read_ltf_file(dir.join(&manifest.sentence))?;
    if objects.shape() != (s.t * s.n1, s.d)
        || sentence.shape() != (1, s.d)
        || features.channels() != s.d
    {
        return Err(Error::Format(format!(
            "scene tensors in {} do not match the manifest",
            dir.display()
        )));
    }
    if manifest.centers.len() != s.t {
        return Err(Error::Format("manifest needs one centre per frame".into()));
    }
    let sentence = sentence.into_data();
    Ok(SceneData {
        scene: s,
        features,
        object_embeddings: objects,
        direction: sentence.clone(),
        sentence,
        centers: manifest.centers.into_iter().map(|[y, x]| (y, x)).collect(),
    })
}
