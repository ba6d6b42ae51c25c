//! Config files and the end-to-end inference run.
//!
//! A pipeline file describes the attention stack and the two heads. Tensor
//! references are paths relative to the file's directory:
//!
//! ```json
//! {
//!   "d": 8,
//!   "layers": [
//!     { "mask": { "kind": "window", "w": 2 }, "params": "identity" },
//!     { "mask": { "kind": "global" }, "params": { "wq": "wq.ltf", "wk": "wk.ltf", "wv": "wv.ltf" } }
//!   ],
//!   "hs": "identity",
//!   "hc": { "layers": [{ "weight": "hc_weight.ltf" }], "activation": "identity" }
//! }
//! ```
//!
//! Layer params are `"identity"`, `"zero_value"`, `{"random": scale, "seed": n}`
//! or per-matrix LTF files (biases optional, `1 × D`). Heads are `"identity"`,
//! `"zero"` or a list of LTF layers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{AttentionOptions, LayerConfig, LayerParams, LtcaConfig, LtcaModule};
use crate::error::{Error, Result};
use crate::fixtures::{write_scene, SceneData};
use crate::heads::{classify, segment, select, PredictionSet, SelectMode};
use crate::mask::MaskSpec;
use crate::numeric::{read_ltf_file, write_ltf_file, Activation, Linear, Matrix, MlpParams};
use crate::query::{assemble, init_queries_from_sentence, PositionalEmbeddings};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedParams {
    Identity,
    ZeroValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamRef {
    Named(NamedParams),
    Random {
        random: f64,
        seed: u64,
    },
    Files {
        wq: String,
        wk: String,
        wv: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bq: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bk: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bv: Option<String>,
    },
}

impl Default for ParamRef {
    fn default() -> Self {
        ParamRef::Named(NamedParams::Identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedHead {
    Identity,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearRef {
    pub weight: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MlpRef {
    Named(NamedHead),
    Files {
        layers: Vec<LinearRef>,
        #[serde(default)]
        activation: Activation,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub mask: MaskSpec,
    #[serde(default)]
    pub params: ParamRef,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feed_forward: Option<MlpRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    pub d: usize,
    pub layers: Vec<LayerFile>,
    #[serde(default)]
    pub options: AttentionOptions,
    #[serde(default)]
    pub layer_norm: bool,
    #[serde(default = "identity_head")]
    pub hs: MlpRef,
    #[serde(default = "zero_head")]
    pub hc: MlpRef,
    /// `N1 × D` LTF file; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_pe: Option<String>,
}

fn identity_head() -> MlpRef {
    MlpRef::Named(NamedHead::Identity)
}

fn zero_head() -> MlpRef {
    MlpRef::Named(NamedHead::Zero)
}

/// A pipeline file with every tensor loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Pipeline {
    pub ltca: LtcaConfig,
    pub hs: MlpParams,
    pub hc: MlpParams,
    pub object_pe: Option<Matrix>,
}

fn load_vector(path: &Path, len: usize) -> Result<Vec<f64>> {
    let m = read_ltf_file(path)?;
    if m.rows() * m.cols() != len || m.rows().min(m.cols()) > 1 {
        return Err(Error::Format(format!(
            "{}: expected a vector of length {len}, got {:?}",
            path.display(),
            m.shape()
        )));
    }
    Ok(m.into_data())
}

fn resolve_params(r: &ParamRef, d: usize, base: &Path) -> Result<LayerParams> {
    match r {
        ParamRef::Named(NamedParams::Identity) => Ok(LayerParams::identity(d)),
        ParamRef::Named(NamedParams::ZeroValue) => Ok(LayerParams::zero_value(d)),
        ParamRef::Random { random, seed } => {
            Ok(LayerParams::random(d, *random, &mut SplitMix64::new(*seed)))
        }
        ParamRef::Files {
            wq,
            wk,
            wv,
            bq,
            bk,
            bv,
        } => {
            let bias = |b: &Option<String>| {
                b.as_ref()
                    .map_or(Ok(vec![0.0; d]), |p| load_vector(&base.join(p), d))
            };
            LayerParams::new(
                read_ltf_file(base.join(wq))?,
                read_ltf_file(base.join(wk))?,
                read_ltf_file(base.join(wv))?,
                bias(bq)?,
                bias(bk)?,
                bias(bv)?,
            )
        }
    }
}

fn resolve_mlp(r: &MlpRef, input: usize, output: usize, base: &Path) -> Result<MlpParams> {
    match r {
        MlpRef::Named(NamedHead::Identity) => {
            if input != output {
                return Err(Error::param(format!(
                    "identity head cannot map {input} -> {output}"
                )));
            }
            Ok(MlpParams::identity(input, 1))
        }
        MlpRef::Named(NamedHead::Zero) => {
            MlpParams::new(vec![Linear::zeros(input, output)], Activation::Identity)
        }
        MlpRef::Files { layers, activation } => {
            let mut out = Vec::with_capacity(layers.len());
            for l in layers {
                let weight = read_ltf_file(base.join(&l.weight))?;
                let bias = match &l.bias {
                    Some(p) => load_vector(&base.join(p), weight.cols())?,
                    None => vec![0.0; weight.cols()],
                };
                out.push(Linear::new(weight, bias)?);
            }
            let mlp = MlpParams::new(out, *activation)?;
            if mlp.input_width() != input || mlp.output_width() != output {
                return Err(Error::shape(
                    "pipeline head",
                    format!(
                        "maps {} -> {}, expected {input} -> {output}",
                        mlp.input_width(),
                        mlp.output_width()
                    ),
                ));
            }
            Ok(mlp)
        }
    }
}

impl PipelineFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Loads every referenced tensor, relative to `base`.
    pub fn resolve(&self, base: &Path) -> Result<Pipeline> {
        let d = self.d;
        if d == 0 {
            return Err(Error::param("pipeline width d must be positive"));
        }
        let mut layers = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            l.mask.validate(None)?;
            let params = resolve_params(&l.params, d, base)?;
            let feed_forward = l
                .feed_forward
                .as_ref()
                .map(|f| resolve_mlp(f, d, d, base))
                .transpose()?;
            layers.push(LayerConfig {
                params,
                mask: l.mask.clone(),
                feed_forward,
            });
        }
        let object_pe = self
            .object_pe
            .as_ref()
            .map(|p| read_ltf_file(base.join(p)))
            .transpose()?;
        Ok(Pipeline {
            ltca: LtcaConfig {
                layers,
                options: self.options,
                layer_norm: self.layer_norm,
            },
            hs: resolve_mlp(&self.hs, d, d, base)?,
            hc: resolve_mlp(&self.hc, 2 * d, 1, base)?,
            object_pe,
        })
    }
}

/// Reads and resolves a pipeline file.
pub fn load_pipeline(path: &Path) -> Result<Pipeline> {
    PipelineFile::from_path(path)?.resolve(path.parent().unwrap_or(Path::new(".")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub prediction: PredictionSet,
    pub global_out: Matrix,
    pub mode: SelectMode,
    pub sigma: f64,
    pub selected: Vec<usize>,
}

/// Assemble, encode, segment and score, then select.
pub fn run_inference(
    p: &Pipeline,
    scene: &SceneData,
    mode: SelectMode,
    sigma: f64,
) -> Result<Inference> {
    let g = scene.scene.geometry()?;
    let d = scene.scene.d;
    if p.ltca.width().is_some_and(|w| w != d) {
        return Err(Error::shape(
            "run_inference",
            format!("pipeline width {:?} vs scene width {d}", p.ltca.width()),
        ));
    }
    let object_pe = p
        .object_pe
        .clone()
        .unwrap_or_else(|| Matrix::zeros(g.n1, d));
    let pe = PositionalEmbeddings::new(object_pe, g.t)?;
    let globals = init_queries_from_sentence(&scene.sentence, g.n2);
    let input = assemble(g, &scene.object_embeddings, &pe, &globals)?;
    let module = LtcaModule::new(p.ltca.clone(), g)?;
    let (global_out, _) = module.run(&input)?;
    let masks = segment(&scene.features, &global_out, &p.hs)?;
    let scores = classify(&global_out, &scene.sentence, &p.hc)?;
    let prediction = PredictionSet::new(masks, scores)?;
    let selected = select(&prediction.scores.probs, mode, sigma)?;
    Ok(Inference {
        prediction,
        global_out,
        mode,
        sigma,
        selected,
    })
}

fn json_text(v: &serde_json::Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

/// Writes `masks/q{i}_t{t}.pgm` (zero-based frame), `logits.ltf`,
/// `scores.json` and `selection.json`. Returns the written paths in order.
pub fn write_inference(dir: &Path, inf: &Inference) -> Result<Vec<PathBuf>> {
    let masks = &inf.prediction.masks;
    let mask_dir = dir.join("masks");
    fs::create_dir_all(&mask_dir)?;
    let mut written = Vec::new();
    for i in 0..masks.queries {
        for t in 0..masks.frames {
            let path = mask_dir.join(format!("q{i}_t{t}.pgm"));
            fs::write(&path, masks.to_pgm(i, t))?;
            written.push(path);
        }
    }
    let path = dir.join("logits.ltf");
    write_ltf_file(&path, &masks.to_matrix())?;
    written.push(path);
    let path = dir.join("scores.json");
    fs::write(
        &path,
        json_text(&serde_json::to_value(&inf.prediction.scores)?)?,
    )?;
    written.push(path);
    let path = dir.join("selection.json");
    let mode = serde_json::to_value(inf.mode)?;
    fs::write(
        &path,
        json_text(&json!({ "mode": mode, "sigma": inf.sigma, "selected": inf.selected }))?,
    )?;
    written.push(path);
    Ok(written)
}

/// The trained-free pipeline used with the golden scene: two long-range
/// layers with identity projections, identity segmentation head, and a score
/// head that measures agreement with the sentence.
pub fn golden_pipeline(d: usize) -> PipelineFile {
    PipelineFile {
        d,
        layers: (0..2)
            .map(|l| LayerFile {
                mask: MaskSpec::ltca_default(l),
                params: ParamRef::default(),
                feed_forward: None,
            })
            .collect(),
        options: AttentionOptions::default(),
        layer_norm: false,
        hs: identity_head(),
        hc: MlpRef::Files {
            layers: vec![LinearRef {
                weight: "hc_weight.ltf".into(),
                bias: None,
            }],
            activation: Activation::Identity,
        },
        object_pe: None,
    }
}

/// Writes a self-contained fixture: `scene/` tensors, `hc_weight.ltf` and
/// `pipeline.json`. The score head weights the query half by the sentence
/// direction and ignores the sentence half.
pub fn write_fixture(dir: &Path, scene: &SceneData) -> Result<()> {
    let d = scene.scene.d;
    write_scene(&dir.join("scene"), scene)?;
    let hc = Matrix::from_fn(
        2 * d,
        1,
        |r, _| if r < d { scene.direction[r] } else { 0.0 },
    );
    write_ltf_file(dir.join("hc_weight.ltf"), &hc)?;
    fs::write(
        dir.join("pipeline.json"),
        json_text(&serde_json::to_value(golden_pipeline(d))?)?,
    )?;
    Ok(())
}
