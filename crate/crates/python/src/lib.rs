//! Python bindings. Matrices cross the boundary as lists of row lists; mask
//! specs as JSON strings; reports as plain dicts.

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

use ltca_core::analysis::{cost_report, reachability as reach_core, ReachabilityReport};
use ltca_core::bench::{run_bench, to_csv, BenchConfig};
use ltca_core::engine::{attention_dense, attention_sparse, AttentionOptions, LayerParams};
use ltca_core::fixtures::{gen_scene, load_scene, SyntheticScene};
use ltca_core::heads::{
    classify as classify_core, segment as segment_core, select as select_core, MaskFeatureVolume,
};
use ltca_core::mask::{self, MaskSpec};
use ltca_core::numeric::{Activation, Linear, Matrix, MlpParams};
use ltca_core::pipeline::{load_pipeline, run_inference, write_fixture, write_inference};
use ltca_core::query::{self, QueryBundle};

fn err(e: ltca_core::Error) -> PyErr {
    match e {
        ltca_core::Error::Io(io) => PyOSError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(err)
}

fn spec(json: &str) -> PyResult<MaskSpec> {
    MaskSpec::from_json(json).map_err(err)
}

fn to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<Py<PyAny>> {
    let json = py.import("json")?;
    Ok(json.call_method1("loads", (value.to_string(),))?.unbind())
}

#[pyclass(name = "Geometry", frozen, skip_from_py_object)]
#[derive(Clone, Copy)]
struct PyGeometry(mask::Geometry);

#[pymethods]
impl PyGeometry {
    #[new]
    fn new(t: usize, n1: usize, n2: usize) -> PyResult<Self> {
        mask::Geometry::new(t, n1, n2).map(Self).map_err(err)
    }

    #[getter]
    fn t(&self) -> usize {
        self.0.t
    }

    #[getter]
    fn n1(&self) -> usize {
        self.0.n1
    }

    #[getter]
    fn n2(&self) -> usize {
        self.0.n2
    }

    #[getter]
    fn total(&self) -> usize {
        self.0.total()
    }

    /// 1-based frame of query `q`, or None for a global query.
    fn frame_of(&self, q: usize) -> PyResult<Option<usize>> {
        self.0.frame_of(q).map_err(err)
    }

    fn object_index(&self, frame: usize, slot: usize) -> PyResult<usize> {
        if frame == 0 || frame > self.0.t || slot >= self.0.n1 {
            return Err(PyValueError::new_err(
                "frame must be in 1..=T and slot below N1",
            ));
        }
        Ok(self.0.object_index(frame, slot))
    }

    fn __repr__(&self) -> String {
        format!("Geometry({}, {}, {})", self.0.t, self.0.n1, self.0.n2)
    }
}

#[pyclass(name = "AllowList", frozen)]
struct PyAllowList(mask::AllowList);

#[pymethods]
impl PyAllowList {
    fn rows(&self) -> Vec<Vec<usize>> {
        self.0.to_rows()
    }

    fn pair_count(&self) -> usize {
        self.0.pair_count()
    }

    fn allows(&self, i: usize, j: usize) -> bool {
        i < self.0.len() && j < self.0.len() && self.0.allows(i, j)
    }

    fn is_symmetric(&self) -> bool {
        self.0.is_symmetric()
    }

    fn first_empty_row(&self) -> Option<usize> {
        self.0.first_empty_row()
    }

    /// Additive form: 0 where allowed, -inf elsewhere.
    fn additive(&self) -> Vec<Vec<f64>> {
        self.0.to_additive().to_rows()
    }

    /// Fixture text: `geom T N1 N2` then one line of key indices per row.
    fn to_text(&self) -> String {
        mask::write_allow_list(&self.0)
    }

    /// Exact comparison with the direct predicate of `spec_json`.
    fn verify(&self, spec_json: &str) -> PyResult<bool> {
        Ok(mask::verify_against_formula(&self.0, &spec(spec_json)?))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyfunction]
fn build_mask(spec_json: &str, geometry: &PyGeometry) -> PyResult<PyAllowList> {
    mask::realize(&spec(spec_json)?, geometry.0)
        .map(PyAllowList)
        .map_err(err)
}

#[pyfunction]
fn parse_allow_list(text: &str) -> PyResult<PyAllowList> {
    mask::parse_allow_list(text).map(PyAllowList).map_err(err)
}

#[pyfunction]
fn sinusoidal_pe(t: usize, d: usize) -> PyResult<Vec<Vec<f64>>> {
    query::sinusoidal_pe(t, d).map(|m| m.to_rows()).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (x, mask, wq, wk, wv, bq=None, bk=None, bv=None, dense=false, heads=1, scale=true))]
#[allow(clippy::too_many_arguments)]
fn attention(
    x: Vec<Vec<f64>>,
    mask: &PyAllowList,
    wq: Vec<Vec<f64>>,
    wk: Vec<Vec<f64>>,
    wv: Vec<Vec<f64>>,
    bq: Option<Vec<f64>>,
    bk: Option<Vec<f64>>,
    bv: Option<Vec<f64>>,
    dense: bool,
    heads: usize,
    scale: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let x = QueryBundle::new(mask.0.geometry(), matrix(x)?).map_err(err)?;
    let d = x.width();
    let zero = || vec![0.0; d];
    let p = LayerParams::new(
        matrix(wq)?,
        matrix(wk)?,
        matrix(wv)?,
        bq.unwrap_or_else(zero),
        bk.unwrap_or_else(zero),
        bv.unwrap_or_else(zero),
    )
    .map_err(err)?;
    let opts = AttentionOptions {
        scale_scores: scale,
        heads,
    };
    let out = if dense {
        attention_dense(&x, &p, &mask.0, &opts)
    } else {
        attention_sparse(&x, &p, &mask.0, &opts)
    };
    Ok(out.map_err(err)?.features.to_rows())
}

#[pyclass(name = "Reachability", frozen)]
struct PyReachability(ReachabilityReport);

#[pymethods]
impl PyReachability {
    #[getter]
    fn diameter(&self) -> Option<usize> {
        self.0.diameter
    }

    #[getter]
    fn max_frame_span(&self) -> Vec<usize> {
        self.0.max_frame_span.clone()
    }

    #[getter]
    fn reachable_pairs(&self) -> Vec<usize> {
        self.0.reachable_pairs.clone()
    }

    /// Whether output `i` depends on input `j` after `k` layers.
    fn reaches(&self, k: usize, i: usize, j: usize) -> PyResult<bool> {
        let m = self
            .0
            .per_layer
            .get(k.wrapping_sub(1))
            .ok_or_else(|| PyValueError::new_err("k out of range"))?;
        if i >= m.size() || j >= m.size() {
            return Err(PyValueError::new_err("query index out of range"));
        }
        Ok(m.get(i, j))
    }

    fn grid(&self) -> String {
        self.0.ascii_grid()
    }

    #[pyo3(signature = (matrices=false))]
    fn to_dict(&self, py: Python<'_>, matrices: bool) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0.to_json(matrices))
    }
}

/// `specs` is one spec JSON string or a list of them, cycled over layers.
#[pyfunction]
fn reachability(
    specs: Vec<String>,
    geometry: &PyGeometry,
    depth: usize,
) -> PyResult<PyReachability> {
    let specs = specs
        .iter()
        .map(|s| spec(s))
        .collect::<PyResult<Vec<_>>>()?;
    reach_core(&specs, geometry.0, depth)
        .map(PyReachability)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (specs, geometry, d, heads=1))]
fn cost(
    py: Python<'_>,
    specs: Vec<String>,
    geometry: &PyGeometry,
    d: usize,
    heads: usize,
) -> PyResult<Py<PyAny>> {
    let specs = specs
        .iter()
        .map(|s| spec(s))
        .collect::<PyResult<Vec<_>>>()?;
    let report = cost_report(&specs, geometry.0, d, heads).map_err(err)?;
    to_py(
        py,
        &serde_json::to_value(report).map_err(|e| PyValueError::new_err(e.to_string()))?,
    )
}

fn single_linear(
    weight: Option<Vec<Vec<f64>>>,
    bias: Option<Vec<f64>>,
    input: usize,
    output: usize,
) -> PyResult<MlpParams> {
    let layer = match weight {
        Some(w) => {
            let w = matrix(w)?;
            let b = bias.unwrap_or_else(|| vec![0.0; w.cols()]);
            Linear::new(w, b).map_err(err)?
        }
        None if input == output => Linear::identity(input),
        None => Linear::zeros(input, output),
    };
    MlpParams::new(vec![layer], Activation::Identity).map_err(err)
}

/// Mask logits `[query][frame][pixel]`; `features` has `frames·height·width` rows.
#[pyfunction]
#[pyo3(signature = (features, frames, height, width, global_out, hs_weight=None, hs_bias=None))]
fn segment(
    features: Vec<Vec<f64>>,
    frames: usize,
    height: usize,
    width: usize,
    global_out: Vec<Vec<f64>>,
    hs_weight: Option<Vec<Vec<f64>>>,
    hs_bias: Option<Vec<f64>>,
) -> PyResult<Vec<Vec<Vec<f64>>>> {
    let fm = MaskFeatureVolume::new(frames, height, width, 1, matrix(features)?).map_err(err)?;
    let g = matrix(global_out)?;
    let hs = single_linear(hs_weight, hs_bias, fm.channels(), fm.channels())?;
    let logits = segment_core(&fm, &g, &hs).map_err(err)?;
    Ok((0..logits.queries)
        .map(|i| {
            (0..logits.frames)
                .map(|t| logits.frame(i, t).to_vec())
                .collect()
        })
        .collect())
}

/// Returns `(logits, probabilities)`; a missing weight means a zero head.
#[pyfunction]
#[pyo3(signature = (global_out, sentence, hc_weight=None, hc_bias=None))]
fn classify(
    global_out: Vec<Vec<f64>>,
    sentence: Vec<f64>,
    hc_weight: Option<Vec<Vec<f64>>>,
    hc_bias: Option<Vec<f64>>,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let hc = single_linear(hc_weight, hc_bias, 2 * sentence.len(), 1)?;
    let s = classify_core(&matrix(global_out)?, &sentence, &hc).map_err(err)?;
    Ok((s.logits, s.probs))
}

#[pyfunction]
#[pyo3(signature = (scores, mode="single", sigma=ltca_core::heads::DEFAULT_SIGMA))]
fn select(scores: Vec<f64>, mode: &str, sigma: f64) -> PyResult<Vec<usize>> {
    select_core(&scores, mode.parse().map_err(err)?, sigma).map_err(err)
}

/// Writes a fixture (scene tensors plus pipeline file) and returns the blob centres.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=None))]
fn write_golden(out_dir: PathBuf, seed: Option<u64>) -> PyResult<Vec<(usize, usize)>> {
    let mut scene = SyntheticScene::golden();
    if let Some(s) = seed {
        scene.seed = s;
    }
    let data = gen_scene(&scene).map_err(err)?;
    write_fixture(&out_dir, &data).map_err(err)?;
    Ok(data.centers)
}

/// Runs the pipeline on a fixture directory and writes outputs; returns the selection.
#[pyfunction]
#[pyo3(signature = (fixture_dir, out_dir, mode="single", sigma=ltca_core::heads::DEFAULT_SIGMA, seed=None))]
fn infer(
    fixture_dir: PathBuf,
    out_dir: PathBuf,
    mode: &str,
    sigma: f64,
    seed: Option<u64>,
) -> PyResult<Vec<usize>> {
    let mut pipe = load_pipeline(&fixture_dir.join("pipeline.json")).map_err(err)?;
    if let Some(s) = seed {
        pipe.ltca = pipe.ltca.reseeded(s);
    }
    let scene = load_scene(&fixture_dir.join("scene")).map_err(err)?;
    let inf = run_inference(&pipe, &scene, mode.parse().map_err(err)?, sigma).map_err(err)?;
    write_inference(&out_dir, &inf).map_err(err)?;
    Ok(inf.selected)
}

/// CSV with wall time zeroed, so results are reproducible.
#[pyfunction]
#[pyo3(name = "bench", signature = (sweep, n1=4, n2=2, d=4, seed=0))]
fn bench_csv(sweep: Vec<usize>, n1: usize, n2: usize, d: usize, seed: u64) -> PyResult<String> {
    let cfg = BenchConfig {
        sweep,
        n1,
        n2,
        d,
        seed,
        wall: false,
        repeats: 1,
        ..Default::default()
    };
    run_bench(&cfg).map(|rows| to_csv(&rows)).map_err(err)
}

#[pymodule]
fn ltca(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGeometry>()?;
    m.add_class::<PyAllowList>()?;
    m.add_class::<PyReachability>()?;
    m.add_function(wrap_pyfunction!(build_mask, m)?)?;
    m.add_function(wrap_pyfunction!(parse_allow_list, m)?)?;
    m.add_function(wrap_pyfunction!(sinusoidal_pe, m)?)?;
    m.add_function(wrap_pyfunction!(attention, m)?)?;
    m.add_function(wrap_pyfunction!(reachability, m)?)?;
    m.add_function(wrap_pyfunction!(cost, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(select, m)?)?;
    m.add_function(wrap_pyfunction!(write_golden, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(bench_csv, m)?)?;
    Ok(())
}
