use std::fs;
use std::path::{Path, PathBuf};

use ltca_core::analysis::{reachability, seed_sweep};
use ltca_core::bench::{run_bench, to_csv, BenchConfig};
use ltca_core::engine::{
    attention_dense, attention_sparse, AttentionOptions, LayerParams, LtcaModule, MacCount,
    Path as Kernel,
};
use ltca_core::fixtures::{gen_scene, load_scene, SyntheticScene};
use ltca_core::heads::SelectMode;
use ltca_core::mask::{realize, verify_against_formula, write_allow_list, Geometry, MaskSpec};
use ltca_core::numeric::Matrix;
use ltca_core::pipeline::{load_pipeline, run_inference, write_fixture, write_inference, Pipeline};
use ltca_core::query::QueryBundle;
use ltca_core::rng::SplitMix64;
use ltca_core::Error;
use serde_json::{json, Value};

use crate::{BenchArgs, Common, GenArgs, InferArgs, InspectArgs, ReachArgs, VerifyArgs};

/// Failure classes and their exit codes.
pub enum Failure {
    Verification(String),
    Usage(String),
    Io(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Verification(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Io(format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

/// A spec file holds one spec or, for per-layer use, a JSON array of specs.
fn read_specs(path: &Path) -> Result<Vec<MaskSpec>, Failure> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let items = match value {
        Value::Array(items) => items,
        single => vec![single],
    };
    if items.is_empty() {
        return Err(Failure::Usage(format!(
            "{}: empty spec list",
            path.display()
        )));
    }
    items
        .into_iter()
        .map(|v| {
            let spec: MaskSpec = serde_json::from_value(v)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            spec.validate(None)?;
            Ok(spec)
        })
        .collect()
}

fn specs_or_default(common: &Common) -> Result<Vec<MaskSpec>, Failure> {
    match &common.mask {
        Some(p) => read_specs(p),
        None => Ok(vec![MaskSpec::ltca_default(common.seed)]),
    }
}

/// One spec per family that makes sense on `g`, plus the default union.
fn builder_suite(g: Geometry, seed: u64) -> Vec<MaskSpec> {
    let mut specs = vec![
        MaskSpec::Window { w: 2 },
        MaskSpec::Dilated { w: 2, d: 2 },
        MaskSpec::Random {
            r: g.t.min(2),
            seed,
        },
        MaskSpec::ShiftWindow { ws: 2, offset: 0 },
        MaskSpec::ShiftWindow { ws: 2, offset: 1 },
    ];
    if g.n2 > 0 {
        specs.push(MaskSpec::Global);
        specs.push(MaskSpec::ltca_default(seed));
    }
    specs
}

/// Adds what a spec needs so no row is left empty.
fn covering(spec: &MaskSpec, g: Geometry) -> MaskSpec {
    let mut parts = spec.parts().to_vec();
    parts.push(MaskSpec::Window { w: 0 });
    if g.n2 > 0 && !spec.contains_global() {
        parts.push(MaskSpec::Global);
    }
    MaskSpec::union(parts)
}

pub fn verify(a: VerifyArgs) -> Result<(), Failure> {
    if !(a.tolerance > 0.0 && a.tolerance.is_finite()) {
        return Err(Failure::Usage(format!(
            "--tolerance must be positive, got {}",
            a.tolerance
        )));
    }
    if a.d == 0 {
        return Err(Failure::Usage("--d must be positive".into()));
    }
    let g = a.common.geometry;
    let seed = a.common.seed;
    let specs = match &a.common.mask {
        Some(p) => read_specs(p)?,
        None => builder_suite(g, seed),
    };

    let mut ok = true;
    let mut formula = Vec::new();
    for (k, spec) in specs.iter().enumerate() {
        let mut list = realize(spec, g)?;
        if a.inject_mutation && k == 0 {
            let last = g.total() - 1;
            list = list.toggled(last, 0);
        }
        let pass = verify_against_formula(&list, spec);
        ok &= pass;
        formula.push(json!({ "mask": spec.label(), "pairs": list.pair_count(), "ok": pass }));
    }

    let mut rng = SplitMix64::new(seed);
    let opts = AttentionOptions::default();
    let mut worst = 0.0f64;
    for trial in 0..a.trials {
        let spec = covering(
            &specs[trial % specs.len()].with_seed(seed.wrapping_add(trial as u64)),
            g,
        );
        let mask = realize(&spec, g)?;
        let x = QueryBundle::new(g, Matrix::from_fn(g.total(), a.d, |_, _| rng.next_signed()))?;
        let p = LayerParams::random(a.d, 0.7, &mut rng);
        let dense = attention_dense(&x, &p, &mask, &opts)?;
        let sparse = attention_sparse(&x, &p, &mask, &opts)?;
        worst = worst.max(dense.features.max_abs_diff(&sparse.features)?);
    }
    let mut report = json!({
        "geometry": { "t": g.t, "n1": g.n1, "n2": g.n2 },
        "seed": seed,
        "formula": formula,
        "trials": a.trials,
        "max_deviation": worst,
        "tolerance": a.tolerance,
    });
    ok &= worst <= a.tolerance;

    if let Some(path) = &a.layers {
        let pipe = load_pipeline(path)?;
        let d = pipe.ltca.width().unwrap_or(a.d);
        let module = LtcaModule::new(pipe.ltca, g)?;
        let x = QueryBundle::new(g, Matrix::from_fn(g.total(), d, |_, _| rng.next_signed()))?;
        let dense = module.forward_with(&x, Kernel::Dense, &mut MacCount::default())?;
        let sparse = module.forward_with(&x, Kernel::Sparse, &mut MacCount::default())?;
        let dev = dense.features.max_abs_diff(&sparse.features)?;
        ok &= dev <= a.tolerance;
        report["stack_deviation"] = json!(dev);
    }
    report["ok"] = json!(ok);

    let text = pretty(&report);
    match &a.out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Verification("verification failed".into()))
    }
}

pub fn inspect(a: InspectArgs) -> Result<(), Failure> {
    let g = a.common.geometry;
    let specs = specs_or_default(&a.common)?;
    let spec = specs.into_iter().next().expect("non-empty");
    let list = realize(&spec, g)?;
    let parts: Vec<Value> = spec
        .parts()
        .iter()
        .map(|p| Ok(json!({ "mask": p.label(), "pairs": realize(p, g)?.pair_count() })))
        .collect::<Result<_, Failure>>()?;
    let cost = ltca_core::analysis::cost_report(std::slice::from_ref(&spec), g, a.d, 1)?;
    let report = json!({
        "geometry": { "t": g.t, "n1": g.n1, "n2": g.n2 },
        "mask": spec.label(),
        "pairs": list.pair_count(),
        "density": list.pair_count() as f64 / (g.total() * g.total()) as f64,
        "symmetric": list.is_symmetric(),
        "first_empty_row": list.first_empty_row(),
        "parts": parts,
        "macs": cost.layers[0].macs,
    });
    print!("{}", pretty(&report));
    if let Some(path) = &a.out {
        write_text(path, &write_allow_list(&list))?;
    }
    Ok(())
}

pub fn reach(a: ReachArgs) -> Result<(), Failure> {
    if a.depth == 0 {
        return Err(Failure::Usage("--depth must be at least 1".into()));
    }
    let g = a.common.geometry;
    let specs = specs_or_default(&a.common)?;
    let rep = reachability(&specs, g, a.depth)?;
    let mut report = rep.to_json(a.matrices);
    if a.seeds > 0 {
        let seeds: Vec<u64> = (a.common.seed..a.common.seed + a.seeds).collect();
        let s = seed_sweep(&specs, g, a.depth, &seeds)?;
        report["seed_sweep"] = json!({
            "seeds": seeds.len(),
            "min_diameter": s.min_diameter,
            "mean_diameter": s.mean_diameter,
            "unreachable": s.unreachable,
        });
    }
    let grid = rep.ascii_grid();
    print!("{grid}");
    if let Some(dir) = &a.out {
        write_text(&dir.join("reach.json"), &pretty(&report))?;
        write_text(&dir.join("reach.txt"), &grid)?;
    }
    Ok(())
}

pub fn bench(a: BenchArgs) -> Result<(), Failure> {
    let ltca = match &a.mask {
        Some(p) => read_specs(p)?.into_iter().next().expect("non-empty"),
        None => MaskSpec::ltca_default(a.seed),
    };
    let cfg = BenchConfig {
        sweep: a.sweep,
        n1: a.n1,
        n2: a.n2,
        d: a.d,
        ws: a.ws,
        ltca,
        seed: a.seed,
        repeats: a.repeats,
        wall: !a.no_wall,
    };
    let csv = to_csv(&run_bench(&cfg)?);
    match &a.out {
        Some(p) => write_text(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn fixture_paths(a: &InferArgs) -> Result<(PathBuf, PathBuf), Failure> {
    let layers = a
        .layers
        .clone()
        .or_else(|| a.fixture.as_ref().map(|f| f.join("pipeline.json")));
    let scene = a
        .scene
        .clone()
        .or_else(|| a.fixture.as_ref().map(|f| f.join("scene")));
    match (layers, scene) {
        (Some(l), Some(s)) => {
            for p in [&l, &s] {
                if !p.exists() {
                    return Err(Failure::Io(format!("{}: fixture not found", p.display())));
                }
            }
            Ok((l, s))
        }
        _ => Err(Failure::Usage(
            "infer needs --fixture, or both --layers and --scene".into(),
        )),
    }
}

pub fn infer(a: InferArgs) -> Result<(), Failure> {
    let mode: SelectMode = a.mode.parse()?;
    if !a.sigma.is_finite() {
        return Err(Failure::Usage("--sigma must be finite".into()));
    }
    let (layers, scene_dir) = fixture_paths(&a)?;
    let mut pipe: Pipeline = load_pipeline(&layers)?;
    if let Some(seed) = a.seed {
        pipe.ltca = pipe.ltca.reseeded(seed);
    }
    let scene = load_scene(&scene_dir)?;
    let inf = run_inference(&pipe, &scene, mode, a.sigma)?;
    write_inference(&a.out, &inf)?;
    println!("selected {:?}", inf.selected);
    Ok(())
}

pub fn gen(a: GenArgs) -> Result<(), Failure> {
    let mut scene = match &a.scene {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(io_err(p))?;
            serde_json::from_str::<SyntheticScene>(&text)
                .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?
        }
        None => SyntheticScene::golden(),
    };
    if let Some(seed) = a.seed {
        scene.seed = seed;
    }
    write_fixture(&a.out, &gen_scene(&scene)?)?;
    Ok(())
}
