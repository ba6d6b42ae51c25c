//! Complexity sweep over video length.
//!
//! For each `T` and each of full attention, shift-window attention and the
//! long-range union, one attention layer runs on random inputs. The MAC column
//! comes from the engine's instrumentation and is portable; the wall-clock
//! column is the median of several repeats and is not.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::engine::{
    attention_dense_counted, attention_sparse_counted, AttentionOptions, LayerParams, MacCount,
};
use crate::error::{Error, Result};
use crate::mask::{realize, Geometry, MaskSpec};
use crate::numeric::Matrix;
use crate::query::QueryBundle;
use crate::rng::SplitMix64;

pub const CSV_HEADER: &str = "T,spec,pairs,macs,wall_ns";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub sweep: Vec<usize>,
    pub n1: usize,
    pub n2: usize,
    pub d: usize,
    /// Shift-window block size of the baseline.
    pub ws: usize,
    /// Long-range union under test; its random seed is replaced by `seed`.
    pub ltca: MaskSpec,
    pub seed: u64,
    pub repeats: usize,
    /// When off, `wall_ns` is written as 0 so output is byte-reproducible.
    pub wall: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sweep: vec![32, 64, 128, 256],
            n1: 4,
            n2: 2,
            d: 4,
            ws: 2,
            ltca: MaskSpec::ltca_default(0),
            seed: 0,
            repeats: 5,
            wall: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchRow {
    pub t: usize,
    pub spec: String,
    pub pairs: usize,
    pub macs: u64,
    pub wall_ns: u64,
}

impl BenchConfig {
    /// `(name, spec)` for one video length.
    pub fn specs(&self, t: usize) -> Vec<(&'static str, MaskSpec)> {
        let with_global = |s: MaskSpec| {
            if self.n2 > 0 {
                MaskSpec::union(vec![s, MaskSpec::Global])
            } else {
                s
            }
        };
        vec![
            ("full", with_global(MaskSpec::Window { w: 2 * t })),
            (
                "shift_window",
                with_global(MaskSpec::ShiftWindow {
                    ws: self.ws,
                    offset: 0,
                }),
            ),
            ("ltca", self.ltca.with_seed(self.seed)),
        ]
    }

    fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::param("benchmark sweep is empty"));
        }
        if self.repeats == 0 {
            return Err(Error::param("benchmark needs at least one repeat"));
        }
        if self.d == 0 {
            return Err(Error::param("benchmark width must be positive"));
        }
        Ok(())
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.validate()?;
    let opts = AttentionOptions::default();
    let mut rows = Vec::new();
    for &t in &cfg.sweep {
        let g = Geometry::new(t, cfg.n1, cfg.n2)?;
        let mut rng = SplitMix64::for_stream(cfg.seed, t as u64);
        let x = QueryBundle::new(
            g,
            Matrix::from_fn(g.total(), cfg.d, |_, _| rng.next_signed()),
        )?;
        let params = LayerParams::random(cfg.d, 0.5, &mut rng);
        for (name, spec) in cfg.specs(t) {
            let mask = realize(&spec, g)?;
            let dense = name == "full";
            let run = |counter: &mut MacCount| {
                if dense {
                    attention_dense_counted(&x, &params, &mask, &opts, counter)
                } else {
                    attention_sparse_counted(&x, &params, &mask, &opts, counter)
                }
            };
            let mut counter = MacCount::default();
            run(&mut counter)?;
            let wall_ns = if cfg.wall {
                let mut times = Vec::with_capacity(cfg.repeats);
                for _ in 0..cfg.repeats {
                    let start = Instant::now();
                    run(&mut MacCount::default())?;
                    times.push(start.elapsed().as_nanos() as u64);
                }
                times.sort_unstable();
                times[times.len() / 2]
            } else {
                0
            };
            rows.push(BenchRow {
                t,
                spec: name.to_string(),
                pairs: mask.pair_count(),
                macs: counter.total(),
                wall_ns,
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.t, r.spec, r.pairs, r.macs, r.wall_ns
        );
    }
    out
}
