//! Multi-layer reachability.
//!
//! Content flows from key to query: if `(i, j)` is permitted, query `i` reads
//! `j`. Entry `(i, j)` of the `k`-layer matrix says that input `j` can
//! influence output `i` after `k` layers. The residual connection keeps every
//! query's own information, so each layer's relation is made reflexive.

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::mask::{realize, AllowList, Geometry, MaskSpec};

/// Square boolean matrix with bit-packed rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    n: usize,
    words: usize,
    bits: Vec<u64>,
}

impl BitMatrix {
    pub fn new(n: usize) -> Self {
        let words = n.div_ceil(64);
        Self {
            n,
            words,
            bits: vec![0; n * words],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::new(n);
        for i in 0..n {
            m.set(i, i);
        }
        m
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.words + j / 64] >> (j % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize) {
        self.bits[i * self.words + j / 64] |= 1 << (j % 64);
    }

    fn row(&self, i: usize) -> &[u64] {
        &self.bits[i * self.words..(i + 1) * self.words]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.n * self.n
    }

    /// One layer: row `i` becomes the OR of the rows of `i` and of its permitted keys.
    fn step(&self, mask: &AllowList) -> Self {
        let mut out = Self::new(self.n);
        for i in 0..self.n {
            let dst = &mut out.bits[i * self.words..(i + 1) * self.words];
            dst.copy_from_slice(self.row(i));
            for &m in mask.row(i) {
                for (d, s) in dst.iter_mut().zip(self.row(m)) {
                    *d |= s;
                }
            }
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<bool>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReachabilityReport {
    pub geometry: Geometry,
    pub labels: Vec<String>,
    /// `per_layer[k - 1]` is the `k`-layer relation.
    pub per_layer: Vec<BitMatrix>,
    /// Smallest `k` with full reachability, if reached within the analysed depth.
    pub diameter: Option<usize>,
    /// Per `k`: largest frame distance over reachable object pairs.
    pub max_frame_span: Vec<usize>,
    pub reachable_pairs: Vec<usize>,
}

/// Layer `l` uses `specs[l % specs.len()]`, so a single spec repeats and a
/// two-element list alternates.
pub fn reachability(specs: &[MaskSpec], g: Geometry, layers: usize) -> Result<ReachabilityReport> {
    if layers == 0 {
        return Err(Error::param("reachability needs at least one layer"));
    }
    if specs.is_empty() {
        return Err(Error::param("reachability needs at least one mask spec"));
    }
    let masks = specs
        .iter()
        .map(|s| realize(s, g))
        .collect::<Result<Vec<_>>>()?;
    let mut current = BitMatrix::identity(g.total());
    let mut per_layer = Vec::with_capacity(layers);
    for l in 0..layers {
        current = current.step(&masks[l % masks.len()]);
        per_layer.push(current.clone());
    }
    let diameter = per_layer.iter().position(BitMatrix::is_full).map(|k| k + 1);
    let max_frame_span = per_layer.iter().map(|m| frame_span(m, g)).collect();
    let reachable_pairs = per_layer.iter().map(BitMatrix::count).collect();
    let labels = (0..layers)
        .map(|l| specs[l % specs.len()].label())
        .collect();
    Ok(ReachabilityReport {
        geometry: g,
        labels,
        per_layer,
        diameter,
        max_frame_span,
        reachable_pairs,
    })
}

fn frame_span(m: &BitMatrix, g: Geometry) -> usize {
    let mut best = 0;
    for i in g.n2..g.total() {
        let fi = g.frame_unchecked(i).expect("object query");
        for j in g.n2..g.total() {
            if m.get(i, j) {
                best = best.max(fi.abs_diff(g.frame_unchecked(j).expect("object query")));
            }
        }
    }
    best
}

impl ReachabilityReport {
    pub fn layers(&self) -> usize {
        self.per_layer.len()
    }

    /// First `k` at which any object query of frame `a` sees any of frame `b` (1-based frames).
    pub fn frame_reach_layer(&self, a: usize, b: usize) -> Option<usize> {
        let g = self.geometry;
        self.per_layer
            .iter()
            .position(|m| {
                g.frame_range(a)
                    .any(|i| g.frame_range(b).any(|j| m.get(i, j)))
            })
            .map(|k| k + 1)
    }

    pub fn to_json(&self, include_matrices: bool) -> Value {
        let g = self.geometry;
        let mut v = json!({
            "geometry": { "t": g.t, "n1": g.n1, "n2": g.n2 },
            "layers": self.layers(),
            "masks": self.labels,
            "diameter": match self.diameter {
                Some(k) => json!(k),
                None => json!("unreachable"),
            },
            "max_frame_span": self.max_frame_span,
            "reachable_pairs": self.reachable_pairs,
        });
        if include_matrices {
            let mats: Vec<Vec<String>> = self
                .per_layer
                .iter()
                .map(|m| {
                    (0..m.size())
                        .map(|i| {
                            (0..m.size())
                                .map(|j| if m.get(i, j) { '1' } else { '0' })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            v["per_layer"] = json!(mats);
        }
        v
    }

    /// Frame-by-frame grid: the cell in row `a`, column `b` is the first layer
    /// count at which frame `a` sees frame `b` (`.` if never within the
    /// analysed depth, digits then letters).
    pub fn ascii_grid(&self) -> String {
        let g = self.geometry;
        let mut out = String::new();
        out.push_str(&format!(
            "reachability {} layers={} diameter: {}\n",
            g,
            self.layers(),
            self.diameter
                .map_or("unreachable".to_string(), |k| k.to_string())
        ));
        for a in 1..=g.t {
            let line: String = (1..=g.t)
                .map(|b| match self.frame_reach_layer(a, b) {
                    None => '.',
                    Some(k) if k < 10 => char::from(b'0' + k as u8),
                    Some(k) if k < 36 => char::from(b'a' + (k - 10) as u8),
                    Some(_) => '+',
                })
                .collect();
            out.push_str(&line);
            out.push('\n');
        }
        out.push_str("k span pairs\n");
        for k in 0..self.layers() {
            out.push_str(&format!(
                "{} {} {}\n",
                k + 1,
                self.max_frame_span[k],
                self.reachable_pairs[k]
            ));
        }
        out
    }
}

/// Diameters of one spec list across seeds. Layer `l` of a run with seed `s`
/// reseeds its random components to `s + l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub diameters: Vec<Option<usize>>,
    pub min_diameter: Option<usize>,
    /// Mean over the seeds that reached full connectivity.
    pub mean_diameter: Option<f64>,
    pub unreachable: usize,
}

pub fn seed_sweep(
    specs: &[MaskSpec],
    g: Geometry,
    layers: usize,
    seeds: &[u64],
) -> Result<SeedSummary> {
    let mut diameters = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let per_layer: Vec<MaskSpec> = (0..layers)
            .map(|l| specs[l % specs.len().max(1)].with_seed(seed.wrapping_add(l as u64)))
            .collect();
        diameters.push(reachability(&per_layer, g, layers)?.diameter);
    }
    let reached: Vec<usize> = diameters.iter().flatten().copied().collect();
    Ok(SeedSummary {
        min_diameter: reached.iter().copied().min(),
        mean_diameter: (!reached.is_empty())
            .then(|| reached.iter().sum::<usize>() as f64 / reached.len() as f64),
        unreachable: diameters.len() - reached.len(),
        diameters,
    })
}
