//! Rolled-key realisation of (dilated) window attention, optionally combined
//! with global queries.
//!
//! Instead of gathering an arbitrary key list per row, every object row sees
//! the same slot layout: the `N2` global keys, then for each frame shift
//! `k·d` (`|k| <= ⌊w/2⌋`) the `N1` queries of the shifted frame. Each
//! `(shift, slot)` pair is one rolled copy of the key matrix; shifts that fall
//! off either end of the video are masked. Slots are ordered exactly like the
//! sorted key indices of the gather path, so both paths reduce in the same
//! order.

use super::attention::{check_inputs, project, MacCount, SOFTMAX_OPS_PER_PAIR};
use super::params::{AttentionOptions, LayerParams};
use crate::error::{Error, Result};
use crate::mask::{realize, AllowList, MaskSpec};
use crate::numeric::{dot, row_softmax_in_place, Matrix};
use crate::query::QueryBundle;

/// A uniform dilated pattern the rolled path can execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RolledPattern {
    pub w: usize,
    pub d: usize,
    pub global: bool,
}

impl RolledPattern {
    /// Accepts a single window or dilated family, optionally with global.
    pub fn from_spec(spec: &MaskSpec) -> Option<Self> {
        let mut local = None;
        let mut global = false;
        for part in spec.parts() {
            let this = match *part {
                MaskSpec::Window { w } => (w, 1),
                MaskSpec::Dilated { w, d } if d >= 1 => (w, d),
                MaskSpec::Global => {
                    global = true;
                    continue;
                }
                _ => return None,
            };
            if local.replace(this).is_some() {
                return None;
            }
        }
        local.map(|(w, d)| Self { w, d, global })
    }

    pub fn spec(&self) -> MaskSpec {
        let local = MaskSpec::Dilated {
            w: self.w,
            d: self.d,
        };
        if self.global {
            MaskSpec::union(vec![local, MaskSpec::Global])
        } else {
            local
        }
    }

    /// The equivalent allow-list, for cross-checking against the gather path.
    pub fn allow_list(&self, g: crate::mask::Geometry) -> Result<AllowList> {
        realize(&self.spec(), g)
    }
}

pub fn attention_rolled(
    x: &QueryBundle,
    p: &LayerParams,
    pattern: RolledPattern,
    opts: &AttentionOptions,
) -> Result<QueryBundle> {
    attention_rolled_counted(x, p, pattern, opts, &mut MacCount::default())
}

pub fn attention_rolled_counted(
    x: &QueryBundle,
    p: &LayerParams,
    pattern: RolledPattern,
    opts: &AttentionOptions,
    counter: &mut MacCount,
) -> Result<QueryBundle> {
    let g = x.geometry;
    // shape checks only; the pattern itself is never materialised
    check_inputs(x, p, &AllowList::empty(g))?;
    if pattern.d == 0 {
        return Err(Error::param("dilation d must be >= 1"));
    }
    if g.n2 > 0 && !pattern.global {
        return Err(Error::DegenerateRow { row: 0 });
    }
    let (n, d) = x.features.shape();
    let hw = opts.head_width(d)?;
    let scale = opts.logit_scale(hw);
    let proj = project(&x.features, p, counter)?;

    let half = (pattern.w / 2) as i64;
    let shifts: Vec<i64> = (-half..=half).map(|k| k * pattern.d as i64).collect();
    let n_glob = if pattern.global { g.n2 } else { 0 };
    let slots = n_glob + shifts.len() * g.n1;
    let n_obj = g.object_count();

    let mut out = Matrix::zeros(n, d);
    let mut logits = vec![f64::NEG_INFINITY; n_obj * slots];
    let mut macs = 0u64;

    for h in 0..opts.heads {
        let cols = h * hw..(h + 1) * hw;
        let q = |i: usize| &proj.q.row(i)[cols.clone()];
        let k = |j: usize| &proj.k.row(j)[cols.clone()];
        let v = |j: usize| &proj.v.row(j)[cols.clone()];

        // global rows attend everything
        for i in 0..g.n2 {
            let mut w: Vec<f64> = (0..n).map(|j| dot(q(i), k(j)) * scale).collect();
            row_softmax_in_place(&mut w);
            let acc = &mut out.row_mut(i)[cols.clone()];
            for (j, wj) in w.iter().enumerate() {
                for (a, vv) in acc.iter_mut().zip(v(j)) {
                    *a += wj * vv;
                }
            }
            macs += n as u64 * (2 * hw as u64 + SOFTMAX_OPS_PER_PAIR);
        }

        logits.fill(f64::NEG_INFINITY);
        for r in 0..n_obj {
            for gk in 0..n_glob {
                logits[r * slots + gk] = dot(q(g.n2 + r), k(gk)) * scale;
            }
        }
        // one rolled key matrix per (shift, target slot)
        for (si, &shift) in shifts.iter().enumerate() {
            for s in 0..g.n1 {
                let slot = n_glob + si * g.n1 + s;
                for f in 1..=g.t {
                    let target = f as i64 + shift;
                    if target < 1 || target > g.t as i64 {
                        continue;
                    }
                    let key = g.object_index(target as usize, s);
                    for qi in g.frame_range(f) {
                        logits[(qi - g.n2) * slots + slot] = dot(q(qi), k(key)) * scale;
                    }
                }
            }
        }

        for r in 0..n_obj {
            let row = &mut logits[r * slots..(r + 1) * slots];
            if !row_softmax_in_place(row) {
                return Err(Error::DegenerateRow { row: g.n2 + r });
            }
            let f = r / g.n1 + 1;
            let acc = &mut out.row_mut(g.n2 + r)[cols.clone()];
            let mut visited = 0u64;
            for (slot, &wv) in row.iter().enumerate() {
                let key = if slot < n_glob {
                    slot
                } else {
                    let target = f as i64 + shifts[(slot - n_glob) / g.n1];
                    if target < 1 || target > g.t as i64 {
                        continue;
                    }
                    g.object_index(target as usize, (slot - n_glob) % g.n1)
                };
                for (a, vv) in acc.iter_mut().zip(v(key)) {
                    *a += wv * vv;
                }
                visited += 1;
            }
            macs += visited * (2 * hw as u64 + SOFTMAX_OPS_PER_PAIR);
        }
    }

    counter.attention += macs;
    counter.residual += (n * d) as u64;
    QueryBundle::new(g, out.add(&x.features)?)
}
