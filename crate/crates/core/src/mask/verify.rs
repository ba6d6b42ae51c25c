//! Pairwise membership predicates, evaluated independently of the builders.

use super::build::random_frames;
use super::{AllowList, Geometry, MaskSpec};

/// The `M_ij = 0` condition of a [`MaskSpec`] for one geometry.
#[derive(Debug, Clone)]
pub struct Predicate {
    g: Geometry,
    parts: Vec<Part>,
}

#[derive(Debug, Clone)]
enum Part {
    Window {
        w: usize,
    },
    Dilated {
        w: usize,
        d: usize,
    },
    /// `psi[f - 1]` flags the frames drawn for source frame `f`.
    Random {
        psi: Vec<Vec<bool>>,
    },
    Global,
    Shift {
        ws: usize,
        offset: usize,
    },
}

impl Predicate {
    /// `None` when the mask spec is invalid for `g`.
    pub fn new(spec: &MaskSpec, g: Geometry) -> Option<Self> {
        spec.validate(Some(&g)).ok()?;
        let parts = spec
            .parts()
            .iter()
            .map(|p| match *p {
                MaskSpec::Window { w } => Part::Window { w },
                MaskSpec::Dilated { w, d } => Part::Dilated { w, d },
                MaskSpec::Random { r, seed } => Part::Random {
                    psi: (1..=g.t)
                        .map(|f| {
                            let mut flags = vec![false; g.t];
                            for x in random_frames(g.t, r, seed, f) {
                                flags[x - 1] = true;
                            }
                            flags
                        })
                        .collect(),
                },
                MaskSpec::Global => Part::Global,
                MaskSpec::ShiftWindow { ws, offset } => Part::Shift { ws, offset },
                MaskSpec::Union { .. } => unreachable!("validated: no nested unions"),
            })
            .collect();
        Some(Self { g, parts })
    }

    pub fn allows(&self, i: usize, j: usize) -> bool {
        let fi = self.g.frame_unchecked(i);
        let fj = self.g.frame_unchecked(j);
        self.parts.iter().any(|p| match (p, fi, fj) {
            (Part::Global, _, _) => fi.is_none() || fj.is_none(),
            (_, Some(a), Some(b)) => {
                let delta = a.abs_diff(b);
                match p {
                    Part::Window { w } => 2 * delta <= *w,
                    Part::Dilated { w, d } => delta % d == 0 && 2 * delta <= d * w,
                    Part::Random { psi } => psi[a - 1][b - 1],
                    Part::Shift { ws, offset } => {
                        let block =
                            |f: usize| (f as i64 - 1 - *offset as i64).div_euclid(*ws as i64);
                        block(a) == block(b)
                    }
                    Part::Global => unreachable!(),
                }
            }
            // local families never touch global queries
            _ => false,
        })
    }
}

/// Whether `a` equals the pair set the predicates of `spec` describe, checked
/// over every `(i, j)`.
pub fn verify_against_formula(a: &AllowList, spec: &MaskSpec) -> bool {
    let g = a.geometry();
    let Some(pred) = Predicate::new(spec, g) else {
        return false;
    };
    let n = g.total();
    (0..n).all(|i| {
        let row = a.row(i);
        let mut next = 0;
        (0..n).all(|j| {
            let present = row.get(next) == Some(&j);
            if present {
                next += 1;
            }
            present == pred.allows(i, j)
        })
    })
}
