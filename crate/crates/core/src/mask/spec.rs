use serde::{Deserialize, Serialize};

use super::Geometry;
use crate::error::{Error, Result};

/// Declarative description of one attention pattern.
///
/// JSON form is internally tagged by `kind`, e.g. `{"kind":"dilated","w":4,"d":2}`
/// or `{"kind":"union","parts":[{"kind":"window","w":2},{"kind":"global"}]}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaskSpec {
    /// Object pairs with `|φ(i) - φ(j)| <= w / 2`.
    Window {
        w: usize,
    },
    /// Object pairs whose frame distance is a multiple of `d` and at most `d * w / 2`.
    Dilated {
        w: usize,
        d: usize,
    },
    /// Each frame attends all queries of `r` frames drawn without replacement.
    Random {
        r: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Every pair with at least one global query.
    Global,
    /// Object pairs inside the same block of `ws` consecutive frames; the first
    /// block boundary sits at frame `1 + offset`.
    ShiftWindow {
        ws: usize,
        #[serde(default)]
        offset: usize,
    },
    Union {
        parts: Vec<MaskSpec>,
    },
}

/// Default `(w, d, r)` of the long-range union.
pub const LTCA_DEFAULTS: (usize, usize, usize) = (2, 2, 1);

impl MaskSpec {
    pub fn union(parts: Vec<MaskSpec>) -> Self {
        MaskSpec::Union { parts }
    }

    /// Dilated window + random + global, the default long-range pattern.
    pub fn ltca(w: usize, d: usize, r: usize, seed: u64) -> Self {
        MaskSpec::union(vec![
            MaskSpec::Dilated { w, d },
            MaskSpec::Random { r, seed },
            MaskSpec::Global,
        ])
    }

    /// [`MaskSpec::ltca`] with the crate defaults `w = 2, d = 2, r = 1`.
    pub fn ltca_default(seed: u64) -> Self {
        let (w, d, r) = LTCA_DEFAULTS;
        Self::ltca(w, d, r, seed)
    }

    /// `layers` shift-window specs alternating offsets `0, ws/2, 0, ...`.
    pub fn shift_window_stack(ws: usize, layers: usize) -> Vec<MaskSpec> {
        (0..layers)
            .map(|l| MaskSpec::ShiftWindow {
                ws,
                offset: if l % 2 == 0 { 0 } else { ws / 2 },
            })
            .collect()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: MaskSpec = serde_json::from_str(s)?;
        spec.validate(None)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("MaskSpec serializes")
    }

    /// Parameter checks; checks that need `T` run only when `g` is given.
    pub fn validate(&self, g: Option<&Geometry>) -> Result<()> {
        match self {
            MaskSpec::Window { .. } | MaskSpec::Global => Ok(()),
            MaskSpec::Dilated { d, .. } => {
                if *d == 0 {
                    return Err(Error::param("dilation d must be >= 1"));
                }
                Ok(())
            }
            MaskSpec::Random { r, .. } => match g {
                Some(g) if *r > g.t => Err(Error::param(format!("random r={r} exceeds T={}", g.t))),
                _ => Ok(()),
            },
            MaskSpec::ShiftWindow { ws, .. } => {
                if *ws == 0 {
                    return Err(Error::param("shift window length ws must be >= 1"));
                }
                Ok(())
            }
            MaskSpec::Union { parts } => {
                if parts.is_empty() {
                    return Err(Error::param("union must have at least one part"));
                }
                for p in parts {
                    if matches!(p, MaskSpec::Union { .. }) {
                        return Err(Error::param("nested unions are not allowed"));
                    }
                    p.validate(g)?;
                }
                Ok(())
            }
        }
    }

    /// The non-union components of this spec.
    pub fn parts(&self) -> &[MaskSpec] {
        match self {
            MaskSpec::Union { parts } => parts,
            other => std::slice::from_ref(other),
        }
    }

    pub fn contains_global(&self) -> bool {
        self.parts().iter().any(|p| matches!(p, MaskSpec::Global))
    }

    pub fn contains_random(&self) -> bool {
        self.parts()
            .iter()
            .any(|p| matches!(p, MaskSpec::Random { .. }))
    }

    /// Copy with every random component reseeded to `seed`.
    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            MaskSpec::Random { r, .. } => MaskSpec::Random { r: *r, seed },
            MaskSpec::Union { parts } => MaskSpec::Union {
                parts: parts.iter().map(|p| p.with_seed(seed)).collect(),
            },
            other => other.clone(),
        }
    }

    /// Short human-readable label, e.g. `dilated(w=4,d=2)+global`.
    pub fn label(&self) -> String {
        match self {
            MaskSpec::Window { w } => format!("window(w={w})"),
            MaskSpec::Dilated { w, d } => format!("dilated(w={w},d={d})"),
            MaskSpec::Random { r, seed } => format!("random(r={r},seed={seed})"),
            MaskSpec::Global => "global".into(),
            MaskSpec::ShiftWindow { ws, offset } => format!("shift(ws={ws},off={offset})"),
            MaskSpec::Union { parts } => parts
                .iter()
                .map(MaskSpec::label)
                .collect::<Vec<_>>()
                .join("+"),
        }
    }
}
