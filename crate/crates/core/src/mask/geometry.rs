use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sequence layout: global queries occupy `[0, n2)`; the object query for
/// 1-based frame `f` and 0-based slot `s` sits at `n2 + (f - 1) * n1 + s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Geometry {
    pub t: usize,
    pub n1: usize,
    pub n2: usize,
}

impl Geometry {
    pub fn new(t: usize, n1: usize, n2: usize) -> Result<Self> {
        if t == 0 || n1 == 0 {
            return Err(Error::param(format!(
                "geometry needs T >= 1 and N1 >= 1 (got T={t}, N1={n1})"
            )));
        }
        Ok(Self { t, n1, n2 })
    }

    /// Total query count `N2 + T * N1`.
    #[inline]
    pub fn total(&self) -> usize {
        self.n2 + self.t * self.n1
    }

    #[inline]
    pub fn object_count(&self) -> usize {
        self.t * self.n1
    }

    #[inline]
    pub fn is_global(&self, q: usize) -> bool {
        q < self.n2
    }

    /// 1-based frame of query `q`, or `None` for a global query.
    pub fn frame_of(&self, q: usize) -> Result<Option<usize>> {
        if q >= self.total() {
            return Err(Error::Index {
                index: q,
                len: self.total(),
            });
        }
        Ok(self.frame_unchecked(q))
    }

    #[inline]
    pub(crate) fn frame_unchecked(&self, q: usize) -> Option<usize> {
        if q < self.n2 {
            None
        } else {
            Some((q - self.n2) / self.n1 + 1)
        }
    }

    /// Index of the object query in 1-based `frame`, 0-based `slot`.
    #[inline]
    pub fn object_index(&self, frame: usize, slot: usize) -> usize {
        debug_assert!((1..=self.t).contains(&frame) && slot < self.n1);
        self.n2 + (frame - 1) * self.n1 + slot
    }

    /// Index range of all object queries of a 1-based frame.
    #[inline]
    pub fn frame_range(&self, frame: usize) -> std::ops::Range<usize> {
        let start = self.object_index(frame, 0);
        start..start + self.n1
    }

    pub fn with_frames(&self, t: usize) -> Self {
        Self { t, ..*self }
    }
}

impl std::fmt::Display for Geometry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "T={} N1={} N2={}", self.t, self.n1, self.n2)
    }
}

impl std::str::FromStr for Geometry {
    type Err = Error;

    /// Parses `T,N1,N2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let nums: Vec<usize> = parts
            .iter()
            .map(|p| p.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::param(format!("geometry must be T,N1,N2; got {s:?}")))?;
        match nums[..] {
            [t, n1, n2] => Geometry::new(t, n1, n2),
            _ => Err(Error::param(format!("geometry must be T,N1,N2; got {s:?}"))),
        }
    }
}
