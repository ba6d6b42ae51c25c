use super::Geometry;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Sparse attention mask: for every query row, the sorted set of key indices
/// it may attend to. Stored in compressed-row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllowList {
    geometry: Geometry,
    offsets: Vec<usize>,
    keys: Vec<usize>,
}

impl AllowList {
    /// Validates that every row is sorted, duplicate-free and in range.
    pub fn new(geometry: Geometry, rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = geometry.total();
        if rows.len() != n {
            return Err(Error::shape(
                "AllowList::new",
                format!("{} rows for {n} queries", rows.len()),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            if let Some(&k) = row.iter().find(|&&k| k >= n) {
                return Err(Error::Index { index: k, len: n });
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Format(format!("row {i} is not strictly increasing")));
            }
        }
        Ok(Self::from_rows_unchecked(geometry, rows))
    }

    pub(crate) fn from_rows_unchecked(geometry: Geometry, rows: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut keys = Vec::with_capacity(rows.iter().map(Vec::len).sum());
        for row in rows {
            keys.extend(row);
            offsets.push(keys.len());
        }
        Self {
            geometry,
            offsets,
            keys,
        }
    }

    /// Every query attends every key.
    pub fn full(geometry: Geometry) -> Self {
        let n = geometry.total();
        Self::from_rows_unchecked(geometry, vec![(0..n).collect(); n])
    }

    pub fn empty(geometry: Geometry) -> Self {
        Self::from_rows_unchecked(geometry, vec![Vec::new(); geometry.total()])
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[usize] {
        &self.keys[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn to_rows(&self) -> Vec<Vec<usize>> {
        self.rows().map(<[usize]>::to_vec).collect()
    }

    /// Number of permitted `(query, key)` pairs.
    pub fn pair_count(&self) -> usize {
        self.keys.len()
    }

    #[inline]
    pub fn allows(&self, i: usize, j: usize) -> bool {
        self.row(i).binary_search(&j).is_ok()
    }

    /// First row with no permitted key, if any.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.len()).find(|&i| self.row(i).is_empty())
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.len()).all(|i| self.row(i).iter().all(|&j| self.allows(j, i)))
    }

    /// Copy with pair `(i, j)` flipped: added if absent, removed if present.
    pub fn toggled(&self, i: usize, j: usize) -> Self {
        let mut rows = self.to_rows();
        let row = &mut rows[i];
        match row.binary_search(&j) {
            Ok(pos) => {
                row.remove(pos);
            }
            Err(pos) => row.insert(pos, j),
        }
        Self::from_rows_unchecked(self.geometry, rows)
    }

    /// Dense additive mask: `0` where allowed, `-inf` elsewhere.
    pub fn to_additive(&self) -> Matrix {
        let n = self.len();
        let mut m = Matrix::from_fn(n, n, |_, _| f64::NEG_INFINITY);
        for i in 0..n {
            for &j in self.row(i) {
                m.set(i, j, 0.0);
            }
        }
        m
    }

    /// Inverse of [`to_additive`](Self::to_additive). Entries must be `0` or `-inf`.
    pub fn from_additive(geometry: Geometry, m: &Matrix) -> Result<Self> {
        let n = geometry.total();
        if m.shape() != (n, n) {
            return Err(Error::shape(
                "from_additive",
                format!("{:?} for {n} queries", m.shape()),
            ));
        }
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            for (j, &v) in m.row(i).iter().enumerate() {
                if v == 0.0 {
                    row.push(j);
                } else if v != f64::NEG_INFINITY {
                    return Err(Error::Format(format!(
                        "additive mask entry ({i},{j}) = {v}"
                    )));
                }
            }
            rows.push(row);
        }
        Ok(Self::from_rows_unchecked(geometry, rows))
    }

    /// Dense boolean membership, row-major.
    pub fn to_bool_matrix(&self) -> Vec<Vec<bool>> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut r = vec![false; n];
                for &j in self.row(i) {
                    r[j] = true;
                }
                r
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Geometry {
        Geometry::new(2, 1, 1).unwrap()
    }

    #[test]
    fn validation() {
        assert!(AllowList::new(g(), vec![vec![0, 1], vec![2], vec![]]).is_ok());
        assert!(AllowList::new(g(), vec![vec![1, 0], vec![], vec![]]).is_err());
        assert!(AllowList::new(g(), vec![vec![1, 1], vec![], vec![]]).is_err());
        assert!(matches!(
            AllowList::new(g(), vec![vec![3], vec![], vec![]]),
            Err(Error::Index { .. })
        ));
        assert!(AllowList::new(g(), vec![vec![]]).is_err());
    }

    #[test]
    fn additive_views() {
        let a = AllowList::new(g(), vec![vec![0, 2], vec![], vec![1]]).unwrap();
        let m = a.to_additive();
        assert_eq!(m.row(1), &[f64::NEG_INFINITY; 3]);
        assert_eq!(m.row(0), &[0.0, f64::NEG_INFINITY, 0.0]);
        assert_eq!(AllowList::from_additive(g(), &m).unwrap(), a);

        let full = AllowList::full(g()).to_additive();
        assert!(full.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn toggling() {
        let a = AllowList::full(g());
        let b = a.toggled(1, 2);
        assert_eq!(b.pair_count(), 8);
        assert!(!b.allows(1, 2));
        assert_eq!(b.toggled(1, 2), a);
        assert!(!b.is_symmetric());
        assert!(a.is_symmetric());
    }
}
