//! Encoder input assembly.
//!
//! Object query for frame `i` (1-based) and slot `j` is the frame embedding
//! plus the slot's object embedding plus the frame's sinusoidal embedding.
//! Global queries are prepended unchanged. Frame embeddings are indexed
//! zero-based: frame `i` uses row `i - 1` of the sinusoidal table.

use crate::error::{Error, Result};
use crate::mask::Geometry;
use crate::numeric::Matrix;

/// `[global queries; object queries]` with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBundle {
    pub geometry: Geometry,
    pub features: Matrix,
}

impl QueryBundle {
    pub fn new(geometry: Geometry, features: Matrix) -> Result<Self> {
        if features.rows() != geometry.total() {
            return Err(Error::shape(
                "QueryBundle::new",
                format!("{} rows for {} queries", features.rows(), geometry.total()),
            ));
        }
        Ok(Self { geometry, features })
    }

    pub fn width(&self) -> usize {
        self.features.cols()
    }

    /// Splits into `(global rows, object rows)`.
    pub fn split(&self) -> (Matrix, Matrix) {
        let n2 = self.geometry.n2;
        (
            self.features.slice_rows(0, n2),
            self.features.slice_rows(n2, self.geometry.total()),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositionalEmbeddings {
    /// `N1 × D`, one row per object slot.
    pub object_pe: Matrix,
    /// `T × D`, sinusoidal.
    pub frame_pe: Matrix,
}

impl PositionalEmbeddings {
    pub fn new(object_pe: Matrix, t: usize) -> Result<Self> {
        let frame_pe = sinusoidal_pe(t, object_pe.cols())?;
        Ok(Self {
            object_pe,
            frame_pe,
        })
    }

    pub fn zeros(t: usize, n1: usize, d: usize) -> Self {
        Self {
            object_pe: Matrix::zeros(n1, d),
            frame_pe: Matrix::zeros(t, d),
        }
    }
}

/// Row `t`, channels `(2c, 2c+1)` = `(sin(t / 10000^(2c/D)), cos(t / 10000^(2c/D)))`.
pub fn sinusoidal_pe(t: usize, d: usize) -> Result<Matrix> {
    if !d.is_multiple_of(2) {
        return Err(Error::param(format!(
            "sinusoidal embedding width must be even, got {d}"
        )));
    }
    Ok(Matrix::from_fn(t, d, |row, ch| {
        let pair = (ch / 2) as f64;
        let angle = row as f64 / 10000f64.powf(2.0 * pair / d as f64);
        if ch % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

/// Builds the encoder input from flattened frame embeddings (`T·N1 × D`).
pub fn assemble(
    geometry: Geometry,
    frame_embeddings: &Matrix,
    pe: &PositionalEmbeddings,
    global_init: &Matrix,
) -> Result<QueryBundle> {
    let d = frame_embeddings.cols();
    let Geometry { t, n1, n2 } = geometry;
    let checks = [
        ("frame embeddings", frame_embeddings.shape(), (t * n1, d)),
        ("object PE", pe.object_pe.shape(), (n1, d)),
        ("frame PE", pe.frame_pe.shape(), (t, d)),
        ("global queries", global_init.shape(), (n2, d)),
    ];
    for (what, got, want) in checks {
        // an empty global block may come in with zero columns
        if got != want && !(what == "global queries" && n2 == 0 && got.0 == 0) {
            return Err(Error::shape(
                "assemble",
                format!("{what}: {got:?}, expected {want:?}"),
            ));
        }
    }
    let mut objects = frame_embeddings.clone();
    for f in 0..t {
        for s in 0..n1 {
            let row = objects.row_mut(f * n1 + s);
            for ((v, o), p) in row
                .iter_mut()
                .zip(pe.object_pe.row(s))
                .zip(pe.frame_pe.row(f))
            {
                *v += o + p;
            }
        }
    }
    let globals = if n2 == 0 {
        Matrix::zeros(0, d)
    } else {
        global_init.clone()
    };
    QueryBundle::new(geometry, globals.vstack(&objects)?)
}

/// `n` copies of the sentence feature.
pub fn init_queries_from_sentence(sentence: &[f64], n: usize) -> Matrix {
    Matrix::from_fn(n, sentence.len(), |_, c| sentence[c])
}

/// Mean over the rows of a word-embedding matrix.
pub fn average_words(words: &Matrix) -> Result<Vec<f64>> {
    if words.rows() == 0 {
        return Err(Error::param("cannot average zero word embeddings"));
    }
    let n = words.rows() as f64;
    Ok((0..words.cols())
        .map(|c| (0..words.rows()).map(|r| words.get(r, c)).sum::<f64>() / n)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn sinusoid_values() {
        let pe = sinusoidal_pe(4, 4).unwrap();
        assert_eq!(pe.row(0), &[0.0, 1.0, 0.0, 1.0]);
        assert!((pe.get(2, 0) - 0.909_297_426_825_681_7).abs() < 1e-15);
        // channel pair 1: 2 / 10000^(2/4) = 0.02
        assert!((pe.get(2, 2) - 0.02f64.sin()).abs() < 1e-15);
        assert!(pe.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(sinusoidal_pe(3, 5).is_err());
    }

    #[test]
    fn zero_pe_passthrough_and_decomposition() {
        let g = Geometry::new(3, 2, 1).unwrap();
        let mut rng = SplitMix64::new(1);
        let emb = Matrix::from_fn(6, 4, |_, _| rng.next_signed());
        let glob = Matrix::from_fn(1, 4, |_, _| rng.next_signed());
        let b = assemble(g, &emb, &PositionalEmbeddings::zeros(3, 2, 4), &glob).unwrap();
        assert_eq!(b.features.slice_rows(1, 7), emb);
        assert_eq!(b.features.row(0), glob.row(0));

        let g1 = Geometry::new(3, 1, 0).unwrap();
        let pe = PositionalEmbeddings::new(Matrix::from_rows(&[[0.5, -0.5, 2.0, 1.0]]).unwrap(), 3)
            .unwrap();
        let b = assemble(g1, &Matrix::zeros(3, 4), &pe, &Matrix::zeros(0, 4)).unwrap();
        for f in 0..3 {
            for c in 0..4 {
                assert_eq!(
                    b.features.get(f, c),
                    pe.object_pe.get(0, c) + pe.frame_pe.get(f, c)
                );
            }
        }
    }

    #[test]
    fn elementwise_oracle() {
        let g = Geometry::new(2, 2, 1).unwrap();
        let mut rng = SplitMix64::new(99);
        let emb = Matrix::from_fn(4, 2, |_, _| rng.next_signed());
        let ope = Matrix::from_fn(2, 2, |_, _| rng.next_signed());
        let glob = Matrix::from_fn(1, 2, |_, _| rng.next_signed());
        let pe = PositionalEmbeddings::new(ope.clone(), 2).unwrap();
        let b = assemble(g, &emb, &pe, &glob).unwrap();
        for f in 1..=2 {
            for s in 0..2 {
                let q = g.object_index(f, s);
                for c in 0..2 {
                    let want =
                        emb.get((f - 1) * 2 + s, c) + ope.get(s, c) + pe.frame_pe.get(f - 1, c);
                    assert!((b.features.get(q, c) - want).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn shape_errors() {
        let g = Geometry::new(2, 2, 1).unwrap();
        let pe = PositionalEmbeddings::zeros(2, 2, 3);
        assert!(assemble(g, &Matrix::zeros(3, 3), &pe, &Matrix::zeros(1, 3)).is_err());
        assert!(assemble(g, &Matrix::zeros(4, 3), &pe, &Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn sentence_helpers() {
        let f = [0.25, -1.0, 3.0];
        assert_eq!(init_queries_from_sentence(&f, 1).row(0), &f);
        let m = init_queries_from_sentence(&f, 3);
        assert!(m.row_iter().all(|r| r == f));
        let words = Matrix::from_rows(&[[1.0, 2.0], [3.0, 6.0]]).unwrap();
        assert_eq!(average_words(&words).unwrap(), vec![2.0, 4.0]);
    }
}
