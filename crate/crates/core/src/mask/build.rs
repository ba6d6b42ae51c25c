//! Constructive builders. Each one enumerates only the permitted pairs, so the
//! cost is proportional to the output size; [`super::verify`] checks them
//! against the pairwise predicates.

use super::{AllowList, Geometry, MaskSpec};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Rows for object queries built frame by frame; global rows stay empty.
fn per_frame(g: Geometry, mut frames_for: impl FnMut(usize) -> Vec<usize>) -> AllowList {
    let mut rows = vec![Vec::new(); g.total()];
    for f in 1..=g.t {
        let mut keys = Vec::new();
        for src in frames_for(f) {
            keys.extend(g.frame_range(src));
        }
        for q in g.frame_range(f) {
            rows[q] = keys.clone();
        }
    }
    AllowList::from_rows_unchecked(g, rows)
}

/// Frames at offsets `k * step` for `|k| <= half`, clipped to `[1, T]`, ascending.
fn strided_neighbours(t: usize, f: usize, half: usize, step: usize) -> Vec<usize> {
    (-(half as i64)..=half as i64)
        .map(|k| f as i64 + k * step as i64)
        .filter(|&x| x >= 1 && x <= t as i64)
        .map(|x| x as usize)
        .collect()
}

/// Object pairs with `|φ(i) - φ(j)| <= w / 2` (exact rational comparison).
pub fn build_window(g: Geometry, w: usize) -> AllowList {
    build_dilated_unchecked(g, w, 1)
}

/// Object pairs with `|Δ| mod d = 0` and `|Δ| <= d * w / 2`, where `Δ` is the
/// frame distance. With `d = 1` this is exactly [`build_window`].
pub fn build_dilated(g: Geometry, w: usize, d: usize) -> Result<AllowList> {
    if d == 0 {
        return Err(Error::param("dilation d must be >= 1"));
    }
    Ok(build_dilated_unchecked(g, w, d))
}

fn build_dilated_unchecked(g: Geometry, w: usize, d: usize) -> AllowList {
    // Δ = k·d and 2|Δ| <= d·w  ⇔  |k| <= ⌊w/2⌋
    per_frame(g, |f| strided_neighbours(g.t, f, w / 2, d))
}

/// The `r` frames (1-based, ascending) drawn for source frame `frame`.
///
/// Uses SplitMix64 stream `frame` of `seed` and a partial Fisher-Yates shuffle
/// of `0..T`; see [`crate::rng`].
pub fn random_frames(t: usize, r: usize, seed: u64, frame: usize) -> Vec<usize> {
    let mut picked: Vec<usize> = SplitMix64::for_stream(seed, frame as u64)
        .sample_distinct(t, r)
        .into_iter()
        .map(|x| x + 1)
        .collect();
    picked.sort_unstable();
    picked
}

/// Each frame `f` attends every query of the frames in `ψ_f`, `r` frames drawn
/// uniformly without replacement. All queries of one frame share `ψ_f`.
pub fn build_random(g: Geometry, r: usize, seed: u64) -> Result<AllowList> {
    if r > g.t {
        return Err(Error::param(format!("random r={r} exceeds T={}", g.t)));
    }
    Ok(per_frame(g, |f| random_frames(g.t, r, seed, f)))
}

/// Pairs where the query or the key is global.
pub fn build_global(g: Geometry) -> Result<AllowList> {
    if g.n2 == 0 {
        return Err(Error::param("global attention needs N2 >= 1"));
    }
    let n = g.total();
    let rows = (0..n)
        .map(|i| {
            if g.is_global(i) {
                (0..n).collect()
            } else {
                (0..g.n2).collect()
            }
        })
        .collect();
    Ok(AllowList::from_rows_unchecked(g, rows))
}

/// Object pairs in the same block of `ws` consecutive frames, with block
/// boundaries at frames `1 + offset + k * ws`.
pub fn build_shift_window(g: Geometry, ws: usize, offset: usize) -> Result<AllowList> {
    if ws == 0 {
        return Err(Error::param("shift window length ws must be >= 1"));
    }
    let (ws_i, off_i) = (ws as i64, offset as i64);
    Ok(per_frame(g, |f| {
        let block = (f as i64 - 1 - off_i).div_euclid(ws_i);
        let lo = (block * ws_i + off_i + 1).max(1) as usize;
        let hi = ((block + 1) * ws_i + off_i).min(g.t as i64) as usize;
        (lo..=hi).collect()
    }))
}

/// Row-wise sorted union.
pub fn compose_union(parts: &[AllowList]) -> Result<AllowList> {
    let first = parts
        .first()
        .ok_or_else(|| Error::param("union of zero allow-lists"))?;
    let g = first.geometry();
    if let Some(p) = parts.iter().find(|p| p.geometry() != g) {
        return Err(Error::shape(
            "compose_union",
            format!("geometry {} vs {}", p.geometry(), g),
        ));
    }
    let rows = (0..g.total())
        .map(|i| {
            let mut row: Vec<usize> = parts
                .iter()
                .flat_map(|p| p.row(i).iter().copied())
                .collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();
    Ok(AllowList::from_rows_unchecked(g, rows))
}

/// Builds the allow-list described by `spec`.
pub fn realize(spec: &MaskSpec, g: Geometry) -> Result<AllowList> {
    spec.validate(Some(&g))?;
    match spec {
        MaskSpec::Window { w } => Ok(build_window(g, *w)),
        MaskSpec::Dilated { w, d } => build_dilated(g, *w, *d),
        MaskSpec::Random { r, seed } => build_random(g, *r, *seed),
        MaskSpec::Global => build_global(g),
        MaskSpec::ShiftWindow { ws, offset } => build_shift_window(g, *ws, *offset),
        MaskSpec::Union { parts } => {
            let built = parts
                .iter()
                .map(|p| realize(p, g))
                .collect::<Result<Vec<_>>>()?;
            compose_union(&built)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(t: usize, n1: usize, n2: usize) -> Geometry {
        Geometry::new(t, n1, n2).unwrap()
    }

    fn frames(g: Geometry, a: &AllowList, q: usize) -> Vec<usize> {
        let mut f: Vec<usize> = a
            .row(q)
            .iter()
            .filter_map(|&k| g.frame_unchecked(k))
            .collect();
        f.dedup();
        f
    }

    #[test]
    fn window_examples() {
        let g = geom(5, 1, 0);
        assert_eq!(frames(g, &build_window(g, 2), 2), vec![2, 3, 4]);
        let a = build_window(g, 0);
        for q in 0..5 {
            assert_eq!(a.row(q), &[q]);
        }
        // frame-pair count 2+3+3+2 = 10, times N1² = 4
        assert_eq!(build_window(geom(4, 2, 0), 2).pair_count(), 40);
        // odd w: 3/2 = 1.5 still admits distance 1 only
        assert_eq!(build_window(g, 3), build_window(g, 2));
    }

    #[test]
    fn dilated_examples() {
        let g = geom(5, 1, 0);
        assert_eq!(
            frames(g, &build_dilated(g, 2, 2).unwrap(), 2),
            vec![1, 3, 5]
        );
        let g9 = geom(9, 1, 0);
        assert_eq!(
            frames(g9, &build_dilated(g9, 2, 3).unwrap(), 4),
            vec![2, 5, 8]
        );
        assert_eq!(build_dilated(g, 4, 1).unwrap(), build_window(g, 4));
        assert!(build_dilated(g, 2, 0).is_err());
    }

    #[test]
    fn random_examples() {
        let g = geom(6, 2, 1);
        let full = build_random(g, 6, 3).unwrap();
        let objects: Vec<usize> = (1..g.total()).collect();
        for q in 1..g.total() {
            assert_eq!(full.row(q), &objects[..]);
        }
        assert_eq!(full.row(0), &[] as &[usize]);
        let none = build_random(g, 0, 3).unwrap();
        assert_eq!(none.pair_count(), 0);
        assert_eq!(
            build_random(g, 2, 9).unwrap(),
            build_random(g, 2, 9).unwrap()
        );
        assert!(build_random(g, 7, 0).is_err());

        // queries of one frame share ψ
        let a = build_random(g, 2, 42).unwrap();
        assert_eq!(a.row(1), a.row(2));
        assert_eq!(a.row(1).len(), 4);
    }

    #[test]
    fn global_examples() {
        let g = geom(2, 1, 1);
        let a = build_global(g).unwrap();
        assert_eq!(a.to_rows(), vec![vec![0, 1, 2], vec![0], vec![0]]);
        let g = geom(1, 1, 2);
        assert_eq!(build_global(g).unwrap().pair_count(), 8);
        assert!(build_global(geom(3, 1, 0)).is_err());
    }

    #[test]
    fn shift_window_examples() {
        let g = geom(4, 1, 0);
        let a = build_shift_window(g, 2, 0).unwrap();
        assert_eq!(frames(g, &a, 1), vec![1, 2]);
        assert_eq!(frames(g, &a, 2), vec![3, 4]);
        let b = build_shift_window(g, 2, 1).unwrap();
        assert_eq!(b.to_rows(), vec![vec![0], vec![1, 2], vec![1, 2], vec![3]]);
        assert_eq!(
            build_shift_window(geom(6, 1, 0), 3, 0)
                .unwrap()
                .pair_count(),
            18
        );
    }

    #[test]
    fn union_rules() {
        let g = geom(4, 2, 1);
        let w = build_window(g, 2);
        assert_eq!(compose_union(&[w.clone(), w.clone()]).unwrap(), w);
        let u = compose_union(&[w.clone(), build_global(g).unwrap()]).unwrap();
        assert_eq!(u.first_empty_row(), None);
        assert!(compose_union(&[w, build_window(geom(5, 2, 1), 2)]).is_err());
        assert!(compose_union(&[]).is_err());
    }
}
