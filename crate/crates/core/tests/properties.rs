#![allow(clippy::needless_range_loop)]

use ltca_core::engine::{attention_dense, attention_sparse, AttentionOptions, LayerParams};
use ltca_core::heads::{segment, select, MaskFeatureVolume, SelectMode};
use ltca_core::mask::{
    build_dilated, build_window, compose_union, realize, Geometry, MaskSpec, Predicate,
};
use ltca_core::numeric::{row_softmax_in_place, Activation, Linear, Matrix, MlpParams};
use ltca_core::query::{assemble, PositionalEmbeddings, QueryBundle};
use ltca_core::rng::SplitMix64;
use proptest::prelude::*;

fn geometry() -> impl Strategy<Value = Geometry> {
    (1usize..=12, 1usize..=3, 0usize..=3).prop_map(|(t, n1, n2)| Geometry::new(t, n1, n2).unwrap())
}

fn local_spec(t: usize) -> impl Strategy<Value = MaskSpec> {
    prop_oneof![
        (0..=2 * t).prop_map(|w| MaskSpec::Window { w }),
        (0..=2 * t, 1usize..=4).prop_map(|(w, d)| MaskSpec::Dilated { w, d }),
        (0..=t, any::<u64>()).prop_map(|(r, seed)| MaskSpec::Random { r, seed }),
        (1..=t, 0..=t).prop_map(|(ws, offset)| MaskSpec::ShiftWindow { ws, offset }),
    ]
}

fn matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.next_signed())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(v in prop::collection::vec(-30.0f64..30.0, 1..20), c in -50.0f64..50.0) {
        let mut a = v.clone();
        let mut b: Vec<f64> = v.iter().map(|x| x + c).collect();
        prop_assert!(row_softmax_in_place(&mut a));
        prop_assert!(row_softmax_in_place(&mut b));
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_families_are_symmetric_and_reflexive(g in geometry(), w in 0usize..8, d in 1usize..4, ws in 1usize..5) {
        for spec in [MaskSpec::Window { w }, MaskSpec::Dilated { w, d }, MaskSpec::ShiftWindow { ws, offset: 0 }] {
            let a = realize(&spec, g).unwrap();
            prop_assert!(a.is_symmetric());
            for q in g.n2..g.total() {
                prop_assert!(a.allows(q, q), "{:?} drops self at {}", spec, q);
            }
        }
    }

    #[test]
    fn dilation_one_is_window(g in geometry(), w in 0usize..30) {
        prop_assert_eq!(build_dilated(g, w, 1).unwrap(), build_window(g, w));
    }

    #[test]
    fn pair_counts_bounded((g, spec) in geometry().prop_flat_map(|g| (Just(g), local_spec(g.t)))) {
        let pairs = realize(&spec, g).unwrap().pair_count();
        let n1 = g.n1;
        let bound = match spec {
            MaskSpec::Window { w } | MaskSpec::Dilated { w, .. } => (w + 1) * n1 * n1 * g.t,
            MaskSpec::Random { r, .. } => r * n1 * n1 * g.t,
            MaskSpec::ShiftWindow { ws, .. } => ws * n1 * n1 * g.t,
            _ => unreachable!(),
        };
        prop_assert!(pairs <= bound);
        prop_assert!(pairs <= g.object_count() * g.object_count());
    }

    #[test]
    fn union_is_pointwise_or((g, a, b) in geometry().prop_flat_map(|g| (Just(g), local_spec(g.t), local_spec(g.t)))) {
        let la = realize(&a, g).unwrap();
        let lb = realize(&b, g).unwrap();
        let u = compose_union(&[la.clone(), lb.clone()]).unwrap();
        let spec = MaskSpec::union(vec![a, b]);
        let pred = Predicate::new(&spec, g).unwrap();
        prop_assert_eq!(&realize(&spec, g).unwrap(), &u);
        for i in 0..g.total() {
            for j in 0..g.total() {
                prop_assert_eq!(u.allows(i, j), la.allows(i, j) || lb.allows(i, j));
                prop_assert_eq!(u.allows(i, j), pred.allows(i, j));
            }
        }
    }

    #[test]
    fn permuting_slots_within_frames_permutes_outputs(t in 1usize..6, n1 in 2usize..4, seed in any::<u64>(), w in 0usize..6) {
        // every local family treats slots of one frame alike
        let g = Geometry::new(t, n1, 1).unwrap();
        let d = 4;
        let x = matrix(g.total(), d, seed);
        let p = LayerParams::random(d, 0.5, &mut SplitMix64::new(seed ^ 1));
        let mask = realize(&MaskSpec::union(vec![MaskSpec::Window { w }, MaskSpec::Global]), g).unwrap();
        // reverse the slot order in every frame
        let perm: Vec<usize> = (0..g.total())
            .map(|q| if q < g.n2 { q } else { let r = q - g.n2; g.n2 + (r / n1) * n1 + (n1 - 1 - r % n1) })
            .collect();
        let xp = Matrix::from_fn(g.total(), d, |r, c| x.get(perm[r], c));
        let opts = AttentionOptions::default();
        let y = attention_sparse(&QueryBundle::new(g, x).unwrap(), &p, &mask, &opts).unwrap();
        let yp = attention_sparse(&QueryBundle::new(g, xp).unwrap(), &p, &mask, &opts).unwrap();
        for r in 0..g.total() {
            for c in 0..d {
                prop_assert!((yp.features.get(r, c) - y.features.get(perm[r], c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dense_and_sparse_agree((g, spec) in geometry().prop_flat_map(|g| (Just(g), local_spec(g.t))), seed in any::<u64>()) {
        let mut parts = vec![spec, MaskSpec::Window { w: 0 }];
        if g.n2 > 0 {
            parts.push(MaskSpec::Global);
        }
        let mask = realize(&MaskSpec::union(parts), g).unwrap();
        let x = QueryBundle::new(g, matrix(g.total(), 6, seed)).unwrap();
        let p = LayerParams::random(6, 0.8, &mut SplitMix64::new(seed));
        let opts = AttentionOptions { scale_scores: true, heads: 2 };
        let a = attention_dense(&x, &p, &mask, &opts).unwrap();
        let b = attention_sparse(&x, &p, &mask, &opts).unwrap();
        prop_assert!(a.features.max_abs_diff(&b.features).unwrap() <= 1e-9);
    }

    #[test]
    fn assemble_is_linear(t in 1usize..5, n1 in 1usize..3, n2 in 0usize..3, s1 in any::<u64>(), s2 in any::<u64>()) {
        let g = Geometry::new(t, n1, n2).unwrap();
        let d = 4;
        let pe0 = PositionalEmbeddings::zeros(t, n1, d);
        let (e1, e2) = (matrix(t * n1, d, s1), matrix(t * n1, d, s2));
        let (g1, g2) = (matrix(n2, d, s1 ^ 3), matrix(n2, d, s2 ^ 3));
        let a = assemble(g, &e1, &pe0, &g1).unwrap();
        let b = assemble(g, &e2, &pe0, &g2).unwrap();
        let ab = assemble(g, &e1.add(&e2).unwrap(), &pe0, &g1.add(&g2).unwrap()).unwrap();
        prop_assert!(ab.features.max_abs_diff(&a.features.add(&b.features).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn segment_is_linear_in_queries(s1 in any::<u64>(), s2 in any::<u64>()) {
        let d = 5;
        let fm = MaskFeatureVolume::new(2, 3, 3, 1, matrix(18, d, s1 ^ s2)).unwrap();
        let hs = MlpParams::new(vec![Linear::new(matrix(d, d, s1 ^ 7), vec![0.0; d]).unwrap()], Activation::Identity).unwrap();
        let (a, b) = (matrix(2, d, s1), matrix(2, d, s2));
        let la = segment(&fm, &a, &hs).unwrap();
        let lb = segment(&fm, &b, &hs).unwrap();
        let lab = segment(&fm, &a.add(&b).unwrap(), &hs).unwrap();
        for k in 0..lab.data().len() {
            prop_assert!((lab.data()[k] - la.data()[k] - lb.data()[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn multi_selection_is_monotone_in_sigma(scores in prop::collection::vec(0.0f64..1.0, 1..12), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let a = select(&scores, SelectMode::Multi, lo).unwrap();
        let b = select(&scores, SelectMode::Multi, hi).unwrap();
        prop_assert!(b.iter().all(|i| a.contains(i)));
    }

    #[test]
    fn single_selection_survives_increasing_maps(scores in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let base = select(&scores, SelectMode::Single, 0.5).unwrap();
        let squashed: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        let cubed: Vec<f64> = scores.iter().map(|s| s * s * s + 2.0 * s).collect();
        prop_assert_eq!(select(&squashed, SelectMode::Single, 0.5).unwrap(), base.clone());
        prop_assert_eq!(select(&cubed, SelectMode::Single, 0.5).unwrap(), base.clone());
        prop_assert_eq!(base.len(), 1);
    }
}
