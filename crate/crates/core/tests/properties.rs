mod common;

use fission::datagen::{parse_csv, to_csv};
use fission::density::{removal_count, removal_order};
use fission::fission_core::fission_subset;
use fission::*;
use proptest::prelude::*;

use common::{brute_d0, brute_force_crack, same_partition, threshold_graph_connected};

fn points(max_n: usize, max_dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_dim).prop_flat_map(move |d| {
        prop::collection::vec(prop::collection::vec(-50.0..50.0f64, d), 2..=max_n)
    })
}

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![
        Just(Metric::Euclidean),
        Just(Metric::Manhattan),
        (1.0..4.0f64).prop_map(|p| Metric::Minkowski { p }),
    ]
}

fn matrix(pts: &[Vec<f64>], m: Metric) -> DistanceMatrix {
    distance_matrix(&Dataset::new("prop", pts.to_vec()).unwrap(), m).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn maximal_crack_matches_brute_force(pts in points(30, 5), m in metric()) {
        let dm = matrix(&pts, m);
        let sub = Subset::full(pts.len());
        let cl = maximal_crack(&gap_table(&dm, &sub).unwrap()).unwrap();
        let (row, low, value) = brute_force_crack(&dm, sub.indices());
        prop_assert_eq!((cl.row, cl.low, cl.value), (row, low, value));
        prop_assert_eq!(subset_max_crack(&dm, &sub).unwrap(), cl);

        // No distance from the reference point falls inside the crack.
        let inside = dm.row(cl.row).iter().any(|&d| d > cl.threshold && d < cl.threshold + cl.value);
        prop_assert!(!inside);
    }

    #[test]
    fn crack_never_exceeds_d0_on_connected_sets(pts in points(40, 4), manhattan in any::<bool>()) {
        let m = if manhattan { Metric::Manhattan } else { Metric::Euclidean };
        let dm = matrix(&pts, m);
        let sub = Subset::full(pts.len());
        let d0 = d_zero(&dm, &sub).unwrap();
        prop_assert_eq!(d0, brute_d0(&dm, sub.indices()));
        if threshold_graph_connected(&dm, sub.indices(), d0) {
            // A gap is a difference of two rounded distances, so it can land
            // one ulp above the exact bound.
            prop_assert!(subset_max_crack(&dm, &sub).unwrap().value <= d0 + 1e-9);
        }
    }

    #[test]
    fn split_covers_subset(pts in points(30, 3), pick in prop::collection::vec(any::<bool>(), 30)) {
        let dm = matrix(&pts, Metric::Euclidean);
        let mut members: Vec<usize> = (0..pts.len()).filter(|&i| pick[i]).collect();
        if members.len() < 2 {
            members = vec![0, 1];
        }
        let sub = Subset::new(members.clone()).unwrap();
        let cl = subset_max_crack(&dm, &sub).unwrap();
        let (left, right) = split_at_crack(&sub, &dm, &cl).unwrap();
        prop_assert!(!left.is_empty() && !right.is_empty());
        let mut union: Vec<usize> = left.indices().iter().chain(right.indices()).copied().collect();
        union.sort_unstable();
        prop_assert_eq!(union, members);
    }

    #[test]
    fn fission_is_order_invariant(pts in points(30, 3), seed in any::<u64>()) {
        let ds = Dataset::new("prop", pts.clone()).unwrap();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut rng = fission::rng::SeededRng::new(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.index(i + 1));
        }
        let base = fission_cluster(&distance_matrix(&ds, Metric::Euclidean).unwrap(), StopRule::Global).unwrap();
        let shuffled = ds.permuted(&order).unwrap();
        let moved = fission_cluster(&distance_matrix(&shuffled, Metric::Euclidean).unwrap(), StopRule::Global).unwrap();
        let back: Vec<usize> = {
            let mut b = vec![0; order.len()];
            for (i, &o) in order.iter().enumerate() {
                b[o] = moved.labels[i];
            }
            b
        };
        prop_assert!(same_partition(&base.labels, &back));
    }

    #[test]
    fn every_split_shrinks_its_subset(pts in points(40, 2), rule in prop_oneof![
        Just(StopRule::Global), Just(StopRule::PerSubset), (1.0..6.0f64).prop_map(StopRule::Scaled)
    ]) {
        let dm = matrix(&pts, Metric::Euclidean);
        let p = fission_cluster(&dm, rule).unwrap();
        prop_assert_eq!(p.split_trace.len(), p.k - 1);
        for s in &p.split_trace {
            prop_assert!(s.left >= 1 && s.right >= 1 && s.left + s.right == s.size);
            prop_assert!(s.mc > 0.0);
        }
    }

    #[test]
    fn distance_matrix_is_permutation_equivariant(pts in points(20, 4), m in metric(), seed in any::<u64>()) {
        let ds = Dataset::new("prop", pts.clone()).unwrap();
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut rng = fission::rng::SeededRng::new(seed);
        for i in (1..order.len()).rev() {
            order.swap(i, rng.index(i + 1));
        }
        let dm = distance_matrix(&ds, m).unwrap();
        let pm = distance_matrix(&ds.permuted(&order).unwrap(), m).unwrap();
        for i in 0..order.len() {
            for j in 0..order.len() {
                prop_assert_eq!(pm.get(i, j), dm.get(order[i], order[j]));
            }
        }
    }

    #[test]
    fn metric_axioms(pts in points(15, 4), m in metric()) {
        let dm = matrix(&pts, m);
        let n = pts.len();
        for i in 0..n {
            prop_assert_eq!(dm.get(i, i), 0.0);
            for j in 0..n {
                prop_assert!(dm.get(i, j) >= 0.0);
                prop_assert_eq!(dm.get(i, j), dm.get(j, i));
                for k in 0..n {
                    prop_assert!(dm.get(i, k) <= dm.get(i, j) + dm.get(j, k) + 1e-9);
                }
            }
        }
        prop_assert!(validate_triangle(&dm, 10_000).passed);
    }

    #[test]
    fn density_scales_inversely(pts in points(30, 3), exp in -3i32..4, n0 in 1usize..5) {
        prop_assume!(n0 < pts.len());
        let dm = matrix(&pts, Metric::Euclidean);
        let s = 2f64.powi(exp);
        let scaled = DistanceMatrix::from_rows(
            (0..dm.len()).map(|i| dm.row(i).iter().map(|d| d * s).collect()).collect(),
            "scaled",
        ).unwrap();
        let a = knn_density(&dm, n0).unwrap();
        let b = knn_density(&scaled, n0).unwrap();
        for (x, y) in a.rho.iter().zip(&b.rho) {
            if x.is_finite() {
                prop_assert_eq!(*y, x / s);
            }
        }
        prop_assert_eq!(removal_order(&a), removal_order(&b));
        if pts.len() >= 5 {
            let params = FcParams { n0: NeighborCount::Fixed(n0), ..FcParams::default() };
            match (denoise(&dm, &params), denoise(&scaled, &params)) {
                (Ok(x), Ok(y)) => {
                    prop_assert_eq!(x.removed, y.removed);
                    prop_assert_eq!(x.r_final, y.r_final);
                }
                (Err(_), Err(_)) => {}
                (x, y) => prop_assert!(false, "{x:?} vs {y:?}"),
            }
        }
    }

    #[test]
    fn denoise_removes_a_density_prefix(pts in points(60, 2), t in 1.5..12.0f64) {
        prop_assume!(pts.len() >= 5);
        let dm = matrix(&pts, Metric::Euclidean);
        let params = FcParams { t, n0: NeighborCount::Fixed(2), ..FcParams::default() };
        let Ok(res) = denoise(&dm, &params) else { return Ok(()); };
        let rho = knn_density(&dm, 2).unwrap();
        let order = removal_order(&rho);
        let count = removal_count(res.r_final, pts.len());
        let mut prefix = order[..count].to_vec();
        prefix.sort_unstable();
        let mut removed = res.removed.clone();
        removed.sort_unstable();
        prop_assert_eq!(&removed, &prefix);
        // Earlier steps removed a prefix of the same order.
        let mut last = 0;
        for step in &res.steps {
            prop_assert!(step.removed >= last);
            last = step.removed;
        }
        let kept_min = res.dense_subset.indices().iter().map(|&i| rho.rho[i]).fold(f64::INFINITY, f64::min);
        let removed_max = res.removed.iter().map(|&i| rho.rho[i]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(kept_min >= removed_max);
    }

    #[test]
    fn assignment_keeps_dense_labels(pts in points(40, 2), pick in prop::collection::vec(0usize..4, 40)) {
        let dm = matrix(&pts, Metric::Euclidean);
        let n = pts.len();
        let dense: Vec<usize> = (0..n).filter(|&i| pick[i] > 0).collect();
        prop_assume!(!dense.is_empty());
        let removed: Vec<usize> = (0..n).filter(|&i| pick[i] == 0).collect();
        // Contiguous ids in order of first appearance.
        let mut ids = std::collections::HashMap::new();
        let dense_labels: Vec<usize> = dense.iter().map(|&i| {
            let next = ids.len();
            *ids.entry(pick[i]).or_insert(next)
        }).collect();
        let sub = Subset::new(dense.clone()).unwrap();
        let p = assign_remainder(&dm, &sub, &dense_labels, &removed).unwrap();
        prop_assert_eq!(p.len(), n);
        for (pos, &i) in dense.iter().enumerate() {
            prop_assert_eq!(p.labels[i], dense_labels[pos]);
        }
        let again = assign_remainder(&dm, &sub, &dense_labels, &removed).unwrap();
        prop_assert_eq!(again.labels, p.labels);
    }

    #[test]
    fn scores_ignore_relabelling_and_order(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60),
        seed in any::<u64>(),
    ) {
        let compact = |v: Vec<usize>| -> Vec<usize> {
            let mut ids = std::collections::HashMap::new();
            v.into_iter().map(|x| { let next = ids.len(); *ids.entry(x).or_insert(next) }).collect()
        };
        let pred = compact(pairs.iter().map(|p| p.0).collect());
        let truth = compact(pairs.iter().map(|p| p.1).collect());
        let base = evaluate(&pred, &truth).unwrap();
        prop_assert!(base.accuracy <= 1.0 && base.f_score <= 1.0 + 1e-12);

        let mut rng = fission::rng::SeededRng::new(seed);
        let k = pred.iter().max().unwrap() + 1;
        let mut relabel: Vec<usize> = (0..k).collect();
        for i in (1..k).rev() {
            relabel.swap(i, rng.index(i + 1));
        }
        let mut order: Vec<usize> = (0..pred.len()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.index(i + 1));
        }
        let p2: Vec<usize> = order.iter().map(|&i| relabel[pred[i]]).collect();
        let t2: Vec<usize> = order.iter().map(|&i| truth[i]).collect();
        let moved = evaluate(&p2, &t2).unwrap();
        prop_assert_eq!(moved.accuracy, base.accuracy);
        prop_assert!((moved.f_score - base.f_score).abs() < 1e-12);
        prop_assert_eq!(evaluate(&truth, &truth).unwrap().accuracy, 1.0);
    }

    #[test]
    fn csv_round_trip(pts in points(30, 4), labelled in any::<bool>(), exp in -300i32..300) {
        let scale = 10f64.powi(exp);
        let pts: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().map(|v| v * scale).collect()).collect();
        let mut ds = Dataset::new("rt", pts.clone()).unwrap();
        if labelled {
            let labels: Vec<usize> = (0..pts.len()).map(|i| i % 2).collect();
            ds = ds.with_labels(labels).unwrap();
        }
        let back = parse_csv("rt", &to_csv(&ds)).unwrap();
        prop_assert_eq!(back, ds);
    }

    #[test]
    fn generation_is_seeded(seed in any::<u64>()) {
        for kind in ["blobs", "imbalance", "grid_line"] {
            let spec = GenSpec::default_of(kind, 0).unwrap().with_seed(seed);
            prop_assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
        let a = generate(&GenSpec::default_of("imbalance", 0).unwrap().with_seed(seed)).unwrap();
        let b = generate(&GenSpec::default_of("imbalance", 0).unwrap().with_seed(seed.wrapping_add(1))).unwrap();
        prop_assert_ne!(a, b);
    }
}

#[test]
fn fc_knn_without_removal_is_plain_fission() {
    let ds = generate(&GenSpec::from_json(r#"{"kind": "blobs", "k": 3, "points_per_cluster": 30, "seed": 9}"#).unwrap())
        .unwrap();
    let dm = distance_matrix(&ds, Metric::Euclidean).unwrap();
    let params = FcParams {
        r_start: 0.001,
        r_max: 0.001,
        threshold_mode: ThresholdMode::Global,
        ..FcParams::default()
    };
    let out = fc_knn(&dm, &params).unwrap();
    assert!(out.denoise.removed.is_empty() && out.denoise.separated);
    let plain = fission_cluster(&dm, StopRule::Global).unwrap();
    assert_eq!(out.partition.labels, plain.labels);
    let direct = fission_subset(&dm, Subset::full(dm.len()), StopRule::Global).unwrap();
    assert_eq!(direct.split_trace, plain.split_trace);
}
