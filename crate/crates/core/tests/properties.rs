use std::collections::BTreeSet;

use proptest::prelude::*;

use hcrep::harness::{mae, make_folds, rmse, SplitMode};
use hcrep::hyperclass::{score_features, select_decision_feature, FeatureScores};
use hcrep::measures::oracle::measure_oracle;
use hcrep::recommender::{predict_hyperclass_with, predict_usercf_with};
use hcrep::relation::{relation_set, FeatureSpace};
use hcrep::{
    build_hyperclass, cover_of_complement, cover_of_feature, cross_entropy, info_entropy, js_divergence,
    kl_divergence, CfParams, HyperClass, Measure, MeasureKind, MissingPolicy, NeighborhoodConfig, Norm,
    RatingMatrix, Scale, SimilarityFn, SizeProfile,
};

fn matrix_strategy(max_users: usize, max_items: usize) -> impl Strategy<Value = RatingMatrix> {
    (1..=max_users, 2..=max_items).prop_flat_map(|(n, d)| {
        prop::collection::vec(prop::collection::vec(prop::option::weighted(0.7, 1u8..=5), d), n).prop_map(|rows| {
            let rows: Vec<Vec<Option<f64>>> = rows
                .into_iter()
                .map(|r| r.into_iter().map(|v| v.map(f64::from)).collect())
                .collect();
            RatingMatrix::from_dense(&rows, Scale::MOVIELENS).unwrap()
        })
    })
}

fn config_strategy() -> impl Strategy<Value = NeighborhoodConfig> {
    (
        prop::sample::select(vec![0.0, 0.1, 0.25, 0.5, 1.0]),
        prop::sample::select(vec![Norm::Chebyshev, Norm::Euclidean]),
        any::<bool>(),
        prop::sample::select(vec![MissingPolicy::Zero, MissingPolicy::Skip]),
    )
        .prop_map(|(delta, norm, normalize, missing)| NeighborhoodConfig {
            delta,
            norm,
            normalize,
            missing,
        })
}

/// Nonempty blocks over a universe of size `u`.
fn blocks_strategy(u: usize, max_blocks: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(
        prop::collection::btree_set(0..u, 1..=u).prop_map(|s| s.into_iter().collect::<Vec<_>>()),
        1..=max_blocks,
    )
}

fn cover_pair() -> impl Strategy<Value = (usize, Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    (1usize..=50).prop_flat_map(|u| (Just(u), blocks_strategy(u, 12), blocks_strategy(u, 12)))
}

/// One neighbor set per sample, each containing the sample itself.
fn per_sample_sets() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
    (1usize..=50).prop_flat_map(|u| {
        let sets = (0..u)
            .map(|i| {
                prop::collection::btree_set(0..u, 0..=u).prop_map(move |mut s| {
                    s.insert(i);
                    s.into_iter().collect::<Vec<_>>()
                })
            })
            .collect::<Vec<_>>();
        (Just(u), sets)
    })
}

/// Random partition of `0..u` given a block label per element.
fn partition_pair() -> impl Strategy<Value = (usize, Vec<Vec<usize>>, Vec<Vec<usize>>)> {
    (1usize..=50).prop_flat_map(|u| {
        (
            Just(u),
            prop::collection::vec(0usize..8, u),
            prop::collection::vec(0usize..8, u),
        )
            .prop_map(|(u, la, lb)| (u, blocks_from_labels(&la), blocks_from_labels(&lb)))
    })
}

fn blocks_from_labels(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); 8];
    for (i, &l) in labels.iter().enumerate() {
        blocks[l].push(i);
    }
    blocks.retain(|b| !b.is_empty());
    blocks
}

fn profile(blocks: &[Vec<usize>], u: usize) -> SizeProfile {
    SizeProfile::new(blocks.iter().map(Vec::len).collect(), u).unwrap()
}

fn measure(m: Measure, a: &SizeProfile, b: &SizeProfile) -> f64 {
    match m {
        Measure::Info => info_entropy(a),
        Measure::Ce => cross_entropy(a, b),
        Measure::Kl => kl_divergence(a, b),
        Measure::Js => js_divergence(a, b),
    }
    .unwrap()
}

fn close(fast: f64, oracle: f64) -> bool {
    (fast - oracle).abs() <= 1e-12 * oracle.abs().max(1.0)
}

fn dedup(sets: Vec<Vec<usize>>) -> BTreeSet<Vec<usize>> {
    sets.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn measures_match_oracle_and_bounds((u, a, b) in cover_pair()) {
        let (pa, pb) = (profile(&a, u), profile(&b, u));
        for m in [Measure::Ce, Measure::Kl, Measure::Js] {
            let fast = measure(m, &pa, &pb);
            let oracle = measure_oracle(&a, &b, u, m).unwrap();
            prop_assert!(fast >= 0.0);
            prop_assert!(close(fast, oracle), "{m:?}: {fast} vs {oracle}");
        }
        prop_assert!(cross_entropy(&pa, &pb).unwrap() <= (a.len() * b.len()) as f64);
        prop_assert_eq!(js_divergence(&pa, &pb).unwrap().to_bits(), js_divergence(&pb, &pa).unwrap().to_bits());
    }

    #[test]
    fn info_entropy_matches_oracle_and_bound((u, sets) in per_sample_sets()) {
        let fast = info_entropy(&profile(&sets, u)).unwrap();
        let oracle = measure_oracle(&sets, &[], u, Measure::Info).unwrap();
        prop_assert!(fast >= 0.0);
        prop_assert!(close(fast, oracle), "{fast} vs {oracle}");
        prop_assert!(fast <= u as f64 / 4.0);
    }

    #[test]
    fn measures_ignore_block_order((u, a, b) in cover_pair(), rot in 0usize..12) {
        let mut ra = a.clone();
        ra.reverse();
        let mut rb = b.clone();
        let r = rot % rb.len();
        rb.rotate_left(r);
        let (pa, pb, qa, qb) = (profile(&a, u), profile(&b, u), profile(&ra, u), profile(&rb, u));
        for m in [Measure::Info, Measure::Ce, Measure::Kl, Measure::Js] {
            prop_assert_eq!(measure(m, &pa, &pb).to_bits(), measure(m, &qa, &qb).to_bits());
        }
    }

    #[test]
    fn zero_law((u, a, b) in cover_pair()) {
        let (pa, pb) = (profile(&a, u), profile(&b, u));
        let sizes: BTreeSet<usize> = pa.sizes().iter().chain(pb.sizes()).copied().collect();
        let uniform = sizes.len() == 1;
        prop_assert_eq!(kl_divergence(&pa, &pb).unwrap() == 0.0, uniform);
        prop_assert_eq!(js_divergence(&pa, &pb).unwrap() == 0.0, uniform);
    }

    #[test]
    fn partitions_collapse_cross_entropy((u, a, b) in partition_pair()) {
        let ce = cross_entropy(&profile(&a, u), &profile(&b, u)).unwrap();
        prop_assert!((ce - (b.len() as f64 - 1.0)).abs() <= 1e-12);
    }

    #[test]
    fn relation_reflexive_and_symmetric(m in matrix_strategy(10, 5), cfg in config_strategy()) {
        let features: Vec<usize> = (0..m.n_items()).collect();
        let sets: Vec<Vec<usize>> = (0..m.n_users())
            .map(|i| relation_set(&m, &features, i, &cfg).unwrap())
            .collect();
        for (i, set) in sets.iter().enumerate() {
            prop_assert!(set.contains(&i));
            for &j in set {
                prop_assert!(sets[j].contains(&i));
            }
        }
    }

    #[test]
    fn relation_grows_with_delta(m in matrix_strategy(10, 5), cfg in config_strategy(), extra in 0.0f64..0.5) {
        let wider = NeighborhoodConfig { delta: cfg.delta + extra, ..cfg };
        let k = m.n_items() - 1;
        for i in 0..m.n_users() {
            let narrow = relation_set(&m, &[k], i, &cfg).unwrap();
            let wide = relation_set(&m, &[k], i, &wider).unwrap();
            prop_assert!(narrow.iter().all(|j| wide.contains(j)));
        }
    }

    #[test]
    fn zero_delta_gives_partitions(m in matrix_strategy(12, 5), norm in prop::sample::select(vec![Norm::Chebyshev, Norm::Euclidean])) {
        let cfg = NeighborhoodConfig { norm, ..NeighborhoodConfig::default() };
        for k in 0..m.n_items() {
            prop_assert!(cover_of_feature(&m, k, &cfg).unwrap().is_partition());
            prop_assert!(cover_of_complement(&m, k, &cfg).unwrap().is_partition());
        }
    }

    #[test]
    fn covers_are_deduplicated_relation_sets(m in matrix_strategy(12, 5), cfg in config_strategy()) {
        let d = m.n_items();
        for k in 0..d {
            let rest: Vec<usize> = (0..d).filter(|&j| j != k).collect();
            let naive_f = dedup((0..m.n_users()).map(|i| relation_set(&m, &[k], i, &cfg).unwrap()).collect());
            let naive_c = dedup((0..m.n_users()).map(|i| relation_set(&m, &rest, i, &cfg).unwrap()).collect());
            let (per_sample, block_sizes) = FeatureSpace::new(&m, &cfg).unwrap().feature_sizes(k);
            let naive_sizes: Vec<usize> = (0..m.n_users()).map(|i| relation_set(&m, &[k], i, &cfg).unwrap().len()).collect();
            prop_assert_eq!(per_sample, naive_sizes);
            let mut block_sizes = block_sizes;
            block_sizes.sort_unstable();
            let mut naive_block_sizes: Vec<usize> = naive_f.iter().map(Vec::len).collect();
            naive_block_sizes.sort_unstable();
            prop_assert_eq!(block_sizes, naive_block_sizes);
            let fast_f = cover_of_feature(&m, k, &cfg).unwrap();
            let fast_c = cover_of_complement(&m, k, &cfg).unwrap();
            prop_assert_eq!(fast_f.blocks.len(), naive_f.len());
            prop_assert_eq!(fast_c.blocks.len(), naive_c.len());
            prop_assert_eq!(fast_f.blocks.iter().cloned().collect::<BTreeSet<_>>(), naive_f);
            prop_assert_eq!(fast_c.blocks.iter().cloned().collect::<BTreeSet<_>>(), naive_c);
        }
    }

    #[test]
    fn selection_is_first_minimum_of_naive_scores(m in matrix_strategy(10, 5), cfg in config_strategy()) {
        for kind in MeasureKind::ALL {
            let naive: Vec<f64> = (0..m.n_items())
                .map(|k| {
                    let a = cover_of_feature(&m, k, &cfg).unwrap();
                    let b = cover_of_complement(&m, k, &cfg).unwrap();
                    measure_oracle(&a.blocks, &b.blocks, m.n_users(), kind.into()).unwrap()
                })
                .collect();
            let scores = score_features(&m, kind, &cfg).unwrap();
            for (fast, slow) in scores.scores.iter().zip(&naive) {
                prop_assert!(close(*fast, *slow));
            }
            let hc = build_hyperclass(&m, kind, &cfg).unwrap();
            let k = hc.decision_feature;
            prop_assert!(scores.scores[..k].iter().all(|&s| s > scores.scores[k]));
            prop_assert!(scores.scores[k..].iter().all(|&s| s >= scores.scores[k]));
        }
    }

    #[test]
    fn argmin_survives_positive_scaling(scores in prop::collection::vec(0.0f64..10.0, 1..20), c in 0.01f64..100.0) {
        let make = |v: Vec<f64>| FeatureScores { measure: MeasureKind::Ce, scores: v, config: NeighborhoodConfig::default() };
        let scaled: Vec<f64> = scores.iter().map(|s| s * c).collect();
        prop_assert_eq!(
            select_decision_feature(&make(scores.clone())).unwrap(),
            select_decision_feature(&make(scaled)).unwrap()
        );
    }

    #[test]
    fn hyperclass_is_deterministic_and_total(m in matrix_strategy(10, 5), cfg in config_strategy(), probe in prop::option::of(-2.0f64..8.0)) {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        for kind in MeasureKind::ALL {
            let a = one.install(|| build_hyperclass(&m, kind, &cfg)).unwrap();
            let b = four.install(|| build_hyperclass(&m, kind, &cfg)).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
            prop_assert!(a.assign(probe) < a.n_blocks());
        }
    }

    #[test]
    fn recommender_invariants(m in matrix_strategy(12, 5), cfg in config_strategy(), k in 1usize..6) {
        let params = CfParams::new(k, SimilarityFn::default());
        let hc = build_hyperclass(&m, MeasureKind::Ce, &cfg).unwrap();
        let single = HyperClass::for_feature(&m, 0, &NeighborhoodConfig::with_delta(1.0), MeasureKind::Ce, 0.0).unwrap();
        prop_assert_eq!(single.n_blocks(), 1);
        for u in 0..m.n_users() {
            for i in 0..m.n_items() {
                let base = predict_usercf_with(&m, u, i, &params);
                let fast = predict_hyperclass_with(&m, &hc, u, i, &params);
                let same = predict_hyperclass_with(&m, &single, u, i, &params);
                prop_assert_eq!(base.value.to_bits(), same.value.to_bits());
                prop_assert_eq!(base, same);
                prop_assert!(fast.similarity_evaluations <= base.similarity_evaluations);
                for p in [base, fast] {
                    prop_assert!(m.scale().contains(p.value));
                }
                let wider = predict_usercf_with(&m, u, i, &CfParams::new(k + 1, SimilarityFn::default()));
                prop_assert!(wider.support >= base.support);
            }
        }
    }

    #[test]
    fn folds_partition_the_ratings(m in matrix_strategy(20, 6), folds in 2usize..6, seed in any::<u64>()) {
        prop_assume!(m.len() >= folds);
        let fs = make_folds(&m, folds, seed, SplitMode::ByRating, 0.5).unwrap();
        let mut seen = vec![0usize; m.len()];
        for f in &fs {
            for p in f.test_positions() {
                seen[p] += 1;
                prop_assert!(!f.train[p]);
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        let sizes: Vec<usize> = fs.iter().map(|f| f.n_test()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        prop_assert_eq!(make_folds(&m, folds, seed, SplitMode::ByRating, 0.5).unwrap(), fs);
    }

    #[test]
    fn metric_identities(v in prop::collection::vec(-10.0f64..10.0, 1..40), w in prop::collection::vec(-10.0f64..10.0, 1..40)) {
        prop_assert_eq!(rmse(&v, &v).unwrap(), 0.0);
        prop_assert_eq!(mae(&v, &v).unwrap(), 0.0);
        let n = v.len().min(w.len());
        prop_assert!(mae(&v[..n], &w[..n]).unwrap() <= rmse(&v[..n], &w[..n]).unwrap() + 1e-12);
    }
}
