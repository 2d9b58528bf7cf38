use proptest::prelude::*;

use rpforest::forest::neighbor_order;
use rpforest::{
    all_true_neighbors, build_forest, build_tree, distance_error, exact_knn, missing_rate, Dataset, Method, SeedStream,
    StrategyConfig, TreeConfig,
};

fn dataset() -> impl Strategy<Value = Dataset> {
    (25usize..120, 1usize..5).prop_flat_map(|(n, d)| {
        prop::collection::vec(-50.0f64..50.0, n * d).prop_map(move |flat| Dataset::from_flat(flat, n, d).unwrap())
    })
}

fn method() -> impl Strategy<Value = Method> {
    prop::sample::select(Method::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn leaves_partition_the_dataset(data in dataset(), m in method(), cap in 2usize..25, seed: u64) {
        let cfg = TreeConfig::new(StrategyConfig::new(m)).with_leaf_capacity(cap);
        let tree = build_tree(&data, &cfg, &mut SeedStream::new(seed).rng()).unwrap();
        let mut seen: Vec<usize> = tree.leaves().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, data.ids().collect::<Vec<_>>());
        for i in data.ids() {
            prop_assert!(tree.traverse_to_leaf(data.point(i)).unwrap().contains(&i));
        }
    }

    #[test]
    fn queries_are_sorted_subsets_of_the_pool(data in dataset(), m in method(), trees in 1usize..6, k in 1usize..8, seed: u64) {
        let cfg = TreeConfig::new(StrategyConfig::new(m));
        let forest = build_forest(&data, &cfg, trees, seed).unwrap();
        for i in data.ids().step_by(7) {
            let x = data.point(i);
            let pool = forest.candidates(&data, x).unwrap();
            let found = forest.query_knn(&data, x, k, Some(i)).unwrap();
            prop_assert_eq!(found.len(), k.min(pool.len() - 1));
            prop_assert!(found.ids().all(|id| id != i && pool.contains(&id)));
            prop_assert!(found.entries().windows(2).all(|w| neighbor_order(&w[0], &w[1]).is_lt()));
        }
    }

    #[test]
    fn found_kth_distance_dominates_truth(data in dataset(), m in method(), seed: u64) {
        let k = 3;
        let cfg = TreeConfig::new(StrategyConfig::new(m)).with_leaf_capacity(10);
        let forest = build_forest(&data, &cfg, 3, seed).unwrap();
        let truth = all_true_neighbors(&data, k).unwrap();
        let found = forest.query_all(&data, k).unwrap();
        for (t, f) in truth.iter().zip(&found) {
            for (j, n) in f.entries().iter().enumerate() {
                prop_assert!(n.distance >= t.entries()[j].distance);
            }
        }
        let rate = missing_rate(&truth, &found, k).unwrap().rate;
        prop_assert!((0.0..=1.0).contains(&rate));
        let full: Vec<_> = data.ids().map(|i| exact_knn(&data, data.point(i), k, Some(i)).unwrap()).collect();
        prop_assert_eq!(missing_rate(&truth, &full, k).unwrap().rate, 0.0);
        prop_assert_eq!(distance_error(&truth, &full, k).unwrap().mean, 0.0);
    }
}
