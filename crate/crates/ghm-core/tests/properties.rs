//! Property-based checks of the structural invariants.

use std::sync::Arc;

use proptest::collection::vec;
use proptest::prelude::*;

use ghm_core::model::GhmModel;
use ghm_core::{CountMatrix, EmConfig, GeoTree, NodeSpec, Vocabulary};

/// Tree descriptions generated as a random parent assignment where every
/// node's parent precedes it, which is acyclic and single-rooted by
/// construction.
fn arb_tree_specs() -> impl Strategy<Value = Vec<NodeSpec>> {
    vec(0usize..1000, 1..24).prop_map(|parents| {
        parents
            .iter()
            .enumerate()
            .map(|(i, &p)| NodeSpec {
                id: format!("n{i}"),
                name: format!("node {i}"),
                parent: (i > 0).then(|| format!("n{}", p % i)),
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_round_trips_and_paths_reach_the_root(specs in arb_tree_specs()) {
        let tree = GeoTree::build(&specs).unwrap();
        let json = serde_json::to_string(&tree.to_specs()).unwrap();
        let back = GeoTree::from_json(&json).unwrap();
        prop_assert_eq!(&tree, &back);

        let mut path_total = 0;
        for row in 0..tree.num_leaves() {
            let leaf = tree.leaf_node(row);
            let ids = tree.path_to_root(tree.id(leaf).as_str()).unwrap();
            prop_assert_eq!(ids.first().unwrap(), tree.id(leaf));
            prop_assert_eq!(ids.last().unwrap(), tree.id(tree.root()));
            prop_assert_eq!(ids.len(), tree.path(row).len());
            path_total += ids.len();
        }
        prop_assert!(path_total <= tree.num_leaves() * tree.depth());
    }

    #[test]
    fn posterior_is_normalized_and_classification_stays_on_the_path(
        seed in 0u64..1_000_000,
        leaves in 1usize..5,
        num_tags in 2usize..7,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut specs = vec![NodeSpec { id: "r".into(), name: String::new(), parent: None }];
        for i in 0..leaves {
            specs.push(NodeSpec {
                id: format!("l{i}"),
                name: String::new(),
                parent: Some("r".into()),
            });
        }
        let tree = Arc::new(GeoTree::build(&specs).unwrap());
        let positive = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        };
        let theta: Vec<Vec<f64>> =
            (0..tree.num_nodes()).map(|_| positive(&mut rng, num_tags)).collect();
        let pi: Vec<Vec<f64>> = (0..tree.num_leaves())
            .map(|row| positive(&mut rng, tree.path(row).len()))
            .collect();
        let model = GhmModel::from_parts(
            tree.clone(),
            Arc::new(Vocabulary::indexed(num_tags)),
            theta.clone(),
            pi.clone(),
            EmConfig::default(),
        ).unwrap();

        for row in 0..tree.num_leaves() {
            let leaf_id = tree.id(tree.leaf_node(row)).as_str().to_owned();
            for tag in 0..num_tags as u32 {
                let posterior = model.posterior(tag, &leaf_id).unwrap();
                prop_assert!((posterior.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);

                // mixture probability equals the weighted dot product
                let expected: f64 = tree.path(row).iter().zip(&pi[row])
                    .map(|(&node, &w)| theta[node][tag as usize] * w)
                    .sum();
                let got = model.tag_probability(tag, &leaf_id).unwrap();
                prop_assert!((got - expected).abs() < 1e-12);

                // classification lands on the leaf's own path
                let node = model.classify(tag, &leaf_id).unwrap();
                let on_path = tree.path(row).iter().any(|&n| tree.id(n) == node);
                prop_assert!(on_path);
            }
        }
    }

    #[test]
    fn count_matrix_lookup_matches_a_map(entries in vec((0u32..12, 1u32..40), 0..30)) {
        let counts = CountMatrix::from_rows(12, vec![entries.clone()]).unwrap();
        let mut map = std::collections::HashMap::new();
        for (t, c) in entries {
            *map.entry(t).or_insert(0u64) += c as u64;
        }
        for t in 0..12u32 {
            prop_assert_eq!(counts.get(0, t) as u64, map.get(&t).copied().unwrap_or(0));
        }
        prop_assert_eq!(counts.row_total(0), map.values().sum::<u64>());
    }
}
