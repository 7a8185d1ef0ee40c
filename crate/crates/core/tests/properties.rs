mod common;

use common::random_tree;
use dollo_core::analysis::{frequency_spectrum, singleton_counts};
use dollo_core::io::{read_trait_matrix, write_trait_matrix};
use dollo_core::likelihood::{log_likelihood, log_likelihood_marginal_lambda, survival_recursion};
use dollo_core::mcmc::{initial_tree, ridge_map};
use dollo_core::priors::PriorConfig;
use dollo_core::tree::{admissible, CalibrationSet, CladeConstraint};
use dollo_core::{DatedTree, NodeId, ObservationModel, Subtree, TraitMatrix};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn tree_from_seed(seed: u64, l: usize) -> DatedTree {
    random_tree(l, &mut ChaCha8Rng::seed_from_u64(seed), 3000.0)
}

fn rebuild(tree: &DatedTree, v: NodeId, age: &dyn Fn(NodeId) -> f64) -> Subtree {
    match tree.children(v) {
        None => Subtree::leaf(tree.leaf_name(v), age(v)),
        Some([a, b]) => Subtree::node(age(v), rebuild(tree, a, age), rebuild(tree, b, age)),
    }
}

fn data_strategy() -> impl Strategy<Value = (usize, Vec<Vec<bool>>)> {
    (2usize..7).prop_flat_map(|l| {
        (
            Just(l),
            prop::collection::vec(prop::collection::vec(any::<bool>(), l), 1..40),
        )
    })
}

fn matrix(l: usize, cols: &[Vec<bool>]) -> TraitMatrix {
    let taxa: Vec<String> = (0..l).map(|i| format!("t{i}")).collect();
    let sets = cols
        .iter()
        .map(|c| {
            c.iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    TraitMatrix::from_leaf_sets(&taxa, sets).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn newick_round_trip(seed in any::<u64>(), l in 2usize..12) {
        let t = tree_from_seed(seed, l);
        let back = DatedTree::from_newick(&t.to_newick()).unwrap();
        let back = back.with_leaf_order(t.leaf_names()).unwrap();
        let sets_a = t.leaf_sets();
        let sets_b = back.leaf_sets();
        for v in t.internal_nodes() {
            let w = back.internal_nodes().find(|&w| sets_b[w] == sets_a[v]);
            prop_assert!(w.is_some());
            let (x, y) = (t.age(v), back.age(w.unwrap()));
            prop_assert!((x - y).abs() <= 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn matrix_csv_round_trip((l, cols) in data_strategy()) {
        let m = matrix(l, &cols);
        let mut buf = Vec::new();
        write_trait_matrix(&m, &mut buf).unwrap();
        let back = read_trait_matrix(buf.as_slice()).unwrap();
        prop_assert_eq!(back.matrix, m);
        prop_assert_eq!(back.missing, 0);
    }

    #[test]
    fn spectrum_partitions_traits((l, cols) in data_strategy(), shift in 0usize..7) {
        let m = matrix(l, &cols);
        let y = frequency_spectrum(&m);
        prop_assert_eq!(y.iter().sum::<usize>(), m.n_traits());
        prop_assert_eq!(singleton_counts(&m).iter().sum::<usize>(), y[1]);
        let mut order: Vec<String> = m.taxa().to_vec();
        order.rotate_left(shift % l);
        let r = m.with_taxa_order(&order).unwrap();
        prop_assert_eq!(frequency_spectrum(&r), y);
    }

    #[test]
    fn incremental_refresh_matches_recompute(seed in any::<u64>(), l in 3usize..10, pick in any::<u64>(), mu in 1e-4f64..5e-3) {
        let t1 = tree_from_seed(seed, l);
        let target = t1.n_leaves() + (pick as usize) % (t1.n_leaves() - 1);
        let lo = t1.children(target).unwrap().iter().map(|&c| t1.age(c)).fold(0.0, f64::max);
        let hi = if target == t1.root() { lo + 5000.0 } else { t1.age(t1.parent(target).unwrap()) };
        let new_age = lo + 0.37 * (hi - lo);
        let t2 = DatedTree::from_subtree(&rebuild(&t1, t1.root(), &|v| if v == target { new_age } else { t1.age(v) })).unwrap();
        prop_assume!((0..t1.n_nodes()).all(|v| t1.parent(v) == t2.parent(v)));
        let mut table = survival_recursion(&t1, mu).unwrap();
        table.refresh(&t2, mu, &[target]);
        let fresh = survival_recursion(&t2, mu).unwrap();
        for v in 0..t2.n_nodes() {
            for (a, b) in [(table.u0[v], fresh.u0[v]), (table.u1[v], fresh.u1[v]), (table.present[v], fresh.present[v]), (table.multiple[v], fresh.multiple[v])] {
                prop_assert!((a - b).abs() <= 1e-14, "{} vs {}", a, b);
                prop_assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    #[test]
    fn likelihood_invariant_under_ridge(seed in any::<u64>(), l in 2usize..8, (dl, cols) in data_strategy(), rho in 0.3f64..3.0) {
        prop_assume!(dl == l);
        let t = tree_from_seed(seed, l);
        let data = matrix(l, &cols);
        prop_assume!(data.check_observation_model(ObservationModel::NoAbsent).is_ok());
        let data = TraitMatrix::new(t.leaf_names().to_vec(), data.traits().to_vec()).unwrap();
        let mu = 4e-4;
        let (t2, mu2) = ridge_map(&t, mu, rho);
        let a = log_likelihood(&t, mu, 50.0 * mu, &data, ObservationModel::NoAbsent).unwrap();
        let b = log_likelihood(&t2, mu2, 50.0 * mu2, &data, ObservationModel::NoAbsent).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        let a = log_likelihood_marginal_lambda(&t, mu, &data, ObservationModel::NoAbsent).unwrap();
        let b = log_likelihood_marginal_lambda(&t2, mu2, &data, ObservationModel::NoAbsent).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
    }

    #[test]
    fn starting_tree_is_admissible(seed in any::<u64>(), l in 4usize..12, k in 1usize..4) {
        let truth = tree_from_seed(seed, l);
        let sets = truth.leaf_sets();
        let mut cal = CalibrationSet::default();
        for (i, v) in truth.internal_nodes().filter(|&v| v != truth.root()).take(k).enumerate() {
            let age = truth.age(v);
            cal.clades.push(CladeConstraint {
                name: format!("c{i}"),
                taxa: sets[v].ones().map(|j| truth.leaf_name(j).to_string()).collect(),
                lower: Some(0.8 * age),
                upper: Some(1.2 * age),
            });
        }
        let data = TraitMatrix::from_leaf_sets(truth.leaf_names(), vec![(0..l).collect()]).unwrap();
        let resolved = cal.resolve(data.taxa()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let start = initial_tree(&data, &resolved, &PriorConfig::default(), &mut rng).unwrap();
        prop_assert!(admissible(&start, &resolved).admissible);
        prop_assert!(start.validate().is_ok());
    }
}
