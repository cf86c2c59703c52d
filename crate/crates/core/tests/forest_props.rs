use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stargaze::forest::{fit_forest, ForestConfig, TreeNode};
use stargaze::Matrix;

fn dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (Matrix, Vec<u8>) {
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let noisy = row[0] + 0.5 * row[1 % d] + rng.random_range(-0.5..0.5);
        y.push((noisy > 0.0) as u8);
        data.extend(row);
    }
    (Matrix::from_vec(n, d, data).unwrap(), y)
}

fn small_config(seed: u64) -> ForestConfig {
    ForestConfig {
        n_trees: 15,
        seed,
        ..ForestConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn increasing_transforms_leave_tree_structure_unchanged(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = dataset(&mut rng, 60, 3);
        let t = Matrix::from_vec(60, 3, x.as_slice().iter().map(|v| v * v * v + 2.0 * v + 1.0).collect()).unwrap();
        let cfg = small_config(seed);
        let a = fit_forest(&x, &y, &cfg).unwrap();
        let b = fit_forest(&t, &y, &cfg).unwrap();
        // Thresholds move, but every split separates the same rows.
        for (ta, tb) in a.trees().iter().zip(b.trees()) {
            prop_assert_eq!(ta.nodes().len(), tb.nodes().len());
            for (na, nb) in ta.nodes().iter().zip(tb.nodes()) {
                match (na, nb) {
                    (
                        TreeNode::Split { feature: fa, left: la, right: ra, .. },
                        TreeNode::Split { feature: fb, left: lb, right: rb, .. },
                    ) => prop_assert_eq!((fa, la, ra), (fb, lb, rb)),
                    (TreeNode::Leaf { probability: pa }, TreeNode::Leaf { probability: pb }) => {
                        prop_assert_eq!(pa, pb)
                    }
                    _ => prop_assert!(false, "node kinds differ"),
                }
            }
        }
    }

    #[test]
    fn probability_is_mean_of_tree_votes(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = dataset(&mut rng, 50, 4);
        let forest = fit_forest(&x, &y, &small_config(seed)).unwrap();
        let per_tree = forest.tree_probabilities(&x).unwrap();
        let proba = forest.predict_proba(&x).unwrap();
        let labels = forest.predict(&x).unwrap();
        prop_assert_eq!(per_tree.len(), 15);
        for i in 0..x.rows() {
            let mean = per_tree.iter().map(|t| t[i]).sum::<f64>() / 15.0;
            prop_assert!((proba[i] - mean).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&proba[i]));
            prop_assert_eq!(labels[i], (proba[i] >= 0.5) as u8);
        }
    }

    #[test]
    fn trees_are_well_formed(seed in any::<u64>(), depth in proptest::option::of(1usize..6)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = dataset(&mut rng, 40, 3);
        let cfg = ForestConfig { max_depth: depth, ..small_config(seed) };
        for tree in fit_forest(&x, &y, &cfg).unwrap().trees() {
            if let Some(m) = depth {
                prop_assert!(tree.depth() <= m);
            }
            for node in tree.nodes() {
                match *node {
                    TreeNode::Split { left, right, threshold, .. } => {
                        prop_assert!(left < tree.nodes().len() && right < tree.nodes().len());
                        prop_assert!(threshold.is_finite());
                    }
                    TreeNode::Leaf { probability } => prop_assert!((0.0..=1.0).contains(&probability)),
                }
            }
        }
    }
}

#[test]
fn fitting_is_deterministic_and_thread_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (x, y) = dataset(&mut rng, 200, 6);
    let cfg = ForestConfig {
        seed: 5,
        ..ForestConfig::default()
    };
    let reference = fit_forest(&x, &y, &cfg).unwrap();
    for threads in [1, 3] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let again = pool.install(|| fit_forest(&x, &y, &cfg).unwrap());
        assert_eq!(again, reference);
    }
    let other = fit_forest(&x, &y, &ForestConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(other, reference);
}

#[test]
fn single_class_training_data_predicts_that_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (x, _) = dataset(&mut rng, 30, 2);
    for class in [0u8, 1] {
        let forest = fit_forest(&x, &[class; 30], &small_config(0)).unwrap();
        let p = forest.predict_proba(&x).unwrap();
        assert!(p.iter().all(|&v| v == class as f64));
    }
}

#[test]
fn separable_data_is_learned() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (x, _) = dataset(&mut rng, 300, 2);
    let y: Vec<u8> = x.iter_rows().map(|r| (r[0] > 0.3) as u8).collect();
    let forest = fit_forest(
        &x,
        &y,
        &ForestConfig {
            n_trees: 30,
            ..ForestConfig::default()
        },
    )
    .unwrap();
    let correct = forest
        .predict(&x)
        .unwrap()
        .iter()
        .zip(&y)
        .filter(|(a, b)| a == b)
        .count();
    assert!(correct as f64 / 300.0 > 0.98, "{correct}");
}
