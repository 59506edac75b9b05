mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use jobrec::classify::{
    cross_validate_select, fit, linear_score, rbf_kernel, Algorithm, Hyperparams, Model, Params,
};
use jobrec::features::FeatureMatrix;
use jobrec::linalg::DenseMatrix;

#[test]
fn logistic_gradient_matches_central_differences() {
    let err = common::lr_gradient_error();
    assert!(err <= 1e-6, "{err:e}");
}

#[test]
fn paragraph_vector_gradient_matches_central_differences() {
    let err = common::pv_gradient_error();
    assert!(err <= 1e-5, "{err:e}");
}

#[test]
fn smo_matches_dense_dual_solver() {
    let (gap, at_c) = common::smo_vs_qp();
    assert!(gap <= 1e-3, "{gap:e}");
    // The fixture overlaps, so the box constraint is active somewhere.
    assert!(at_c > 0);
}

#[test]
fn qp_oracle_solves_a_two_point_problem() {
    // Two points, linear kernel on x = ±1: α = 0.5 each, b = 0, f(x) = x.
    let kernel = [1.0, -1.0, -1.0, 1.0];
    let f = common::dual_qp_decision_values(&kernel, &[1.0, -1.0], 10.0);
    assert!((f[0] - 1.0).abs() < 1e-9 && (f[1] + 1.0).abs() < 1e-9, "{f:?}");
}

#[test]
fn cart_root_split_matches_exhaustive_search() {
    common::check_cart_root_split().unwrap();
}

#[test]
fn naive_bayes_posterior_matches_enumeration() {
    common::check_naive_bayes().unwrap();
    // x = (1, 1): (3/5)(3/5) against (2/5)(2/5) under equal priors.
    let p = common::nb_enumerated_posteriors().into_iter().find(|(q, _)| *q == [1, 1]).unwrap().1;
    assert!((p - 0.36 / 0.52).abs() < 1e-12, "{p}");
}

#[test]
fn xor_separates_only_with_the_kernel() {
    common::check_xor().unwrap();
}

#[test]
fn rbf_gram_matrix_is_symmetric_bounded_and_psd() {
    let mut r = common::rng(40);
    let pts: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
    let mut g = vec![0.0; 100];
    for i in 0..10 {
        for j in 0..10 {
            g[i * 10 + j] = rbf_kernel(&pts[i], &pts[j], 0.7).unwrap();
            assert!(g[i * 10 + j] > 0.0 && g[i * 10 + j] <= 1.0);
        }
    }
    for i in 0..10 {
        for j in 0..10 {
            assert_eq!(g[i * 10 + j], g[j * 10 + i]);
        }
    }
    let min = *common::symmetric_eigenvalues(g, 10).last().unwrap();
    assert!(min >= -1e-8, "{min}");
}

#[test]
fn cv_prefers_the_strongest_penalty_on_noise() {
    let mut hits = 0;
    for trial in 0..50u64 {
        let mut r = common::rng(1000 + trial);
        let x = FeatureMatrix::Dense(common::gaussian_matrix(&mut r, 60, 10));
        let y: Vec<u8> = (0..60).map(|_| u8::from(r.random_bool(0.5))).collect();
        let mut hp = Hyperparams::new(Algorithm::LogRegCv);
        hp.seed = trial;
        let (_, _, l2) = cross_validate_select(&x, &y, &hp).unwrap();
        if l2 == *hp.l2_grid.last().unwrap() {
            hits += 1;
        }
    }
    assert!(hits >= 30, "grid maximum chosen in {hits} of 50 trials");
}

fn noisy_fixture(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> (FeatureMatrix, Vec<u8>) {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| r.random::<f64>()).collect()).collect();
    let y = rows
        .iter()
        .map(|x| {
            let clean = u8::from(x[0] + x[1] > 1.0);
            if r.random_bool(0.1) {
                1 - clean
            } else {
                clean
            }
        })
        .collect();
    (FeatureMatrix::Dense(DenseMatrix::from_rows(&rows).unwrap()), y)
}

fn accuracy(model: &Model, x: &FeatureMatrix, y: &[u8]) -> f64 {
    let pred = model.predict(x).unwrap();
    pred.iter().zip(y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64
}

#[test]
fn forest_beats_a_single_tree_on_label_noise() {
    let (mut forest_total, mut tree_total) = (0.0, 0.0);
    for seed in 0..10 {
        let mut r = common::rng(500 + seed);
        let (x, y) = noisy_fixture(&mut r, 200);
        let (xt, yt) = noisy_fixture(&mut r, 200);
        let mut hp = Hyperparams::new(Algorithm::RandomForest);
        hp.seed = seed;
        forest_total += accuracy(&fit(&x, &y, &hp).unwrap(), &xt, &yt);
        hp.algorithm = Algorithm::DecisionTree;
        tree_total += accuracy(&fit(&x, &y, &hp).unwrap(), &xt, &yt);
    }
    assert!(forest_total >= tree_total, "forest {forest_total} vs tree {tree_total}");
}

#[test]
fn predictions_do_not_depend_on_row_order() {
    let mut r = common::rng(41);
    let (x, y) = noisy_fixture(&mut r, 80);
    let mut order: Vec<usize> = (0..80).collect();
    order.shuffle(&mut r);
    let permuted = x.select_rows(&order);
    for alg in Algorithm::ALL {
        let model = fit(&x, &y, &Hyperparams::new(alg)).unwrap();
        let a = model.predict(&x).unwrap();
        let b = model.predict(&permuted).unwrap();
        for (k, &i) in order.iter().enumerate() {
            assert_eq!(a[i], b[k], "{alg:?}");
        }
    }
}

#[test]
fn linear_score_matches_a_plain_loop() {
    let mut r = common::rng(42);
    for _ in 0..100 {
        let d = r.random_range(0..20);
        let w: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let x: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let w0 = r.random_range(-1.0..1.0);
        let mut s = w0;
        for i in 0..d {
            s += w[i] * x[i];
        }
        assert!((linear_score(&w, w0, &x).unwrap() - s).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn linear_labels_are_scale_invariant(
        w in proptest::collection::vec(-3.0f64..3.0, 4),
        w0 in -3.0f64..3.0,
        c in 0.01f64..100.0,
        rows in proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, 4), 1..10),
    ) {
        let x = FeatureMatrix::Dense(DenseMatrix::from_rows(&rows).unwrap());
        for alg in [Algorithm::LogReg, Algorithm::LinearSvm] {
            let make = |s: f64| Model {
                algorithm: alg,
                feature_dim: 4,
                training_seconds: 0.0,
                params: match alg {
                    Algorithm::LogReg => Params::Logistic { w: w.iter().map(|v| v * s).collect(), w0: w0 * s, l2: 0.0 },
                    _ => Params::LinearSvm { w: w.iter().map(|v| v * s).collect(), w0: w0 * s },
                },
            };
            let a = make(1.0).predict(&x).unwrap();
            let b = make(c).predict(&x).unwrap();
            // Scores within rounding of the boundary may flip; skip those rows.
            for i in 0..rows.len() {
                let z = linear_score(&w, w0, &rows[i]).unwrap();
                if z.abs() > 1e-9 {
                    prop_assert_eq!(a[i], b[i]);
                }
            }
        }
    }
}
