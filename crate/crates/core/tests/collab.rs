mod common;

use rand::Rng;

use jobrec::cf::{
    build_rating_matrix, classify_from_cf, train_cf, train_cf_traced, CfConfig, CfMode, N_ITEMS, TARGET_ITEM,
};
use jobrec::datagen::{generate_corpus, GenSpec};
use jobrec::profile::{
    balanced_sample, normalize_durations, train_test_split, Example, LabeledDataset, Profile, Split, WorkExperience,
};

#[test]
fn formula_single_cell_determinism_and_rating_rules() {
    common::check_cf().unwrap();
}

#[test]
fn direct_formula_reduces_to_biases_without_feedback() {
    for mode in CfMode::ALL {
        let m = common::cf_fixture(mode, 3);
        // User 3 has no feedback; in SVD++ mode p_u still contributes.
        let f = m.factors;
        let expected = m.mu + m.params.b_user[3] + m.params.b_item[1]
            + match mode {
                CfMode::SvdPp => (0..f).map(|k| m.params.q[f + k] * m.params.p[3 * f + k]).sum::<f64>(),
                CfMode::AsvdPp => 0.0,
            };
        assert!((common::direct_prediction(&m, 3, 1) - expected).abs() < 1e-12);
    }
}

#[test]
fn analytic_gradient_matches_central_differences_and_sgd_uses_it() {
    let mut r = common::rng(50);
    for mode in CfMode::ALL {
        for state in 0..5 {
            let mut m = common::cf_fixture(mode, 100 + state);
            m.lambda = 0.05;
            m.learning_rate = 0.01;
            let u = r.random_range(0..4);
            let i = r.random_range(0..3);
            let rating = [-1.0, 1.0, 2.0][r.random_range(0..3)];
            let g = m.observation_gradient(u, i, rating);
            let h = 1e-5;
            let names: Vec<&str> = g.fields().iter().map(|(n, _)| *n).collect();
            for (fi, name) in names.iter().enumerate() {
                let len = g.fields()[fi].1.len();
                for idx in 0..len {
                    let orig = m.params.fields()[fi].1[idx];
                    m.params.fields_mut()[fi].1[idx] = orig + h;
                    let lp = m.observation_loss(u, i, rating);
                    m.params.fields_mut()[fi].1[idx] = orig - h;
                    let lm = m.observation_loss(u, i, rating);
                    m.params.fields_mut()[fi].1[idx] = orig;
                    let numeric = (lp - lm) / (2.0 * h);
                    let analytic = g.fields()[fi].1[idx];
                    assert!((numeric - analytic).abs() <= 1e-8, "{mode} {name}[{idx}]: {analytic} vs {numeric}");
                }
            }
            let before = m.clone();
            m.sgd_step(u, i, rating);
            for fi in 0..names.len() {
                let (old, new, grad) = (before.params.fields()[fi].1, m.params.fields()[fi].1, g.fields()[fi].1);
                for idx in 0..old.len() {
                    let want = old[idx] - m.learning_rate * grad[idx];
                    assert!((new[idx] - want).abs() <= 1e-12, "{mode} {}[{idx}]", names[fi]);
                }
            }
        }
    }
}

fn standard_fixture() -> (Vec<Profile>, LabeledDataset) {
    let spec = GenSpec { n_users: 1500, required_positives: 60, ..GenSpec::default() };
    let mut profiles = generate_corpus(&spec).unwrap().profiles;
    normalize_durations(&mut profiles);
    let ds = balanced_sample(&profiles, "consultant", 60, 60, 42).unwrap();
    let ds = train_test_split(ds, 0.8, 42).unwrap();
    (profiles, ds)
}

#[test]
fn training_rmse_drops_from_epoch_one_to_ten() {
    let (profiles, ds) = standard_fixture();
    let matrix = build_rating_matrix(&profiles, &ds, "consultant").unwrap();
    for mode in CfMode::ALL {
        let cfg = CfConfig { epochs: 10, ..CfConfig::new(mode) };
        let (_, trace) = train_cf_traced(&matrix, &cfg).unwrap();
        assert!(trace[9] < trace[0], "{mode}: {trace:?}");
    }
}

#[test]
fn heavy_regularization_collapses_to_the_mean() {
    let mut r = common::rng(51);
    let matrix = common::random_ratings(&mut r, 40);
    for mode in CfMode::ALL {
        let cfg = CfConfig { lambda: 1e3, learning_rate: 1e-4, epochs: 50, ..CfConfig::new(mode) };
        let m = train_cf(&matrix, &cfg).unwrap();
        for u in 0..40 {
            for i in 0..N_ITEMS {
                assert!((m.predict_rating(u, i) - m.mu).abs() < 1e-2, "{mode}");
            }
        }
    }
}

fn slot(title: &str, months: u32) -> Option<WorkExperience> {
    Some(WorkExperience { job_title: title.into(), duration_months: Some(months), ..WorkExperience::default() })
}

#[test]
fn block_structured_fixture_labels_the_matching_user_positive() {
    let target = "data scientist";
    let mut profiles = Vec::new();
    let mut examples = Vec::new();
    for u in 0..41 {
        let positive = u % 2 == 0;
        let mut p = Profile { id: format!("u{u}"), ..Profile::default() };
        for s in p.past_jobs.iter_mut() {
            *s = if positive { slot(target, 48) } else { slot("consultant", 20) };
        }
        profiles.push(p);
        examples.push(Example { profile_index: u, label: u8::from(positive) });
    }
    let ds = LabeledDataset {
        target_title: target.into(),
        examples,
        split: Some(Split { train: (0..40).collect(), test: vec![40] }),
    };
    let matrix = build_rating_matrix(&profiles, &ds, target).unwrap();
    assert!(matrix.ratings.iter().filter(|r| r.user == 40).all(|r| r.value == 2 && r.item != TARGET_ITEM));
    for mode in CfMode::ALL {
        let m = train_cf(&matrix, &CfConfig::new(mode)).unwrap();
        assert_eq!(classify_from_cf(&m, &[40], 0.0), vec![1], "{mode}");
        let negatives: Vec<usize> = (0..40).filter(|u| u % 2 == 1).collect();
        assert!(classify_from_cf(&m, &negatives, 0.0).iter().all(|&l| l == 0), "{mode}");
    }
}

#[test]
fn labels_do_not_depend_on_test_user_order() {
    let (profiles, ds) = standard_fixture();
    let matrix = build_rating_matrix(&profiles, &ds, "consultant").unwrap();
    let m = train_cf(&matrix, &CfConfig { epochs: 5, ..CfConfig::new(CfMode::AsvdPp) }).unwrap();
    let users = matrix.test_users.clone();
    let mut reversed = users.clone();
    reversed.reverse();
    let mut back = classify_from_cf(&m, &reversed, 0.0);
    back.reverse();
    assert_eq!(classify_from_cf(&m, &users, 0.0), back);
}

#[test]
fn target_item_is_observed_exactly_for_training_users() {
    let (profiles, ds) = standard_fixture();
    let matrix = build_rating_matrix(&profiles, &ds, "consultant").unwrap();
    let observed: Vec<usize> = matrix.ratings.iter().filter(|r| r.item == TARGET_ITEM).map(|r| r.user).collect();
    assert_eq!(observed, matrix.train_users);
    for r in &matrix.ratings {
        assert!([-1, 1, 2].contains(&r.value));
        if r.item == TARGET_ITEM {
            assert_eq!(r.value, if matrix.labels[r.user] == 1 { 2 } else { -1 });
        }
    }
}
