mod common;

use rand::Rng;

use xcdtl_core::classify::{
    evaluate_multiclass, train_classifier, GradientBoosting, LogisticRegression, ModelKind, RandomForest, GRAD_TOL,
    MAX_ITER,
};
use xcdtl_core::features::{standardize, FeatureMatrix};
use xcdtl_core::graph::{generate_ensemble, Domain};
use xcdtl_core::linalg::Matrix;
use xcdtl_core::stats::spearman;

/// Standardised descriptors of 4 × `per` synthetic graphs with class labels.
fn four_domain_task(per: usize) -> (Matrix, Vec<usize>) {
    let mut parts = Vec::new();
    let mut y = Vec::new();
    for (k, d) in Domain::ALL.into_iter().enumerate() {
        let ens = generate_ensemble(d, per, 9, d.default_size_range()).unwrap();
        parts.push(FeatureMatrix::from_graphs(&ens.graphs).unwrap());
        y.extend(std::iter::repeat_n(k, per));
    }
    let all = FeatureMatrix::concat(&parts.iter().collect::<Vec<_>>());
    let z = standardize(&all).unwrap().z;
    (Matrix::from_rows(&z), y)
}

#[test]
fn logistic_regression_converges_on_domain_task() {
    let (x, y) = four_domain_task(200);
    let fit = LogisticRegression::fit(&x, &y, 4).unwrap();
    assert!(fit.grad_inf_norm < GRAD_TOL, "gradient {} after {} iterations", fit.grad_inf_norm, fit.iterations);
    assert!(fit.iterations < MAX_ITER);
    assert!(fit.objective_trace.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn boosting_deviance_never_increases() {
    let (x, y) = four_domain_task(100);
    let m = train_classifier(ModelKind::GB, &x, &y, 0).unwrap();
    let trace = m.deviance_trace().unwrap();
    assert_eq!(trace.len(), 100);
    assert!(trace.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{trace:?}");
    let gb = GradientBoosting::fit(&x, &y, 4);
    assert_eq!(gb.train_deviance, trace);
}

#[test]
fn models_separate_domains_and_importances_are_distributions() {
    let (x, y) = four_domain_task(120);
    let idx: Vec<usize> = (0..x.rows()).collect();
    let (train, test): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|i| i % 5 != 0);
    let xt = x.select_rows(&train);
    let yt: Vec<usize> = train.iter().map(|&i| y[i]).collect();
    let xs = x.select_rows(&test);
    let ys: Vec<usize> = test.iter().map(|&i| y[i]).collect();
    for kind in ModelKind::ALL {
        let m = train_classifier(kind, &xt, &yt, 3).unwrap();
        assert!((m.importance.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.importance.iter().all(|&v| v >= 0.0));
        let met = evaluate_multiclass(&m, &xs, &ys).unwrap();
        assert!(met.accuracy > 0.85, "{kind}: {}", met.accuracy);
        for p in m.predict_proba(&xs) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn random_forest_refit_is_reproducible() {
    let (x, y) = four_domain_task(60);
    let a = RandomForest::fit(&x, &y, 4, 17);
    let b = RandomForest::fit(&x, &y, 4, 17);
    assert_eq!(a.importance, b.importance);
    assert_eq!(a.predict_proba(&x), b.predict_proba(&x));
}

// Candidate features are drawn by column position, so a column permutation
// changes which splits are examined; importances follow the permutation
// only up to resampling noise.
#[test]
fn random_forest_importance_follows_column_permutation() {
    let (x, y) = four_domain_task(150);
    let mut r = common::rng(5);
    let mut perm: Vec<usize> = (0..x.cols()).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, r.random_range(0..=i));
    }
    let xp = x.select_columns(&perm);
    let a = RandomForest::fit(&x, &y, 4, 11).importance;
    let b = RandomForest::fit(&xp, &y, 4, 11).importance;
    let a_perm: Vec<f64> = perm.iter().map(|&j| a[j]).collect();
    let worst = a_perm.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let rho = spearman(&a_perm, &b);
    assert!(worst < 0.05 && rho > 0.9, "max importance gap {worst}, rank correlation {rho}");
}

#[test]
fn too_few_rows_or_one_class_is_rejected() {
    let x = common::uniform_rows(10, 3, 1);
    assert!(train_classifier(ModelKind::RF, &x, &[0; 10], 0).is_err());
    let x = common::uniform_rows(30, 3, 1);
    assert!(train_classifier(ModelKind::LR, &x, &[1; 30], 0).is_err());
    assert!(train_classifier(ModelKind::GB, &x, &[0; 29], 0).is_err());
}
