mod common;

use approx::assert_relative_eq;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal as StatNormal, StudentsT};
use statrs::function::gamma::ln_gamma;

use xcdtl_core::anomaly::metrics::roc_auc;
use xcdtl_core::anomaly::label_anomalies;
use xcdtl_core::features::{FeatureMatrix, FeatureVector, NUM_FEATURES};
use xcdtl_core::graph::Domain;
use xcdtl_core::stats;

#[test]
fn distribution_tails_match_reference() {
    for dof in [1.0, 2.0, 3.0, 5.5, 11.0, 30.0] {
        let chi = ChiSquared::new(dof).unwrap();
        let t = StudentsT::new(0.0, 1.0, dof).unwrap();
        for x in [0.01, 0.3, 1.0, 2.5, 7.2, 15.0, 40.0] {
            assert_relative_eq!(stats::chi2_sf(x, dof), chi.sf(x), max_relative = 1e-9, epsilon = 1e-300);
            let two = 2.0 * t.sf(x);
            assert_relative_eq!(stats::student_two_sided(x, dof), two, max_relative = 1e-9, epsilon = 1e-300);
            assert_relative_eq!(stats::student_two_sided(-x, dof), two, max_relative = 1e-9, epsilon = 1e-300);
        }
    }
    let n = StatNormal::new(0.0, 1.0).unwrap();
    for z in [0.0, 0.5, 1.96, 3.0, 6.0] {
        assert_relative_eq!(stats::normal_two_sided(z), 2.0 * n.sf(z), max_relative = 1e-9, epsilon = 1e-300);
    }
    for x in [0.1, 0.5, 1.0, 4.5, 20.0, 170.3] {
        assert_relative_eq!(stats::ln_gamma(x), ln_gamma(x), max_relative = 1e-12, epsilon = 1e-14);
    }
}

#[test]
fn kruskal_wallis_statistic_matches_rank_by_sort() {
    let mut r = common::rng(3);
    for _ in 0..50 {
        let k = r.random_range(2..=5);
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..r.random_range(1..=8)).map(|_| r.random_range(0..6) as f64).collect())
            .collect();
        if groups.iter().map(|g| g.len()).sum::<usize>() < 5 {
            continue;
        }
        let slices: Vec<&[f64]> = groups.iter().map(|g| g.as_slice()).collect();
        let res = stats::kruskal_wallis(&slices).unwrap();
        if res.degenerate {
            assert_eq!((res.statistic, res.p_value), (0.0, 1.0));
            continue;
        }
        assert!((res.statistic - common::naive_h(&groups)).abs() < 1e-10);
        let chi = ChiSquared::new((k - 1) as f64).unwrap();
        assert!((res.p_value - chi.sf(res.statistic)).abs() < 1e-10);
    }
}

#[test]
fn paired_t_matches_textbook_formula() {
    let mut r = common::rng(4);
    let nd = Normal::new(0.3, 1.0).unwrap();
    for _ in 0..30 {
        let n = r.random_range(2..25);
        let x: Vec<f64> = (0..n).map(|_| nd.sample(&mut r)).collect();
        let y: Vec<f64> = (0..n).map(|_| nd.sample(&mut r) * 0.5).collect();
        let d: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let t = mean / (sd / (n as f64).sqrt());
        let res = stats::paired_t_test(&x, &y).unwrap();
        assert_relative_eq!(res.statistic, t, max_relative = 1e-12);
        let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).unwrap();
        assert_relative_eq!(res.p_value, 2.0 * dist.sf(t.abs()), max_relative = 1e-9);
    }
    let flat = stats::paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 1.0, 2.0]).unwrap();
    assert!(flat.degenerate && flat.p_value == 0.0);
}

#[test]
fn dunn_separates_distant_group() {
    let a: Vec<f64> = (0..10).map(|i| i as f64 * 0.1).collect();
    let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.1 + 0.05).collect();
    let c: Vec<f64> = (0..10).map(|i| 10.0 + i as f64 * 0.1).collect();
    let res = stats::dunn_posthoc(&[&a, &b, &c]).unwrap();
    let p = res.pairwise.unwrap();
    assert!(p[0][2] < 0.01 && p[1][2] < 0.01);
    assert!(p[0][1] > 0.5);
    for i in 0..3 {
        assert_eq!(p[i][i], 1.0);
        for j in 0..3 {
            assert_eq!(p[i][j], p[j][i]);
            assert!(p[i][j] <= 1.0);
        }
    }
}

#[test]
fn regression_recovers_lines_and_null_correlation_is_small() {
    let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.3).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let s = stats::linear_regression(&x, &y).unwrap();
    assert_relative_eq!(s.slope, 2.0, max_relative = 1e-12);
    assert_relative_eq!(s.intercept, 1.0, max_relative = 1e-12);
    assert_relative_eq!(s.pearson_r, 1.0, max_relative = 1e-12);

    let mut r = common::rng(6);
    let small = (0..100)
        .filter(|_| {
            let y: Vec<f64> = (0..12).map(|_| r.random::<f64>()).collect();
            stats::linear_regression(&x, &y).unwrap().pearson_r.abs() < 0.6
        })
        .count();
    assert!(small >= 90, "{small}");
}

#[test]
fn random_scores_have_chance_auc() {
    let mut r = common::rng(7);
    let mut total = 0.0;
    for _ in 0..1000 {
        let scores: Vec<f64> = (0..50).map(|_| r.random()).collect();
        let mut labels: Vec<bool> = (0..50).map(|_| r.random_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        total += roc_auc(&scores, &labels).unwrap();
    }
    let mean = total / 1000.0;
    assert!((mean - 0.5).abs() < 0.02, "{mean}");
}

#[test]
fn anomaly_labels_ignore_row_order() {
    let mut r = common::rng(8);
    let rows: Vec<FeatureVector> = (0..60)
        .map(|_| {
            let mut v = FeatureVector {
                values: std::array::from_fn(|_| r.random::<f64>() * 3.0),
                mask: [true; NUM_FEATURES],
            };
            if r.random_bool(0.1) {
                v.values[4] = f64::NAN;
                v.mask[4] = false;
            }
            v
        })
        .collect();
    let m = FeatureMatrix {
        ids: (0..60).map(|i| i.to_string()).collect(),
        domains: vec![Domain::Proteins; 60],
        rows: rows.clone(),
    };
    let order: Vec<usize> = (0..60).rev().collect();
    let shuffled = m.subset(&order);
    let a = label_anomalies(&m).unwrap();
    let b = label_anomalies(&shuffled).unwrap();
    assert_eq!(a.labels.iter().filter(|&&l| l).count(), 6);
    for (k, &i) in order.iter().enumerate() {
        assert_eq!(a.labels[i], b.labels[k]);
        assert!((a.scores[i] - b.scores[k]).abs() < 1e-12);
    }
}
