#![allow(clippy::needless_range_loop)]

mod common;

use metareg::datagen::{build_joint_distribution, derive_true_slopes, sample_dataset, SimulationConfig};
use metareg::estimators::{build_design, fit, wls_fit, SpecKind};
use metareg::extract::{extract_parameters, one_way_f};
use metareg::numerics::{noncentral_t_cdf, Matrix, RngStream};

fn dataset(case: u8, n: usize, k: usize, seed: u64) -> metareg::datagen::MetaDataset {
    let config = SimulationConfig::reference(case, n, k).unwrap();
    sample_dataset(&config, RngStream::child(seed, 0, 0)).unwrap()
}

#[test]
fn golden_true_slopes() {
    let cases: [(usize, &[f64], f64); 3] = [
        (1, &[0.5], 0.75),
        (3, &[0.48724, 0.23724, 0.12755], 0.67156),
        (5, &[0.36853, 0.18221, -0.03271, 0.14076, 0.35527], 0.5639),
    ];
    for (k, beta, sigma2) in cases {
        let (b, s2) = derive_true_slopes(&build_joint_distribution(k).unwrap()).unwrap();
        for (got, want) in b.iter().zip(beta) {
            assert!((got - want).abs() < 1e-4, "k={k}: {got} vs {want}");
        }
        assert!((s2 - sigma2).abs() < 1e-4, "k={k}: {s2} vs {sigma2}");
    }
}

#[test]
fn unit_weight_wls_equals_ols_on_simulated_data() {
    let d = dataset(3, 50, 3, 5);
    let rows: Vec<Vec<f64>> = (0..d.len())
        .map(|i| std::iter::once(1.0).chain(d.x_row(i).iter().copied()).collect())
        .collect();
    let want = common::ols(&rows, &d.y);
    let got = wls_fit(&Matrix::from_rows(&rows).unwrap(), &d.y, &vec![1.0; d.len()]).unwrap();
    for (g, w) in got.coefficients.iter().zip(&want) {
        assert!((g - w).abs() < 1e-10, "{g} vs {w}");
    }
}

#[test]
fn dummy_fixed_effects_equal_within_transform() {
    for (case, k, spec) in [(1, 1, SpecKind::FeS), (2, 3, SpecKind::FeL), (8, 5, SpecKind::FeT)] {
        let d = dataset(case, 50, k, 17);
        let (design, _) = build_design(&d, spec).unwrap();
        let ols = wls_fit(&design.to_matrix(), &d.y, &vec![1.0; d.len()]).unwrap();
        let groups = match spec {
            SpecKind::FeS => d.study.clone(),
            SpecKind::FeL => d.location.clone(),
            _ => d.time.iter().map(|t| t - 1).collect(),
        };
        let x: Vec<Vec<f64>> = (0..d.len()).map(|i| d.x_row(i).to_vec()).collect();
        let within = common::within_slopes(&x, &d.y, &groups);
        for j in 0..k {
            assert!(
                (ols.coefficients[1 + j] - within[j]).abs() < 1e-8,
                "{spec} x{}: {} vs {}",
                j + 1,
                ols.coefficients[1 + j],
                within[j]
            );
        }
    }
}

#[test]
fn extracted_covariance_equals_double_loop() {
    let d = dataset(4, 50, 3, 23);
    let p = extract_parameters(&d).unwrap();
    let mut cols = vec![d.y.clone()];
    for j in 0..3 {
        cols.push((0..d.len()).map(|i| d.x_row(i)[j]).collect());
    }
    for a in 0..4 {
        for b in 0..4 {
            let want = common::pairwise_covariance(&cols[a], &cols[b]);
            assert!((p.covariance[a][b] - want).abs() < 1e-10, "({a},{b})");
            assert_eq!(p.covariance[a][b], p.covariance[b][a]);
        }
        assert!((p.variances[a] - p.covariance[a][a]).abs() < 1e-10);
    }
}

#[test]
fn noncentral_t_matches_quadrature() {
    let mut worst: f64 = 0.0;
    for df in [4.0, 30.0, 2400.0] {
        for ncp in [0.5, 2.0, 6.0, 15.0, 35.0] {
            for x in [1.0, 0.6 * ncp + 1.0] {
                let got = noncentral_t_cdf(x, df, ncp).unwrap();
                let want = common::noncentral_t_cdf_quadrature(x, df, ncp);
                worst = worst.max((got - want).abs());
                assert!((got - want).abs() < 1e-6, "df={df} ncp={ncp} x={x}: {got} vs {want}");
            }
        }
    }
    assert!(worst < 1e-6);
}

#[test]
fn f_statistic_matches_two_pass() {
    let d = dataset(2, 50, 1, 31);
    let times: Vec<usize> = d.time.iter().map(|t| t - 1).collect();
    for labels in [&d.location, &times, &d.study] {
        let got = one_way_f(&d.y, labels).unwrap().statistic;
        let want = common::two_pass_f(&d.y, labels);
        assert!((got - want).abs() < 1e-10 * want.max(1.0), "{got} vs {want}");
    }
}

#[test]
fn fixed_effect_weights_are_inverse_group_variances() {
    let d = dataset(1, 100, 1, 8);
    let f = fit(SpecKind::FeS, &d).unwrap();
    assert_eq!(f.group_weights.len(), d.n_studies);
    assert!(f.group_weights.iter().all(|w| (0.5..3.0).contains(w)));
}
