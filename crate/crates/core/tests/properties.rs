mod common;

use std::collections::HashSet;

use metareg::datagen::{sample_dataset, CaseSpec, MetaDataset, SimulationConfig};
use metareg::estimators::{estimate_variance_components, fit, wls_fit, Grouping, SpecKind};
use metareg::extract::{extract_parameters, read_dataset};
use metareg::metrics::{bias_summary, error_metric_family, power_at, variance_summary};
use metareg::numerics::{cholesky, noncentral_t_cdf, solve_spd, spd_inverse, t_cdf, Matrix, RngStream};
use metareg::report::{read_rows, write_rows, CellResultRow};
use proptest::prelude::*;

fn spd(n: usize, entries: &[f64]) -> Matrix {
    let b = Matrix::new(n, n, entries[..n * n].to_vec()).unwrap();
    let mut a = b.matmul(&b.transpose()).unwrap();
    for i in 0..n {
        a[(i, i)] += n as f64;
    }
    a
}

fn small_dataset(case: u8, seed: u64) -> MetaDataset {
    let config = SimulationConfig::reference(case, 50, 1).unwrap();
    sample_dataset(&config, RngStream::child(seed, 0, 0)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spd_inverse_round_trip(n in 1usize..7, entries in prop::collection::vec(-2.0f64..2.0, 49)) {
        let a = spd(n, &entries);
        let prod = a.matmul(&spd_inverse(&a).unwrap()).unwrap();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((prod[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_reconstructs(n in 1usize..7, entries in prop::collection::vec(-2.0f64..2.0, 49)) {
        let a = spd(n, &entries);
        let l = cholesky(&a).unwrap();
        let back = l.matmul(&l.transpose()).unwrap();
        for i in 0..n {
            for j in 0..n {
                prop_assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-10 * (1.0 + a[(i, j)].abs()));
                if j > i {
                    prop_assert_eq!(l[(i, j)], 0.0);
                }
            }
        }
    }

    #[test]
    fn solve_matches_elimination(n in 1usize..7, entries in prop::collection::vec(-2.0f64..2.0, 49), b in prop::collection::vec(-5.0f64..5.0, 7)) {
        let a = spd(n, &entries);
        let rows: Vec<Vec<f64>> = (0..n).map(|i| a.row(i).to_vec()).collect();
        let want = common::gauss_solve(rows, b[..n].to_vec());
        let got = solve_spd(&a, &b[..n]).unwrap();
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn noncentral_reduces_to_central(x in -8.0f64..8.0, df in 1.0f64..500.0) {
        prop_assert!((noncentral_t_cdf(x, df, 0.0).unwrap() - t_cdf(x, df)).abs() < 1e-12);
    }

    #[test]
    fn noncentral_cdf_decreases_in_ncp(x in -3.0f64..6.0, df in 2.0f64..200.0, d1 in 0.0f64..20.0, step in 0.01f64..5.0) {
        let lo = noncentral_t_cdf(x, df, d1).unwrap();
        let hi = noncentral_t_cdf(x, df, d1 + step).unwrap();
        prop_assert!(hi <= lo + 1e-12);
        prop_assert!((0.0..=1.0).contains(&lo));
    }

    #[test]
    fn unit_weight_wls_is_ols(
        n in 8usize..40,
        k in 1usize..4,
        xs in prop::collection::vec(-3.0f64..3.0, 160),
        noise in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| std::iter::once(1.0).chain((0..k).map(|j| xs[i * 4 + j])).collect())
            .collect();
        let y: Vec<f64> = rows.iter().zip(&noise).map(|(r, e)| 1.0 + r[1..].iter().sum::<f64>() * 0.5 + e).collect();
        let want = common::ols(&rows, &y);
        let x = Matrix::from_rows(&rows).unwrap();
        let got = wls_fit(&x, &y, &vec![1.0; n]).unwrap();
        for (g, w) in got.coefficients.iter().zip(&want) {
            prop_assert!((g - w).abs() < 1e-10 * (1.0 + w.abs()));
        }
    }

    #[test]
    fn wls_ignores_weight_scale(scale in 0.01f64..100.0, seed in 0u64..1000) {
        let d = small_dataset(1, seed);
        let rows: Vec<Vec<f64>> = (0..d.len()).map(|i| vec![1.0, d.x[i]]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let w: Vec<f64> = (0..d.len()).map(|i| 1.0 + (i % 7) as f64).collect();
        let ws: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let a = wls_fit(&x, &d.y, &w).unwrap();
        let b = wls_fit(&x, &d.y, &ws).unwrap();
        for j in 0..2 {
            prop_assert!((a.coefficients[j] - b.coefficients[j]).abs() < 1e-10);
            prop_assert!((a.std_errors[j] - b.std_errors[j]).abs() < 1e-10 * a.std_errors[j]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fits_are_row_order_invariant(seed in 0u64..10_000, shift in 1usize..1249) {
        let d = small_dataset(7, seed);
        let order: Vec<usize> = (0..d.len()).map(|i| (i * 7 + shift) % d.len()).collect();
        let p = d.permuted(&order);
        for spec in SpecKind::ALL {
            let a = fit(spec, &d).unwrap();
            let b = fit(spec, &p).unwrap();
            prop_assert!((a.slopes[0] - b.slopes[0]).abs() < 1e-9, "{spec}");
            prop_assert!((a.slope_se[0] - b.slope_se[0]).abs() < 1e-9, "{spec}");
            if let (Some(ta), Some(tb)) = (a.trend, b.trend) {
                prop_assert!((ta.estimate - tb.estimate).abs() < 1e-8, "{spec}");
            }
        }
    }

    #[test]
    fn extraction_is_row_order_invariant(seed in 0u64..10_000, shift in 1usize..1249) {
        let d = small_dataset(2, seed);
        let order: Vec<usize> = (0..d.len()).map(|i| (i * 11 + shift) % d.len()).collect();
        let a = extract_parameters(&d).unwrap();
        let b = extract_parameters(&d.permuted(&order)).unwrap();
        for (ra, rb) in a.covariance.iter().zip(&b.covariance) {
            for (u, v) in ra.iter().zip(rb) {
                prop_assert!((u - v).abs() < 1e-10);
            }
        }
        prop_assert_eq!(a.cells, b.cells);
    }

    #[test]
    fn lambda_grows_with_group_spread(seed in 0u64..10_000, spread in 0.05f64..3.0, factor in 1.1f64..4.0) {
        let narrow = CaseSpec::custom((0..5).map(|l| spread * (l as f64 - 2.0)).collect(), 0.0).unwrap();
        let wide = CaseSpec::custom((0..5).map(|l| factor * spread * (l as f64 - 2.0)).collect(), 0.0).unwrap();
        let lam = |case: CaseSpec| {
            let mut c = SimulationConfig::new(case, 50, 1);
            c.allow_custom = true;
            let d = sample_dataset(&c, RngStream::child(seed, 0, 0)).unwrap();
            estimate_variance_components(&d, Grouping::Location).unwrap().lambda
        };
        let (a, b) = (lam(narrow), lam(wide));
        prop_assert!(b >= a - 1e-12, "{a} -> {b}");
        prop_assert!((0.0..1.0).contains(&b));
    }

    #[test]
    fn dataset_csv_round_trip(seed in 0u64..10_000, case in 1u8..=12) {
        let d = small_dataset(case, seed);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let mut back = read_dataset(buf.as_slice()).unwrap();
        back.provenance = d.provenance.clone();
        prop_assert_eq!(back, d);
    }
}

proptest! {
    #[test]
    fn power_depends_on_ratio_only(d in 0.01f64..5.0, se in 0.01f64..1.0, c in 0.1f64..10.0, df in 5usize..5000) {
        let a = power_at(d, se, df, 0.05).unwrap();
        let b = power_at(d * c, se * c, df, 0.05).unwrap();
        prop_assert!((a.power - b.power).abs() < 1e-12);
    }

    #[test]
    fn power_is_monotone(d in 0.0f64..5.0, step in 0.0f64..1.0, se in 0.01f64..1.0, df in 5usize..5000) {
        let a = power_at(d, se, df, 0.05).unwrap().power;
        let b = power_at(d + step, se, df, 0.05).unwrap().power;
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn mse_is_variance_plus_squared_bias(est in prop::collection::vec(-3.0f64..3.0, 2..200), truth in -2.0f64..2.0, shift in -5.0f64..5.0) {
        let m = Matrix::new(est.len(), 1, est.clone()).unwrap();
        let ses = Matrix::new(est.len(), 1, vec![0.1; est.len()]).unwrap();
        let bias = bias_summary(&m, &[truth]).unwrap().mean[0];
        let var = variance_summary(&m, &ses, 10).unwrap().empirical[0];
        let mse = error_metric_family(&m, &[truth]).unwrap().mse[0];
        prop_assert!((mse - (var + bias * bias)).abs() < 1e-10 * (1.0 + mse));

        // shifting estimates and truth together leaves every metric alone
        let shifted: Vec<f64> = est.iter().map(|v| v + shift).collect();
        let ms = Matrix::new(est.len(), 1, shifted).unwrap();
        let bias2 = bias_summary(&ms, &[truth + shift]).unwrap().mean[0];
        let var2 = variance_summary(&ms, &ses, 10).unwrap().empirical[0];
        prop_assert!((bias - bias2).abs() < 1e-9);
        prop_assert!((var - var2).abs() < 1e-9);
    }

    #[test]
    fn result_rows_round_trip(
        bias in any::<f64>().prop_filter("finite", |v| v.is_finite()),
        var in 0.0f64..1e6,
        mpe in prop::option::of(-10.0f64..10.0),
        failures in 0usize..100,
    ) {
        let row = CellResultRow {
            case: 3, n: 100, k: 5, spec: "FE_lTrend".into(), param: "trend".into(),
            mean_bias: bias, emp_var: var, paper_var: var * 3.0, mse: var + bias * bias, mae: bias.abs(),
            mpe, mape: mpe.map(f64::abs), ci_coverage: 0.95, ci_width: var.sqrt(), power_at_0p5: 0.5, failures,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_rows(std::fs::File::create(&path).unwrap(), std::slice::from_ref(&row)).unwrap();
        let back: Vec<CellResultRow> = read_rows(&path).unwrap();
        prop_assert_eq!(back, vec![row]);
    }
}

#[test]
fn derived_stream_ids_never_collide() {
    let mut ids = HashSet::with_capacity(1_000_000);
    let mut first_draws = HashSet::with_capacity(1_000_000);
    for cell in 0..1000u32 {
        for it in 0..1000u32 {
            let s = RngStream::child(42, cell, it);
            assert!(ids.insert(s));
            let mut rng = s.rng();
            assert!(first_draws.insert(rand::Rng::random::<u64>(&mut rng)));
        }
    }
}
