//! Feasible weighted least squares for the ten methodology specifications.
//!
//! Fixed-effect specs run a first-stage OLS on their dummy design, turn the
//! per-group residual variances into inverse-variance weights and refit.
//! Random- and mixed-effect specs quasi-demean every column by `λ` times its
//! group mean and weight by `1/(σ̂²_g + σ̂²_α)`.

mod design;
mod spec;
mod wls;

pub use design::{build_design, group_labels, trend_values, Design};
pub use spec::{DummySet, Effect, Grouping, SpecKind};
pub use wls::{wls_fit, wls_fit_design, WlsFit, RCOND_THRESHOLD};

use serde::Serialize;

use crate::datagen::MetaDataset;
use crate::error::{Error, Result};

/// Smallest admissible group residual variance.
pub const VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceComponents {
    pub sigma2_eps: f64,
    pub sigma2_alpha: f64,
    pub lambda: f64,
    /// Average group size `N / G`.
    pub n_bar: f64,
    pub groups: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendEstimate {
    pub estimate: f64,
    pub se: f64,
}

/// Switches to the literal variance-component formulas for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    /// Uses `λ = (1 − σ_ε)/(Gσ²_α + σ²_ε)^½` (clamped to `[0, 1]`) and
    /// reports the scalar standard errors of random and two-way specs.
    pub strict_paper: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub spec: SpecKind,
    pub names: Vec<String>,
    /// All estimated coefficients in design-column order.
    pub coefficients: Vec<f64>,
    pub slopes: Vec<f64>,
    pub slope_se: Vec<f64>,
    pub trend: Option<TrendEstimate>,
    pub df: usize,
    /// Weight of each weight group, indexed by dense group id.
    pub group_weights: Vec<f64>,
    /// Weighted residual mean square used to scale the covariance.
    pub scale: f64,
    pub variance_components: Option<VarianceComponents>,
    /// Scalar standard error, strict mode only.
    pub scalar_se: Option<f64>,
}

/// Centered within-group variance of `residuals` (divisor `n_g − 1`),
/// floored at [`VARIANCE_FLOOR`].
pub fn group_residual_variances(
    residuals: &[f64],
    labels: &[usize],
    n_groups: usize,
    min_rows: usize,
) -> Result<Vec<f64>> {
    if residuals.len() != labels.len() {
        return Err(Error::DimensionMismatch("residuals and labels differ in length".into()));
    }
    let mut count = vec![0usize; n_groups];
    let mut sum = vec![0.0; n_groups];
    for (&r, &g) in residuals.iter().zip(labels) {
        count[g] += 1;
        sum[g] += r;
    }
    for (g, &c) in count.iter().enumerate() {
        if c < min_rows.max(2) {
            return Err(Error::GroupTooSmall {
                group: g,
                rows: c,
                needed: min_rows.max(2),
            });
        }
    }
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mut ss = vec![0.0; n_groups];
    for (&r, &g) in residuals.iter().zip(labels) {
        let d = r - mean[g];
        ss[g] += d * d;
    }
    Ok(ss
        .iter()
        .zip(&count)
        .map(|(s, &c)| (s / (c - 1) as f64).max(VARIANCE_FLOOR))
        .collect())
}

/// First-stage OLS of `spec`'s design and the resulting group variances.
pub fn first_stage_variances(data: &MetaDataset, spec: SpecKind) -> Result<Vec<f64>> {
    let (design, labels) = build_design(data, spec)?;
    let design = match design.trend_column() {
        Some(t) if spec.dummies() == DummySet::Study => design.without_dense_column(t),
        _ => design,
    };
    let n_groups = labels.iter().max().map_or(0, |m| m + 1);
    let ols = wls_fit_design(&design, &data.y, &vec![1.0; data.len()])?;
    group_residual_variances(&ols.residuals, &labels, n_groups, data.k + 2)
}

fn group_means(values: &[f64], labels: &[usize], counts: &[usize]) -> Vec<f64> {
    let mut m = vec![0.0; counts.len()];
    for (&v, &g) in values.iter().zip(labels) {
        m[g] += v;
    }
    for (mi, &c) in m.iter_mut().zip(counts) {
        *mi /= c as f64;
    }
    m
}

/// Moment estimates of `σ²_ε`, `σ²_α` and the quasi-demeaning factor `λ`.
///
/// `σ²_ε` is the residual variance of the within (group-demeaned)
/// regression. `σ²_α` is the variance of the group means of `y − Xβ̂_w`
/// around their average, less `σ²_ε/n̄`, floored at zero.
pub fn estimate_variance_components(
    data: &MetaDataset,
    grouping: Grouping,
) -> Result<VarianceComponents> {
    let (labels, g) = group_labels(data, grouping);
    if g < 2 {
        return Err(Error::InsufficientGroups(format!(
            "variance components need at least two {grouping:?} groups, found {g}"
        )));
    }
    let n = data.len();
    let k = data.k;
    let mut counts = vec![0usize; g];
    for &l in &labels {
        counts[l] += 1;
    }
    if let Some((group, &rows)) = counts.iter().enumerate().find(|(_, &c)| c < 2) {
        return Err(Error::GroupTooSmall { group, rows, needed: 2 });
    }
    if n <= g + k {
        return Err(Error::GroupTooSmall {
            group: 0,
            rows: n,
            needed: g + k + 1,
        });
    }

    let y_bar = group_means(&data.y, &labels, &counts);
    let mut x_bar = vec![vec![0.0; k]; g];
    for i in 0..n {
        let gi = labels[i];
        for (j, v) in data.x_row(i).iter().enumerate() {
            x_bar[gi][j] += v;
        }
    }
    for (row, &c) in x_bar.iter_mut().zip(&counts) {
        for v in row.iter_mut() {
            *v /= c as f64;
        }
    }
    let mut xw = Vec::with_capacity(n * k);
    let mut yw = Vec::with_capacity(n);
    for i in 0..n {
        let gi = labels[i];
        yw.push(data.y[i] - y_bar[gi]);
        xw.extend(data.x_row(i).iter().zip(&x_bar[gi]).map(|(a, b)| a - b));
    }
    let names = (1..=k).map(|j| format!("x{j}")).collect();
    let within = Design::dense_only(n, xw, names);
    let fit = wls_fit_design(&within, &yw, &vec![1.0; n])?;
    let ssr: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let sigma2_eps = (ssr / (n - g - k) as f64).max(VARIANCE_FLOOR);

    let e: Vec<f64> = (0..n)
        .map(|i| {
            data.y[i]
                - data
                    .x_row(i)
                    .iter()
                    .zip(&fit.coefficients)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
        })
        .collect();
    let e_bar = group_means(&e, &labels, &counts);
    let centre = e_bar.iter().sum::<f64>() / g as f64;
    let ms_between = e_bar.iter().map(|m| (m - centre).powi(2)).sum::<f64>() / g as f64;
    let n_bar = n as f64 / g as f64;
    let sigma2_alpha = (ms_between - sigma2_eps / n_bar).max(0.0);
    let lambda = 1.0 - (sigma2_eps / (n_bar * sigma2_alpha + sigma2_eps)).sqrt();
    Ok(VarianceComponents {
        sigma2_eps,
        sigma2_alpha,
        lambda,
        n_bar,
        groups: g,
    })
}

/// Literal quasi-demeaning factor `(1 − σ_ε)/(Gσ²_α + σ²_ε)^½`, clamped to `[0, 1]`.
pub fn strict_lambda(vc: &VarianceComponents) -> f64 {
    let v = (1.0 - vc.sigma2_eps.sqrt())
        / (vc.groups as f64 * vc.sigma2_alpha + vc.sigma2_eps).sqrt();
    v.clamp(0.0, 1.0)
}

pub fn fit(spec: SpecKind, data: &MetaDataset) -> Result<FitResult> {
    fit_with(spec, data, FitOptions::default())
}

pub fn fit_with(spec: SpecKind, data: &MetaDataset, options: FitOptions) -> Result<FitResult> {
    if spec.is_random() {
        fit_random(spec, data, options)
    } else {
        fit_fixed(spec, data, options)
    }
}

fn row_weights(labels: &[usize], group_weights: &[f64]) -> Vec<f64> {
    labels.iter().map(|&g| group_weights[g]).collect()
}

fn fit_fixed(spec: SpecKind, data: &MetaDataset, options: FitOptions) -> Result<FitResult> {
    let k = data.k;
    let (full, labels) = build_design(data, spec)?;
    let n_groups = labels.iter().max().map_or(0, |m| m + 1);
    // study dummies already span the trend; fit without it, then pick the
    // minimum-norm point of the solution line
    let absorbed = spec.dummies() == DummySet::Study && full.trend_column().is_some();
    let design = if absorbed {
        full.without_dense_column(full.trend_column().unwrap())
    } else {
        full.clone()
    };

    let ones = vec![1.0; data.len()];
    let ols = wls_fit_design(&design, &data.y, &ones)?;
    let variances = group_residual_variances(&ols.residuals, &labels, n_groups, k + 2)?;
    let group_weights: Vec<f64> = variances.iter().map(|v| 1.0 / v).collect();
    let w = row_weights(&labels, &group_weights);
    let wf = wls_fit_design(&design, &data.y, &w)?;

    let slopes = wf.coefficients[1..=k].to_vec();
    let slope_se = wf.std_errors[1..=k].to_vec();
    let (coefficients, trend) = if absorbed {
        min_norm_trend(data, &full, &wf)?
    } else {
        let trend = full.trend_column().map(|t| TrendEstimate {
            estimate: wf.coefficients[t],
            se: wf.std_errors[t],
        });
        (wf.coefficients.clone(), trend)
    };

    let scalar_se = if options.strict_paper && spec == SpecKind::FeLt {
        Some(two_way_scalar_se(data, &ols.residuals)?)
    } else {
        None
    };
    Ok(FitResult {
        spec,
        names: full.names().to_vec(),
        coefficients,
        slopes,
        slope_se,
        trend,
        df: wf.df,
        group_weights,
        scale: wf.sigma2,
        variance_components: None,
        scalar_se,
    })
}

/// Embeds the trend-free fit into the full design with the trend at zero and
/// projects out the null direction `v` of the full design, where `v` puts
/// `t₀` of the reference study on the intercept, `t₀(s) − t₀(ref)` on each
/// study dummy and `−1` on the trend.
fn min_norm_trend(
    data: &MetaDataset,
    full: &Design,
    wf: &WlsFit,
) -> Result<(Vec<f64>, Option<TrendEstimate>)> {
    let t_col = full.trend_column().unwrap();
    let p = full.cols();
    let t0 = trend_values(data)?;
    let (labels, n_studies) = group_labels(data, Grouping::Study);
    let mut study_t0 = vec![f64::NAN; n_studies];
    for (&s, &v) in labels.iter().zip(&t0) {
        study_t0[s] = v;
    }

    let embed = |j: usize| if j < t_col { j } else { j + 1 };
    let mut beta = vec![0.0; p];
    for (j, &b) in wf.coefficients.iter().enumerate() {
        beta[embed(j)] = b;
    }
    let mut v = vec![0.0; p];
    v[0] = study_t0[0];
    v[t_col] = -1.0;
    for s in 1..n_studies {
        v[t_col + s] = study_t0[s] - study_t0[0];
    }
    let vv: f64 = v.iter().map(|a| a * a).sum();
    let vb: f64 = v.iter().zip(&beta).map(|(a, b)| a * b).sum();
    for (b, a) in beta.iter_mut().zip(&v) {
        *b -= vb / vv * a;
    }

    // v'Cv over the reduced covariance (the trend row of the embedding is zero)
    let reduced: Vec<f64> = (0..wf.coefficients.len()).map(|j| v[embed(j)]).collect();
    let cv = wf.cov_unscaled.mul_vec(&reduced)?;
    let vcv: f64 = reduced.iter().zip(&cv).map(|(a, b)| a * b).sum();
    let se = (wf.sigma2 * vcv.max(0.0)).sqrt() / vv;
    Ok((
        beta.clone(),
        Some(TrendEstimate {
            estimate: beta[t_col],
            se,
        }),
    ))
}

/// `sqrt(1 / Σ_l Σ_t 1/(σ²_l + σ²_t))` from first-stage residuals.
fn two_way_scalar_se(data: &MetaDataset, residuals: &[f64]) -> Result<f64> {
    let (loc, nl) = group_labels(data, Grouping::Location);
    let (time, nt) = group_labels(data, Grouping::Time);
    let vl = group_residual_variances(residuals, &loc, nl, data.k + 2)?;
    let vt = group_residual_variances(residuals, &time, nt, data.k + 2)?;
    let s: f64 = vl
        .iter()
        .flat_map(|a| vt.iter().map(move |b| 1.0 / (a + b)))
        .sum();
    Ok((1.0 / s).sqrt())
}

fn fit_random(spec: SpecKind, data: &MetaDataset, options: FitOptions) -> Result<FitResult> {
    let k = data.k;
    let n = data.len();
    let grouping = spec.grouping();
    let mut vc = estimate_variance_components(data, grouping)?;
    if options.strict_paper {
        vc.lambda = strict_lambda(&vc);
    }

    let (pooled, labels) = build_design(data, spec)?;
    let n_groups = vc.groups;
    let ols = wls_fit_design(&pooled, &data.y, &vec![1.0; n])?;
    let variances = group_residual_variances(&ols.residuals, &labels, n_groups, k + 2)?;
    let group_weights: Vec<f64> = variances.iter().map(|v| 1.0 / (v + vc.sigma2_alpha)).collect();

    let mut counts = vec![0usize; n_groups];
    for &g in &labels {
        counts[g] += 1;
    }
    let d = 1 + k;
    let mut sums = vec![0.0; n_groups * (d + 1)];
    for i in 0..n {
        let base = labels[i] * (d + 1);
        sums[base] += 1.0;
        for (j, v) in data.x_row(i).iter().enumerate() {
            sums[base + 1 + j] += v;
        }
        sums[base + d] += data.y[i];
    }
    let lam = vc.lambda;
    let mut dense = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let gi = labels[i];
        let c = counts[gi] as f64;
        let base = gi * (d + 1);
        dense.push(1.0 - lam * sums[base] / c);
        for (j, v) in data.x_row(i).iter().enumerate() {
            dense.push(v - lam * sums[base + 1 + j] / c);
        }
        y.push(data.y[i] - lam * sums[base + d] / c);
    }
    let design = Design::dense_only(n, dense, pooled.names().to_vec());
    let w = row_weights(&labels, &group_weights);
    let wf = wls_fit_design(&design, &y, &w)?;

    let scalar_se = options
        .strict_paper
        .then(|| (1.0 / group_weights.iter().sum::<f64>()).sqrt());
    Ok(FitResult {
        spec,
        names: design.names().to_vec(),
        slopes: wf.coefficients[1..=k].to_vec(),
        slope_se: wf.std_errors[1..=k].to_vec(),
        coefficients: wf.coefficients,
        trend: None,
        df: wf.df,
        group_weights,
        scale: wf.sigma2,
        variance_components: Some(vc),
        scalar_se,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{sample_dataset, SimulationConfig};
    use crate::numerics::RngStream;

    fn dataset(case: u8, n: usize, seed: u64) -> MetaDataset {
        let c = SimulationConfig::reference(case, n, 1).unwrap();
        sample_dataset(&c, RngStream::new(seed, 0)).unwrap()
    }

    #[test]
    fn every_spec_fits() {
        let data = dataset(1, 50, 3);
        for spec in SpecKind::ALL {
            let f = fit(spec, &data).unwrap();
            assert_eq!(f.slopes.len(), 1);
            assert!(f.slope_se[0] > 0.0, "{spec}");
            assert!((f.slopes[0] - 0.5).abs() < 0.15, "{spec}: {}", f.slopes[0]);
            assert_eq!(f.trend.is_some(), spec.has_trend());
            assert!(f.df > 0);
        }
    }

    #[test]
    fn mixed_equals_random() {
        let data = dataset(2, 50, 4);
        let re = fit(SpecKind::ReL, &data).unwrap();
        let me = fit(SpecKind::MeL, &data).unwrap();
        assert_eq!(re.coefficients, me.coefficients);
        assert_eq!(re.slope_se, me.slope_se);
    }

    #[test]
    fn study_trend_slopes_equal_study_fe() {
        let data = dataset(1, 50, 5);
        let a = fit(SpecKind::FeS, &data).unwrap();
        let b = fit(SpecKind::FeSTrend, &data).unwrap();
        for (x, y) in a.slopes.iter().zip(&b.slopes) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.df, b.df);
        assert!(b.trend.unwrap().se > 0.0);
    }

    #[test]
    fn min_norm_solution_fits_the_full_design() {
        let data = dataset(1, 50, 6);
        let f = fit(SpecKind::FeSTrend, &data).unwrap();
        let s = fit(SpecKind::FeS, &data).unwrap();
        let (full, _) = build_design(&data, SpecKind::FeSTrend).unwrap();
        let (red, _) = build_design(&data, SpecKind::FeS).unwrap();
        for i in (0..data.len()).step_by(97) {
            let a = full.dot_row(i, &f.coefficients);
            let b = red.dot_row(i, &s.coefficients);
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn homogeneous_groups_give_zero_lambda() {
        let mut data = dataset(1, 50, 7);
        // remove location and time shifts exactly
        let (labels, g) = group_labels(&data, Grouping::Study);
        let mut sum = vec![0.0; g];
        let mut cnt = vec![0.0; g];
        for (i, &l) in labels.iter().enumerate() {
            sum[l] += data.y[i] - 0.5 * data.x[i];
            cnt[l] += 1.0;
        }
        for (i, &l) in labels.iter().enumerate() {
            data.y[i] -= sum[l] / cnt[l];
        }
        let vc = estimate_variance_components(&data, Grouping::Study).unwrap();
        assert!(vc.sigma2_alpha < 0.05, "{vc:?}");
        let mut flat = data.clone();
        for i in 0..flat.len() {
            flat.y[i] = 0.5 * flat.x[i] + if i % 2 == 0 { 0.3 } else { -0.3 };
        }
        let vc = estimate_variance_components(&flat, Grouping::Location).unwrap();
        assert!(vc.sigma2_alpha < 1e-3);
    }

    #[test]
    fn large_group_effect_pushes_lambda_to_one() {
        let mut data = dataset(1, 50, 8);
        for i in 0..data.len() {
            data.y[i] += 100.0 * data.study[i] as f64;
        }
        let vc = estimate_variance_components(&data, Grouping::Study).unwrap();
        assert!(vc.lambda > 0.95, "{vc:?}");
    }

    #[test]
    fn small_groups_rejected() {
        let data = MetaDataset::from_columns(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.5],
            vec![0.1, 0.3, 0.2, 0.5, 0.4, 0.9],
            1,
            vec![0, 0, 1, 1, 2, 2],
            vec![0, 0, 1, 1, 2, 2],
            vec![1, 1, 1, 1, 1, 1],
        )
        .unwrap();
        assert!(matches!(
            fit(SpecKind::FeL, &data),
            Err(Error::GroupTooSmall { .. })
        ));
    }

    #[test]
    fn variance_floor_applies() {
        let v = group_residual_variances(&[1.0, 1.0, 1.0, 0.0, 2.0, 1.0], &[0, 0, 0, 1, 1, 1], 2, 3)
            .unwrap();
        assert_eq!(v[0], VARIANCE_FLOOR);
        assert!((v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn strict_mode_reports_scalar_se() {
        let data = dataset(1, 50, 9);
        let opts = FitOptions { strict_paper: true };
        let re = fit_with(SpecKind::ReS, &data, opts).unwrap();
        assert!(re.scalar_se.unwrap() > 0.0);
        let vc = re.variance_components.unwrap();
        assert!((0.0..=1.0).contains(&vc.lambda));
        assert!(fit_with(SpecKind::FeLt, &data, opts).unwrap().scalar_se.is_some());
        assert!(fit(SpecKind::ReS, &data).unwrap().scalar_se.is_none());
    }
}
