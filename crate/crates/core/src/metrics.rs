//! Monte Carlo performance criteria: power, bias, variance, interval
//! precision and the MSE/MAE/MPE/MAPE family.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{noncentral_t_cdf, t_quantile, Matrix, MAX_NCP};

/// Number of alternatives on a power curve.
pub const GRID_POINTS: usize = 100;
/// Spacing between alternatives `β_HA − β`.
pub const GRID_STEP: f64 = 0.1;
/// Power values are capped just below one.
pub const POWER_CAP: f64 = 1.0 - 1e-12;
/// Total sample size at which alpha is left unadjusted: 25 studies of 50.
pub const REFERENCE_N: usize = 1_250;
pub const ALPHA_FLOOR: f64 = 1e-6;

/// Rejection probability at one alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerPoint {
    pub discrepancy: f64,
    pub power: f64,
    /// `P(T < c)` under the alternative; exact even where `power` is capped.
    pub type_ii: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerCurve {
    pub points: Vec<PowerPoint>,
    pub se: f64,
    pub alpha: f64,
    pub df: usize,
    pub critical: f64,
}

impl PowerCurve {
    pub fn discrepancies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.discrepancy).collect()
    }

    pub fn power(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.power).collect()
    }

    /// Point whose discrepancy is closest to `d`.
    pub fn at(&self, d: f64) -> PowerPoint {
        *self
            .points
            .iter()
            .min_by(|a, b| (a.discrepancy - d).abs().total_cmp(&(b.discrepancy - d).abs()))
            .expect("power curve is never empty")
    }
}

fn check_se(se: f64) -> Result<()> {
    if se.is_finite() && se > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("standard error must be positive, got {se}")))
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// One-sided critical value `t_{1−α, df}`.
pub fn critical_value(df: usize, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    t_quantile(1.0 - alpha, df as f64)
}

/// `1 − P(t_{df,δ} < c)` with `δ = |discrepancy| / se`. Noncentralities
/// beyond the supported range have a type II error below 1e-300 and are
/// reported as saturated.
pub fn power_at(discrepancy: f64, se: f64, df: usize, alpha: f64) -> Result<PowerPoint> {
    check_se(se)?;
    let c = critical_value(df, alpha)?;
    power_with_critical(discrepancy, se, df, c)
}

fn power_with_critical(discrepancy: f64, se: f64, df: usize, c: f64) -> Result<PowerPoint> {
    let delta = discrepancy.abs() / se;
    let type_ii = if delta > MAX_NCP {
        0.0
    } else {
        noncentral_t_cdf(c, df as f64, delta)?
    };
    Ok(PowerPoint {
        discrepancy,
        power: (1.0 - type_ii).min(POWER_CAP),
        type_ii,
    })
}

/// Power over the alternatives `0.1, 0.2, …, 10.0`.
pub fn power_curve(se: f64, df: usize, alpha: f64) -> Result<PowerCurve> {
    check_se(se)?;
    if df == 0 {
        return Err(Error::Domain("power needs df >= 1".into()));
    }
    let critical = critical_value(df, alpha)?;
    let points = (1..=GRID_POINTS)
        .map(|i| power_with_critical(GRID_STEP * i as f64, se, df, critical))
        .collect::<Result<Vec<_>>>()?;
    Ok(PowerCurve {
        points,
        se,
        alpha,
        df,
        critical,
    })
}

/// Shrinks alpha as `base · sqrt(reference_n / total_n)` once the pooled
/// sample exceeds `reference_n`, never below [`ALPHA_FLOOR`].
pub fn adjust_alpha(total_n: usize, base_alpha: f64, reference_n: usize) -> f64 {
    if total_n <= reference_n {
        return base_alpha;
    }
    (base_alpha * (reference_n as f64 / total_n as f64).sqrt()).max(ALPHA_FLOOR)
}

fn check_shape(estimates: &Matrix, truth: &[f64]) -> Result<()> {
    if estimates.cols() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimate columns with {} true values",
            estimates.cols(),
            truth.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasSummary {
    pub mean: Vec<f64>,
    /// `β̂ᵢ − β`, iterations × parameters.
    pub per_iteration: Matrix,
}

pub fn bias_summary(estimates: &Matrix, truth: &[f64]) -> Result<BiasSummary> {
    check_shape(estimates, truth)?;
    let (n, k) = (estimates.rows(), estimates.cols());
    let mut per = Matrix::zeros(n, k);
    let mut mean = vec![0.0; k];
    for i in 0..n {
        for j in 0..k {
            let b = estimates[(i, j)] - truth[j];
            per[(i, j)] = b;
            mean[j] += b;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    Ok(BiasSummary {
        mean,
        per_iteration: per,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceSummary {
    /// Variance of the estimates across iterations (divisor = iterations).
    pub empirical: Vec<f64>,
    /// Mean over iterations of `n · se²`.
    pub paper_form: Vec<f64>,
}

pub fn variance_summary(estimates: &Matrix, ses: &Matrix, n_per_study: usize) -> Result<VarianceSummary> {
    if estimates.rows() != ses.rows() || estimates.cols() != ses.cols() {
        return Err(Error::DimensionMismatch("estimates and standard errors differ in shape".into()));
    }
    let (n, k) = (estimates.rows() as f64, estimates.cols());
    let mut empirical = Vec::with_capacity(k);
    let mut paper_form = Vec::with_capacity(k);
    for j in 0..k {
        let col = estimates.column(j);
        let mean = col.iter().sum::<f64>() / n;
        empirical.push(col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n);
        let se = ses.column(j);
        paper_form.push(se.iter().map(|s| n_per_study as f64 * s * s).sum::<f64>() / n);
    }
    Ok(VarianceSummary {
        empirical,
        paper_form,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorMetrics {
    pub mse: Vec<f64>,
    pub mae: Vec<f64>,
    /// `None` where the true value is zero.
    pub mpe: Vec<Option<f64>>,
    pub mape: Vec<Option<f64>>,
}

pub fn error_metric_family(estimates: &Matrix, truth: &[f64]) -> Result<ErrorMetrics> {
    check_shape(estimates, truth)?;
    let n = estimates.rows() as f64;
    let k = truth.len();
    let mut out = ErrorMetrics {
        mse: vec![0.0; k],
        mae: vec![0.0; k],
        mpe: vec![None; k],
        mape: vec![None; k],
    };
    for j in 0..k {
        let (mut se, mut ae, mut pe, mut ape) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..estimates.rows() {
            let d = estimates[(i, j)] - truth[j];
            se += d * d;
            ae += d.abs();
            pe += d / truth[j];
            ape += (d / truth[j]).abs();
        }
        out.mse[j] = se / n;
        out.mae[j] = ae / n;
        if truth[j] != 0.0 {
            out.mpe[j] = Some(pe / n);
            out.mape[j] = Some(ape / n);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }
}

/// Two-sided Wald interval `β̂ ± t_{1−α/2, df} · se`.
pub fn confidence_interval(beta_hat: f64, se: f64, df: usize, alpha: f64) -> Result<Interval> {
    check_alpha(alpha)?;
    if !(se >= 0.0) {
        return Err(Error::Domain(format!("standard error must be non-negative, got {se}")));
    }
    let q = t_quantile(1.0 - alpha / 2.0, df as f64)?;
    Ok(Interval {
        lower: beta_hat - q * se,
        upper: beta_hat + q * se,
    })
}

/// Monte Carlo summary of one parameter under one specification.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamMetrics {
    pub name: String,
    pub truth: f64,
    pub mean_estimate: f64,
    pub mean_bias: f64,
    pub mean_se: f64,
    pub emp_var: f64,
    pub paper_var: f64,
    pub mse: f64,
    pub mae: f64,
    pub mpe: Option<f64>,
    pub mape: Option<f64>,
    pub ci_coverage: f64,
    pub ci_width: f64,
    /// Power curve at the mean standard error.
    pub power: PowerCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateMetrics {
    pub successes: usize,
    pub alpha: f64,
    pub df: usize,
    pub slopes: Vec<ParamMetrics>,
    pub trend: Option<ParamMetrics>,
    /// Per-iteration slope bias, iterations × k.
    #[serde(skip)]
    pub slope_bias: Matrix,
}

/// Summarizes one parameter block (`estimates`/`ses` are iterations × params).
pub fn summarize_parameters(
    names: &[String],
    estimates: &Matrix,
    ses: &Matrix,
    truth: &[f64],
    dfs: &[usize],
    n_per_study: usize,
    alpha: f64,
) -> Result<(Vec<ParamMetrics>, BiasSummary)> {
    check_shape(estimates, truth)?;
    if dfs.len() != estimates.rows() {
        return Err(Error::DimensionMismatch("one df per iteration is required".into()));
    }
    let bias = bias_summary(estimates, truth)?;
    let var = variance_summary(estimates, ses, n_per_study)?;
    let err = error_metric_family(estimates, truth)?;
    let iters = estimates.rows();
    let df = *dfs.iter().min().expect("at least one iteration");
    let mut out = Vec::with_capacity(truth.len());
    for j in 0..truth.len() {
        let mut covered = 0usize;
        let mut width = 0.0;
        for i in 0..iters {
            let ci = confidence_interval(estimates[(i, j)], ses[(i, j)], dfs[i], alpha)?;
            covered += usize::from(ci.covers(truth[j]));
            width += ci.width();
        }
        let mean_se = ses.column(j).iter().sum::<f64>() / iters as f64;
        out.push(ParamMetrics {
            name: names[j].clone(),
            truth: truth[j],
            mean_estimate: truth[j] + bias.mean[j],
            mean_bias: bias.mean[j],
            mean_se,
            emp_var: var.empirical[j],
            paper_var: var.paper_form[j],
            mse: err.mse[j],
            mae: err.mae[j],
            mpe: err.mpe[j],
            mape: err.mape[j],
            ci_coverage: covered as f64 / iters as f64,
            ci_width: width / iters as f64,
            power: power_curve(mean_se, df, alpha)?,
        });
    }
    Ok((out, bias))
}
