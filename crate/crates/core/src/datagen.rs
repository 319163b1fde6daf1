//! Synthetic meta-regression data with location and time heterogeneity.
//!
//! Each study is one (location, year) pair. Subjects within a study are
//! drawn jointly as `(Y, X₁..X_k) ~ N(μ, Σ)` where only `μ_Y` moves between
//! studies: it is the location's base mean plus a constant increment per
//! elapsed year. Because `Σ` is fixed, the true slopes and error variance
//! follow from the conditional distribution of `Y` given `X`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{spd_inverse, Matrix, MvnSampler, RngStream};

/// Per-study sample sizes used by the reference grid.
pub const SAMPLE_SIZES: [usize; 3] = [50, 100, 150];
/// Covariate counts with built-in joint distributions.
pub const COVARIATE_COUNTS: [usize; 3] = [1, 3, 5];
pub const DEFAULT_TIME_PERIODS: usize = 5;
pub const DEFAULT_ITERATIONS: usize = 1_000;
pub const FULL_SCALE_ITERATIONS: usize = 10_000;
pub const DEFAULT_ALPHA: f64 = 0.05;

/// Joint normal law of `(Y, X₁..X_k)` with `μ_Y` left open.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    covariate_means: Vec<f64>,
    cov: Matrix,
}

impl JointDistribution {
    /// Custom law; `cov` is ordered `Y, X₁..X_k` and must be SPD.
    pub fn custom(covariate_means: Vec<f64>, cov: Matrix) -> Result<Self> {
        let k = covariate_means.len();
        if k == 0 {
            return Err(Error::DimensionMismatch("at least one covariate is required".into()));
        }
        if cov.rows() != k + 1 || cov.cols() != k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "{k} covariates need a {0}x{0} covariance, got {1}x{2}",
                k + 1,
                cov.rows(),
                cov.cols()
            )));
        }
        if covariate_means.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("covariate means"));
        }
        crate::numerics::cholesky(&cov)?;
        Ok(Self { covariate_means, cov })
    }

    pub fn k(&self) -> usize {
        self.covariate_means.len()
    }

    pub fn covariate_means(&self) -> &[f64] {
        &self.covariate_means
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// Full mean vector `(μ_Y, μ_X₁..μ_X_k)`.
    pub fn mean_with(&self, mu_y: f64) -> Vec<f64> {
        let mut m = Vec::with_capacity(self.k() + 1);
        m.push(mu_y);
        m.extend_from_slice(&self.covariate_means);
        m
    }
}

/// Built-in joint distribution for `k ∈ {1, 3, 5}`.
pub fn build_joint_distribution(k: usize) -> Result<JointDistribution> {
    let (means, rows): (Vec<f64>, Vec<Vec<f64>>) = match k {
        1 => (vec![1.0], vec![vec![1.0, 0.5], vec![0.5, 1.0]]),
        3 => (
            vec![1.0, 0.5, 1.5],
            vec![
                vec![1.0, 0.5, 0.25, 0.2],
                vec![0.5, 1.0, 0.0, 0.1],
                vec![0.25, 0.0, 1.0, 0.1],
                vec![0.2, 0.1, 0.1, 1.0],
            ],
        ),
        5 => (
            vec![1.0, 0.5, 1.5, 0.1, 1.1],
            vec![
                vec![1.0, 0.5, 0.25, 0.2, 0.25, 0.5],
                vec![0.5, 1.0, 0.0, 0.1, 0.2, 0.3],
                vec![0.25, 0.0, 1.0, 0.1, 0.0, 0.2],
                vec![0.2, 0.1, 0.1, 1.0, 0.0, 0.5],
                vec![0.25, 0.2, 0.0, 0.0, 1.0, 0.1],
                vec![0.5, 0.3, 0.2, 0.5, 0.1, 1.0],
            ],
        ),
        other => return Err(Error::UnsupportedCovariateCount(other)),
    };
    JointDistribution::custom(means, Matrix::from_rows(&rows)?)
}

/// Population slopes `Σ_XX⁻¹ σ_XY` and conditional variance of `Y | X`.
pub fn derive_true_slopes(dist: &JointDistribution) -> Result<(Vec<f64>, f64)> {
    let k = dist.k();
    let idx: Vec<usize> = (1..=k).collect();
    let sxx = dist.cov.select(&idx, &idx);
    let sxy: Vec<f64> = idx.iter().map(|&i| dist.cov[(i, 0)]).collect();
    let slopes = crate::numerics::solve_spd(&sxx, &sxy)?;
    let explained: f64 = sxy.iter().zip(&slopes).map(|(a, b)| a * b).sum();
    let sigma2 = dist.cov[(0, 0)] - explained;
    if sigma2 <= 0.0 {
        return Err(Error::NotPositiveDefinite { index: 0, pivot: sigma2 });
    }
    Ok((slopes, sigma2))
}

/// Location base means and yearly increment for one heterogeneity case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSpec {
    /// 1..=12 for the reference cases, 0 for custom ones.
    pub id: u8,
    pub location_means: Vec<f64>,
    pub time_increment: f64,
}

fn symmetric(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().flat_map(|&a| [a, -a]).collect();
    v.push(0.0);
    v.sort_by(f64::total_cmp);
    v
}

impl CaseSpec {
    pub fn reference(id: u8) -> Result<Self> {
        if !(1..=12).contains(&id) {
            return Err(Error::Domain(format!("case id must be in 1..=12, got {id}")));
        }
        let time_increment = if id <= 6 { 0.1 } else { 0.5 };
        let large = id.is_multiple_of(2);
        let location_means = match ((id - 1) % 6) / 2 {
            0 if large => vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            0 => vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            1 if large => (0..9).map(|i| -10.0 + 2.5 * i as f64).collect(),
            1 => (0..9).map(|i| -2.0 + 0.5 * i as f64).collect(),
            _ if large => symmetric(&[1.0, 2.5, 4.0, 5.5, 7.0, 8.5, 10.0]),
            _ => symmetric(&[0.15, 0.33, 0.66, 1.0, 1.33, 1.66, 2.0]),
        };
        Ok(Self {
            id,
            location_means,
            time_increment,
        })
    }

    pub fn custom(location_means: Vec<f64>, time_increment: f64) -> Result<Self> {
        if location_means.is_empty() {
            return Err(Error::Domain("a case needs at least one location".into()));
        }
        if location_means.iter().any(|m| !m.is_finite()) || !time_increment.is_finite() {
            return Err(Error::NonFinite("case means"));
        }
        Ok(Self {
            id: 0,
            location_means,
            time_increment,
        })
    }

    pub fn location_count(&self) -> usize {
        self.location_means.len()
    }
}

/// Outcome mean of the study at `location` (0-based) in year `time` (1-based).
pub fn case_mu_y(case: &CaseSpec, location: usize, time: usize) -> Result<f64> {
    let base = case.location_means.get(location).ok_or_else(|| {
        Error::IndexOutOfRange(format!(
            "location {location} with {} locations",
            case.location_count()
        ))
    })?;
    if time == 0 {
        return Err(Error::IndexOutOfRange("time ids start at 1".into()));
    }
    Ok(base + case.time_increment * (time - 1) as f64)
}

/// `β₀ = μ_Y − βᵀ μ_X`.
pub fn derive_intercept(mu_y: f64, slopes: &[f64], covariate_means: &[f64]) -> Result<f64> {
    if slopes.len() != covariate_means.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} slopes with {} covariate means",
            slopes.len(),
            covariate_means.len()
        )));
    }
    Ok(mu_y - slopes.iter().zip(covariate_means).map(|(b, m)| b * m).sum::<f64>())
}

/// Maps year `t ∈ 1..=n_periods` onto `[-1, 1]` as `(2t − n − 1)/(n − 1)`.
pub fn rescale_trend(t: usize, n_periods: usize) -> Result<f64> {
    if n_periods < 2 || t == 0 || t > n_periods {
        return Err(Error::Domain(format!(
            "trend rescale needs 1 <= t <= n and n >= 2, got t={t}, n={n_periods}"
        )));
    }
    let (t, n) = (t as f64, n_periods as f64);
    Ok((2.0 * t - n - 1.0) / (n - 1.0))
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub case: CaseSpec,
    pub n: usize,
    pub k: usize,
    pub time_periods: usize,
    pub iterations: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Replaces the built-in joint law; requires `allow_custom`.
    pub distribution: Option<JointDistribution>,
    pub allow_custom: bool,
}

impl SimulationConfig {
    pub fn new(case: CaseSpec, n: usize, k: usize) -> Self {
        Self {
            case,
            n,
            k,
            time_periods: DEFAULT_TIME_PERIODS,
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            distribution: None,
            allow_custom: false,
        }
    }

    /// Reference case `case_id` with the given `n` and `k`.
    pub fn reference(case_id: u8, n: usize, k: usize) -> Result<Self> {
        let cfg = Self::new(CaseSpec::reference(case_id)?, n, k);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_distribution(mut self, dist: JointDistribution) -> Self {
        self.k = dist.k();
        self.distribution = Some(dist);
        self.allow_custom = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let field = |f: &str, m: String| Error::Config {
            field: f.into(),
            message: m,
        };
        if !self.allow_custom {
            if !(1..=12).contains(&self.case.id) {
                return Err(field("case", format!("case id {} is not in 1..=12", self.case.id)));
            }
            if CaseSpec::reference(self.case.id)? != self.case {
                return Err(field("case", "case differs from the reference definition".into()));
            }
            if !SAMPLE_SIZES.contains(&self.n) {
                return Err(field("n", format!("{} is not one of {SAMPLE_SIZES:?}", self.n)));
            }
            if !COVARIATE_COUNTS.contains(&self.k) {
                return Err(field("k", format!("{} is not one of {COVARIATE_COUNTS:?}", self.k)));
            }
            if self.distribution.is_some() {
                return Err(field("overrides", "custom covariance needs allow_custom".into()));
            }
        }
        if self.k == 0 {
            return Err(field("k", "at least one covariate is required".into()));
        }
        if let Some(d) = &self.distribution {
            if d.k() != self.k {
                return Err(field("k", format!("k = {} but custom law has {}", self.k, d.k())));
            }
        }
        if self.n < self.k + 2 {
            return Err(field("n", format!("n = {} is too small for k = {}", self.n, self.k)));
        }
        if self.time_periods < 2 {
            return Err(field("time_periods", "at least two periods are required".into()));
        }
        if self.iterations == 0 {
            return Err(field("iterations", "must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(field("alpha", format!("{} is not in (0, 1)", self.alpha)));
        }
        Ok(())
    }

    pub fn location_count(&self) -> usize {
        self.case.location_count()
    }

    pub fn study_count(&self) -> usize {
        self.location_count() * self.time_periods
    }

    pub fn total_n(&self) -> usize {
        self.study_count() * self.n
    }

    pub fn joint_distribution(&self) -> Result<JointDistribution> {
        match &self.distribution {
            Some(d) => Ok(d.clone()),
            None => build_joint_distribution(self.k),
        }
    }

    pub fn study_id(&self, location: usize, time: usize) -> usize {
        location * self.time_periods + (time - 1)
    }

    /// Short label used in reports and manifests.
    pub fn label(&self) -> String {
        format!("case{}_n{}_k{}", self.case.id, self.n, self.k)
    }
}

/// Ground truth each estimator should recover.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrueParameters {
    #[serde(rename = "beta")]
    pub slopes: Vec<f64>,
    pub sigma2: f64,
    /// `intercepts[l][t-1]`.
    pub intercepts: Vec<Vec<f64>>,
    /// Coefficient on the rescaled trend that reproduces the yearly increment.
    pub trend_slope: f64,
}

pub fn true_parameters(config: &SimulationConfig) -> Result<TrueParameters> {
    let dist = config.joint_distribution()?;
    let (slopes, sigma2) = derive_true_slopes(&dist)?;
    let mut intercepts = Vec::with_capacity(config.location_count());
    for l in 0..config.location_count() {
        let row = (1..=config.time_periods)
            .map(|t| derive_intercept(case_mu_y(&config.case, l, t)?, &slopes, dist.covariate_means()))
            .collect::<Result<Vec<_>>>()?;
        intercepts.push(row);
    }
    // t₀ advances by 2/(T-1) per year
    let trend_slope = config.case.time_increment * (config.time_periods - 1) as f64 / 2.0;
    Ok(TrueParameters {
        slopes,
        sigma2,
        intercepts,
        trend_slope,
    })
}

/// Subject-level meta-regression data, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaDataset {
    pub y: Vec<f64>,
    /// Row-major `N × k` covariates.
    pub x: Vec<f64>,
    pub k: usize,
    pub study: Vec<usize>,
    pub location: Vec<usize>,
    /// 1-based.
    pub time: Vec<usize>,
    pub n_studies: usize,
    pub n_locations: usize,
    pub n_times: usize,
    pub provenance: Option<String>,
}

/// Borrowed view of one subject.
#[derive(Debug, Clone, Copy)]
pub struct Row<'a> {
    pub y: f64,
    pub x: &'a [f64],
    pub study: usize,
    pub location: usize,
    pub time: usize,
}

impl MetaDataset {
    /// Assembles a dataset from raw columns, checking label consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn from_columns(
        y: Vec<f64>,
        x: Vec<f64>,
        k: usize,
        study: Vec<usize>,
        location: Vec<usize>,
        time: Vec<usize>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::Validation("dataset has no rows".into()));
        }
        if x.len() != n * k || study.len() != n || location.len() != n || time.len() != n {
            return Err(Error::DimensionMismatch("dataset columns differ in length".into()));
        }
        if y.iter().chain(&x).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        if time.contains(&0) {
            return Err(Error::Validation("time ids start at 1".into()));
        }
        let n_studies = study.iter().max().unwrap() + 1;
        let n_locations = location.iter().max().unwrap() + 1;
        let n_times = *time.iter().max().unwrap();
        let mut owner: Vec<Option<(usize, usize)>> = vec![None; n_studies];
        for i in 0..n {
            let key = (location[i], time[i]);
            match owner[study[i]] {
                None => owner[study[i]] = Some(key),
                Some(prev) if prev != key => {
                    return Err(Error::Validation(format!(
                        "study {} appears at (location {}, time {}) and (location {}, time {})",
                        study[i], prev.0, prev.1, key.0, key.1
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            y,
            x,
            k,
            study,
            location,
            time,
            n_studies,
            n_locations,
            n_times,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        Row {
            y: self.y[i],
            x: self.x_row(i),
            study: self.study[i],
            location: self.location[i],
            time: self.time[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// Row counts per `(location, time)` cell, `cells[l][t-1]`.
    pub fn cell_counts(&self) -> Vec<Vec<usize>> {
        let mut c = vec![vec![0usize; self.n_times]; self.n_locations];
        for i in 0..self.len() {
            c[self.location[i]][self.time[i] - 1] += 1;
        }
        c
    }

    /// True when every (location, time) pair holds exactly one study of equal size.
    pub fn is_balanced(&self) -> bool {
        let cells = self.cell_counts();
        let first = cells[0][0];
        first > 0
            && self.n_studies == self.n_locations * self.n_times
            && cells.iter().flatten().all(|&c| c == first)
    }

    /// Copy with rows reordered by `order` (a permutation of `0..len`).
    pub fn permuted(&self, order: &[usize]) -> MetaDataset {
        let mut out = self.clone();
        for (dst, &src) in order.iter().enumerate() {
            out.y[dst] = self.y[src];
            out.x[dst * self.k..(dst + 1) * self.k].copy_from_slice(self.x_row(src));
            out.study[dst] = self.study[src];
            out.location[dst] = self.location[src];
            out.time[dst] = self.time[src];
        }
        out
    }

    pub fn csv_header(&self) -> String {
        let mut h = String::from("y");
        for j in 1..=self.k {
            h.push_str(&format!(",x{j}"));
        }
        h.push_str(",study,location,time");
        h
    }

    /// Writes `y,x1..xk,study,location,time` with round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        let mut line = String::new();
        for r in self.rows() {
            line.clear();
            line.push_str(&format!("{:?}", r.y));
            for v in r.x {
                line.push_str(&format!(",{v:?}"));
            }
            line.push_str(&format!(",{},{},{}", r.study, r.location, r.time));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Draws one balanced dataset: `n` subjects for every (location, year) study.
pub fn sample_dataset(config: &SimulationConfig, stream: RngStream) -> Result<MetaDataset> {
    config.validate()?;
    let dist = config.joint_distribution()?;
    let sampler = MvnSampler::new(dist.cov())?;
    let k = config.k;
    let total = config.total_n();
    let mut y = Vec::with_capacity(total);
    let mut x = Vec::with_capacity(total * k);
    let mut study = Vec::with_capacity(total);
    let mut location = Vec::with_capacity(total);
    let mut time = Vec::with_capacity(total);

    let mut rng = stream.rng();
    let mut z = vec![0.0; k + 1];
    let mut draw = vec![0.0; k + 1];
    for l in 0..config.location_count() {
        for t in 1..=config.time_periods {
            let mean = dist.mean_with(case_mu_y(&config.case, l, t)?);
            let s = config.study_id(l, t);
            for _ in 0..config.n {
                sampler.draw_into(&mut rng, &mean, &mut z, &mut draw);
                y.push(draw[0]);
                x.extend_from_slice(&draw[1..]);
                study.push(s);
                location.push(l);
                time.push(t);
            }
        }
    }
    Ok(MetaDataset {
        y,
        x,
        k,
        study,
        location,
        time,
        n_studies: config.study_count(),
        n_locations: config.location_count(),
        n_times: config.time_periods,
        provenance: Some(config.label()),
    })
}

/// Population covariance of the covariates alone, for diagnostics.
pub fn covariate_precision(dist: &JointDistribution) -> Result<Matrix> {
    let idx: Vec<usize> = (1..=dist.k()).collect();
    spd_inverse(&dist.cov().select(&idx, &idx))
}
