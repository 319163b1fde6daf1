//! Monte Carlo driver: sample, fit every requested spec, reduce.
//!
//! Iterations run on a rayon pool and are collected in iteration order, so
//! every reduction sees the same sequence regardless of worker count.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{sample_dataset, true_parameters, SimulationConfig, TrueParameters};
use crate::error::{Error, Result};
use crate::estimators::{fit_with, FitOptions, SpecKind};
use crate::metrics::{adjust_alpha, summarize_parameters, AggregateMetrics, REFERENCE_N};
use crate::numerics::{rng::GENERATOR, Matrix, RngStream};

/// Environment variable that caps the worker count.
pub const THREADS_ENV: &str = "METAREG_THREADS";
/// Largest tolerated share of failed fits per spec.
pub const MAX_FAILURE_RATE: f64 = 0.10;

/// How iteration streams are keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RngPolicy {
    /// Stream depends on (seed, iteration) only, so cells that share a seed
    /// see the same underlying normal draws and compare with less noise.
    #[default]
    CommonRandomNumbers,
    /// Stream depends on (seed, cell, iteration).
    Independent,
}

impl RngPolicy {
    pub fn stream(self, seed: u64, cell: u32, iteration: u32) -> RngStream {
        match self {
            RngPolicy::CommonRandomNumbers => RngStream::child(seed, 0, iteration),
            RngPolicy::Independent => RngStream::child(seed, cell + 1, iteration),
        }
    }

    fn stream_group(self, cell: u32) -> u32 {
        match self {
            RngPolicy::CommonRandomNumbers => 0,
            RngPolicy::Independent => cell + 1,
        }
    }
}

/// Worker count from `METAREG_THREADS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub policy: RngPolicy,
    pub workers: usize,
    pub options: FitOptions,
    /// Total sample size at which alpha is left at its base value.
    pub reference_n: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            policy: RngPolicy::default(),
            workers: default_workers(),
            options: FitOptions::default(),
            reference_n: REFERENCE_N,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecOutcome {
    pub spec: SpecKind,
    pub successes: usize,
    /// Failed iterations by error kind.
    pub failures: BTreeMap<String, usize>,
    pub metrics: Option<AggregateMetrics>,
}

impl SpecOutcome {
    pub fn failure_count(&self) -> usize {
        self.failures.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub index: u32,
    pub config: SimulationConfig,
    pub truth: TrueParameters,
    pub total_n: usize,
    pub alpha: f64,
    pub outcomes: Vec<SpecOutcome>,
    /// Logged only; never written to data files.
    pub wall_time: Duration,
}

impl CellResult {
    pub fn outcome(&self, spec: SpecKind) -> Option<&SpecOutcome> {
        self.outcomes.iter().find(|o| o.spec == spec)
    }

    pub fn metrics(&self, spec: SpecKind) -> Option<&AggregateMetrics> {
        self.outcome(spec).and_then(|o| o.metrics.as_ref())
    }
}

struct Draw {
    slopes: Vec<f64>,
    ses: Vec<f64>,
    trend: Option<(f64, f64)>,
    df: usize,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidPlan(format!("cannot start worker pool: {e}")))
}

/// Runs every iteration of one cell and reduces the successful fits.
pub fn run_cell(
    config: &SimulationConfig,
    specs: &[SpecKind],
    settings: &RunSettings,
    cell: u32,
) -> Result<CellResult> {
    config.validate()?;
    if specs.is_empty() {
        return Err(Error::InvalidPlan("no specifications requested".into()));
    }
    let iterations = u32::try_from(config.iterations)
        .map_err(|_| Error::InvalidPlan("iteration count exceeds 2^32".into()))?;
    let start = Instant::now();
    let truth = true_parameters(config)?;

    let run_one = |j: u32| -> Result<Vec<Result<Draw>>> {
        let data = sample_dataset(config, settings.policy.stream(config.seed, cell, j))?;
        Ok(specs
            .iter()
            .map(|&spec| {
                fit_with(spec, &data, settings.options).map(|f| Draw {
                    slopes: f.slopes,
                    ses: f.slope_se,
                    trend: f.trend.map(|t| (t.estimate, t.se)),
                    df: f.df,
                })
            })
            .collect())
    };
    let draws: Vec<Vec<Result<Draw>>> = pool(settings.workers)?
        .install(|| (0..iterations).into_par_iter().map(run_one).collect::<Result<Vec<_>>>())?;

    let total_n = config.total_n();
    let alpha = adjust_alpha(total_n, config.alpha, settings.reference_n);
    let k = config.k;
    let slope_names: Vec<String> = (1..=k).map(|j| format!("x{j}")).collect();

    let mut outcomes = Vec::with_capacity(specs.len());
    for (s, &spec) in specs.iter().enumerate() {
        let mut failures = BTreeMap::new();
        let mut est = Vec::new();
        let mut ses = Vec::new();
        let mut trend_est = Vec::new();
        let mut trend_se = Vec::new();
        let mut dfs = Vec::new();
        for iteration in &draws {
            match &iteration[s] {
                Ok(d) => {
                    est.extend_from_slice(&d.slopes);
                    ses.extend_from_slice(&d.ses);
                    if let Some((e, se)) = d.trend {
                        trend_est.push(e);
                        trend_se.push(se);
                    }
                    dfs.push(d.df);
                }
                Err(e) => *failures.entry(e.kind().to_string()).or_insert(0) += 1,
            }
        }
        let failed: usize = failures.values().sum();
        if failed as f64 > MAX_FAILURE_RATE * config.iterations as f64 {
            return Err(Error::ExcessiveFailures {
                spec: spec.name().into(),
                failures: failed,
                iterations: config.iterations,
            });
        }
        let successes = dfs.len();
        let metrics = if successes == 0 {
            None
        } else {
            let est = Matrix::new(successes, k, est)?;
            let ses = Matrix::new(successes, k, ses)?;
            let (slopes, bias) = summarize_parameters(
                &slope_names,
                &est,
                &ses,
                &truth.slopes,
                &dfs,
                config.n,
                alpha,
            )?;
            let trend = if trend_est.len() == successes {
                let (mut t, _) = summarize_parameters(
                    &["trend".to_string()],
                    &Matrix::new(successes, 1, trend_est)?,
                    &Matrix::new(successes, 1, trend_se)?,
                    &[truth.trend_slope],
                    &dfs,
                    config.n,
                    alpha,
                )?;
                t.pop()
            } else {
                None
            };
            Some(AggregateMetrics {
                successes,
                alpha,
                df: *dfs.iter().min().unwrap(),
                slopes,
                trend,
                slope_bias: bias.per_iteration,
            })
        };
        outcomes.push(SpecOutcome {
            spec,
            successes,
            failures,
            metrics,
        });
    }

    Ok(CellResult {
        index: cell,
        config: config.clone(),
        truth,
        total_n,
        alpha,
        outcomes,
        wall_time: start.elapsed(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub cells: Vec<SimulationConfig>,
    pub specs: Vec<SpecKind>,
    pub output: Option<PathBuf>,
    pub settings: RunSettings,
}

impl ExperimentPlan {
    pub fn new(cells: Vec<SimulationConfig>, specs: Vec<SpecKind>) -> Self {
        Self {
            cells,
            specs,
            output: None,
            settings: RunSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidPlan("plan has no cells".into()));
        }
        if self.specs.is_empty() {
            return Err(Error::InvalidPlan("plan has no specifications".into()));
        }
        for (i, c) in self.cells.iter().enumerate() {
            c.validate()?;
            if self.cells[..i].contains(c) {
                return Err(Error::InvalidPlan(format!("duplicate cell {}", c.label())));
            }
        }
        for (i, s) in self.specs.iter().enumerate() {
            if self.specs[..i].contains(s) {
                return Err(Error::InvalidPlan(format!("duplicate specification {s}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestCell {
    pub index: u32,
    pub label: String,
    pub case: u8,
    pub location_means: Vec<f64>,
    pub time_increment: f64,
    pub n: usize,
    pub k: usize,
    pub time_periods: usize,
    pub iterations: usize,
    pub alpha: f64,
    pub seed: u64,
    /// High 32 bits of every iteration's stream id in this cell.
    pub stream_group: u32,
    pub custom_distribution: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub generator: String,
    pub rng_policy: RngPolicy,
    /// How an iteration's stream is derived from the cell's seed.
    pub stream_derivation: String,
    pub strict_paper: bool,
    pub reference_n: usize,
    pub specs: Vec<SpecKind>,
    pub cells: Vec<ManifestCell>,
}

pub fn manifest(plan: &ExperimentPlan) -> Manifest {
    let policy = plan.settings.policy;
    Manifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        generator: GENERATOR.into(),
        rng_policy: policy,
        stream_derivation: "key = seed (seed_from_u64), stream id = (stream_group << 32) | iteration".into(),
        strict_paper: plan.settings.options.strict_paper,
        reference_n: plan.settings.reference_n,
        specs: plan.specs.clone(),
        cells: plan
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| ManifestCell {
                index: i as u32,
                label: c.label(),
                case: c.case.id,
                location_means: c.case.location_means.clone(),
                time_increment: c.case.time_increment,
                n: c.n,
                k: c.k,
                time_periods: c.time_periods,
                iterations: c.iterations,
                alpha: c.alpha,
                seed: c.seed,
                stream_group: policy.stream_group(i as u32),
                custom_distribution: c.distribution.is_some(),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub manifest: Manifest,
}

/// Runs every cell in order. With an output directory set, the directory is
/// created up front and receives `manifest.json`, `cell_results.csv` and one
/// `cell_XXX/fit_summary.csv` per cell.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    plan.validate()?;
    if let Some(dir) = &plan.output {
        std::fs::create_dir_all(dir)?;
        let probe = dir.join(".metareg-write-test");
        std::fs::write(&probe, b"")?;
        std::fs::remove_file(&probe)?;
    }
    let manifest = manifest(plan);
    let mut cells = Vec::with_capacity(plan.cells.len());
    for (i, config) in plan.cells.iter().enumerate() {
        cells.push(run_cell(config, &plan.specs, &plan.settings, i as u32)?);
    }
    if let Some(dir) = &plan.output {
        crate::report::write_experiment(dir, &cells, &manifest)?;
    }
    Ok(ExperimentOutput { cells, manifest })
}
