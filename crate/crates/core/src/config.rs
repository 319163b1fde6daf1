//! Experiment configuration files (TOML, or JSON with the same layout).
//!
//! ```toml
//! [experiment]
//! cases = [1, 7]
//! n = [100]
//! k = [1]
//! iterations = 1000
//! seed = 42
//! alpha = 0.05
//! specs = ["FE_s", "FE_lTrend"]   # or "all"
//!
//! [output]
//! directory = "out"
//! formats = ["csv"]
//!
//! [overrides]
//! allow_custom = false
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datagen::{
    CaseSpec, JointDistribution, SimulationConfig, DEFAULT_ALPHA, DEFAULT_ITERATIONS,
    DEFAULT_TIME_PERIODS,
};
use crate::error::{Error, Result};
use crate::estimators::SpecKind;
use crate::harness::{ExperimentPlan, RngPolicy, RunSettings};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfigFile {
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub overrides: OverridesSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SpecList {
    Keyword(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub cases: Vec<u8>,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub iterations: usize,
    pub seed: u64,
    pub alpha: f64,
    pub specs: SpecList,
    pub time_periods: usize,
    pub rng_policy: RngPolicy,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            cases: vec![1],
            n: vec![100],
            k: vec![1],
            iterations: DEFAULT_ITERATIONS,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            specs: SpecList::Keyword("all".into()),
            time_periods: DEFAULT_TIME_PERIODS,
            rng_policy: RngPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec!["csv".into()],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomCase {
    pub location_means: Vec<f64>,
    pub time_increment: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverridesSection {
    pub allow_custom: bool,
    /// Joint covariance ordered `Y, X1..Xk`.
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Covariate means `X1..Xk`.
    pub means: Option<Vec<f64>>,
    pub case: Option<CustomCase>,
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl RunConfigFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_error("toml", e.message().to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("json", e.to_string()))
    }

    /// Reads TOML, or JSON when the extension is `.json` or the text starts with `{`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("path", format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    pub fn specs(&self) -> Result<Vec<SpecKind>> {
        match &self.experiment.specs {
            SpecList::Keyword(s) if s.eq_ignore_ascii_case("all") => Ok(SpecKind::ALL.to_vec()),
            SpecList::Keyword(s) => SpecKind::parse_list(s),
            SpecList::List(v) => {
                if v.is_empty() {
                    return Err(config_error("experiment.specs", "empty specification list"));
                }
                v.iter().map(|s| s.parse()).collect()
            }
        }
    }

    fn distribution(&self) -> Result<Option<JointDistribution>> {
        let o = &self.overrides;
        match (&o.covariance, &o.means) {
            (None, None) => Ok(None),
            (Some(cov), Some(means)) => {
                let cov = Matrix::from_rows(cov)
                    .map_err(|e| config_error("overrides.covariance", e.to_string()))?;
                JointDistribution::custom(means.clone(), cov)
                    .map(Some)
                    .map_err(|e| config_error("overrides.covariance", e.to_string()))
            }
            _ => Err(config_error(
                "overrides",
                "covariance and means must be given together",
            )),
        }
    }

    /// Grid cells `cases × n × k`, validated.
    pub fn cells(&self) -> Result<Vec<SimulationConfig>> {
        let e = &self.experiment;
        let custom = self.overrides.allow_custom;
        let dist = self.distribution()?;
        if !custom && (dist.is_some() || self.overrides.case.is_some()) {
            return Err(config_error(
                "overrides.allow_custom",
                "custom covariance or case requires allow_custom = true",
            ));
        }
        let cases: Vec<CaseSpec> = match &self.overrides.case {
            Some(c) => vec![CaseSpec::custom(c.location_means.clone(), c.time_increment)
                .map_err(|err| config_error("overrides.case", err.to_string()))?],
            None => e
                .cases
                .iter()
                .map(|&id| {
                    CaseSpec::reference(id).map_err(|err| config_error("experiment.cases", err.to_string()))
                })
                .collect::<Result<_>>()?,
        };
        let ks = match &dist {
            Some(d) => vec![d.k()],
            None => e.k.clone(),
        };
        if cases.is_empty() || e.n.is_empty() || ks.is_empty() {
            return Err(config_error("experiment", "cases, n and k must be non-empty"));
        }
        let mut out = Vec::new();
        for case in &cases {
            for &n in &e.n {
                for &k in &ks {
                    let mut c = SimulationConfig::new(case.clone(), n, k);
                    c.time_periods = e.time_periods;
                    c.iterations = e.iterations;
                    c.seed = e.seed;
                    c.alpha = e.alpha;
                    c.allow_custom = custom;
                    c.distribution = dist.clone();
                    c.validate().map_err(|err| match err {
                        Error::Config { field, message } => {
                            config_error(&format!("experiment.{field}"), message)
                        }
                        other => config_error("experiment", other.to_string()),
                    })?;
                    out.push(c);
                }
            }
        }
        Ok(out)
    }

    pub fn plan(&self) -> Result<ExperimentPlan> {
        let mut plan = ExperimentPlan::new(self.cells()?, self.specs()?);
        plan.output = Some(self.output.directory.clone());
        plan.settings = RunSettings {
            policy: self.experiment.rng_policy,
            ..RunSettings::default()
        };
        plan.validate()?;
        Ok(plan)
    }
}
