use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The ten methodology specifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SpecKind {
    #[serde(rename = "RE_s")]
    ReS,
    #[serde(rename = "FE_s")]
    FeS,
    #[serde(rename = "ME_s")]
    MeS,
    #[serde(rename = "FE_lt")]
    FeLt,
    #[serde(rename = "FE_t")]
    FeT,
    #[serde(rename = "FE_l")]
    FeL,
    #[serde(rename = "RE_l")]
    ReL,
    #[serde(rename = "ME_l")]
    MeL,
    #[serde(rename = "FE_sTrend")]
    FeSTrend,
    #[serde(rename = "FE_lTrend")]
    FeLTrend,
}

/// Level at which rows are pooled for weights or variance components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Grouping {
    Study,
    Location,
    Time,
    /// One group per (location, time) pair.
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Effect {
    Fixed,
    Random,
    Mixed,
}

/// Dummy block added after the intercept and covariates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DummySet {
    None,
    Study,
    Location,
    Time,
    LocationTime,
}

impl SpecKind {
    pub const ALL: [SpecKind; 10] = [
        SpecKind::ReS,
        SpecKind::FeS,
        SpecKind::MeS,
        SpecKind::FeLt,
        SpecKind::FeT,
        SpecKind::FeL,
        SpecKind::ReL,
        SpecKind::MeL,
        SpecKind::FeSTrend,
        SpecKind::FeLTrend,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SpecKind::ReS => "RE_s",
            SpecKind::FeS => "FE_s",
            SpecKind::MeS => "ME_s",
            SpecKind::FeLt => "FE_lt",
            SpecKind::FeT => "FE_t",
            SpecKind::FeL => "FE_l",
            SpecKind::ReL => "RE_l",
            SpecKind::MeL => "ME_l",
            SpecKind::FeSTrend => "FE_sTrend",
            SpecKind::FeLTrend => "FE_lTrend",
        }
    }

    pub fn effect(self) -> Effect {
        match self {
            SpecKind::ReS | SpecKind::ReL => Effect::Random,
            SpecKind::MeS | SpecKind::MeL => Effect::Mixed,
            _ => Effect::Fixed,
        }
    }

    /// Grouping that defines the inverse-variance weights (and, for random
    /// and mixed specs, the variance components).
    pub fn grouping(self) -> Grouping {
        match self {
            SpecKind::ReS | SpecKind::FeS | SpecKind::MeS | SpecKind::FeSTrend => Grouping::Study,
            SpecKind::FeL | SpecKind::ReL | SpecKind::MeL | SpecKind::FeLTrend => Grouping::Location,
            SpecKind::FeT => Grouping::Time,
            SpecKind::FeLt => Grouping::Cell,
        }
    }

    pub fn dummies(self) -> DummySet {
        match self {
            SpecKind::FeS | SpecKind::FeSTrend => DummySet::Study,
            SpecKind::FeL | SpecKind::FeLTrend => DummySet::Location,
            SpecKind::FeT => DummySet::Time,
            SpecKind::FeLt => DummySet::LocationTime,
            SpecKind::ReS | SpecKind::MeS | SpecKind::ReL | SpecKind::MeL => DummySet::None,
        }
    }

    pub fn has_trend(self) -> bool {
        matches!(self, SpecKind::FeSTrend | SpecKind::FeLTrend)
    }

    pub fn is_random(self) -> bool {
        self.effect() != Effect::Fixed
    }

    /// Parses a comma-separated list such as `FE_s,RE_l`.
    pub fn parse_list(s: &str) -> Result<Vec<SpecKind>, Error> {
        let specs = s
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<SpecKind>, Error>>()?;
        if specs.is_empty() {
            return Err(Error::Config {
                field: "specs".into(),
                message: "no specifications given".into(),
            });
        }
        Ok(specs)
    }
}

impl fmt::Display for SpecKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SpecKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        SpecKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config {
                field: "specs".into(),
                message: format!("unknown specification `{s}`"),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in SpecKind::ALL {
            assert_eq!(k.name().parse::<SpecKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("FE_x".parse::<SpecKind>().is_err());
        assert_eq!(
            SpecKind::parse_list("FE_s, re_l").unwrap(),
            vec![SpecKind::FeS, SpecKind::ReL]
        );
    }

    #[test]
    fn classification_is_consistent() {
        for k in SpecKind::ALL {
            assert_eq!(k.is_random(), k.dummies() == DummySet::None);
        }
        assert_eq!(SpecKind::MeL.grouping(), SpecKind::ReL.grouping());
        assert_eq!(SpecKind::FeLt.grouping(), Grouping::Cell);
    }
}
