use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::recipe::Role;

/// One broken rule, naming the offending field.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

struct Listing<'a>(&'a [Violation]);

impl fmt::Display for Listing<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("duplicate recipe id `{0}`")]
    DuplicateId(String),
    #[error("schema violation: {}", Listing(.0))]
    Schema(Vec<Violation>),
    #[error("dataset contains no recipes")]
    EmptyDataset,
    #[error("no recipe can fill a `{0}` slot")]
    MissingRole(Role),
    #[error("horizon {0} is outside the supported range [1, 5] days")]
    InvalidHorizon(i64),
    #[error("invalid day configuration: {}", Listing(.0))]
    InvalidDayConfig(Vec<Violation>),
    #[error("invalid plan: {}", Listing(.0))]
    InvalidPlan(Vec<Violation>),
    #[error("invalid profile: {}", Listing(.0))]
    InvalidProfile(Vec<Violation>),
    #[error("meal has no items")]
    EmptyMeal,
    #[error("meal has {found} items but {expected} slots")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("a stump needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("feature vector has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("population `{name}`: {reason}")]
    InvalidPopulation { name: String, reason: String },
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("training needs at least one profile")]
    NoProfiles,
    #[error("invalid bandit configuration: {0}")]
    InvalidBanditConfig(String),
    #[error("bandit state was trained on a different feature layout")]
    FeatureSchemaMismatch,
}
