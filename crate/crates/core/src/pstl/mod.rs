//! Parametric requirements and the space between minimal and optimal requirements.

mod formula;
mod space;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stl::{EvalError, ParseError};

pub use formula::{ParamKind, PstlFormula, Slot, SlotInterval};
pub use space::{
    degree_of_strengthening, degree_of_weakening, in_validity_domain, valuation_leq, weaker_than,
    ParamSpec, RequirementSpace, RequirementSpaceFile,
};

#[derive(Debug, Error)]
pub enum PstlError {
    #[error("parameter `${0}` appears more than once")]
    RepeatedParameter(String),
    #[error("parameter `${0}` used as an interval start; only interval ends may be parametric")]
    TimeParameterAsStart(String),
    #[error("no value for parameter `${0}`")]
    MissingParameter(String),
    #[error("interval [{start},{end}] is inverted or negative after substitution")]
    IntervalInversion { start: f64, end: f64 },
    #[error("formula is not an instance of the requirement template")]
    NotAnInstance,
    #[error("valuations range over different parameters")]
    MismatchedParameters,
    #[error("invalid requirement space: {0}")]
    InvalidSpace(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("requirement file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("requirement file: {0}")]
    Io(#[from] std::io::Error),
}

/// Assignment of reals to parameter names.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Valuation(BTreeMap<String, f64>);

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_map(map: BTreeMap<String, f64>) -> Self {
        Self(map)
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for Valuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, "}}")
    }
}

/// Which way a parameter moves to make the requirement stronger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    StrengthensWhenIncreased,
    StrengthensWhenDecreased,
}

impl Direction {
    /// `+1.0` when larger values are stronger, `-1.0` otherwise.
    pub fn sign(self) -> f64 {
        match self {
            Direction::StrengthensWhenIncreased => 1.0,
            Direction::StrengthensWhenDecreased => -1.0,
        }
    }
}

/// Strengthening direction for every parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polarity(BTreeMap<String, Direction>);

impl Polarity {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, d: Direction) -> Self {
        self.0.insert(name.to_string(), d);
        self
    }

    pub fn get(&self, name: &str) -> Option<Direction> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Direction)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
