//! Desk-scale pipeline-inspection mission: model, scenarios, world, policies
//! and the batch experiment.

pub mod episode;
pub mod experiment;
pub mod model;
pub mod scenario;
pub mod world;

use thiserror::Error;

pub use episode::{run_episode, Episode, EpisodeConfig, EpisodeMetrics, Feature, Policy};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentSummary};
pub use scenario::{ScenarioOverrides, ScheduledEvent, UuvScenario};

#[derive(Debug, Error)]
pub enum UuvError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error(transparent)]
    Runtime(#[from] crate::runtime::RuntimeError),
    #[error(transparent)]
    Requirement(#[from] crate::pstl::PstlError),
    #[error(transparent)]
    Eval(#[from] crate::stl::EvalError),
}
