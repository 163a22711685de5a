//! Scenario runner, metrics and batch suites.

pub mod episode;
pub mod scenario;
pub mod stats;
pub mod suite;

use std::io;

use thiserror::Error;

use crate::bus::BusError;
use crate::control::ControlError;
use crate::sim::SimError;

pub use episode::{run_episode, EpisodeResult, TraceHeader};
pub use scenario::{AgentSpec, Dynamics, GoalSpec, InitialAgents, Scenario, ScenarioSpec};
pub use suite::{run_suite, Manifest, ManifestEntry, SuiteSummary, SummaryRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl HarnessError {
    pub fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Self::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Bad input, as opposed to a failure while running.
    pub fn is_config(&self) -> bool {
        match self {
            Self::Config(_) | Self::Json { .. } => true,
            Self::Sim(SimError::Config { .. }) => true,
            Self::Control(ControlError::InvalidConfig(_)) => true,
            _ => false,
        }
    }
}
