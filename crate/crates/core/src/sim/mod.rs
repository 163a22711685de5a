//! Deterministic grid-house simulator.
//!
//! A house is a connected graph of rooms holding containers (openable) and
//! surfaces. Objects live in exactly one place. Agents move one hop per
//! tick and act in lockstep: actions are submitted together and resolved in
//! ascending agent id.

pub mod config;
pub mod goal;
pub mod house;
pub mod types;
pub mod world;

use thiserror::Error;

use crate::ids::AgentId;

pub use config::{ObjectConfig, WorldConfig};
pub use goal::{goal_progress, GoalKind, GoalPredicate, GoalProgress};
pub use house::House;
pub use types::{
    ActionOutcome, FailureReason, Observation, Place, PrimitiveAction, VisibleContainer,
    VisibleObject,
};
pub use world::{init_world, WorldState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// `pointer` is a JSON pointer into the offending config document.
    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("agent {0} already present")]
    DuplicateAgent(AgentId),
}

impl SimError {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Config { pointer: pointer.into(), message: message.into() }
    }
}
