//! Control plane: liveness monitoring, affinity scoring, planner/critic
//! scheduling and event-driven reallocation.

pub mod affinity;
pub mod critic;
pub mod monitor;
pub mod planner;
pub mod scheduler;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, TaskId, Tick};
use crate::resource::{ResourceError, ResourceId, ResourceKind};
use crate::sim::goal::GoalPredicate;

pub use affinity::{affinity, affinity_with_load, AffinityWeights};
pub use critic::{critic, CriticRule, CriticVerdict, Violation};
pub use monitor::{Monitor, MonitorConfig};
pub use planner::{GreedyPlanner, PlanContext, Planner};
pub use scheduler::{AllocatorKind, ControlPlane, EpochRecord};

/// Task → agent map of one scheduling epoch.
pub type TaskMap = BTreeMap<TaskId, AgentId>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub epoch: u64,
    pub map: TaskMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TriggerKind {
    AgentDead,
    AgentDeparted,
    AgentJoined,
    TaskStalled,
    TaskCompleted,
    TaskArrived,
}

impl TriggerKind {
    pub fn subject_kind(self) -> ResourceKind {
        match self {
            Self::AgentDead | Self::AgentDeparted | Self::AgentJoined => ResourceKind::Agent,
            Self::TaskStalled | Self::TaskCompleted | Self::TaskArrived => ResourceKind::Task,
        }
    }
}

/// A discrete state change that may cause rescheduling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub tick: Tick,
    pub kind: TriggerKind,
    pub subject: ResourceId,
}

impl TriggerEvent {
    pub fn new(tick: Tick, kind: TriggerKind, subject: ResourceId) -> Result<Self, ControlError> {
        if kind.subject_kind() != subject.kind {
            return Err(ControlError::SubjectMismatch { kind, subject });
        }
        Ok(Self { tick, kind, subject })
    }

    pub fn agent(tick: Tick, kind: TriggerKind, agent: AgentId) -> Self {
        Self::new(tick, kind, ResourceId::agent(agent)).expect("agent trigger kind")
    }

    pub fn task(tick: Tick, kind: TriggerKind, task: TaskId) -> Self {
        Self::new(tick, kind, ResourceId::task(task)).expect("task trigger kind")
    }
}

/// Orders from the control plane to one worker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Directive {
    Assign {
        task: TaskId,
        agent: AgentId,
        goal: GoalPredicate,
        priority: i32,
        /// Goal units already satisfied when the task was handed over.
        satisfied_units: u32,
    },
    Evict {
        task: TaskId,
        agent: AgentId,
    },
}

impl Directive {
    pub fn agent(&self) -> AgentId {
        match self {
            Self::Assign { agent, .. } | Self::Evict { agent, .. } => *agent,
        }
    }

    pub fn task(&self) -> TaskId {
        match self {
            Self::Assign { task, .. } | Self::Evict { task, .. } => *task,
        }
    }
}

fn default_max_load() -> u32 {
    4
}

fn default_weight() -> f64 {
    0.5
}

fn default_max_rounds() -> u32 {
    3
}

/// The scheduler's config block as it appears in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    #[serde(flatten)]
    pub monitor: MonitorConfig,
    #[serde(default = "default_max_load")]
    pub max_load: u32,
    #[serde(default = "default_weight")]
    pub w_loc: f64,
    #[serde(default = "default_weight")]
    pub w_load: f64,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: u32,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            monitor: MonitorConfig::default(),
            max_load: default_max_load(),
            w_loc: default_weight(),
            w_load: default_weight(),
            max_rounds: default_max_rounds(),
        }
    }
}

impl ControlConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        self.monitor.validate()?;
        if self.max_load == 0 {
            return Err(ControlError::InvalidConfig("max_load must be positive".into()));
        }
        let weights_ok = self.w_loc.is_finite() && self.w_load.is_finite();
        if !weights_ok || self.w_loc < 0.0 || self.w_load < 0.0 || self.w_loc + self.w_load <= 0.0 {
            return Err(ControlError::InvalidConfig(
                "weights must be non-negative with a positive sum".into(),
            ));
        }
        if self.max_rounds == 0 {
            return Err(ControlError::InvalidConfig("max_rounds must be positive".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> AffinityWeights<f64> {
        AffinityWeights::new(self.w_loc, self.w_load)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("unknown subject {0}")]
    UnknownSubject(ResourceId),
    #[error("{kind:?} cannot refer to {subject}")]
    SubjectMismatch { kind: TriggerKind, subject: ResourceId },
    #[error("invalid control config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Resource(#[from] ResourceError),
}
