//! Unified resource objects for agents and tasks.
//!
//! Both kinds carry an attribute set and a lifecycle state machine. The
//! [`Registry`] owns every object and is the only place lifecycle state is
//! mutated; it keeps agent workloads consistent with task assignees.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, ObjectId, RoomId, TaskId, Tick};
use crate::sim::goal::GoalPredicate;

/// Default number of objects an agent can hold at once.
pub const DEFAULT_HAND_CAPACITY: usize = 2;

pub type Capability = String;
pub type CapabilitySet = BTreeSet<Capability>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResourceKind {
    Agent,
    Task,
}

/// Identity of any resource object: `(kind, index)` is unique in a registry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResourceId {
    pub kind: ResourceKind,
    pub index: u32,
}

impl ResourceId {
    pub fn agent(id: AgentId) -> Self {
        Self { kind: ResourceKind::Agent, index: id.0 }
    }

    pub fn task(id: TaskId) -> Self {
        Self { kind: ResourceKind::Task, index: id.0 }
    }

    pub fn as_agent(self) -> Option<AgentId> {
        (self.kind == ResourceKind::Agent).then_some(AgentId(self.index))
    }

    pub fn as_task(self) -> Option<TaskId> {
        (self.kind == ResourceKind::Task).then_some(TaskId(self.index))
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ResourceKind::Agent => write!(f, "agent#{}", self.index),
            ResourceKind::Task => write!(f, "task#{}", self.index),
        }
    }
}

/// A state machine with a fixed set of legal edges.
pub trait Lifecycle: Copy + Eq + fmt::Debug + 'static {
    const ALL: &'static [Self];

    fn is_legal(from: Self, to: Self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentLifecycle {
    Joining,
    Active,
    Suspect,
    Dead,
    Departed,
}

impl AgentLifecycle {
    /// Active or Suspect: may hold and receive tasks.
    pub fn is_live(self) -> bool {
        matches!(self, Self::Active | Self::Suspect)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Self::Dead | Self::Departed)
    }
}

impl Lifecycle for AgentLifecycle {
    const ALL: &'static [Self] = &[
        Self::Joining,
        Self::Active,
        Self::Suspect,
        Self::Dead,
        Self::Departed,
    ];

    fn is_legal(from: Self, to: Self) -> bool {
        use AgentLifecycle::*;
        matches!(
            (from, to),
            (Joining, Active)
                | (Active, Suspect)
                | (Suspect, Active)
                | (Suspect, Dead)
                | (Active, Departed)
                | (Suspect, Departed)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskLifecycle {
    Pending,
    Assigned,
    InProgress,
    Completed,
    Evicted,
}

impl TaskLifecycle {
    /// Assigned or InProgress: the task has a live owner.
    pub fn is_held(self) -> bool {
        matches!(self, Self::Assigned | Self::InProgress)
    }

    /// Pending or Evicted: waiting for the scheduler.
    pub fn is_unowned(self) -> bool {
        matches!(self, Self::Pending | Self::Evicted)
    }
}

impl Lifecycle for TaskLifecycle {
    const ALL: &'static [Self] = &[
        Self::Pending,
        Self::Assigned,
        Self::InProgress,
        Self::Completed,
        Self::Evicted,
    ];

    fn is_legal(from: Self, to: Self) -> bool {
        use TaskLifecycle::*;
        matches!(
            (from, to),
            (Pending, Assigned)
                | (Assigned, InProgress)
                | (Assigned, Evicted)
                | (InProgress, Evicted)
                | (InProgress, Completed)
                | (Evicted, Assigned)
        )
    }
}

/// A requested state change. `from` must equal the object's current state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LifecycleEdge<S> {
    pub from: S,
    pub to: S,
}

impl<S: Lifecycle> LifecycleEdge<S> {
    pub fn new(from: S, to: S) -> Self {
        Self { from, to }
    }

    pub fn is_legal(&self) -> bool {
        S::is_legal(self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResourceError {
    #[error("illegal agent transition {0:?} -> {1:?}")]
    IllegalAgentTransition(AgentLifecycle, AgentLifecycle),
    #[error("illegal task transition {0:?} -> {1:?}")]
    IllegalTaskTransition(TaskLifecycle, TaskLifecycle),
    #[error("edge source {edge:?} does not match current state {current:?}")]
    StaleEdge { edge: String, current: String },
    #[error("assigning {task} requires an assignee")]
    MissingAssignee { task: TaskId },
    #[error("{task} cannot be assigned to {agent}: agent is not live")]
    AssigneeNotLive { task: TaskId, agent: AgentId },
    #[error("{task} references unregistered assignee {agent}")]
    DanglingReference { task: TaskId, agent: AgentId },
    #[error("{0} is not registered")]
    Unknown(ResourceId),
    #[error("{0} is already registered")]
    Duplicate(ResourceId),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

/// Resource object for an agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentObject {
    pub id: AgentId,
    pub capabilities: CapabilitySet,
    pub location: RoomId,
    pub carrying: Vec<ObjectId>,
    /// Number of tasks in Assigned/InProgress whose assignee is this agent.
    pub workload: u32,
    pub state: AgentLifecycle,
    pub last_heartbeat: Tick,
    /// Name of the worker policy driving this agent.
    pub policy: String,
}

impl AgentObject {
    pub fn new(id: AgentId, capabilities: CapabilitySet, location: RoomId, tick: Tick) -> Self {
        Self {
            id,
            capabilities,
            location,
            carrying: Vec::new(),
            workload: 0,
            state: AgentLifecycle::Joining,
            last_heartbeat: tick,
            policy: "rule-based".to_owned(),
        }
    }

    pub fn with_state(mut self, state: AgentLifecycle) -> Self {
        self.state = state;
        self
    }

    pub fn resource_id(&self) -> ResourceId {
        ResourceId::agent(self.id)
    }

    pub fn transition(&mut self, edge: LifecycleEdge<AgentLifecycle>) -> Result<(), ResourceError> {
        if edge.from != self.state {
            return Err(ResourceError::StaleEdge {
                edge: format!("{:?}->{:?}", edge.from, edge.to),
                current: format!("{:?}", self.state),
            });
        }
        if !edge.is_legal() {
            return Err(ResourceError::IllegalAgentTransition(edge.from, edge.to));
        }
        self.state = edge.to;
        Ok(())
    }

    pub fn satisfies(&self, required: &CapabilitySet) -> bool {
        required.is_subset(&self.capabilities)
    }
}

/// Resource object for a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskObject {
    pub id: TaskId,
    pub goal: GoalPredicate,
    pub required_capabilities: CapabilitySet,
    /// Higher is more urgent.
    pub priority: i32,
    pub state: TaskLifecycle,
    pub assignee: Option<AgentId>,
    /// Completed goal units over total goal units.
    pub progress: f64,
    pub last_progress_tick: Tick,
    /// The environment reported the goal as met while nobody owned the task.
    /// The next owner completes it on first report.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub goal_met: bool,
}

impl TaskObject {
    pub fn new(id: TaskId, goal: GoalPredicate) -> Self {
        Self {
            id,
            goal,
            required_capabilities: CapabilitySet::new(),
            priority: 0,
            state: TaskLifecycle::Pending,
            assignee: None,
            progress: 0.0,
            last_progress_tick: 0,
            goal_met: false,
        }
    }

    pub fn resource_id(&self) -> ResourceId {
        ResourceId::task(self.id)
    }

    /// Units of the goal already satisfied according to `progress`.
    pub fn satisfied_units(&self) -> u32 {
        if self.goal_met || self.state == TaskLifecycle::Completed {
            return self.goal.count;
        }
        let units = (self.progress * f64::from(self.goal.count)).round();
        (units as u32).min(self.goal.count)
    }

    /// Apply a lifecycle edge. Entering Assigned requires `assignee`;
    /// entering Evicted or Completed clears it; Completed pins progress to 1.
    pub fn transition(
        &mut self,
        edge: LifecycleEdge<TaskLifecycle>,
        assignee: Option<AgentId>,
    ) -> Result<(), ResourceError> {
        if edge.from != self.state {
            return Err(ResourceError::StaleEdge {
                edge: format!("{:?}->{:?}", edge.from, edge.to),
                current: format!("{:?}", self.state),
            });
        }
        if !edge.is_legal() {
            return Err(ResourceError::IllegalTaskTransition(edge.from, edge.to));
        }
        match edge.to {
            TaskLifecycle::Assigned => {
                let agent = assignee.ok_or(ResourceError::MissingAssignee { task: self.id })?;
                self.assignee = Some(agent);
            }
            TaskLifecycle::InProgress => {}
            TaskLifecycle::Evicted | TaskLifecycle::Pending => self.assignee = None,
            TaskLifecycle::Completed => {
                self.assignee = None;
                self.progress = 1.0;
            }
        }
        self.state = edge.to;
        Ok(())
    }
}

/// Immutable view of every registered resource at one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSnapshot {
    pub tick: Tick,
    /// Non-terminal agents (Joining, Active, Suspect).
    pub agents: Vec<AgentObject>,
    /// Non-completed tasks.
    pub tasks: Vec<TaskObject>,
    /// Dead or Departed agents.
    pub archived_agents: Vec<AgentObject>,
    /// Completed tasks.
    pub archived_tasks: Vec<TaskObject>,
}

impl AttributeSnapshot {
    pub fn empty(tick: Tick) -> Self {
        Self {
            tick,
            agents: Vec::new(),
            tasks: Vec::new(),
            archived_agents: Vec::new(),
            archived_tasks: Vec::new(),
        }
    }

    /// Agents that may receive tasks.
    pub fn schedulable_agents(&self) -> impl Iterator<Item = &AgentObject> {
        self.agents.iter().filter(|a| a.state.is_live())
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentObject> {
        self.agents
            .iter()
            .chain(self.archived_agents.iter())
            .find(|a| a.id == id)
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskObject> {
        self.tasks
            .iter()
            .chain(self.archived_tasks.iter())
            .find(|t| t.id == id)
    }
}

/// Owner of all resource objects.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    agents: BTreeMap<AgentId, AgentObject>,
    tasks: BTreeMap<TaskId, TaskObject>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_agent(&mut self, agent: AgentObject) -> Result<(), ResourceError> {
        if self.agents.contains_key(&agent.id) {
            return Err(ResourceError::Duplicate(agent.resource_id()));
        }
        self.agents.insert(agent.id, agent);
        Ok(())
    }

    pub fn register_task(&mut self, mut task: TaskObject) -> Result<(), ResourceError> {
        if self.tasks.contains_key(&task.id) {
            return Err(ResourceError::Duplicate(task.resource_id()));
        }
        task.state = TaskLifecycle::Pending;
        task.assignee = None;
        self.tasks.insert(task.id, task);
        Ok(())
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentObject> {
        self.agents.get(&id)
    }

    pub fn agent_mut(&mut self, id: AgentId) -> Option<&mut AgentObject> {
        self.agents.get_mut(&id)
    }

    pub fn task(&self, id: TaskId) -> Option<&TaskObject> {
        self.tasks.get(&id)
    }

    /// Mutable access for attribute updates. Lifecycle fields must only be
    /// changed through [`Registry::transition_task`].
    pub(crate) fn task_mut(&mut self, id: TaskId) -> Option<&mut TaskObject> {
        self.tasks.get_mut(&id)
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentObject> {
        self.agents.values()
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskObject> {
        self.tasks.values()
    }

    pub fn transition_agent(&mut self, id: AgentId, to: AgentLifecycle) -> Result<(), ResourceError> {
        let agent = self
            .agents
            .get_mut(&id)
            .ok_or(ResourceError::Unknown(ResourceId::agent(id)))?;
        agent.transition(LifecycleEdge::new(agent.state, to))
    }

    /// Move a task along one lifecycle edge, keeping agent workloads in sync.
    pub fn transition_task(
        &mut self,
        id: TaskId,
        to: TaskLifecycle,
        assignee: Option<AgentId>,
    ) -> Result<(), ResourceError> {
        let task = self
            .tasks
            .get(&id)
            .ok_or(ResourceError::Unknown(ResourceId::task(id)))?;
        let from = task.state;
        let previous_owner = task.assignee.filter(|_| from.is_held());
        if to == TaskLifecycle::Assigned {
            let agent_id = assignee.ok_or(ResourceError::MissingAssignee { task: id })?;
            match self.agents.get(&agent_id) {
                None => return Err(ResourceError::Unknown(ResourceId::agent(agent_id))),
                Some(a) if !a.state.is_live() => {
                    return Err(ResourceError::AssigneeNotLive { task: id, agent: agent_id })
                }
                Some(_) => {}
            }
        }

        let task = self.tasks.get_mut(&id).expect("checked above");
        task.transition(LifecycleEdge::new(from, to), assignee)?;
        let new_owner = task.assignee.filter(|_| task.state.is_held());

        if previous_owner != new_owner {
            if let Some(prev) = previous_owner {
                if let Some(a) = self.agents.get_mut(&prev) {
                    a.workload = a.workload.saturating_sub(1);
                }
            }
            if let Some(next) = new_owner {
                if let Some(a) = self.agents.get_mut(&next) {
                    a.workload += 1;
                }
            }
        }
        Ok(())
    }

    /// Incomplete tasks currently held by `agent`, in id order.
    pub fn tasks_held_by(&self, agent: AgentId) -> Vec<TaskId> {
        self.tasks
            .values()
            .filter(|t| t.state.is_held() && t.assignee == Some(agent))
            .map(|t| t.id)
            .collect()
    }

    pub fn snapshot(&self, tick: Tick) -> Result<AttributeSnapshot, ResourceError> {
        let mut snap = AttributeSnapshot::empty(tick);
        for task in self.tasks.values() {
            if let Some(agent) = task.assignee {
                if !self.agents.contains_key(&agent) {
                    return Err(ResourceError::DanglingReference { task: task.id, agent });
                }
            }
            if task.state == TaskLifecycle::Completed {
                snap.archived_tasks.push(task.clone());
            } else {
                snap.tasks.push(task.clone());
            }
        }
        for agent in self.agents.values() {
            if agent.state.is_terminal() {
                snap.archived_agents.push(agent.clone());
            } else {
                snap.agents.push(agent.clone());
            }
        }
        Ok(snap)
    }

    /// Verify every agent/task invariant. Used after each mutation in tests.
    pub fn check_invariants(&self, hand_capacity: usize) -> Result<(), ResourceError> {
        let mut held: BTreeMap<AgentId, u32> = BTreeMap::new();
        for task in self.tasks.values() {
            let fail = |msg: String| Err(ResourceError::Invariant(format!("{}: {msg}", task.id)));
            match task.state {
                TaskLifecycle::Assigned | TaskLifecycle::InProgress => {
                    let Some(agent_id) = task.assignee else {
                        return fail("held task without assignee".into());
                    };
                    match self.agents.get(&agent_id) {
                        Some(a) if a.state.is_live() => {}
                        Some(a) => return fail(format!("assignee {agent_id} is {:?}", a.state)),
                        None => return fail(format!("assignee {agent_id} unregistered")),
                    }
                    *held.entry(agent_id).or_default() += 1;
                }
                TaskLifecycle::Pending | TaskLifecycle::Completed | TaskLifecycle::Evicted => {
                    if task.assignee.is_some() {
                        return fail(format!("{:?} task keeps an assignee", task.state));
                    }
                }
            }
            let complete = task.state == TaskLifecycle::Completed;
            if complete != (task.progress >= 1.0) {
                return fail(format!("progress {} in state {:?}", task.progress, task.state));
            }
            if !(0.0..=1.0).contains(&task.progress) {
                return fail(format!("progress {} out of range", task.progress));
            }
        }
        for agent in self.agents.values() {
            let expected = held.get(&agent.id).copied().unwrap_or(0);
            if agent.workload != expected {
                return Err(ResourceError::Invariant(format!(
                    "{}: workload {} but holds {expected} tasks",
                    agent.id, agent.workload
                )));
            }
            if agent.carrying.len() > hand_capacity {
                return Err(ResourceError::Invariant(format!(
                    "{}: carrying {} objects",
                    agent.id,
                    agent.carrying.len()
                )));
            }
        }
        Ok(())
    }
}
