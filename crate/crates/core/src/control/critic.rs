//! Rule checker for candidate assignments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::control::planner::visiting_order;
use crate::control::TaskMap;
use crate::ids::{AgentId, TaskId};
use crate::resource::{AttributeSnapshot, ResourceId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticRule {
    /// Mapped task must exist and not be completed.
    SchedulableTask,
    /// Rule 1: no mapping to a dead, departed or unknown agent.
    LiveAgent,
    /// Rule 2: no agent above `max_load`.
    MaxLoad,
    /// Rule 3: the agent has every required capability.
    Capability,
    /// Rule 4: every task with an under-loaded feasible agent is mapped.
    Coverage,
}

impl CriticRule {
    pub fn name(self) -> &'static str {
        match self {
            Self::SchedulableTask => "schedulable_task",
            Self::LiveAgent => "live_agent",
            Self::MaxLoad => "max_load",
            Self::Capability => "capability",
            Self::Coverage => "coverage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: CriticRule,
    pub offender: ResourceId,
    pub task: TaskId,
    pub agent: Option<AgentId>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticVerdict {
    pub accepted: bool,
    pub violations: Vec<Violation>,
}

impl CriticVerdict {
    fn from_violations(violations: Vec<Violation>) -> Self {
        Self { accepted: violations.is_empty(), violations }
    }

    pub fn has_rule(&self, rule: CriticRule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

/// Check `candidate` against the snapshot. Rules run in order and every
/// violation is reported.
pub fn critic(candidate: &TaskMap, snapshot: &AttributeSnapshot, max_load: u32) -> CriticVerdict {
    let mut violations = Vec::new();

    for (&task, &agent) in candidate {
        if !snapshot.tasks.iter().any(|t| t.id == task) {
            violations.push(Violation {
                rule: CriticRule::SchedulableTask,
                offender: ResourceId::task(task),
                task,
                agent: Some(agent),
                message: format!("{task} is unknown or already completed"),
            });
        }
    }

    for (&task, &agent) in candidate {
        let live = snapshot.agent(agent).is_some_and(|a| a.state.is_live());
        if !live {
            violations.push(Violation {
                rule: CriticRule::LiveAgent,
                offender: ResourceId::agent(agent),
                task,
                agent: Some(agent),
                message: format!("{task} mapped to {agent}, which is not live"),
            });
        }
    }

    let mut per_agent: BTreeMap<AgentId, Vec<TaskId>> = BTreeMap::new();
    for task in visiting_order(snapshot) {
        if let Some(&agent) = candidate.get(&task.id) {
            per_agent.entry(agent).or_default().push(task.id);
        }
    }
    for (&agent, tasks) in &per_agent {
        for &task in tasks.iter().skip(max_load as usize) {
            violations.push(Violation {
                rule: CriticRule::MaxLoad,
                offender: ResourceId::agent(agent),
                task,
                agent: Some(agent),
                message: format!("{agent} holds {} tasks, limit {max_load}", tasks.len()),
            });
        }
    }

    for (&task_id, &agent_id) in candidate {
        let (Some(task), Some(agent)) = (snapshot.task(task_id), snapshot.agent(agent_id)) else {
            continue;
        };
        if !agent.satisfies(&task.required_capabilities) {
            violations.push(Violation {
                rule: CriticRule::Capability,
                offender: ResourceId::agent(agent_id),
                task: task_id,
                agent: Some(agent_id),
                message: format!("{agent_id} lacks capabilities for {task_id}"),
            });
        }
    }

    for task in visiting_order(snapshot) {
        if candidate.contains_key(&task.id) {
            continue;
        }
        let coverable = snapshot.schedulable_agents().any(|a| {
            let load = per_agent.get(&a.id).map_or(0, Vec::len) as u32;
            load < max_load && a.satisfies(&task.required_capabilities)
        });
        if coverable {
            violations.push(Violation {
                rule: CriticRule::Coverage,
                offender: ResourceId::task(task.id),
                task: task.id,
                agent: None,
                message: format!("{} left unmapped while a feasible agent has capacity", task.id),
            });
        }
    }

    CriticVerdict::from_violations(violations)
}
