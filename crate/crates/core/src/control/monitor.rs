//! Heartbeat bookkeeping and failure/stall detection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::control::{ControlError, TriggerEvent, TriggerKind};
use crate::ids::{AgentId, TaskId, Tick};
use crate::resource::{AgentLifecycle, Registry, TaskLifecycle};

fn one() -> Tick {
    1
}

fn three() -> Tick {
    3
}

fn six() -> Tick {
    6
}

fn fifteen() -> Tick {
    15
}

/// Liveness thresholds, all in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonitorConfig {
    #[serde(default = "one")]
    pub heartbeat_period: Tick,
    #[serde(default = "three")]
    pub suspect_after: Tick,
    #[serde(default = "six")]
    pub dead_after: Tick,
    #[serde(default = "fifteen")]
    pub stall_after: Tick,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { heartbeat_period: 1, suspect_after: 3, dead_after: 6, stall_after: 15 }
    }
}

impl MonitorConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ordered = 0 < self.heartbeat_period
            && self.heartbeat_period <= self.suspect_after
            && self.suspect_after < self.dead_after;
        if !ordered {
            return Err(ControlError::InvalidConfig(
                "need 0 < heartbeat_period <= suspect_after < dead_after".into(),
            ));
        }
        if self.stall_after == 0 {
            return Err(ControlError::InvalidConfig("stall_after must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Monitor {
    pub config: MonitorConfig,
    /// `(task, last_progress_tick)` pairs already reported as stalled.
    stalls_reported: BTreeSet<(TaskId, Tick)>,
}

impl Monitor {
    pub fn new(config: MonitorConfig) -> Self {
        Self { config, stalls_reported: BTreeSet::new() }
    }

    /// Record a heartbeat received at `tick`. A suspect agent is rescued
    /// silently; heartbeats from dead agents are ignored.
    pub fn record_heartbeat(
        &self,
        registry: &mut Registry,
        agent_id: AgentId,
        tick: Tick,
    ) -> Result<(), ControlError> {
        let agent = registry.agent_mut(agent_id).ok_or(ControlError::UnknownAgent(agent_id))?;
        match agent.state {
            AgentLifecycle::Departed => Err(ControlError::UnknownAgent(agent_id)),
            AgentLifecycle::Dead => Ok(()),
            _ => {
                agent.last_heartbeat = agent.last_heartbeat.max(tick);
                if agent.state == AgentLifecycle::Suspect {
                    registry.transition_agent(agent_id, AgentLifecycle::Active)?;
                }
                Ok(())
            }
        }
    }

    /// Sweep all agents and in-progress tasks at `now`. Suspicion is
    /// internal; only deaths and stalls are reported. Calling twice at the
    /// same tick reports each event once.
    pub fn detect_failures(&mut self, registry: &mut Registry, now: Tick) -> Vec<TriggerEvent> {
        let mut events = Vec::new();
        let agent_ids: Vec<AgentId> = registry.agents().map(|a| a.id).collect();
        for id in agent_ids {
            let agent = registry.agent(id).expect("listed");
            let silent = now.saturating_sub(agent.last_heartbeat);
            let state = agent.state;
            if silent >= self.config.dead_after && state.is_live() {
                if state == AgentLifecycle::Active {
                    registry
                        .transition_agent(id, AgentLifecycle::Suspect)
                        .expect("Active -> Suspect is legal");
                }
                registry
                    .transition_agent(id, AgentLifecycle::Dead)
                    .expect("Suspect -> Dead is legal");
                events.push(TriggerEvent::agent(now, TriggerKind::AgentDead, id));
            } else if silent >= self.config.suspect_after && state == AgentLifecycle::Active {
                registry
                    .transition_agent(id, AgentLifecycle::Suspect)
                    .expect("Active -> Suspect is legal");
            }
        }

        for task in registry.tasks() {
            if task.state != TaskLifecycle::InProgress {
                continue;
            }
            let owner_active = task
                .assignee
                .and_then(|a| registry.agent(a))
                .is_some_and(|a| a.state == AgentLifecycle::Active);
            if !owner_active {
                continue;
            }
            if now.saturating_sub(task.last_progress_tick) >= self.config.stall_after
                && self.stalls_reported.insert((task.id, task.last_progress_tick))
            {
                events.push(TriggerEvent::task(now, TriggerKind::TaskStalled, task.id));
            }
        }
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{RoomId, SurfaceId};
    use crate::resource::{AgentObject, CapabilitySet, TaskObject};
    use crate::sim::goal::GoalPredicate;

    fn registry(last_heartbeat: Tick, state: AgentLifecycle) -> Registry {
        let mut reg = Registry::new();
        let mut agent = AgentObject::new(AgentId(0), CapabilitySet::new(), RoomId(0), 0).with_state(state);
        agent.last_heartbeat = last_heartbeat;
        reg.register_agent(agent).unwrap();
        reg
    }

    #[test]
    fn heartbeat_updates_active_agent() {
        let mut reg = registry(0, AgentLifecycle::Active);
        Monitor::default().record_heartbeat(&mut reg, AgentId(0), 5).unwrap();
        let a = reg.agent(AgentId(0)).unwrap();
        assert_eq!((a.last_heartbeat, a.state), (5, AgentLifecycle::Active));
    }

    #[test]
    fn heartbeat_rescues_suspect() {
        let mut reg = registry(0, AgentLifecycle::Suspect);
        Monitor::default().record_heartbeat(&mut reg, AgentId(0), 4).unwrap();
        let a = reg.agent(AgentId(0)).unwrap();
        assert_eq!((a.last_heartbeat, a.state), (4, AgentLifecycle::Active));
    }

    #[test]
    fn heartbeat_never_moves_backwards() {
        let mut reg = registry(9, AgentLifecycle::Active);
        Monitor::default().record_heartbeat(&mut reg, AgentId(0), 4).unwrap();
        assert_eq!(reg.agent(AgentId(0)).unwrap().last_heartbeat, 9);
    }

    #[test]
    fn heartbeat_from_stranger() {
        let mut reg = registry(0, AgentLifecycle::Active);
        assert_eq!(
            Monitor::default().record_heartbeat(&mut reg, AgentId(7), 1),
            Err(ControlError::UnknownAgent(AgentId(7)))
        );
    }

    #[test]
    fn zero_elapsed_is_quiet() {
        let mut reg = registry(4, AgentLifecycle::Active);
        assert!(Monitor::default().detect_failures(&mut reg, 4).is_empty());
        assert_eq!(reg.agent(AgentId(0)).unwrap().state, AgentLifecycle::Active);
    }

    #[test]
    fn suspicion_is_silent() {
        let mut reg = registry(0, AgentLifecycle::Active);
        assert!(Monitor::default().detect_failures(&mut reg, 4).is_empty());
        assert_eq!(reg.agent(AgentId(0)).unwrap().state, AgentLifecycle::Suspect);
    }

    #[test]
    fn death_emitted_once() {
        let mut reg = registry(0, AgentLifecycle::Active);
        let mut monitor = Monitor::default();
        let events = monitor.detect_failures(&mut reg, 6);
        assert_eq!(events, vec![TriggerEvent::agent(6, TriggerKind::AgentDead, AgentId(0))]);
        assert_eq!(reg.agent(AgentId(0)).unwrap().state, AgentLifecycle::Dead);
        assert!(monitor.detect_failures(&mut reg, 6).is_empty());
    }

    #[test]
    fn stall_emitted_once_per_progress_mark() {
        let mut reg = registry(20, AgentLifecycle::Active);
        reg.register_task(TaskObject::new(TaskId(0), GoalPredicate::on_surface("x", SurfaceId(0), 1)))
            .unwrap();
        reg.transition_task(TaskId(0), TaskLifecycle::Assigned, Some(AgentId(0))).unwrap();
        reg.transition_task(TaskId(0), TaskLifecycle::InProgress, None).unwrap();
        let mut monitor = Monitor::default();
        assert!(monitor.detect_failures(&mut reg, 14).is_empty());
        let events = monitor.detect_failures(&mut reg, 20);
        assert_eq!(events, vec![TriggerEvent::task(20, TriggerKind::TaskStalled, TaskId(0))]);
        assert!(monitor.detect_failures(&mut reg, 20).is_empty());
    }

    #[test]
    fn config_ordering_enforced() {
        let bad = MonitorConfig { suspect_after: 6, dead_after: 6, ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(MonitorConfig::default().validate().is_ok());
    }
}
