use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bus::{Message, Payload};
use crate::control::critic::{critic, CriticRule};
use crate::control::monitor::Monitor;
use crate::control::planner::{GreedyPlanner, PlanContext, Planner};
use crate::control::{
    Assignment, ControlConfig, ControlError, Directive, TaskMap, TriggerEvent, TriggerKind,
};
use crate::ids::{AgentId, RoomId, TaskId, Tick};
use crate::resource::{
    AgentLifecycle, AgentObject, CapabilitySet, Registry, ResourceId, TaskLifecycle, TaskObject,
    DEFAULT_HAND_CAPACITY,
};
use crate::sim::house::House;
use crate::worker::StatusReport;
use crate::Score;

/// When the control plane recomputes the assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum AllocatorKind {
    /// On every trigger event.
    #[default]
    #[serde(rename = "drama")]
    Drama,
    /// Once, at episode start.
    #[serde(rename = "static")]
    Static,
    /// Only when a task completes.
    #[serde(rename = "completion")]
    CompletionRealloc,
}

impl AllocatorKind {
    pub const ALL: [AllocatorKind; 3] = [Self::Drama, Self::Static, Self::CompletionRealloc];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Drama => "drama",
            Self::Static => "static",
            Self::CompletionRealloc => "completion",
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AllocatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drama" => Ok(Self::Drama),
            "static" => Ok(Self::Static),
            "completion" => Ok(Self::CompletionRealloc),
            other => Err(format!("unknown allocator {other:?} (expected drama|static|completion)")),
        }
    }
}

/// One line of the scheduling trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: u64,
    pub tick: Tick,
    /// Trigger kind, or `"initial"` for the first epoch.
    pub trigger: String,
    pub map: TaskMap,
    pub violations_repaired: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degraded: bool,
}

/// Single-owner control loop: registry, monitor and scheduler.
pub struct ControlPlane {
    config: ControlConfig,
    allocator: AllocatorKind,
    registry: Registry,
    monitor: Monitor,
    planner: Box<dyn Planner<Score> + Send>,
    house: Arc<House>,
    epoch: u64,
    intake: BTreeMap<TaskId, TaskObject>,
    epochs: Vec<EpochRecord>,
    events: Vec<TriggerEvent>,
    outbox: Vec<Directive>,
    hand_capacity: usize,
}

impl fmt::Debug for ControlPlane {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlPlane")
            .field("allocator", &self.allocator)
            .field("epoch", &self.epoch)
            .field("planner", &self.planner.name())
            .field("registry", &self.registry)
            .finish_non_exhaustive()
    }
}

impl ControlPlane {
    pub fn new(config: ControlConfig, allocator: AllocatorKind, house: Arc<House>) -> Result<Self, ControlError> {
        config.validate()?;
        Ok(Self {
            monitor: Monitor::new(config.monitor),
            config,
            allocator,
            registry: Registry::new(),
            planner: Box::new(GreedyPlanner),
            house,
            epoch: 0,
            intake: BTreeMap::new(),
            epochs: Vec::new(),
            events: Vec::new(),
            outbox: Vec::new(),
            hand_capacity: DEFAULT_HAND_CAPACITY,
        })
    }

    /// Swap in another planner (for example a model-backed one).
    pub fn with_planner(mut self, planner: Box<dyn Planner<Score> + Send>) -> Self {
        self.planner = planner;
        self
    }

    pub fn config(&self) -> &ControlConfig {
        &self.config
    }

    pub fn allocator(&self) -> AllocatorKind {
        self.allocator
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    /// Direct registry access for setting up fixtures and tools. Lifecycle
    /// changes still go through the registry's checked transitions.
    pub fn registry_mut(&mut self) -> &mut Registry {
        &mut self.registry
    }

    pub fn house(&self) -> &House {
        &self.house
    }

    /// Number of scheduling epochs so far.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn epochs(&self) -> &[EpochRecord] {
        &self.epochs
    }

    /// Every trigger event handled, in order.
    pub fn events(&self) -> &[TriggerEvent] {
        &self.events
    }

    pub fn take_directives(&mut self) -> Vec<Directive> {
        std::mem::take(&mut self.outbox)
    }

    /// Register an agent. Agents present at episode start are admitted
    /// `active`; late arrivals wait in Joining until their AgentJoined event.
    pub fn admit_agent(
        &mut self,
        id: AgentId,
        capabilities: CapabilitySet,
        location: RoomId,
        tick: Tick,
        active: bool,
    ) -> Result<(), ControlError> {
        self.registry
            .register_agent(AgentObject::new(id, capabilities, location, tick))?;
        if active {
            self.registry.transition_agent(id, AgentLifecycle::Active)?;
        }
        Ok(())
    }

    /// Register a task known at episode start.
    pub fn add_task(&mut self, task: TaskObject) -> Result<(), ControlError> {
        self.registry.register_task(task)?;
        Ok(())
    }

    /// Stage a task that will enter the registry with its TaskArrived event.
    pub fn announce_task(&mut self, task: TaskObject) {
        self.intake.insert(task.id, task);
    }

    /// The episode's first scheduling epoch.
    pub fn initial_schedule(&mut self, tick: Tick) -> Result<Assignment, ControlError> {
        self.schedule(tick, None)
    }

    /// Process one inbound message received at `now`.
    pub fn receive(&mut self, message: &Message, now: Tick) -> Result<(), ControlError> {
        match &message.payload {
            Payload::Heartbeat => {
                if let crate::bus::Endpoint::Agent(agent) = message.sender {
                    self.monitor.record_heartbeat(&mut self.registry, agent, now)?;
                }
                Ok(())
            }
            Payload::StatusReport(report) => self.apply_report(report, now),
            Payload::TriggerEvent(event) => self.handle_event(*event).map(|_| ()),
            Payload::Directive(_) | Payload::IntentionClaim { .. } => Ok(()),
        }
    }

    /// Failure and stall sweep at `now`; handles every resulting event.
    pub fn sweep(&mut self, now: Tick) -> Result<Vec<TriggerEvent>, ControlError> {
        let events = self.monitor.detect_failures(&mut self.registry, now);
        for &event in &events {
            self.handle_event(event)?;
        }
        Ok(events)
    }

    fn apply_report(&mut self, report: &StatusReport, now: Tick) -> Result<(), ControlError> {
        let Some(agent) = self.registry.agent_mut(report.agent) else {
            return Err(ControlError::UnknownAgent(report.agent));
        };
        if agent.state.is_terminal() {
            return Ok(());
        }
        agent.location = report.location;
        agent.carrying = report.carrying.clone();

        let Some(task_id) = report.task else { return Ok(()) };
        let Some(task) = self.registry.task(task_id) else { return Ok(()) };
        if task.assignee != Some(report.agent) {
            return Ok(());
        }
        if task.state == TaskLifecycle::Assigned {
            self.registry.transition_task(task_id, TaskLifecycle::InProgress, None)?;
            self.registry.task_mut(task_id).expect("exists").last_progress_tick = now;
        }
        let task = self.registry.task(task_id).expect("exists");
        if task.state != TaskLifecycle::InProgress {
            return Ok(());
        }
        if task.goal_met {
            self.handle_event(TriggerEvent::task(now, TriggerKind::TaskCompleted, task_id))?;
            return Ok(());
        }
        if let Some(progress) = report.progress {
            let task = self.registry.task_mut(task_id).expect("exists");
            // Full completion is only taken from the environment.
            if progress < 1.0 && progress > task.progress {
                task.progress = progress;
                task.last_progress_tick = now;
            }
        }
        Ok(())
    }

    /// React to one trigger event according to the allocator's policy.
    pub fn handle_event(&mut self, event: TriggerEvent) -> Result<Option<Assignment>, ControlError> {
        let subject_missing = || ControlError::UnknownSubject(event.subject);
        let drama = self.allocator == AllocatorKind::Drama;
        let reschedule = match event.kind {
            TriggerKind::AgentDead | TriggerKind::AgentDeparted => {
                let id = event.subject.as_agent().ok_or_else(subject_missing)?;
                let state = self.registry.agent(id).ok_or_else(subject_missing)?.state;
                let target = if event.kind == TriggerKind::AgentDead {
                    AgentLifecycle::Dead
                } else {
                    AgentLifecycle::Departed
                };
                if state != target {
                    if state == AgentLifecycle::Active && target == AgentLifecycle::Dead {
                        self.registry.transition_agent(id, AgentLifecycle::Suspect)?;
                    }
                    self.registry.transition_agent(id, target)?;
                }
                for task in self.registry.tasks_held_by(id) {
                    self.registry.transition_task(task, TaskLifecycle::Evicted, None)?;
                }
                drama
            }
            TriggerKind::AgentJoined => {
                let id = event.subject.as_agent().ok_or_else(subject_missing)?;
                let state = self.registry.agent(id).ok_or_else(subject_missing)?.state;
                if state == AgentLifecycle::Joining {
                    self.registry.transition_agent(id, AgentLifecycle::Active)?;
                }
                drama
            }
            TriggerKind::TaskArrived => {
                let id = event.subject.as_task().ok_or_else(subject_missing)?;
                if self.registry.task(id).is_none() {
                    let task = self.intake.remove(&id).ok_or_else(subject_missing)?;
                    self.registry.register_task(task)?;
                }
                drama
            }
            TriggerKind::TaskStalled => {
                let id = event.subject.as_task().ok_or_else(subject_missing)?;
                let task = self.registry.task(id).ok_or_else(subject_missing)?;
                let (state, holder) = (task.state, task.assignee);
                if drama && state == TaskLifecycle::InProgress {
                    self.registry.transition_task(id, TaskLifecycle::Evicted, None)?;
                    // The holder is alive; tell it to drop the task.
                    if let Some(agent) = holder {
                        self.outbox.push(Directive::Evict { task: id, agent });
                    }
                    true
                } else {
                    false
                }
            }
            TriggerKind::TaskCompleted => {
                let id = event.subject.as_task().ok_or_else(subject_missing)?;
                let state = self.registry.task(id).ok_or_else(subject_missing)?.state;
                match state {
                    TaskLifecycle::Completed => {}
                    TaskLifecycle::Assigned => {
                        self.registry.transition_task(id, TaskLifecycle::InProgress, None)?;
                        self.registry.transition_task(id, TaskLifecycle::Completed, None)?;
                    }
                    TaskLifecycle::InProgress => {
                        self.registry.transition_task(id, TaskLifecycle::Completed, None)?;
                    }
                    TaskLifecycle::Pending | TaskLifecycle::Evicted => {
                        self.registry.task_mut(id).expect("exists").goal_met = true;
                    }
                }
                match self.allocator {
                    AllocatorKind::Drama => self.registry.tasks().any(|t| t.state.is_unowned()),
                    AllocatorKind::Static => false,
                    AllocatorKind::CompletionRealloc => true,
                }
            }
        };
        self.events.push(event);
        if reschedule {
            Ok(Some(self.schedule(event.tick, Some(event.kind))?))
        } else {
            Ok(None)
        }
    }

    /// Planner/critic loop followed by applying the result to the registry
    /// and queueing Assign/Evict directives.
    pub fn schedule(&mut self, tick: Tick, trigger: Option<TriggerKind>) -> Result<Assignment, ControlError> {
        let snapshot = self.registry.snapshot(tick)?;
        let max_load = self.config.max_load;
        let weights = self.config.weights();
        let mut banned: BTreeSet<(TaskId, AgentId)> = BTreeSet::new();
        let mut pinned = TaskMap::new();
        let mut candidate = TaskMap::new();
        let mut accepted = false;
        let mut repaired = 0;

        for _ in 0..self.config.max_rounds {
            let ctx = PlanContext {
                snapshot: &snapshot,
                house: &self.house,
                weights,
                max_load,
                pinned: &pinned,
                banned: &banned,
            };
            candidate = self.planner.propose(&ctx);
            let verdict = critic(&candidate, &snapshot, max_load);
            if verdict.accepted {
                accepted = true;
                break;
            }
            repaired += verdict.violations.len();
            let offending: BTreeSet<TaskId> = verdict.violations.iter().map(|v| v.task).collect();
            for v in &verdict.violations {
                if let Some(agent) = v.agent {
                    banned.insert((v.task, agent));
                }
            }
            pinned = candidate
                .iter()
                .filter(|(t, _)| !offending.contains(t))
                .map(|(&t, &a)| (t, a))
                .collect();
        }

        if !accepted {
            let verdict = critic(&candidate, &snapshot, max_load);
            for v in &verdict.violations {
                let strip = matches!(
                    v.rule,
                    CriticRule::SchedulableTask
                        | CriticRule::LiveAgent
                        | CriticRule::MaxLoad
                        | CriticRule::Capability
                );
                if strip {
                    candidate.remove(&v.task);
                }
            }
            log::warn!(
                "epoch {}: critic still rejecting after {} rounds; dropped infeasible mappings",
                self.epoch + 1,
                self.config.max_rounds
            );
        }

        self.epoch += 1;
        self.apply(&candidate, tick)?;
        self.epochs.push(EpochRecord {
            epoch: self.epoch,
            tick,
            trigger: trigger.map_or_else(|| "initial".to_owned(), |k| format!("{k:?}")),
            map: candidate.clone(),
            violations_repaired: repaired,
            degraded: !accepted,
        });
        Ok(Assignment { epoch: self.epoch, map: candidate })
    }

    fn apply(&mut self, map: &TaskMap, tick: Tick) -> Result<(), ControlError> {
        let ids: Vec<TaskId> = self
            .registry
            .tasks()
            .filter(|t| t.state != TaskLifecycle::Completed)
            .map(|t| t.id)
            .collect();
        for id in ids {
            let task = self.registry.task(id).expect("listed");
            let (state, holder) = (task.state, task.assignee);
            let target = map.get(&id).copied();
            if state.is_held() && holder != target {
                self.registry.transition_task(id, TaskLifecycle::Evicted, None)?;
                if let Some(agent) = holder {
                    self.outbox.push(Directive::Evict { task: id, agent });
                }
            }
            let task = self.registry.task(id).expect("listed");
            if let (true, Some(agent)) = (task.state.is_unowned(), target) {
                self.registry.transition_task(id, TaskLifecycle::Assigned, Some(agent))?;
                let task = self.registry.task_mut(id).expect("listed");
                task.last_progress_tick = tick;
                self.outbox.push(Directive::Assign {
                    task: id,
                    agent,
                    goal: task.goal.clone(),
                    priority: task.priority,
                    satisfied_units: task.satisfied_units(),
                });
            }
        }
        Ok(())
    }

    /// Registry invariants, including "no held task on a dead agent".
    pub fn check_invariants(&self) -> Result<(), ControlError> {
        self.registry.check_invariants(self.hand_capacity)?;
        Ok(())
    }

    /// Subjects known to the control plane, for validating external events.
    pub fn knows(&self, subject: ResourceId) -> bool {
        match (subject.as_agent(), subject.as_task()) {
            (Some(a), _) => self.registry.agent(a).is_some(),
            (_, Some(t)) => self.registry.task(t).is_some() || self.intake.contains_key(&t),
            _ => false,
        }
    }
}
