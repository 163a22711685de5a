//! Agent runtime: perception, memory, decomposition, action choice and
//! status reporting.

pub mod memory;
pub mod policy;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus::{Endpoint, Message, Payload};
use crate::control::Directive;
use crate::ids::{AgentId, ObjectId, RoomId, TaskId, Tick};
use crate::resource::DEFAULT_HAND_CAPACITY;
use crate::sim::goal::GoalPredicate;
use crate::sim::house::House;
use crate::sim::types::{ActionOutcome, Observation, Place, PrimitiveAction};

pub use memory::{Focus, LocationIndex, MemoryItem, MemoryStore, RecordKind, SummaryRecord};
pub use policy::{Destination, RulePolicy, Subgoal, SubtaskQueue, WorkerPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorkerError {
    #[error("{agent} refuses {task}: already holding {load} of at most {max_load} tasks")]
    RefuseOverload { agent: AgentId, task: TaskId, load: usize, max_load: u32 },
    #[error("directive for {target} delivered to {agent}")]
    WrongRecipient { agent: AgentId, target: AgentId },
}

/// Periodic snapshot sent to the control plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub agent: AgentId,
    pub tick: Tick,
    pub location: RoomId,
    pub carrying: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskId>,
    /// Satisfied fraction of `task`; absent without a task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub progress: Option<f64>,
    pub intentions: Vec<ObjectId>,
}

/// A task in the agent's work set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkItem {
    pub task: TaskId,
    pub goal: GoalPredicate,
    pub priority: i32,
    /// Units the agent believes are on the goal surface.
    pub known_satisfied: u32,
}

impl WorkItem {
    pub fn remaining(&self) -> u32 {
        self.goal.count.saturating_sub(self.known_satisfied)
    }

    pub fn is_done(&self) -> bool {
        self.remaining() == 0
    }

    pub fn progress(&self) -> f64 {
        f64::from(self.known_satisfied.min(self.goal.count)) / f64::from(self.goal.count.max(1))
    }
}

/// Body and bookkeeping of one worker.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: AgentId,
    pub room: RoomId,
    pub carrying: Vec<ObjectId>,
    pub work: BTreeMap<TaskId, WorkItem>,
    pub max_load: u32,
    pub hand_capacity: usize,
    pub intentions: Vec<ObjectId>,
    /// Rooms walked through in the current search sweep.
    pub visited: BTreeSet<RoomId>,
    pub tick: Tick,
    house: Arc<House>,
    /// Highest satisfied count seen per task, kept across evictions.
    satisfied_seen: BTreeMap<TaskId, u32>,
}

impl AgentState {
    pub fn new(id: AgentId, house: Arc<House>, room: RoomId, max_load: u32) -> Self {
        Self {
            id,
            room,
            carrying: Vec::new(),
            work: BTreeMap::new(),
            max_load,
            hand_capacity: DEFAULT_HAND_CAPACITY,
            intentions: Vec::new(),
            visited: BTreeSet::new(),
            tick: 0,
            house,
            satisfied_seen: BTreeMap::new(),
        }
    }

    pub fn house(&self) -> &House {
        &self.house
    }

    pub fn house_arc(&self) -> Arc<House> {
        Arc::clone(&self.house)
    }

    /// Task currently being worked: highest priority, then lowest id, among
    /// unfinished items.
    pub fn focus(&self) -> Option<&WorkItem> {
        self.work
            .values()
            .filter(|w| !w.is_done())
            .min_by_key(|w| (std::cmp::Reverse(w.priority), w.task))
    }

    fn memory_focus(&self) -> Focus {
        Focus {
            tasks: self.work.keys().copied().collect(),
            primary: self.focus().map(|w| w.task),
            kinds: self.work.values().map(|w| w.goal.object_kind.clone()).collect(),
        }
    }
}

/// Add an assigned task to the work set. Progress already made by whoever
/// held it before is kept, so only the missing units get queued.
pub fn accept_takeover(
    agent: &mut AgentState,
    memory: &mut MemoryStore,
    directive: &Directive,
) -> Result<(), WorkerError> {
    let Directive::Assign { task, agent: target, goal, priority, satisfied_units } = directive else {
        return Ok(());
    };
    if *target != agent.id {
        return Err(WorkerError::WrongRecipient { agent: agent.id, target: *target });
    }
    if !agent.work.contains_key(task) && agent.work.len() >= agent.max_load as usize {
        return Err(WorkerError::RefuseOverload {
            agent: agent.id,
            task: *task,
            load: agent.work.len(),
            max_load: agent.max_load,
        });
    }
    let seen = agent.satisfied_seen.get(task).copied().unwrap_or(0);
    let known = (*satisfied_units).max(seen).min(goal.count);
    agent.satisfied_seen.insert(*task, known);
    agent.work.insert(
        *task,
        WorkItem { task: *task, goal: goal.clone(), priority: *priority, known_satisfied: known },
    );
    memory.record_takeover(agent.tick, directive.clone());
    Ok(())
}

/// Status snapshot for the control plane.
pub fn make_report(agent: &AgentState, tick: Tick) -> StatusReport {
    let focus = agent.focus();
    StatusReport {
        agent: agent.id,
        tick,
        location: agent.room,
        carrying: agent.carrying.clone(),
        task: focus.map(|w| w.task),
        progress: focus.map(WorkItem::progress),
        intentions: agent.intentions.clone(),
    }
}

/// One autonomous agent.
#[derive(Debug, Clone)]
pub struct Worker<P = RulePolicy> {
    state: AgentState,
    memory: MemoryStore,
    policy: P,
    queue: SubtaskQueue,
    peer_claims: BTreeMap<AgentId, Vec<ObjectId>>,
    refused: Vec<WorkerError>,
}

impl Worker<RulePolicy> {
    pub fn new(id: AgentId, house: Arc<House>, room: RoomId, max_load: u32) -> Self {
        Self::with_policy(id, house, room, max_load, RulePolicy)
    }
}

impl<P: WorkerPolicy> Worker<P> {
    pub fn with_policy(id: AgentId, house: Arc<House>, room: RoomId, max_load: u32, policy: P) -> Self {
        Self {
            memory: MemoryStore::new(Arc::clone(&house)),
            state: AgentState::new(id, house, room, max_load),
            policy,
            queue: SubtaskQueue::default(),
            peer_claims: BTreeMap::new(),
            refused: Vec::new(),
        }
    }

    pub fn id(&self) -> AgentId {
        self.state.id
    }

    pub fn state(&self) -> &AgentState {
        &self.state
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn queue(&self) -> &SubtaskQueue {
        &self.queue
    }

    /// Refusals since the last call.
    pub fn take_refusals(&mut self) -> Vec<WorkerError> {
        std::mem::take(&mut self.refused)
    }

    /// Objects claimed by lower-id peers; these win any conflict.
    pub fn blocked_objects(&self) -> BTreeSet<ObjectId> {
        self.peer_claims
            .range(..self.state.id)
            .flat_map(|(_, objs)| objs.iter().copied())
            .collect()
    }

    pub fn handle_message(&mut self, message: &Message) {
        match &message.payload {
            Payload::Directive(d) if d.agent() == self.state.id => self.handle_directive(d),
            Payload::IntentionClaim { objects } => {
                if let Endpoint::Agent(peer) = message.sender {
                    self.peer_claims.insert(peer, objects.clone());
                }
            }
            _ => {}
        }
    }

    pub fn handle_directive(&mut self, directive: &Directive) {
        match directive {
            Directive::Assign { .. } => {
                if let Err(e) = accept_takeover(&mut self.state, &mut self.memory, directive) {
                    log::warn!("{e}");
                    self.refused.push(e);
                }
            }
            Directive::Evict { task, .. } => {
                if let Some(item) = self.state.work.remove(task) {
                    let tick = self.state.tick;
                    self.memory.update(tick, MemoryItem::Directive(directive.clone()), &self.state.memory_focus());
                    self.memory.compact_task(tick, item.task, "evicted");
                    self.drop_stale_intentions();
                }
            }
        }
    }

    /// Take in the current room's view and refresh progress beliefs.
    pub fn observe(&mut self, obs: Observation) {
        self.state.tick = obs.tick;
        self.state.room = obs.room;
        self.state.visited.insert(obs.room);
        for item in self.state.work.values_mut() {
            if self.state.house.surface_room(item.goal.surface) != obs.room {
                continue;
            }
            let on_surface = obs
                .visible_objects
                .iter()
                .filter(|v| v.kind == item.goal.object_kind && v.place == Place::Surface(item.goal.surface))
                .count() as u32;
            item.known_satisfied = on_surface.min(item.goal.count);
            self.state.satisfied_seen.insert(item.task, item.known_satisfied);
        }
        let focus = self.state.memory_focus();
        self.policy.update_memory(&mut self.memory, obs.tick, MemoryItem::Observation(obs), &focus);
        self.retire_finished();
    }

    /// Choose this tick's action.
    pub fn decide(&mut self) -> PrimitiveAction {
        let blocked = self.blocked_objects();
        if let Some(stash) = self.stash_action() {
            self.queue = SubtaskQueue::default();
            self.state.intentions.clear();
            return stash;
        }
        self.queue = match self.state.focus() {
            Some(item) => self.policy.decompose(item, &self.state, &self.memory, &blocked),
            None => SubtaskQueue::default(),
        };
        let action = self.policy.next_action(&mut self.state, &self.memory, &self.queue, &blocked);
        self.state.intentions = match action {
            PrimitiveAction::Grab { object } => vec![object],
            _ => self.queue.target().into_iter().collect(),
        };
        action
    }

    /// Fold the environment's verdict on our last action into state and memory.
    pub fn record_outcome(&mut self, outcome: ActionOutcome) {
        if outcome.success {
            match outcome.action {
                PrimitiveAction::MoveTo { room } => self.state.room = room,
                PrimitiveAction::Grab { object } => self.state.carrying.push(object),
                PrimitiveAction::PutOn { object, surface } => {
                    self.state.carrying.retain(|&o| o != object);
                    let kind = self.memory.index().kind_of(object).map(str::to_owned);
                    for item in self.state.work.values_mut() {
                        if item.goal.surface == surface && kind.as_deref() == Some(item.goal.object_kind.as_str()) {
                            item.known_satisfied = (item.known_satisfied + 1).min(item.goal.count);
                            self.state.satisfied_seen.insert(item.task, item.known_satisfied);
                            break;
                        }
                    }
                }
                PrimitiveAction::PutIn { object, .. } => self.state.carrying.retain(|&o| o != object),
                _ => {}
            }
        }
        let focus = self.state.memory_focus();
        let tick = self.state.tick;
        self.policy.update_memory(&mut self.memory, tick, MemoryItem::Outcome(outcome), &focus);
        self.retire_finished();
    }

    pub fn make_report(&self, tick: Tick) -> StatusReport {
        make_report(&self.state, tick)
    }

    fn retire_finished(&mut self) {
        let done: Vec<TaskId> = self.state.work.values().filter(|w| w.is_done()).map(|w| w.task).collect();
        if done.is_empty() {
            return;
        }
        for task in done {
            self.state.work.remove(&task);
            self.memory.compact_task(self.state.tick, task, "goal met");
        }
        self.drop_stale_intentions();
    }

    /// Stop claiming objects no held task needs any more.
    fn drop_stale_intentions(&mut self) {
        let index = self.memory.index();
        let work = &self.state.work;
        self.state.intentions.retain(|&o| {
            index.kind_of(o).is_some_and(|k| work.values().any(|w| w.goal.object_kind == k))
        });
    }

    /// Put down a carried object that no task in the work set needs.
    fn stash_action(&self) -> Option<PrimitiveAction> {
        let needed: BTreeSet<&str> = self.state.work.values().map(|w| w.goal.object_kind.as_str()).collect();
        let spare = self
            .state
            .carrying
            .iter()
            .copied()
            .find(|&o| self.memory.index().kind_of(o).is_none_or(|k| !needed.contains(k)))?;
        let surface = self.state.house.surfaces_in(self.state.room).next()?;
        Some(PrimitiveAction::PutOn { object: spare, surface })
    }
}
