//! Two-tier agent memory plus an object location index.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::control::Directive;
use crate::ids::{AgentId, ContainerId, ObjectId, RoomId, TaskId, Tick};
use crate::sim::house::House;
use crate::sim::types::{ActionOutcome, Observation, Place, PrimitiveAction};

pub const DEFAULT_SUMMARY_CAPACITY: usize = 32;

/// Anything a worker can remember.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum MemoryItem {
    Observation(Observation),
    Outcome(ActionOutcome),
    Directive(Directive),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Observation,
    Outcome,
    Directive,
    Takeover,
    /// Compacted history of a task that left focus.
    Task,
}

impl From<&MemoryItem> for RecordKind {
    fn from(item: &MemoryItem) -> Self {
        match item {
            MemoryItem::Observation(_) => Self::Observation,
            MemoryItem::Outcome(_) => Self::Outcome,
            MemoryItem::Directive(_) => Self::Directive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRecord {
    pub tick: Tick,
    pub kind: RecordKind,
    pub item: MemoryItem,
}

/// Fixed-schema key outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub tick: Tick,
    pub kind: RecordKind,
    pub outcome: String,
}

/// Last known whereabouts of objects and container states.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocationIndex {
    by_kind: HashMap<String, BTreeMap<ObjectId, Place>>,
    by_object: BTreeMap<ObjectId, (String, Place)>,
    containers: BTreeMap<ContainerId, bool>,
    /// Containers whose contents have been seen at least once.
    seen_inside: BTreeSet<ContainerId>,
}

impl LocationIndex {
    pub fn place_of(&self, object: ObjectId) -> Option<Place> {
        self.by_object.get(&object).map(|(_, p)| *p)
    }

    pub fn kind_of(&self, object: ObjectId) -> Option<&str> {
        self.by_object.get(&object).map(|(k, _)| k.as_str())
    }

    /// Known instances of `kind`, by object id.
    pub fn instances<'a>(&'a self, kind: &str) -> impl Iterator<Item = (ObjectId, Place)> + 'a {
        self.by_kind.get(kind).into_iter().flat_map(|m| m.iter().map(|(&o, &p)| (o, p)))
    }

    pub fn container_open(&self, container: ContainerId) -> Option<bool> {
        self.containers.get(&container).copied()
    }

    pub fn searched(&self, container: ContainerId) -> bool {
        self.seen_inside.contains(&container)
    }

    pub fn len(&self) -> usize {
        self.by_object.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_object.is_empty()
    }

    /// Every indexed object with its kind and place.
    pub fn entries(&self) -> impl Iterator<Item = (ObjectId, &str, Place)> {
        self.by_object.iter().map(|(&o, (k, p))| (o, k.as_str(), *p))
    }

    pub fn set(&mut self, object: ObjectId, kind: &str, place: Place) {
        if let Some((old_kind, _)) = self.by_object.get(&object) {
            if old_kind != kind {
                if let Some(m) = self.by_kind.get_mut(old_kind) {
                    m.remove(&object);
                }
            }
        }
        self.by_kind.entry(kind.to_owned()).or_default().insert(object, place);
        self.by_object.insert(object, (kind.to_owned(), place));
    }

    pub fn forget(&mut self, object: ObjectId) {
        if let Some((kind, _)) = self.by_object.remove(&object) {
            if let Some(m) = self.by_kind.get_mut(&kind) {
                m.remove(&object);
            }
        }
    }

    fn move_known(&mut self, object: ObjectId, place: Place) {
        if let Some(kind) = self.kind_of(object).map(str::to_owned) {
            self.set(object, &kind, place);
        }
    }

    fn observe(&mut self, house: &House, obs: &Observation) {
        for c in &obs.visible_containers {
            self.containers.insert(c.id, c.open);
            if c.open {
                self.seen_inside.insert(c.id);
            }
        }
        let open: BTreeSet<ContainerId> =
            obs.visible_containers.iter().filter(|c| c.open).map(|c| c.id).collect();
        let in_view = |place: Place| match place {
            Place::Room(r) => r == obs.room,
            Place::Surface(s) => house.surface_room(s) == obs.room,
            Place::Container(c) => open.contains(&c),
            Place::Carried(_) => false,
        };
        let stale: Vec<ObjectId> = self
            .by_object
            .iter()
            .filter(|(_, (_, p))| in_view(*p))
            .map(|(&o, _)| o)
            .collect();
        for o in stale {
            self.forget(o);
        }
        for v in &obs.visible_objects {
            self.set(v.id, &v.kind, v.place);
        }
    }

    fn apply_outcome(&mut self, outcome: &ActionOutcome) {
        if !outcome.success {
            return;
        }
        match outcome.action {
            PrimitiveAction::Grab { object } => self.move_known(object, Place::Carried(outcome.agent)),
            PrimitiveAction::PutOn { object, surface } => self.move_known(object, Place::Surface(surface)),
            PrimitiveAction::PutIn { object, container } => {
                self.move_known(object, Place::Container(container))
            }
            PrimitiveAction::Open { container } => {
                self.containers.insert(container, true);
            }
            PrimitiveAction::Close { container } => {
                self.containers.insert(container, false);
            }
            PrimitiveAction::MoveTo { .. } | PrimitiveAction::Idle => {}
        }
    }
}

/// What counts as "about the current task" for one update.
#[derive(Debug, Clone, Default)]
pub struct Focus {
    pub tasks: BTreeSet<TaskId>,
    /// Task that receives detailed records when no better match exists.
    pub primary: Option<TaskId>,
    pub kinds: BTreeSet<String>,
}

/// Hierarchical memory: full records for tasks in focus, a bounded ring of
/// summaries for everything else.
#[derive(Debug, Clone)]
pub struct MemoryStore {
    house: Arc<House>,
    capacity: usize,
    detailed: BTreeMap<TaskId, Vec<DetailRecord>>,
    summarized: VecDeque<SummaryRecord>,
    discarded_count: u64,
    index: LocationIndex,
}

impl MemoryStore {
    pub fn new(house: Arc<House>) -> Self {
        Self::with_capacity(house, DEFAULT_SUMMARY_CAPACITY)
    }

    pub fn with_capacity(house: Arc<House>, capacity: usize) -> Self {
        Self {
            house,
            capacity,
            detailed: BTreeMap::new(),
            summarized: VecDeque::new(),
            discarded_count: 0,
            index: LocationIndex::default(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn index(&self) -> &LocationIndex {
        &self.index
    }

    pub fn detailed(&self, task: TaskId) -> &[DetailRecord] {
        self.detailed.get(&task).map_or(&[], Vec::as_slice)
    }

    pub fn detailed_len(&self) -> usize {
        self.detailed.values().map(Vec::len).sum()
    }

    pub fn summarized(&self) -> &VecDeque<SummaryRecord> {
        &self.summarized
    }

    pub fn discarded_count(&self) -> u64 {
        self.discarded_count
    }

    /// Room of an object's last known place.
    pub fn room_of(&self, object: ObjectId) -> Option<RoomId> {
        match self.index.place_of(object)? {
            Place::Room(r) => Some(r),
            Place::Surface(s) => Some(self.house.surface_room(s)),
            Place::Container(c) => Some(self.house.container_room(c)),
            Place::Carried(_) => None,
        }
    }

    /// File one item into the right tier and update the location index.
    pub fn update(&mut self, tick: Tick, item: MemoryItem, focus: &Focus) {
        match &item {
            MemoryItem::Observation(obs) => self.index.observe(&self.house, obs),
            MemoryItem::Outcome(outcome) => self.index.apply_outcome(outcome),
            MemoryItem::Directive(_) => {}
        }
        match relevant_task(&item, focus) {
            Some(task) => self.detailed.entry(task).or_default().push(DetailRecord {
                tick,
                kind: RecordKind::from(&item),
                item,
            }),
            None => {
                let outcome = summarize(&item);
                self.push_summary(SummaryRecord { tick, kind: RecordKind::from(&item), outcome });
            }
        }
    }

    /// Note a takeover in the task's detailed tier.
    pub fn record_takeover(&mut self, tick: Tick, directive: Directive) {
        let task = directive.task();
        self.detailed.entry(task).or_default().push(DetailRecord {
            tick,
            kind: RecordKind::Takeover,
            item: MemoryItem::Directive(directive),
        });
    }

    /// The task left focus: fold its detailed records into one summary.
    pub fn compact_task(&mut self, tick: Tick, task: TaskId, outcome: &str) {
        let records = self.detailed.remove(&task).map_or(0, |v| v.len());
        self.push_summary(SummaryRecord {
            tick,
            kind: RecordKind::Task,
            outcome: format!("{task}: {outcome} ({records} records)"),
        });
    }

    fn push_summary(&mut self, record: SummaryRecord) {
        if self.capacity == 0 {
            self.discarded_count += 1;
            return;
        }
        if self.summarized.len() == self.capacity {
            self.summarized.pop_front();
            self.discarded_count += 1;
        }
        self.summarized.push_back(record);
    }
}

fn relevant_task(item: &MemoryItem, focus: &Focus) -> Option<TaskId> {
    match item {
        MemoryItem::Directive(d) => focus.tasks.contains(&d.task()).then_some(d.task()),
        MemoryItem::Observation(obs) => {
            let hit = obs.visible_objects.iter().any(|v| focus.kinds.contains(&v.kind));
            if hit {
                focus.primary
            } else {
                None
            }
        }
        MemoryItem::Outcome(outcome) => {
            if matches!(outcome.action, PrimitiveAction::Idle) {
                None
            } else {
                focus.primary
            }
        }
    }
}

fn summarize(item: &MemoryItem) -> String {
    match item {
        MemoryItem::Observation(obs) => format!(
            "room {} objects {} agents {}",
            obs.room,
            obs.visible_objects.len(),
            obs.co_located_agents.len()
        ),
        MemoryItem::Outcome(o) => match o.reason {
            None => format!("{:?} ok", o.action),
            Some(reason) => format!("{:?} failed: {reason:?}", o.action),
        },
        MemoryItem::Directive(Directive::Assign { task, .. }) => format!("assigned {task}"),
        MemoryItem::Directive(Directive::Evict { task, .. }) => format!("evicted from {task}"),
    }
}

/// Objects carried by `agent` according to the index.
pub fn carried_by(index: &LocationIndex, agent: AgentId) -> Vec<ObjectId> {
    index
        .entries()
        .filter(|&(_, _, p)| p == Place::Carried(agent))
        .map(|(o, _, _)| o)
        .collect()
}
