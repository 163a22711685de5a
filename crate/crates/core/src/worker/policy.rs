//! Task decomposition and action selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ids::{ContainerId, ObjectId, RoomId, SurfaceId};
use crate::sim::goal::GoalKind;
use crate::sim::types::{Place, PrimitiveAction};
use crate::worker::memory::{Focus, MemoryItem, MemoryStore};
use crate::worker::{AgentState, WorkItem};

/// Where a GoTo leads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "at", content = "id", rename_all = "snake_case")]
pub enum Destination {
    Room(RoomId),
    Container(ContainerId),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum Subgoal {
    Locate { kind: String },
    GoTo { to: Destination },
    Open { container: ContainerId },
    /// `object` is `None` when the instance is still to be found.
    Grab { kind: String, object: Option<ObjectId> },
    Deliver { surface: SurfaceId, object: Option<ObjectId> },
}

/// Ordered subgoals. One Deliver per outstanding goal unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskQueue {
    pub items: Vec<Subgoal>,
}

impl SubtaskQueue {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Goal units this queue would deliver.
    pub fn units(&self) -> usize {
        self.items.iter().filter(|s| matches!(s, Subgoal::Deliver { .. })).count()
    }

    /// Object the head unit is going for, if known.
    pub fn target(&self) -> Option<ObjectId> {
        self.items.iter().find_map(|s| match s {
            Subgoal::Grab { object, .. } => *object,
            Subgoal::Deliver { object, .. } => *object,
            _ => None,
        })
    }
}

/// Pluggable worker brain. The default is [`RulePolicy`]; a model-backed
/// policy can slot in behind the same message contract.
pub trait WorkerPolicy {
    /// Expand one work item into subgoals from what the agent knows.
    fn decompose(
        &self,
        item: &WorkItem,
        agent: &AgentState,
        memory: &MemoryStore,
        claimed: &BTreeSet<ObjectId>,
    ) -> SubtaskQueue;

    /// Turn the head of `queue` into exactly one primitive action.
    fn next_action(
        &self,
        agent: &mut AgentState,
        memory: &MemoryStore,
        queue: &SubtaskQueue,
        claimed: &BTreeSet<ObjectId>,
    ) -> PrimitiveAction;

    fn update_memory(&self, memory: &mut MemoryStore, tick: u64, item: MemoryItem, focus: &Focus) {
        memory.update(tick, item, focus);
    }
}

/// Deterministic template policy.
#[derive(Debug, Clone, Copy, Default)]
pub struct RulePolicy;

impl WorkerPolicy for RulePolicy {
    fn decompose(
        &self,
        item: &WorkItem,
        agent: &AgentState,
        memory: &MemoryStore,
        claimed: &BTreeSet<ObjectId>,
    ) -> SubtaskQueue {
        let GoalKind::OnSurface = item.goal.kind;
        let goal = &item.goal;
        let mut remaining = item.remaining();
        let mut items = Vec::new();

        // Units already in hand only need delivering.
        for &o in &agent.carrying {
            if remaining == 0 {
                break;
            }
            if memory.index().kind_of(o) == Some(goal.object_kind.as_str()) {
                items.push(Subgoal::Deliver { surface: goal.surface, object: Some(o) });
                remaining -= 1;
            }
        }

        let house = agent.house();
        let mut sources: Vec<(u32, ObjectId, Place)> = memory
            .index()
            .instances(&goal.object_kind)
            .filter(|&(o, p)| {
                !claimed.contains(&o) && p != Place::Surface(goal.surface) && !matches!(p, Place::Carried(_))
            })
            .filter_map(|(o, p)| memory.room_of(o).map(|r| (house.distance(agent.room, r), o, p)))
            .collect();
        sources.sort();

        for (_, o, place) in sources {
            if remaining == 0 {
                break;
            }
            match place {
                Place::Container(c) => {
                    items.push(Subgoal::GoTo { to: Destination::Container(c) });
                    if memory.index().container_open(c) != Some(true) {
                        items.push(Subgoal::Open { container: c });
                    }
                }
                Place::Room(r) => items.push(Subgoal::GoTo { to: Destination::Room(r) }),
                Place::Surface(s) => {
                    items.push(Subgoal::GoTo { to: Destination::Room(house.surface_room(s)) })
                }
                Place::Carried(_) => unreachable!("filtered above"),
            }
            items.push(Subgoal::Grab { kind: goal.object_kind.clone(), object: Some(o) });
            items.push(Subgoal::Deliver { surface: goal.surface, object: Some(o) });
            remaining -= 1;
        }

        for _ in 0..remaining {
            items.push(Subgoal::Locate { kind: goal.object_kind.clone() });
            items.push(Subgoal::Grab { kind: goal.object_kind.clone(), object: None });
            items.push(Subgoal::Deliver { surface: goal.surface, object: None });
        }
        SubtaskQueue { items }
    }

    fn next_action(
        &self,
        agent: &mut AgentState,
        memory: &MemoryStore,
        queue: &SubtaskQueue,
        claimed: &BTreeSet<ObjectId>,
    ) -> PrimitiveAction {
        let house = agent.house_arc();
        let mut i = 0;
        while let Some(step) = queue.items.get(i) {
            match step {
                Subgoal::GoTo { to } => {
                    let room = match *to {
                        Destination::Room(r) => r,
                        Destination::Container(c) => house.container_room(c),
                    };
                    if room != agent.room {
                        return PrimitiveAction::MoveTo { room: house.next_hop(agent.room, room) };
                    }
                }
                Subgoal::Open { container } => {
                    if memory.index().container_open(*container) != Some(true) {
                        return PrimitiveAction::Open { container: *container };
                    }
                }
                Subgoal::Grab { kind, object } => {
                    if agent.carrying.len() >= agent.hand_capacity {
                        // Cannot pick anything up; skip to this unit's delivery.
                        i += 1;
                        continue;
                    }
                    let wanted = object.filter(|o| {
                        !claimed.contains(o) && memory.room_of(*o) == Some(agent.room)
                    });
                    let pick = wanted.or_else(|| visible_instance(agent, memory, kind, claimed, queue));
                    return match pick {
                        Some(o) => PrimitiveAction::Grab { object: o },
                        None => explore(agent, memory),
                    };
                }
                Subgoal::Locate { kind } => {
                    if let Some(o) = visible_instance(agent, memory, kind, claimed, queue) {
                        if agent.carrying.len() < agent.hand_capacity {
                            return PrimitiveAction::Grab { object: o };
                        }
                    }
                    return explore(agent, memory);
                }
                Subgoal::Deliver { surface, object } => {
                    let carried = object
                        .filter(|o| agent.carrying.contains(o))
                        .or_else(|| {
                            let kind = queue_kind(queue)?;
                            agent
                                .carrying
                                .iter()
                                .copied()
                                .find(|&o| memory.index().kind_of(o) == Some(kind))
                        });
                    if let Some(o) = carried {
                        let room = house.surface_room(*surface);
                        if room != agent.room {
                            return PrimitiveAction::MoveTo { room: house.next_hop(agent.room, room) };
                        }
                        return PrimitiveAction::PutOn { object: o, surface: *surface };
                    }
                }
            }
            i += 1;
        }
        PrimitiveAction::Idle
    }
}

fn queue_kind(queue: &SubtaskQueue) -> Option<&str> {
    queue.items.iter().find_map(|s| match s {
        Subgoal::Grab { kind, .. } | Subgoal::Locate { kind } => Some(kind.as_str()),
        _ => None,
    })
}

/// Goal surfaces named in the queue: objects already there are done units.
fn delivery_surfaces(queue: &SubtaskQueue) -> BTreeSet<SurfaceId> {
    queue
        .items
        .iter()
        .filter_map(|s| match s {
            Subgoal::Deliver { surface, .. } => Some(*surface),
            _ => None,
        })
        .collect()
}

/// Lowest-id unclaimed instance of `kind` reachable in the current room.
fn visible_instance(
    agent: &AgentState,
    memory: &MemoryStore,
    kind: &str,
    claimed: &BTreeSet<ObjectId>,
    queue: &SubtaskQueue,
) -> Option<ObjectId> {
    let done_at = delivery_surfaces(queue);
    memory
        .index()
        .instances(kind)
        .filter(|&(o, p)| {
            let usable = match p {
                Place::Room(_) => true,
                Place::Surface(s) => !done_at.contains(&s),
                Place::Container(c) => memory.index().container_open(c) == Some(true),
                Place::Carried(_) => false,
            };
            usable && !claimed.contains(&o) && memory.room_of(o) == Some(agent.room)
        })
        .map(|(o, _)| o)
        .next()
}

/// Search step: open the next unsearched container here, otherwise head for
/// the next unexplored room in id order after the current one.
pub fn explore(agent: &mut AgentState, memory: &MemoryStore) -> PrimitiveAction {
    let house = agent.house_arc();
    agent.visited.insert(agent.room);
    if let Some(c) = house
        .containers_in(agent.room)
        .find(|&c| memory.index().container_open(c) != Some(true) && !memory.index().searched(c))
    {
        return PrimitiveAction::Open { container: c };
    }
    let explored = |room: RoomId, visited: &BTreeSet<RoomId>| {
        visited.contains(&room) && house.containers_in(room).all(|c| memory.index().searched(c))
    };
    let target = match next_unexplored(house.room_count(), agent.room, |r| explored(r, &agent.visited)) {
        Some(r) => r,
        None => {
            // Everything searched: start another sweep from here.
            agent.visited.clear();
            agent.visited.insert(agent.room);
            match next_unexplored(house.room_count(), agent.room, |r| explored(r, &agent.visited)) {
                Some(r) => r,
                None => return PrimitiveAction::Idle,
            }
        }
    };
    PrimitiveAction::MoveTo { room: house.next_hop(agent.room, target) }
}

/// First room after `from` (cyclically by id) that is not yet explored.
pub fn next_unexplored(room_count: usize, from: RoomId, explored: impl Fn(RoomId) -> bool) -> Option<RoomId> {
    let n = room_count as u32;
    (1..n).map(|k| RoomId((from.0 + k) % n)).find(|&r| !explored(r))
}
