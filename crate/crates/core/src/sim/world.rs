use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ids::{AgentId, ContainerId, ObjectId, RoomId, SurfaceId, Tick};
use crate::resource::DEFAULT_HAND_CAPACITY;
use crate::sim::config::{resolve, WorldConfig};
use crate::sim::house::House;
use crate::sim::types::{
    ActionOutcome, FailureReason, Observation, Place, PrimitiveAction, VisibleContainer,
    VisibleObject,
};
use crate::sim::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObjectState {
    pub name: String,
    pub kind: String,
    pub place: Place,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentBody {
    pub room: RoomId,
    pub carrying: Vec<ObjectId>,
}

/// Full environment state. [`WorldState::step`] is the only mutator apart
/// from scenario injections ([`WorldState::drop_agent`],
/// [`WorldState::add_agent`]).
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub tick: Tick,
    house: Arc<House>,
    containers_open: Vec<bool>,
    objects: Vec<ObjectState>,
    agents: BTreeMap<AgentId, AgentBody>,
    dropped: BTreeSet<AgentId>,
    hand_capacity: usize,
    rng_seed: u64,
    rng: ChaCha8Rng,
}

/// Build a world from a config. Objects with several candidate locations
/// are placed by a ChaCha stream seeded with `seed`.
pub fn init_world(config: &WorldConfig, seed: u64) -> Result<WorldState, SimError> {
    init_world_with_capacity(config, seed, DEFAULT_HAND_CAPACITY)
}

pub fn init_world_with_capacity(
    config: &WorldConfig,
    seed: u64,
    hand_capacity: usize,
) -> Result<WorldState, SimError> {
    let resolved = resolve(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objects = resolved
        .objects
        .into_iter()
        .map(|(name, kind, candidates)| {
            let place = if candidates.len() == 1 {
                candidates[0]
            } else {
                candidates[rng.gen_range(0..candidates.len())]
            };
            ObjectState { name, kind, place }
        })
        .collect();
    Ok(WorldState {
        tick: 0,
        house: Arc::new(resolved.house),
        containers_open: resolved.containers_open,
        objects,
        agents: BTreeMap::new(),
        dropped: BTreeSet::new(),
        hand_capacity,
        rng_seed: seed,
        rng,
    })
}

impl WorldState {
    pub fn house(&self) -> &House {
        &self.house
    }

    pub fn shared_house(&self) -> Arc<House> {
        Arc::clone(&self.house)
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn hand_capacity(&self) -> usize {
        self.hand_capacity
    }

    pub fn object_count(&self) -> usize {
        self.objects.len()
    }

    pub fn objects(&self) -> impl Iterator<Item = (ObjectId, &ObjectState)> {
        self.objects.iter().enumerate().map(|(i, o)| (ObjectId(i as u32), o))
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectState> {
        self.objects.get(id.index())
    }

    pub fn object_by_name(&self, name: &str) -> Option<ObjectId> {
        self.objects.iter().position(|o| o.name == name).map(|i| ObjectId(i as u32))
    }

    pub fn object_kind(&self, id: ObjectId) -> &str {
        &self.objects[id.index()].kind
    }

    pub fn place_of(&self, id: ObjectId) -> Place {
        self.objects[id.index()].place
    }

    pub fn is_open(&self, container: ContainerId) -> bool {
        self.containers_open[container.index()]
    }

    fn objects_at(&self, place: Place) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects().filter(move |(_, o)| o.place == place).map(|(id, _)| id)
    }

    pub fn container_contents(&self, container: ContainerId) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects_at(Place::Container(container))
    }

    pub fn surface_contents(&self, surface: SurfaceId) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects_at(Place::Surface(surface))
    }

    pub fn loose_in(&self, room: RoomId) -> impl Iterator<Item = ObjectId> + '_ {
        self.objects_at(Place::Room(room))
    }

    /// Room a place belongs to (carried objects follow their carrier).
    pub fn room_of_place(&self, place: Place) -> Option<RoomId> {
        match place {
            Place::Room(r) => Some(r),
            Place::Container(c) => Some(self.house.container_room(c)),
            Place::Surface(s) => Some(self.house.surface_room(s)),
            Place::Carried(a) => self.agents.get(&a).map(|b| b.room),
        }
    }

    /// Whether an agent standing in `room` can see (and reach) `place`.
    pub fn visible_from(&self, room: RoomId, place: Place) -> bool {
        match place {
            Place::Room(r) => r == room,
            Place::Surface(s) => self.house.surface_room(s) == room,
            Place::Container(c) => self.house.container_room(c) == room && self.is_open(c),
            Place::Carried(_) => false,
        }
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentBody> {
        self.agents.get(&id)
    }

    /// Agents currently present and acting.
    pub fn active_agents(&self) -> impl Iterator<Item = (AgentId, &AgentBody)> {
        self.agents.iter().map(|(&id, body)| (id, body))
    }

    pub fn is_dropped(&self, id: AgentId) -> bool {
        self.dropped.contains(&id)
    }

    /// Place a new agent with empty hands, in `room` or the spawn room.
    pub fn add_agent(&mut self, id: AgentId, room: Option<RoomId>) -> Result<(), SimError> {
        if self.agents.contains_key(&id) || self.dropped.contains(&id) {
            return Err(SimError::DuplicateAgent(id));
        }
        let room = room.unwrap_or(self.house.spawn_room());
        if !self.house.contains_room(room) {
            return Err(SimError::config("/spawn_room", format!("unknown room {room}")));
        }
        self.agents.insert(id, AgentBody { room, carrying: Vec::new() });
        Ok(())
    }

    /// Remove an agent silently. Whatever it carried falls loose in its room.
    pub fn drop_agent(&mut self, id: AgentId) -> Result<Vec<ObjectId>, SimError> {
        let body = self.agents.remove(&id).ok_or(SimError::UnknownAgent(id))?;
        for &obj in &body.carrying {
            self.objects[obj.index()].place = Place::Room(body.room);
        }
        self.dropped.insert(id);
        Ok(body.carrying)
    }

    /// What `agent` perceives in its current room.
    pub fn observe(&self, agent: AgentId) -> Result<Observation, SimError> {
        let body = self.agents.get(&agent).ok_or(SimError::UnknownAgent(agent))?;
        let room = body.room;
        let visible_objects = self
            .objects()
            .filter(|(_, o)| self.visible_from(room, o.place))
            .map(|(id, o)| VisibleObject { id, kind: o.kind.clone(), place: o.place })
            .collect();
        let visible_containers = self
            .house
            .containers_in(room)
            .map(|id| VisibleContainer { id, open: self.is_open(id) })
            .collect();
        let co_located_agents = self
            .agents
            .iter()
            .filter(|(&other, b)| other != agent && b.room == room)
            .map(|(&other, _)| other)
            .collect();
        Ok(Observation {
            tick: self.tick,
            agent,
            room,
            visible_objects,
            visible_containers,
            co_located_agents,
        })
    }

    /// Advance one tick. All actions are resolved in ascending agent id;
    /// agents absent from `actions` idle.
    pub fn step(
        &mut self,
        actions: &BTreeMap<AgentId, PrimitiveAction>,
    ) -> Result<BTreeMap<AgentId, ActionOutcome>, SimError> {
        if let Some(&unknown) = actions.keys().find(|id| !self.agents.contains_key(id)) {
            return Err(SimError::UnknownAgent(unknown));
        }
        let mut grabbed: BTreeSet<ObjectId> = BTreeSet::new();
        let mut outcomes = BTreeMap::new();
        for (&agent, &action) in actions {
            let result = self.apply(agent, action, &mut grabbed);
            let outcome = match result {
                Ok(()) => ActionOutcome::ok(agent, action),
                Err(reason) => ActionOutcome::failed(agent, action, reason),
            };
            outcomes.insert(agent, outcome);
        }
        self.tick += 1;
        Ok(outcomes)
    }

    fn apply(
        &mut self,
        agent: AgentId,
        action: PrimitiveAction,
        grabbed: &mut BTreeSet<ObjectId>,
    ) -> Result<(), FailureReason> {
        let room = self.agents[&agent].room;
        match action {
            PrimitiveAction::Idle => Ok(()),
            PrimitiveAction::MoveTo { room: target } => {
                if !self.house.contains_room(target) {
                    return Err(FailureReason::InvalidTarget);
                }
                let next = self.house.next_hop(room, target);
                self.agents.get_mut(&agent).expect("present").room = next;
                Ok(())
            }
            PrimitiveAction::Open { container } | PrimitiveAction::Close { container } => {
                let fixture = self.house.container(container).ok_or(FailureReason::InvalidTarget)?;
                if fixture.room != room {
                    return Err(FailureReason::NotColocated);
                }
                self.containers_open[container.index()] = matches!(action, PrimitiveAction::Open { .. });
                Ok(())
            }
            PrimitiveAction::Grab { object } => {
                let state = self.objects.get(object.index()).ok_or(FailureReason::InvalidTarget)?;
                if grabbed.contains(&object) {
                    return Err(FailureReason::Contended);
                }
                if !self.visible_from(room, state.place) {
                    return Err(FailureReason::NotVisible);
                }
                if self.agents[&agent].carrying.len() >= self.hand_capacity {
                    return Err(FailureReason::HandsFull);
                }
                grabbed.insert(object);
                self.objects[object.index()].place = Place::Carried(agent);
                self.agents.get_mut(&agent).expect("present").carrying.push(object);
                Ok(())
            }
            PrimitiveAction::PutOn { object, surface } => {
                let fixture = self.house.surface(surface).ok_or(FailureReason::InvalidTarget)?;
                if object.index() >= self.objects.len() {
                    return Err(FailureReason::InvalidTarget);
                }
                if fixture.room != room {
                    return Err(FailureReason::NotColocated);
                }
                self.release(agent, object, Place::Surface(surface))
            }
            PrimitiveAction::PutIn { object, container } => {
                let fixture = self.house.container(container).ok_or(FailureReason::InvalidTarget)?;
                if object.index() >= self.objects.len() {
                    return Err(FailureReason::InvalidTarget);
                }
                if fixture.room != room {
                    return Err(FailureReason::NotColocated);
                }
                if !self.is_open(container) {
                    return Err(FailureReason::ContainerClosed);
                }
                self.release(agent, object, Place::Container(container))
            }
        }
    }

    fn release(&mut self, agent: AgentId, object: ObjectId, to: Place) -> Result<(), FailureReason> {
        let body = self.agents.get_mut(&agent).expect("present");
        let Some(pos) = body.carrying.iter().position(|&o| o == object) else {
            return Err(FailureReason::NotCarrying);
        };
        body.carrying.remove(pos);
        self.objects[object.index()].place = to;
        Ok(())
    }

    /// Sorted multiset of `(name, kind)` for every object. Conservation
    /// checks compare this before and after a mutation.
    pub fn object_inventory(&self) -> Vec<(String, String)> {
        let mut inv: Vec<_> = self.objects.iter().map(|o| (o.name.clone(), o.kind.clone())).collect();
        inv.sort();
        inv
    }

    /// Check that every object sits in exactly one consistent place.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.house.is_connected() {
            return Err("room graph is not connected".into());
        }
        for (id, obj) in self.objects() {
            if let Place::Carried(agent) = obj.place {
                let carried = self.agents.get(&agent).is_some_and(|b| b.carrying.contains(&id));
                if !carried {
                    return Err(format!("{id} carried by {agent} who does not hold it"));
                }
            }
        }
        for (agent, body) in &self.agents {
            if body.carrying.len() > self.hand_capacity {
                return Err(format!("{agent} carries {} objects", body.carrying.len()));
            }
            for &obj in &body.carrying {
                if self.place_of(obj) != Place::Carried(*agent) {
                    return Err(format!("{agent} holds {obj} placed elsewhere"));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 over object names, kinds and places.
    pub fn placement_digest(&self) -> String {
        let body = serde_json::to_vec(&self.objects).expect("objects serialize");
        hex::encode(Sha256::digest(&body))
    }
}
