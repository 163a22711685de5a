use serde::{Deserialize, Serialize};

use crate::ids::{AgentId, ContainerId, ObjectId, RoomId, SurfaceId, Tick};

/// Where an object currently is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "at", content = "id", rename_all = "snake_case")]
pub enum Place {
    /// Loose on the floor of a room.
    Room(RoomId),
    Container(ContainerId),
    Surface(SurfaceId),
    Carried(AgentId),
}

/// One agent action for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum PrimitiveAction {
    MoveTo { room: RoomId },
    Open { container: ContainerId },
    Close { container: ContainerId },
    Grab { object: ObjectId },
    PutOn { object: ObjectId, surface: SurfaceId },
    PutIn { object: ObjectId, container: ContainerId },
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    InvalidTarget,
    Contended,
    NotVisible,
    HandsFull,
    NotCarrying,
    NotColocated,
    ContainerClosed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionOutcome {
    pub agent: AgentId,
    pub action: PrimitiveAction,
    pub success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<FailureReason>,
}

impl ActionOutcome {
    pub fn ok(agent: AgentId, action: PrimitiveAction) -> Self {
        Self { agent, action, success: true, reason: None }
    }

    pub fn failed(agent: AgentId, action: PrimitiveAction, reason: FailureReason) -> Self {
        Self { agent, action, success: false, reason: Some(reason) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleObject {
    pub id: ObjectId,
    pub kind: String,
    pub place: Place,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisibleContainer {
    pub id: ContainerId,
    pub open: bool,
}

/// What one agent perceives: only the contents of its current room.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub tick: Tick,
    pub agent: AgentId,
    pub room: RoomId,
    /// Objects loose in the room, on its surfaces, or in its open containers.
    pub visible_objects: Vec<VisibleObject>,
    pub visible_containers: Vec<VisibleContainer>,
    pub co_located_agents: Vec<AgentId>,
}
