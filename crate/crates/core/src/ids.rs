use std::fmt;

use serde::{Deserialize, Serialize};

/// Simulation time. One tick is one lockstep round.
pub type Tick = u64;

macro_rules! index_id {
    ($(#[$meta:meta])* $name:ident, $prefix:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

index_id!(
    /// Agent index, unique within the agent kind.
    AgentId,
    "agent#"
);
index_id!(
    /// Task index, unique within the task kind.
    TaskId,
    "task#"
);
index_id!(RoomId, "room#");
index_id!(ObjectId, "object#");
index_id!(ContainerId, "container#");
index_id!(SurfaceId, "surface#");
