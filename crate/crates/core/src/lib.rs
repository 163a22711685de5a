//! Dynamic, event-driven multi-agent task allocation.
//!
//! Agents and tasks are modelled as resource objects with explicit
//! lifecycles ([`resource`]). A central control plane ([`control`]) watches
//! heartbeats and progress reports, scores agent/task affinity and runs a
//! planner/critic scheduler whenever a trigger event changes the system
//! state. Autonomous workers ([`worker`]) decompose assigned tasks into
//! primitive actions inside a deterministic household simulator ([`sim`]).
//! Everything talks over a lockstep message [`bus`], and the [`harness`]
//! runs scenarios (static teams, agent dropout, agent addition) against the
//! scheduler and two baseline allocators.
//!
//! Scoring math is generic over the scalar type (see [`scalar::Scalar`]);
//! the runtime uses the aliases below.

pub mod bus;
pub mod control;
pub mod harness;
pub mod ids;
pub mod resource;
pub mod scalar;
pub mod sim;
pub mod worker;

pub use ids::{AgentId, ContainerId, ObjectId, RoomId, SurfaceId, TaskId, Tick};

/// Scalar used by the runtime scheduler and metrics.
pub type Score = f64;
/// Affinity weights at runtime precision.
pub type Weights = control::affinity::AffinityWeights<Score>;
/// Single-precision weights, mostly useful for checking that scoring is
/// precision independent.
pub type WeightsF32 = control::affinity::AffinityWeights<f32>;
