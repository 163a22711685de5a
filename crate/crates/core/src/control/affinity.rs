//! Agent/task affinity: a capability gate followed by a weighted sum of
//! inverse room distance and inverse workload.

use serde::{Deserialize, Serialize};

use crate::resource::{AgentObject, TaskObject};
use crate::scalar::Scalar;
use crate::sim::house::House;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffinityWeights<S> {
    pub location: S,
    pub load: S,
}

impl<S: Scalar> AffinityWeights<S> {
    pub fn new(location: S, load: S) -> Self {
        Self { location, load }
    }

    pub fn scaled(self, c: S) -> Self {
        Self { location: self.location * c, load: self.load * c }
    }

    /// Convert from runtime weights.
    pub fn from_f64(weights: AffinityWeights<f64>) -> Self {
        Self { location: S::from_f64(weights.location), load: S::from_f64(weights.load) }
    }
}

impl<S: Scalar> Default for AffinityWeights<S> {
    fn default() -> Self {
        Self { location: S::half(), load: S::half() }
    }
}

/// Score `agent` for `task` using the agent's recorded workload. `None`
/// means infeasible (missing capabilities).
pub fn affinity<S: Scalar>(
    agent: &AgentObject,
    task: &TaskObject,
    house: &House,
    weights: &AffinityWeights<S>,
) -> Option<S> {
    affinity_with_load(agent, agent.workload, task, house, weights)
}

/// Same as [`affinity`] but with an explicit workload, for planners that
/// accumulate load as they assign.
pub fn affinity_with_load<S: Scalar>(
    agent: &AgentObject,
    workload: u32,
    task: &TaskObject,
    house: &House,
    weights: &AffinityWeights<S>,
) -> Option<S> {
    if !agent.satisfies(&task.required_capabilities) {
        return None;
    }
    let goal_room = house.surface_room(task.goal.surface);
    let distance = house.distance(agent.location, goal_room) as usize;
    let one = S::one();
    let location_term = one / (one + S::from_count(distance));
    let load_term = one / (one + S::from_count(workload as usize));
    Some(weights.location * location_term + weights.load * load_term)
}
