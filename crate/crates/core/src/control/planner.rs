//! Candidate generation for the planner/critic loop.

use std::collections::{BTreeMap, BTreeSet};

use crate::control::affinity::{affinity_with_load, AffinityWeights};
use crate::control::TaskMap;
use crate::ids::{AgentId, TaskId};
use crate::resource::{AttributeSnapshot, TaskLifecycle, TaskObject};
use crate::scalar::Scalar;
use crate::sim::house::House;

/// Everything a planner may look at for one round.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a, S> {
    pub snapshot: &'a AttributeSnapshot,
    pub house: &'a House,
    pub weights: AffinityWeights<S>,
    pub max_load: u32,
    /// Mappings kept from a previous round; treat them as fixed.
    pub pinned: &'a TaskMap,
    /// Pairs the critic rejected earlier in this scheduling call.
    pub banned: &'a BTreeSet<(TaskId, AgentId)>,
}

impl<'a, S: Scalar> PlanContext<'a, S> {
    pub fn new(snapshot: &'a AttributeSnapshot, house: &'a House, weights: AffinityWeights<S>, max_load: u32) -> Self {
        static EMPTY_MAP: TaskMap = BTreeMap::new();
        static EMPTY_SET: BTreeSet<(TaskId, AgentId)> = BTreeSet::new();
        Self { snapshot, house, weights, max_load, pinned: &EMPTY_MAP, banned: &EMPTY_SET }
    }
}

/// Proposes a task → agent map. Implementations may be heuristic or
/// model-backed; the critic validates whatever comes out.
pub trait Planner<S: Scalar> {
    fn name(&self) -> &str;

    fn propose(&mut self, ctx: &PlanContext<'_, S>) -> TaskMap;
}

/// Greedy max-affinity planner.
///
/// Tasks are visited by priority (descending) then id. In-progress tasks on
/// live agents and pinned entries keep their agent; every other task goes
/// to the feasible agent below `max_load` with the highest affinity, with
/// workloads updated as tasks are handed out. Ties go to the lower agent id.
#[derive(Debug, Clone, Copy, Default)]
pub struct GreedyPlanner;

impl<S: Scalar> Planner<S> for GreedyPlanner {
    fn name(&self) -> &str {
        "greedy"
    }

    fn propose(&mut self, ctx: &PlanContext<'_, S>) -> TaskMap {
        plan(ctx)
    }
}

/// Tasks the scheduler may (re)place, in visiting order.
pub fn visiting_order(snapshot: &AttributeSnapshot) -> Vec<&TaskObject> {
    let mut tasks: Vec<&TaskObject> = snapshot
        .tasks
        .iter()
        .filter(|t| t.state != TaskLifecycle::Completed)
        .collect();
    tasks.sort_by(|a, b| b.priority.cmp(&a.priority).then(a.id.cmp(&b.id)));
    tasks
}

/// The greedy planning pass behind [`GreedyPlanner`].
pub fn plan<S: Scalar>(ctx: &PlanContext<'_, S>) -> TaskMap {
    let snapshot = ctx.snapshot;
    let mut live: Vec<_> = snapshot.schedulable_agents().collect();
    live.sort_by_key(|a| a.id);
    let mut load: BTreeMap<AgentId, u32> = live.iter().map(|a| (a.id, 0)).collect();
    let mut map = TaskMap::new();

    for task in visiting_order(snapshot) {
        let keep = ctx.pinned.get(&task.id).copied().or_else(|| {
            (task.state == TaskLifecycle::InProgress)
                .then_some(task.assignee)
                .flatten()
        });
        if let Some(agent) = keep.filter(|a| load.contains_key(a)) {
            map.insert(task.id, agent);
            *load.get_mut(&agent).expect("live") += 1;
        }
    }

    for task in visiting_order(snapshot) {
        if map.contains_key(&task.id) {
            continue;
        }
        let mut best: Option<(AgentId, S)> = None;
        for agent in &live {
            let current = load[&agent.id];
            if current >= ctx.max_load || ctx.banned.contains(&(task.id, agent.id)) {
                continue;
            }
            let Some(score) = affinity_with_load(agent, current, task, ctx.house, &ctx.weights) else {
                continue;
            };
            if best.is_none_or(|(_, top)| beats(score, top)) {
                best = Some((agent.id, score));
            }
        }
        if let Some((agent, _)) = best {
            map.insert(task.id, agent);
            *load.get_mut(&agent).expect("live") += 1;
        }
    }
    map
}

/// `a` is strictly better than `b`. Scores that only differ by rounding
/// count as a tie, so the lower agent id keeps winning whatever the weight
/// scale.
fn beats<S: Scalar>(a: S, b: S) -> bool {
    let tolerance = S::epsilon() * S::from_f64(64.0) * a.abs().max(b.abs());
    a - b > tolerance
}

/// Sum of affinities of `map`, charging each agent the load it had when
/// each of its tasks was handed out in visiting order.
pub fn total_affinity<S: Scalar>(ctx: &PlanContext<'_, S>, map: &TaskMap) -> S {
    let mut load: BTreeMap<AgentId, u32> = BTreeMap::new();
    let mut total = S::zero();
    for task in visiting_order(ctx.snapshot) {
        let Some(&agent_id) = map.get(&task.id) else { continue };
        let Some(agent) = ctx.snapshot.agent(agent_id) else { continue };
        let current = load.entry(agent_id).or_insert(0);
        if let Some(score) = affinity_with_load(agent, *current, task, ctx.house, &ctx.weights) {
            total = total + score;
        }
        *current += 1;
    }
    total
}
