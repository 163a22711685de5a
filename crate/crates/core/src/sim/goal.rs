use serde::{Deserialize, Serialize};

use crate::ids::SurfaceId;
use crate::sim::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalKind {
    /// `count` objects of `object_kind` resting on `surface`.
    OnSurface,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalPredicate {
    pub kind: GoalKind,
    pub object_kind: String,
    pub surface: SurfaceId,
    pub count: u32,
}

impl GoalPredicate {
    pub fn on_surface(object_kind: impl Into<String>, surface: SurfaceId, count: u32) -> Self {
        Self { kind: GoalKind::OnSurface, object_kind: object_kind.into(), surface, count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalProgress {
    /// `(satisfied units, fraction)` per goal, in goal order.
    pub goals: Vec<(u32, f64)>,
    pub all_done: bool,
}

impl GoalProgress {
    pub fn fractions(&self) -> Vec<f64> {
        self.goals.iter().map(|&(_, f)| f).collect()
    }
}

/// Count goal-kind objects on each goal surface, capped at the goal count.
pub fn goal_progress(world: &WorldState, goals: &[GoalPredicate]) -> GoalProgress {
    let goals: Vec<(u32, f64)> = goals
        .iter()
        .map(|goal| {
            let on_surface = world
                .surface_contents(goal.surface)
                .filter(|&o| world.object_kind(o) == goal.object_kind)
                .count() as u32;
            let satisfied = on_surface.min(goal.count);
            (satisfied, f64::from(satisfied) / f64::from(goal.count.max(1)))
        })
        .collect();
    let all_done = goals.iter().all(|&(_, f)| f >= 1.0);
    GoalProgress { goals, all_done }
}
