use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{AllocatorKind, ControlConfig};
use crate::harness::HarnessError;
use crate::ids::Tick;
use crate::sim::config::WorldConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dynamics {
    #[default]
    Static,
    /// One agent disappears at the change tick.
    Dropout,
    /// One agent joins at the change tick.
    Addition,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default)]
    pub capabilities: BTreeSet<String>,
    /// Starting room; the world's spawn room when absent.
    #[serde(default)]
    pub room: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialAgents {
    Count(u32),
    List(Vec<AgentSpec>),
}

impl InitialAgents {
    pub fn specs(&self) -> Vec<AgentSpec> {
        match self {
            Self::Count(n) => vec![AgentSpec::default(); *n as usize],
            Self::List(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Count(n) => *n as usize,
            Self::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub object_kind: String,
    /// Surface name in the world config.
    pub surface: String,
    pub count: u32,
    #[serde(default)]
    pub priority: i32,
    #[serde(default)]
    pub required_capabilities: BTreeSet<String>,
    /// Tick at which the task is announced; known from the start if absent.
    #[serde(default)]
    pub arrives_at: Option<Tick>,
}

fn default_window() -> [Tick; 2] {
    [5, 10]
}

fn default_budget() -> Tick {
    200
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    /// World config path, relative to the scenario file.
    pub world_config: PathBuf,
    pub goals: Vec<GoalSpec>,
    pub initial_agents: InitialAgents,
    #[serde(default)]
    pub dynamics: Dynamics,
    /// Inclusive tick range the change tick is drawn from.
    #[serde(default = "default_window")]
    pub change_window: [Tick; 2],
    #[serde(default = "default_budget")]
    pub step_budget: Tick,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub allocator: AllocatorKind,
    #[serde(default)]
    pub config: ControlConfig,
    /// Agent that joins in addition scenarios.
    #[serde(default)]
    pub added_agent: AgentSpec,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(format!("scenario {:?}: {m}", self.name)));
        if self.initial_agents.is_empty() {
            return bad("initial_agents must be at least 1".into());
        }
        if self.dynamics == Dynamics::Dropout && self.initial_agents.len() < 2 {
            return bad("dropout needs at least 2 initial agents".into());
        }
        let [lo, hi] = self.change_window;
        if lo == 0 || lo > hi {
            return bad(format!("change_window [{lo}, {hi}] must satisfy 1 <= lo <= hi"));
        }
        if self.step_budget == 0 {
            return bad("step_budget must be positive".into());
        }
        if self.goals.is_empty() {
            return bad("at least one goal is required".into());
        }
        if let Some(g) = self.goals.iter().find(|g| g.count == 0) {
            return bad(format!("goal {:?} on {:?} has count 0", g.object_kind, g.surface));
        }
        self.config.validate()?;
        Ok(())
    }
}

/// A validated scenario with its world loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub world: WorldConfig,
}

impl Scenario {
    pub fn new(spec: ScenarioSpec, world: WorldConfig) -> Result<Self, HarnessError> {
        spec.validate()?;
        for g in &spec.goals {
            if !world.surfaces.iter().any(|s| s.id == g.surface) {
                return Err(HarnessError::Config(format!("goal surface {:?} is not in the world", g.surface)));
            }
            let have = world.objects.iter().filter(|o| o.kind == g.object_kind).count();
            if g.count as usize > have {
                return Err(HarnessError::Config(format!(
                    "goal needs {} {:?} but the world has {have}",
                    g.count, g.object_kind
                )));
            }
        }
        Ok(Self { spec, world })
    }

    /// Read a scenario file and the world config it points at.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let spec: ScenarioSpec = serde_json::from_str(&text)
            .map_err(|source| HarnessError::Json { path: path.display().to_string(), source })?;
        let world_path = path.parent().unwrap_or(Path::new(".")).join(&spec.world_config);
        let world = WorldConfig::load(&world_path)?;
        Self::new(spec, world)
    }

    pub fn with_config(mut self, config: ControlConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        self.spec.config = config;
        Ok(self)
    }
}
