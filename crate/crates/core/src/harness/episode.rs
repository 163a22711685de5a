use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bus::{Bus, Endpoint, Payload, Recipient};
use crate::control::{AllocatorKind, ControlPlane, TriggerEvent, TriggerKind};
use crate::harness::scenario::{AgentSpec, Dynamics, Scenario};
use crate::harness::HarnessError;
use crate::ids::{AgentId, ObjectId, RoomId, SurfaceId, TaskId, Tick};
use crate::resource::TaskObject;
use crate::sim::goal::{goal_progress, GoalPredicate};
use crate::sim::house::House;
use crate::sim::types::{ActionOutcome, PrimitiveAction};
use crate::sim::world::init_world;
use crate::worker::Worker;

/// Scenario randomness (change tick, dropped agent) uses its own stream so
/// it never shifts the world layout drawn from the same seed.
const SCENARIO_STREAM: u64 = 1;

/// One row of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub scenario: String,
    pub allocator: AllocatorKind,
    pub seed: u64,
    pub success: bool,
    /// Steps of the agent that completed the final goal unit.
    #[serde(rename = "as")]
    pub agent_steps: Option<u64>,
    /// Active steps summed over all agents.
    #[serde(rename = "ts")]
    pub total_steps: u64,
    pub ticks_used: Tick,
    pub assignment_epochs: u64,
    pub events: Vec<TriggerEvent>,
    pub change_tick: Option<Tick>,
    pub dropped_agent: Option<AgentId>,
    /// Whether the dropped agent held unfinished work when it vanished.
    pub dropped_held_task: Option<bool>,
    pub finisher: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceGoal {
    pub task: TaskId,
    pub object_kind: String,
    pub surface: SurfaceId,
    pub count: u32,
}

/// First line of a trace file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scenario: String,
    pub allocator: AllocatorKind,
    pub seed: u64,
    pub step_budget: Tick,
    pub goals: Vec<TraceGoal>,
    /// Kind of every object, so outcomes can be read without the world.
    pub object_kinds: BTreeMap<ObjectId, String>,
}

/// Per-tick trace line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: Tick,
    pub actions: BTreeMap<AgentId, PrimitiveAction>,
    pub outcomes: Vec<ActionOutcome>,
    pub goal_fractions: Vec<f64>,
}

struct Trace<'a> {
    out: Option<&'a mut dyn Write>,
    epochs_written: usize,
}

impl Trace<'_> {
    fn line(&mut self, value: &impl Serialize) -> Result<(), HarnessError> {
        if let Some(out) = self.out.as_mut() {
            let text = serde_json::to_string(value).expect("trace records serialize");
            writeln!(out, "{text}").map_err(|e| HarnessError::io("trace", e))?;
        }
        Ok(())
    }

    fn epochs(&mut self, control: &ControlPlane) -> Result<(), HarnessError> {
        let fresh = &control.epochs()[self.epochs_written..];
        if self.out.is_some() {
            for record in fresh {
                self.line(record)?;
            }
        }
        self.epochs_written = control.epochs().len();
        Ok(())
    }
}

fn room_for(house: &House, spec: &AgentSpec) -> Result<RoomId, HarnessError> {
    match &spec.room {
        None => Ok(house.spawn_room()),
        Some(name) => house
            .room_by_name(name)
            .ok_or_else(|| HarnessError::Config(format!("unknown agent room {name:?}"))),
    }
}

fn send_directives(bus: &mut Bus, control: &mut ControlPlane, tick: Tick) -> Result<(), HarnessError> {
    for d in control.take_directives() {
        let to = Recipient::To(Endpoint::Agent(d.agent()));
        bus.send(tick, Endpoint::Control, to, Payload::Directive(d))?;
    }
    Ok(())
}

/// Run one episode to success or budget exhaustion. Deterministic in
/// `(scenario, allocator, seed)`. When `trace` is given, a header line,
/// every scheduling epoch and every tick are written to it as JSON lines.
pub fn run_episode(
    scenario: &Scenario,
    allocator: AllocatorKind,
    seed: u64,
    trace: Option<&mut dyn Write>,
) -> Result<EpisodeResult, HarnessError> {
    let spec = &scenario.spec;
    let mut trace = Trace { out: trace, epochs_written: 0 };
    let mut world = init_world(&scenario.world, seed)?;
    let house: Arc<House> = world.shared_house();

    let goals: Vec<GoalPredicate> = spec
        .goals
        .iter()
        .map(|g| {
            let surface = house
                .surface_by_name(&g.surface)
                .ok_or_else(|| HarnessError::Config(format!("unknown goal surface {:?}", g.surface)))?;
            Ok(GoalPredicate::on_surface(g.object_kind.clone(), surface, g.count))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SCENARIO_STREAM);
    let [lo, hi] = spec.change_window;
    let change_tick = (spec.dynamics != Dynamics::Static).then(|| rng.gen_range(lo..=hi));
    let initial = spec.initial_agents.specs();
    let dropped_agent = (spec.dynamics == Dynamics::Dropout)
        .then(|| AgentId(rng.gen_range(0..initial.len() as u32)));

    trace.line(&TraceHeader {
        scenario: spec.name.clone(),
        allocator,
        seed,
        step_budget: spec.step_budget,
        goals: goals
            .iter()
            .enumerate()
            .map(|(i, g)| TraceGoal {
                task: TaskId(i as u32),
                object_kind: g.object_kind.clone(),
                surface: g.surface,
                count: g.count,
            })
            .collect(),
        object_kinds: world.objects().map(|(id, o)| (id, o.kind.clone())).collect(),
    })?;

    let config = &spec.config;
    let heartbeat_period = config.monitor.heartbeat_period.max(1);
    let mut bus = Bus::new();
    bus.register(Endpoint::Control);
    bus.register(Endpoint::Env);
    let mut control = ControlPlane::new(config.clone(), allocator, Arc::clone(&house))?;
    let mut workers: BTreeMap<AgentId, Worker> = BTreeMap::new();
    let mut joined: BTreeMap<AgentId, Tick> = BTreeMap::new();
    let mut last_active: BTreeMap<AgentId, Tick> = BTreeMap::new();

    for (i, agent) in initial.iter().enumerate() {
        let id = AgentId(i as u32);
        let room = room_for(&house, agent)?;
        world.add_agent(id, Some(room))?;
        control.admit_agent(id, agent.capabilities.clone(), room, 0, true)?;
        workers.insert(id, Worker::new(id, Arc::clone(&house), room, config.max_load));
        bus.register(Endpoint::Agent(id));
        joined.insert(id, 1);
    }

    for (i, (g, goal)) in spec.goals.iter().zip(&goals).enumerate() {
        let mut task = TaskObject::new(TaskId(i as u32), goal.clone());
        task.priority = g.priority;
        task.required_capabilities = g.required_capabilities.clone();
        if g.arrives_at.is_some() {
            control.announce_task(task);
        } else {
            control.add_task(task)?;
        }
    }

    control.initial_schedule(0)?;
    send_directives(&mut bus, &mut control, 0)?;
    trace.epochs(&control)?;

    let mut reported_done = vec![false; goals.len()];
    let mut dropped_held_task = None;
    let mut success = false;
    let mut finisher = None;
    let mut ticks_used = 0;

    for t in 1..=spec.step_budget {
        ticks_used = t;
        if change_tick == Some(t) {
            match spec.dynamics {
                Dynamics::Dropout => {
                    let id = dropped_agent.expect("drawn for dropout");
                    dropped_held_task = Some(!control.registry().tasks_held_by(id).is_empty());
                    world.drop_agent(id)?;
                    workers.remove(&id);
                    bus.close(Endpoint::Agent(id));
                }
                Dynamics::Addition => {
                    let id = AgentId(initial.len() as u32);
                    let room = room_for(&house, &spec.added_agent)?;
                    world.add_agent(id, Some(room))?;
                    control.admit_agent(id, spec.added_agent.capabilities.clone(), room, t, false)?;
                    workers.insert(id, Worker::new(id, Arc::clone(&house), room, config.max_load));
                    bus.register(Endpoint::Agent(id));
                    joined.insert(id, t);
                    let event = TriggerEvent::agent(t, TriggerKind::AgentJoined, id);
                    bus.send(t, Endpoint::Env, Recipient::To(Endpoint::Control), Payload::TriggerEvent(event))?;
                }
                Dynamics::Static => {}
            }
        }
        for (i, g) in spec.goals.iter().enumerate() {
            if g.arrives_at == Some(t) {
                let event = TriggerEvent::task(t, TriggerKind::TaskArrived, TaskId(i as u32));
                bus.send(t, Endpoint::Env, Recipient::To(Endpoint::Control), Payload::TriggerEvent(event))?;
            }
        }

        // Control plane.
        for message in bus.drain(Endpoint::Control, t)? {
            control.receive(&message, t)?;
        }
        control.sweep(t)?;
        control.check_invariants()?;
        send_directives(&mut bus, &mut control, t)?;
        trace.epochs(&control)?;
        bus.drain(Endpoint::Env, t)?;

        // Workers, in ascending id.
        let mut actions = BTreeMap::new();
        for (&id, worker) in workers.iter_mut() {
            let me = Endpoint::Agent(id);
            for message in bus.drain(me, t)? {
                worker.handle_message(&message);
            }
            worker.observe(world.observe(id)?);
            actions.insert(id, worker.decide());
            if t % heartbeat_period == 0 {
                let to = Recipient::To(Endpoint::Control);
                bus.send(t, me, to, Payload::Heartbeat)?;
                bus.send(t, me, to, Payload::StatusReport(worker.make_report(t)))?;
            }
            let objects = worker.state().intentions.clone();
            bus.send(t, me, Recipient::Broadcast, Payload::IntentionClaim { objects })?;
        }

        // Environment.
        let outcomes = world.step(&actions)?;
        for (id, outcome) in &outcomes {
            workers.get_mut(id).expect("acting agent has a worker").record_outcome(outcome.clone());
        }
        for &id in actions.keys() {
            last_active.insert(id, t);
        }
        let progress = goal_progress(&world, &goals);
        let mut newly_done = Vec::new();
        for (i, &(_, fraction)) in progress.goals.iter().enumerate() {
            let arrived = spec.goals[i].arrives_at.is_none_or(|a| a <= t);
            if fraction >= 1.0 && !reported_done[i] && arrived {
                reported_done[i] = true;
                newly_done.push(i);
                let event = TriggerEvent::task(t, TriggerKind::TaskCompleted, TaskId(i as u32));
                bus.send(t, Endpoint::Env, Recipient::To(Endpoint::Control), Payload::TriggerEvent(event))?;
            }
        }
        trace.line(&TickRecord {
            tick: t,
            actions: actions.clone(),
            outcomes: outcomes.values().cloned().collect(),
            goal_fractions: progress.fractions(),
        })?;

        if progress.all_done {
            success = true;
            finisher = outcomes
                .values()
                .filter(|o| o.success)
                .filter_map(|o| match o.action {
                    PrimitiveAction::PutOn { object, surface } => Some((o.agent, object, surface)),
                    _ => None,
                })
                .filter(|&(_, object, surface)| {
                    newly_done.iter().any(|&i| {
                        goals[i].surface == surface && goals[i].object_kind == world.object_kind(object)
                    })
                })
                .map(|(agent, _, _)| agent)
                .last();
            break;
        }
    }

    let steps = |id: &AgentId| last_active.get(id).map(|&last| last + 1 - joined[id]);
    let total_steps = last_active.keys().filter_map(steps).sum();
    let agent_steps = finisher.as_ref().and_then(steps);

    Ok(EpisodeResult {
        scenario: spec.name.clone(),
        allocator,
        seed,
        success,
        agent_steps: if success { agent_steps } else { None },
        total_steps,
        ticks_used,
        assignment_epochs: control.epoch(),
        events: control.events().to_vec(),
        change_tick,
        dropped_agent,
        dropped_held_task,
        finisher,
    })
}
