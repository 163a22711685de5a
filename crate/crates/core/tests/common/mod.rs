#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use drama_core::resource::{AgentLifecycle, AgentObject, TaskObject};
use drama_core::sim::config::WorldConfig;
use drama_core::sim::goal::GoalPredicate;
use drama_core::sim::house::House;
use drama_core::sim::world::{init_world, WorldState};
use drama_core::{AgentId, RoomId, TaskId};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn scenario_path(name: &str) -> PathBuf {
    fixtures().join("scenarios").join(format!("{name}.json"))
}

pub fn house_config() -> WorldConfig {
    WorldConfig::load(&fixtures().join("house_cwah.json")).expect("default house loads")
}

pub fn house_world(seed: u64) -> WorldState {
    init_world(&house_config(), seed).expect("default house is valid")
}

pub fn house() -> Arc<House> {
    house_world(0).shared_house()
}

pub fn room(house: &House, name: &str) -> RoomId {
    house.room_by_name(name).unwrap_or_else(|| panic!("no room {name}"))
}

pub fn caps(tags: &[&str]) -> BTreeSet<String> {
    tags.iter().map(|t| (*t).to_owned()).collect()
}

pub fn active_agent(id: u32, location: RoomId) -> AgentObject {
    AgentObject::new(AgentId(id), BTreeSet::new(), location, 0).with_state(AgentLifecycle::Active)
}

pub fn task_on(house: &House, id: u32, kind: &str, surface: &str, count: u32) -> TaskObject {
    let surface = house.surface_by_name(surface).unwrap_or_else(|| panic!("no surface {surface}"));
    TaskObject::new(TaskId(id), GoalPredicate::on_surface(kind, surface, count))
}
