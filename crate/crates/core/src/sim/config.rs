use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ids::{ContainerId, RoomId, SurfaceId};
use crate::sim::house::{Fixture, House};
use crate::sim::types::Place;
use crate::sim::SimError;

/// World description as stored in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub rooms: Vec<RoomConfig>,
    #[serde(default)]
    pub containers: Vec<ContainerConfig>,
    #[serde(default)]
    pub surfaces: Vec<SurfaceConfig>,
    #[serde(default)]
    pub objects: Vec<ObjectConfig>,
    pub spawn_room: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomConfig {
    pub id: String,
    #[serde(default)]
    pub adjacent: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContainerConfig {
    pub id: String,
    pub room: String,
    #[serde(default)]
    pub open: bool,
    /// Object ids initially inside.
    #[serde(default)]
    pub contents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceConfig {
    pub id: String,
    pub room: String,
    #[serde(default)]
    pub contents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub id: String,
    pub kind: String,
    /// Room, container or surface name. A list means "one of these", drawn
    /// from the world seed. Omit when the object appears in some
    /// container's or surface's `contents`.
    #[serde(default)]
    pub location: Option<LocationSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LocationSpec {
    Fixed(String),
    AnyOf(Vec<String>),
}

impl WorldConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::config("", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::config("", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Validated layout plus per-object candidate places.
pub(crate) struct ResolvedConfig {
    pub house: House,
    pub containers_open: Vec<bool>,
    /// (name, kind, candidate places) per object, in config order.
    pub objects: Vec<(String, String, Vec<Place>)>,
}

pub(crate) fn resolve(config: &WorldConfig) -> Result<ResolvedConfig, SimError> {
    if config.rooms.is_empty() {
        return Err(SimError::config("/rooms", "at least one room is required"));
    }
    let mut names: BTreeMap<&str, Place> = BTreeMap::new();
    fn claim<'a>(
        names: &mut BTreeMap<&'a str, Place>,
        name: &'a str,
        place: Place,
        pointer: String,
    ) -> Result<(), SimError> {
        if names.insert(name, place).is_some() {
            Err(SimError::config(pointer, format!("duplicate name {name:?}")))
        } else {
            Ok(())
        }
    }
    for (i, room) in config.rooms.iter().enumerate() {
        claim(&mut names, &room.id, Place::Room(RoomId(i as u32)), format!("/rooms/{i}/id"))?;
    }
    for (i, c) in config.containers.iter().enumerate() {
        claim(&mut names, &c.id, Place::Container(ContainerId(i as u32)), format!("/containers/{i}/id"))?;
    }
    for (i, s) in config.surfaces.iter().enumerate() {
        claim(&mut names, &s.id, Place::Surface(SurfaceId(i as u32)), format!("/surfaces/{i}/id"))?;
    }
    let room_of = |name: &str, pointer: String| match names.get(name) {
        Some(Place::Room(r)) => Ok(*r),
        _ => Err(SimError::config(pointer, format!("unknown room {name:?}"))),
    };

    let mut adjacency = vec![Vec::new(); config.rooms.len()];
    for (i, room) in config.rooms.iter().enumerate() {
        for (j, adj) in room.adjacent.iter().enumerate() {
            let other = room_of(adj, format!("/rooms/{i}/adjacent/{j}"))?;
            if other.index() == i {
                return Err(SimError::config(format!("/rooms/{i}/adjacent/{j}"), "self loop"));
            }
            adjacency[i].push(other);
            adjacency[other.index()].push(RoomId(i as u32));
        }
    }
    let containers = config
        .containers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(Fixture { name: c.id.clone(), room: room_of(&c.room, format!("/containers/{i}/room"))? })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let surfaces = config
        .surfaces
        .iter()
        .enumerate()
        .map(|(i, s)| {
            Ok(Fixture { name: s.id.clone(), room: room_of(&s.room, format!("/surfaces/{i}/room"))? })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    let spawn_room = room_of(&config.spawn_room, "/spawn_room".into())?;
    let house = House::new(
        config.rooms.iter().map(|r| r.id.clone()).collect(),
        adjacency,
        containers,
        surfaces,
        spawn_room,
    );
    if !house.is_connected() {
        return Err(SimError::config("/rooms", "room graph is not connected"));
    }

    let mut object_index: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, obj) in config.objects.iter().enumerate() {
        if names.contains_key(obj.id.as_str()) || object_index.insert(&obj.id, i).is_some() {
            return Err(SimError::config(format!("/objects/{i}/id"), format!("duplicate name {:?}", obj.id)));
        }
    }
    let mut candidates: Vec<Option<Vec<Place>>> = vec![None; config.objects.len()];
    let mut place_listed = |object: &str, place: Place, pointer: String| -> Result<(), SimError> {
        let Some(&i) = object_index.get(object) else {
            return Err(SimError::config(pointer, format!("unknown object {object:?}")));
        };
        if candidates[i].is_some() {
            return Err(SimError::config(pointer, format!("object {object:?} placed twice")));
        }
        candidates[i] = Some(vec![place]);
        Ok(())
    };
    for (i, c) in config.containers.iter().enumerate() {
        for (j, o) in c.contents.iter().enumerate() {
            place_listed(o, Place::Container(ContainerId(i as u32)), format!("/containers/{i}/contents/{j}"))?;
        }
    }
    for (i, s) in config.surfaces.iter().enumerate() {
        for (j, o) in s.contents.iter().enumerate() {
            place_listed(o, Place::Surface(SurfaceId(i as u32)), format!("/surfaces/{i}/contents/{j}"))?;
        }
    }
    let mut objects = Vec::with_capacity(config.objects.len());
    for (i, obj) in config.objects.iter().enumerate() {
        let pointer = format!("/objects/{i}/location");
        let listed = candidates[i].take();
        let places = match (&obj.location, listed) {
            (Some(_), Some(_)) => {
                return Err(SimError::config(pointer, format!("object {:?} placed twice", obj.id)))
            }
            (None, Some(places)) => places,
            (None, None) => {
                return Err(SimError::config(pointer, format!("object {:?} has no location", obj.id)))
            }
            (Some(LocationSpec::Fixed(name)), None) => vec![lookup(&names, name, &pointer)?],
            (Some(LocationSpec::AnyOf(list)), None) => {
                if list.is_empty() {
                    return Err(SimError::config(pointer, "empty candidate list"));
                }
                list.iter()
                    .enumerate()
                    .map(|(j, name)| lookup(&names, name, &format!("{pointer}/{j}")))
                    .collect::<Result<_, _>>()?
            }
        };
        objects.push((obj.id.clone(), obj.kind.clone(), places));
    }

    Ok(ResolvedConfig {
        house,
        containers_open: config.containers.iter().map(|c| c.open).collect(),
        objects,
    })
}

fn lookup(names: &BTreeMap<&str, Place>, name: &str, pointer: &str) -> Result<Place, SimError> {
    names
        .get(name)
        .copied()
        .ok_or_else(|| SimError::config(pointer, format!("unknown location {name:?}")))
}
