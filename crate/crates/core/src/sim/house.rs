use std::collections::VecDeque;

use crate::ids::{ContainerId, RoomId, SurfaceId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub name: String,
    pub room: RoomId,
}

/// Static layout of a house: rooms, their adjacency, containers and
/// surfaces. Shared read-only by the world, workers and the scheduler.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct House {
    rooms: Vec<String>,
    adjacency: Vec<Vec<RoomId>>,
    distance: Vec<Vec<u32>>,
    containers: Vec<Fixture>,
    surfaces: Vec<Fixture>,
    spawn_room: RoomId,
}

impl House {
    /// `adjacency` must be symmetric and connected; callers validate.
    pub(crate) fn new(
        rooms: Vec<String>,
        mut adjacency: Vec<Vec<RoomId>>,
        containers: Vec<Fixture>,
        surfaces: Vec<Fixture>,
        spawn_room: RoomId,
    ) -> Self {
        for list in &mut adjacency {
            list.sort();
            list.dedup();
        }
        let distance = (0..rooms.len())
            .map(|src| bfs_distances(&adjacency, RoomId(src as u32)))
            .collect();
        Self { rooms, adjacency, distance, containers, surfaces, spawn_room }
    }

    pub fn room_count(&self) -> usize {
        self.rooms.len()
    }

    pub fn rooms(&self) -> impl Iterator<Item = RoomId> {
        (0..self.rooms.len() as u32).map(RoomId)
    }

    pub fn room_name(&self, room: RoomId) -> &str {
        &self.rooms[room.index()]
    }

    pub fn room_by_name(&self, name: &str) -> Option<RoomId> {
        self.rooms.iter().position(|r| r == name).map(|i| RoomId(i as u32))
    }

    pub fn contains_room(&self, room: RoomId) -> bool {
        room.index() < self.rooms.len()
    }

    pub fn neighbors(&self, room: RoomId) -> &[RoomId] {
        &self.adjacency[room.index()]
    }

    pub fn spawn_room(&self) -> RoomId {
        self.spawn_room
    }

    /// Hop distance; `u32::MAX` if unreachable.
    pub fn distance(&self, from: RoomId, to: RoomId) -> u32 {
        self.distance[from.index()][to.index()]
    }

    /// First room on a shortest path from `from` towards `to`, preferring
    /// the lowest room id among equally short routes.
    pub fn next_hop(&self, from: RoomId, to: RoomId) -> RoomId {
        if from == to {
            return from;
        }
        let remaining = self.distance(from, to);
        self.neighbors(from)
            .iter()
            .copied()
            .find(|&n| self.distance(n, to) + 1 == remaining)
            .unwrap_or(from)
    }

    /// Rooms visited after `from` when walking to `to` one hop at a time.
    pub fn path(&self, from: RoomId, to: RoomId) -> Vec<RoomId> {
        let mut path = Vec::new();
        let mut at = from;
        while at != to {
            let next = self.next_hop(at, to);
            if next == at {
                break;
            }
            path.push(next);
            at = next;
        }
        path
    }

    pub fn container_count(&self) -> usize {
        self.containers.len()
    }

    pub fn container(&self, id: ContainerId) -> Option<&Fixture> {
        self.containers.get(id.index())
    }

    pub fn container_room(&self, id: ContainerId) -> RoomId {
        self.containers[id.index()].room
    }

    pub fn containers_in(&self, room: RoomId) -> impl Iterator<Item = ContainerId> + '_ {
        self.containers
            .iter()
            .enumerate()
            .filter(move |(_, c)| c.room == room)
            .map(|(i, _)| ContainerId(i as u32))
    }

    pub fn surface_count(&self) -> usize {
        self.surfaces.len()
    }

    pub fn surface(&self, id: SurfaceId) -> Option<&Fixture> {
        self.surfaces.get(id.index())
    }

    pub fn surface_room(&self, id: SurfaceId) -> RoomId {
        self.surfaces[id.index()].room
    }

    pub fn surface_by_name(&self, name: &str) -> Option<SurfaceId> {
        self.surfaces
            .iter()
            .position(|s| s.name == name)
            .map(|i| SurfaceId(i as u32))
    }

    pub fn surfaces_in(&self, room: RoomId) -> impl Iterator<Item = SurfaceId> + '_ {
        self.surfaces
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.room == room)
            .map(|(i, _)| SurfaceId(i as u32))
    }

    pub fn is_connected(&self) -> bool {
        self.distance
            .first()
            .is_none_or(|row| row.iter().all(|&d| d != u32::MAX))
    }
}

fn bfs_distances(adjacency: &[Vec<RoomId>], src: RoomId) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adjacency.len()];
    let mut queue = VecDeque::from([src]);
    dist[src.index()] = 0;
    while let Some(room) = queue.pop_front() {
        let d = dist[room.index()];
        for &next in &adjacency[room.index()] {
            if dist[next.index()] == u32::MAX {
                dist[next.index()] = d + 1;
                queue.push_back(next);
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;

    /// kitchen - livingroom - bedroom - bathroom, plus kitchen - bathroom.
    fn ring() -> House {
        let adj = vec![
            vec![RoomId(1), RoomId(3)],
            vec![RoomId(0), RoomId(2)],
            vec![RoomId(1), RoomId(3)],
            vec![RoomId(2), RoomId(0)],
        ];
        House::new(
            ["kitchen", "livingroom", "bedroom", "bathroom"].map(String::from).to_vec(),
            adj,
            vec![],
            vec![],
            RoomId(1),
        )
    }

    #[test]
    fn equal_routes_prefer_low_room_id() {
        let house = ring();
        assert_eq!(house.distance(RoomId(2), RoomId(0)), 2);
        // bedroom -> kitchen: via livingroom (1) or bathroom (3); 1 wins.
        assert_eq!(house.path(RoomId(2), RoomId(0)), vec![RoomId(1), RoomId(0)]);
        assert!(house.is_connected());
    }
}
