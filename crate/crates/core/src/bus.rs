//! In-memory lockstep message fabric between the control plane, the
//! environment harness and the workers.
//!
//! Every message is stamped with the tick it was sent at and a per-sender
//! sequence number. A message sent at tick `t` becomes visible to
//! [`Bus::drain`] from tick `t + 1`, and drained batches are ordered by
//! `(tick, sender, seq)`, which keeps per-pair FIFO order.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{Directive, TriggerEvent};
use crate::ids::{AgentId, ObjectId, Tick};
use crate::worker::StatusReport;

/// Address on the bus. Ordering is the sender tie-break when draining.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Agent(AgentId),
    Control,
    Env,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    To(Endpoint),
    /// Every registered endpoint except the sender.
    Broadcast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Heartbeat,
    StatusReport(StatusReport),
    Directive(Directive),
    TriggerEvent(TriggerEvent),
    /// Objects the sender is currently going for. Replaces any earlier claim
    /// from the same sender.
    IntentionClaim { objects: Vec<ObjectId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub tick: Tick,
    pub sender: Endpoint,
    pub recipient: Recipient,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("unknown sender {0:?}")]
    UnknownSender(Endpoint),
    #[error("unknown recipient {0:?}")]
    UnknownRecipient(Endpoint),
}

#[derive(Debug, Default)]
pub struct Bus {
    next_seq: BTreeMap<Endpoint, u64>,
    closed: BTreeSet<Endpoint>,
    queues: BTreeMap<Endpoint, Vec<Message>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, endpoint: Endpoint) {
        self.closed.remove(&endpoint);
        self.next_seq.entry(endpoint).or_insert(0);
        self.queues.entry(endpoint).or_default();
    }

    pub fn is_registered(&self, endpoint: Endpoint) -> bool {
        self.queues.contains_key(&endpoint)
    }

    /// Detach an endpoint: it can no longer send and its pending inbox is
    /// discarded. Messages it sent earlier are still delivered.
    pub fn close(&mut self, endpoint: Endpoint) {
        self.queues.remove(&endpoint);
        self.closed.insert(endpoint);
    }

    pub fn send(
        &mut self,
        tick: Tick,
        sender: Endpoint,
        recipient: Recipient,
        payload: Payload,
    ) -> Result<u64, BusError> {
        if !self.queues.contains_key(&sender) {
            return Err(BusError::UnknownSender(sender));
        }
        let targets: Vec<Endpoint> = match recipient {
            Recipient::To(to) => {
                if !self.queues.contains_key(&to) {
                    if self.closed.contains(&to) {
                        // Mail to a dropped endpoint vanishes.
                        Vec::new()
                    } else {
                        return Err(BusError::UnknownRecipient(to));
                    }
                } else {
                    vec![to]
                }
            }
            Recipient::Broadcast => self.queues.keys().copied().filter(|&e| e != sender).collect(),
        };
        let seq_slot = self.next_seq.get_mut(&sender).expect("registered sender has a counter");
        *seq_slot += 1;
        let seq = *seq_slot;
        let message = Message { seq, tick, sender, recipient, payload };
        for target in targets {
            self.queues
                .get_mut(&target)
                .expect("target registered")
                .push(message.clone());
        }
        Ok(seq)
    }

    /// Remove and return every message for `recipient` sent strictly before
    /// `now`, ordered by `(tick, sender, seq)`.
    pub fn drain(&mut self, recipient: Endpoint, now: Tick) -> Result<Vec<Message>, BusError> {
        let queue = self
            .queues
            .get_mut(&recipient)
            .ok_or(BusError::UnknownRecipient(recipient))?;
        let (mut ready, pending): (Vec<_>, Vec<_>) = queue.drain(..).partition(|m| m.tick < now);
        *queue = pending;
        ready.sort_by_key(|m| (m.tick, m.sender, m.seq));
        Ok(ready)
    }

    /// Messages waiting for `recipient`, visible or not.
    pub fn pending(&self, recipient: Endpoint) -> usize {
        self.queues.get(&recipient).map_or(0, Vec::len)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus_with(endpoints: &[Endpoint]) -> Bus {
        let mut bus = Bus::new();
        for &e in endpoints {
            bus.register(e);
        }
        bus
    }

    const A0: Endpoint = Endpoint::Agent(AgentId(0));
    const A1: Endpoint = Endpoint::Agent(AgentId(1));

    #[test]
    fn fifo_per_pair() {
        let mut bus = bus_with(&[A0, Endpoint::Control]);
        bus.send(3, A0, Recipient::To(Endpoint::Control), Payload::Heartbeat).unwrap();
        bus.send(
            3,
            A0,
            Recipient::To(Endpoint::Control),
            Payload::IntentionClaim { objects: vec![ObjectId(1)] },
        )
        .unwrap();
        let got = bus.drain(Endpoint::Control, 4).unwrap();
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].payload, Payload::Heartbeat);
        assert!(got[0].seq < got[1].seq);
    }

    #[test]
    fn unregistered_sender_rejected() {
        let mut bus = bus_with(&[Endpoint::Control]);
        assert_eq!(
            bus.send(0, A1, Recipient::To(Endpoint::Control), Payload::Heartbeat),
            Err(BusError::UnknownSender(A1))
        );
        assert_eq!(bus.drain(A1, 1), Err(BusError::UnknownRecipient(A1)));
    }

    #[test]
    fn broadcast_reaches_every_other_endpoint_once() {
        let all = [A0, A1, Endpoint::Agent(AgentId(2)), Endpoint::Control];
        let mut bus = bus_with(&all);
        bus.send(0, A1, Recipient::Broadcast, Payload::IntentionClaim { objects: vec![] })
            .unwrap();
        let mut deliveries = 0;
        for e in all {
            let got = bus.drain(e, 1).unwrap();
            if e == A1 {
                assert!(got.is_empty());
            } else {
                assert_eq!(got.len(), 1);
            }
            deliveries += got.len();
        }
        assert_eq!(deliveries, 3);
    }

    #[test]
    fn delivery_waits_one_tick() {
        let mut bus = bus_with(&[A0, Endpoint::Control]);
        assert!(bus.drain(Endpoint::Control, 0).unwrap().is_empty());
        bus.send(5, A0, Recipient::To(Endpoint::Control), Payload::Heartbeat).unwrap();
        assert!(bus.drain(Endpoint::Control, 5).unwrap().is_empty());
        assert_eq!(bus.drain(Endpoint::Control, 6).unwrap().len(), 1);
    }

    #[test]
    fn interleaved_senders_sorted_by_key() {
        let mut bus = bus_with(&[A0, A1, Endpoint::Control]);
        let to = Recipient::To(Endpoint::Control);
        bus.send(2, A0, to, Payload::Heartbeat).unwrap();
        bus.send(2, A1, to, Payload::Heartbeat).unwrap();
        bus.send(2, A0, to, Payload::Heartbeat).unwrap();
        let order: Vec<_> = bus
            .drain(Endpoint::Control, 3)
            .unwrap()
            .iter()
            .map(|m| (m.sender, m.seq))
            .collect();
        assert_eq!(order, vec![(A0, 1), (A0, 2), (A1, 1)]);
    }

    #[test]
    fn closed_endpoint_goes_silent() {
        let mut bus = bus_with(&[A0, Endpoint::Control]);
        bus.send(1, A0, Recipient::To(Endpoint::Control), Payload::Heartbeat).unwrap();
        bus.send(1, Endpoint::Control, Recipient::To(A0), Payload::Heartbeat).unwrap();
        bus.close(A0);
        assert_eq!(
            bus.send(2, A0, Recipient::To(Endpoint::Control), Payload::Heartbeat),
            Err(BusError::UnknownSender(A0))
        );
        // Sent before the drop: still delivered.
        assert_eq!(bus.drain(Endpoint::Control, 3).unwrap().len(), 1);
        // Mail to the dropped endpoint is discarded rather than rejected.
        bus.send(2, Endpoint::Control, Recipient::To(A0), Payload::Heartbeat).unwrap();
        assert_eq!(bus.drain(A0, 3), Err(BusError::UnknownRecipient(A0)));
    }
}
