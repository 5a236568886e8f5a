use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::protocol::{Message, Timer};
use crate::world::{CellId, ChannelId, ProviderId};

/// Ordering among simultaneous events: capacity freed by a departure is
/// visible to an arrival at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    Departure = 0,
    MessageDelivery = 1,
    Timer = 2,
    SenseSweep = 3,
    Arrival = 4,
    RateRedraw = 5,
    EndOfRun = 6,
}

#[derive(Debug, Clone)]
pub enum Payload {
    Arrival { provider: ProviderId, generation: u64 },
    Departure { call: u64, provider: ProviderId, site: usize, channel: ChannelId },
    Deliver(Message),
    Protocol(Timer),
    PendingTimeout { cell: CellId, call: u64 },
    SenseSweep,
    RateRedraw,
    EndOfRun,
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::Arrival { .. } => EventKind::Arrival,
            Payload::Departure { .. } => EventKind::Departure,
            Payload::Deliver(_) => EventKind::MessageDelivery,
            Payload::Protocol(_) | Payload::PendingTimeout { .. } => EventKind::Timer,
            Payload::SenseSweep => EventKind::SenseSweep,
            Payload::RateRedraw => EventKind::RateRedraw,
            Payload::EndOfRun => EventKind::EndOfRun,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub sequence: u64,
    pub payload: Payload,
}

impl Event {
    fn key(&self) -> (f64, EventKind, u64) {
        (self.time, self.kind, self.sequence)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // reversed so BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        let (ta, ka, sa) = self.key();
        let (tb, kb, sb) = other.key();
        tb.total_cmp(&ta).then(kb.cmp(&ka)).then(sb.cmp(&sa))
    }
}

/// Min-queue ordered by (time, kind, insertion sequence).
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Event>,
    next_seq: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, time: f64, payload: Payload) {
        let kind = payload.kind();
        self.heap.push(Event { time, kind, sequence: self.next_seq, payload });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arrival() -> Payload {
        Payload::Arrival { provider: ProviderId(0), generation: 0 }
    }

    fn departure() -> Payload {
        Payload::Departure { call: 0, provider: ProviderId(0), site: 0, channel: ChannelId(0) }
    }

    #[test]
    fn equal_time_kind_priority() {
        let mut q = EventQueue::new();
        q.push(1.0, Payload::RateRedraw);
        q.push(1.0, arrival());
        q.push(1.0, Payload::SenseSweep);
        q.push(1.0, departure());
        q.push(1.0, Payload::EndOfRun);
        let kinds: Vec<EventKind> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![EventKind::Departure, EventKind::SenseSweep, EventKind::Arrival, EventKind::RateRedraw, EventKind::EndOfRun]
        );
    }

    #[test]
    fn fifo_within_same_key() {
        let mut q = EventQueue::new();
        for _ in 0..5 {
            q.push(2.0, arrival());
        }
        let seqs: Vec<u64> = std::iter::from_fn(|| q.pop()).map(|e| e.sequence).collect();
        assert_eq!(seqs, vec![0, 1, 2, 3, 4]);
    }

    proptest! {
        #[test]
        fn pops_in_total_order(items in proptest::collection::vec((0u32..50, any::<bool>()), 0..100)) {
            let mut q = EventQueue::new();
            for (t, dep) in &items {
                q.push(*t as f64 * 0.5, if *dep { departure() } else { arrival() });
            }
            let out: Vec<Event> = std::iter::from_fn(|| q.pop()).collect();
            prop_assert_eq!(out.len(), items.len());
            for w in out.windows(2) {
                prop_assert!(w[0].key() < w[1].key() || (w[0].time == w[1].time && w[0].kind == w[1].kind && w[0].sequence < w[1].sequence));
            }
        }
    }
}
