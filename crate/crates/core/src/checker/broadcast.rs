//! Broadcast-level properties, checked on the recorded events.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::relation::Relation;
use crate::clock::{ProcessId, TotalStamp};
use crate::graph::ProximityGraph;
use crate::history::{EventKind, History};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BroadcastViolation {
    #[error("{pid} broadcast a message stamped {stamp}, which names another sender")]
    ForeignStamp { pid: ProcessId, stamp: TotalStamp },
    #[error("stamp {stamp} broadcast twice")]
    DuplicateBroadcast { stamp: TotalStamp },
    #[error("validity: {pid} delivered {stamp}, which was not broadcast before")]
    Validity { pid: ProcessId, stamp: TotalStamp },
    #[error("integrity: {pid} delivered {stamp} twice")]
    Integrity { pid: ProcessId, stamp: TotalStamp },
    #[error("termination: {pid} never delivered {stamp}")]
    Termination { pid: ProcessId, stamp: TotalStamp },
    #[error("causal order: {pid} delivered {second} before its causal predecessor {first}")]
    CausalOrder {
        pid: ProcessId,
        first: TotalStamp,
        second: TotalStamp,
    },
    #[error(
        "delivery order: {first_at} delivered {first} before {second}, {second_at} the reverse"
    )]
    GDeliveryOrder {
        first: TotalStamp,
        second: TotalStamp,
        first_at: ProcessId,
        second_at: ProcessId,
    },
    #[error("message causal order has a cycle through {stamp}")]
    MessageCycle { stamp: TotalStamp },
}

/// Happened-before over broadcast messages.
#[derive(Debug, Clone)]
pub struct MessageOrder {
    /// Messages in broadcast order.
    pub messages: Vec<TotalStamp>,
    index: BTreeMap<TotalStamp, usize>,
    order: Relation,
}

impl MessageOrder {
    pub fn precedes(&self, a: TotalStamp, b: TotalStamp) -> bool {
        match (self.index.get(&a), self.index.get(&b)) {
            (Some(&x), Some(&y)) => self.order.precedes(x, y),
            _ => false,
        }
    }
}

/// Same-sender order plus "delivered at p before p broadcast", closed
/// transitively.
pub fn build_message_causal_order(history: &History) -> Result<MessageOrder, BroadcastViolation> {
    let mut messages = Vec::new();
    let mut index = BTreeMap::new();
    for e in history
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Broadcast)
    {
        if e.stamp.pid != e.pid {
            return Err(BroadcastViolation::ForeignStamp {
                pid: e.pid,
                stamp: e.stamp,
            });
        }
        if index.insert(e.stamp, messages.len()).is_some() {
            return Err(BroadcastViolation::DuplicateBroadcast { stamp: e.stamp });
        }
        messages.push(e.stamp);
    }
    let mut order = Relation::new(messages.len());
    let mut seen: Vec<Vec<usize>> = vec![Vec::new(); history.n];
    let mut last_sent: Vec<Option<usize>> = vec![None; history.n];
    for e in &history.events {
        let p = e.pid.0;
        match e.kind {
            EventKind::Deliver => {
                if let Some(&m) = index.get(&e.stamp) {
                    seen[p].push(m);
                }
            }
            EventKind::Broadcast => {
                let m2 = index[&e.stamp];
                for &m1 in seen[p].iter().chain(last_sent[p].iter()) {
                    if m1 != m2 && order.add(m1, m2).is_err() {
                        return Err(BroadcastViolation::MessageCycle { stamp: e.stamp });
                    }
                }
                last_sent[p] = Some(m2);
            }
            EventKind::Receive => {}
        }
    }
    Ok(MessageOrder {
        messages,
        index,
        order,
    })
}

/// Validity, integrity, termination, causal order and G-delivery order.
/// Expects the events of a run that reached quiescence.
pub fn check_broadcast_properties(
    history: &History,
    graph: &ProximityGraph,
) -> Result<(), BroadcastViolation> {
    let causal = build_message_causal_order(history)?;
    let mut broadcast = BTreeSet::new();
    let mut delivered: Vec<Vec<TotalStamp>> = vec![Vec::new(); history.n];
    let mut delivered_set: Vec<BTreeSet<TotalStamp>> = vec![BTreeSet::new(); history.n];
    for e in &history.events {
        match e.kind {
            EventKind::Broadcast => {
                broadcast.insert(e.stamp);
            }
            EventKind::Deliver => {
                if !broadcast.contains(&e.stamp) {
                    return Err(BroadcastViolation::Validity {
                        pid: e.pid,
                        stamp: e.stamp,
                    });
                }
                if !delivered_set[e.pid.0].insert(e.stamp) {
                    return Err(BroadcastViolation::Integrity {
                        pid: e.pid,
                        stamp: e.stamp,
                    });
                }
                delivered[e.pid.0].push(e.stamp);
            }
            EventKind::Receive => {}
        }
    }
    for (p, set) in delivered_set.iter().enumerate() {
        if let Some(&stamp) = causal.messages.iter().find(|m| !set.contains(m)) {
            return Err(BroadcastViolation::Termination {
                pid: ProcessId(p),
                stamp,
            });
        }
    }
    for (p, seq) in delivered.iter().enumerate() {
        for (i, &second) in seq.iter().enumerate() {
            if let Some(&first) = seq[i + 1..].iter().find(|&&f| causal.precedes(f, second)) {
                return Err(BroadcastViolation::CausalOrder {
                    pid: ProcessId(p),
                    first,
                    second,
                });
            }
        }
    }
    let positions: Vec<BTreeMap<TotalStamp, usize>> = delivered
        .iter()
        .map(|seq| seq.iter().enumerate().map(|(i, &s)| (s, i)).collect())
        .collect();
    for &a in &causal.messages {
        for &b in &causal.messages {
            if a.pid >= b.pid || !graph.are_neighbors(a.pid, b.pid) {
                continue;
            }
            let mut orders = positions
                .iter()
                .enumerate()
                .filter_map(|(p, pos)| Some((p, pos.get(&a)? < pos.get(&b)?)));
            if let Some((p0, a_first)) = orders.next() {
                if let Some((p1, _)) = orders.find(|&(_, o)| o != a_first) {
                    let (first, second) = if a_first { (a, b) } else { (b, a) };
                    return Err(BroadcastViolation::GDeliveryOrder {
                        first,
                        second,
                        first_at: ProcessId(p0),
                        second_at: ProcessId(p1),
                    });
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::BroadcastEvent;

    fn ev(kind: EventKind, pid: usize, t: u64, from: usize) -> BroadcastEvent {
        BroadcastEvent {
            time: 0,
            kind,
            pid: ProcessId(pid),
            stamp: TotalStamp::new(t, ProcessId(from)),
        }
    }

    #[test]
    fn empty_history_is_fine() {
        check_broadcast_properties(&History::new(3), &ProximityGraph::complete(3)).unwrap();
    }

    #[test]
    fn causal_rules() {
        let mut h = History::new(2);
        h.events = vec![
            ev(EventKind::Broadcast, 0, 1, 0),
            ev(EventKind::Broadcast, 0, 2, 0),
            ev(EventKind::Deliver, 1, 1, 0),
            ev(EventKind::Broadcast, 1, 3, 1),
            ev(EventKind::Broadcast, 0, 4, 0),
        ];
        let o = build_message_causal_order(&h).unwrap();
        let s = |t, p| TotalStamp::new(t, ProcessId(p));
        assert!(o.precedes(s(1, 0), s(2, 0)));
        assert!(o.precedes(s(1, 0), s(3, 1)));
        assert!(!o.precedes(s(2, 0), s(3, 1)));
        assert!(!o.precedes(s(3, 1), s(4, 0)));
    }

    #[test]
    fn disagreeing_neighbors_rejected() {
        let mut h = History::new(2);
        h.events = vec![
            ev(EventKind::Broadcast, 0, 1, 0),
            ev(EventKind::Broadcast, 1, 1, 1),
            ev(EventKind::Deliver, 0, 1, 0),
            ev(EventKind::Deliver, 0, 1, 1),
            ev(EventKind::Deliver, 1, 1, 1),
            ev(EventKind::Deliver, 1, 1, 0),
        ];
        assert!(matches!(
            check_broadcast_properties(&h, &ProximityGraph::complete(2)),
            Err(BroadcastViolation::GDeliveryOrder { .. })
        ));
        check_broadcast_properties(&h, &ProximityGraph::empty(2)).unwrap();
    }

    #[test]
    fn missing_and_duplicate_deliveries() {
        let mut h = History::new(2);
        h.events = vec![
            ev(EventKind::Broadcast, 0, 1, 0),
            ev(EventKind::Deliver, 0, 1, 0),
        ];
        assert!(matches!(
            check_broadcast_properties(&h, &ProximityGraph::empty(2)),
            Err(BroadcastViolation::Termination { .. })
        ));
        h.events.push(ev(EventKind::Deliver, 0, 1, 0));
        assert!(matches!(
            check_broadcast_properties(&h, &ProximityGraph::empty(2)),
            Err(BroadcastViolation::Integrity { .. })
        ));
        let mut h = History::new(1);
        h.events = vec![ev(EventKind::Deliver, 0, 1, 0)];
        assert!(matches!(
            check_broadcast_properties(&h, &ProximityGraph::empty(1)),
            Err(BroadcastViolation::Validity { .. })
        ));
    }

    #[test]
    fn causal_violation_detected() {
        let mut h = History::new(3);
        h.events = vec![
            ev(EventKind::Broadcast, 0, 1, 0),
            ev(EventKind::Deliver, 0, 1, 0),
            ev(EventKind::Deliver, 1, 1, 0),
            ev(EventKind::Broadcast, 1, 2, 1),
            ev(EventKind::Deliver, 1, 2, 1),
            ev(EventKind::Deliver, 0, 2, 1),
            ev(EventKind::Deliver, 2, 2, 1),
            ev(EventKind::Deliver, 2, 1, 0),
        ];
        assert!(matches!(
            check_broadcast_properties(&h, &ProximityGraph::empty(3)),
            Err(BroadcastViolation::CausalOrder { .. })
        ));
    }
}
