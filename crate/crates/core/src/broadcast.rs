//! The hybrid total/causal order broadcast, one state machine per process.
//!
//! Messages from processes that are neighbors in the proximity graph are
//! delivered in the same order everywhere; every other pair of messages is
//! only constrained by causality. Delivery runs as a fixpoint loop
//! ([`BroadcastState::try_deliver`]) that the host calls after every
//! broadcast and every receive.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::clock::{ProcessId, TotalStamp, TotalView, VectorClock};
use crate::graph::ProximityGraph;
use crate::message::{Envelope, ProtocolMessage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BroadcastError {
    #[error("stamp {0} is already pending; the channel layer duplicated a message")]
    DuplicateStamp(TotalStamp),
    #[error("{0} received its own broadcast over the network")]
    SelfMessage(ProcessId),
    #[error("causal vector of length {got} in a system of {expected} processes")]
    VectorLength { expected: usize, got: usize },
}

/// A received (or locally broadcast) message that is not delivered yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingEntry<P> {
    pub payload: P,
    pub s_caus: VectorClock,
    pub s_tot: u64,
    pub sender: ProcessId,
}

impl<P> PendingEntry<P> {
    pub fn stamp(&self) -> TotalStamp {
        TotalStamp::new(self.s_tot, self.sender)
    }
}

/// One delivery handed to the application layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery<P> {
    pub payload: P,
    pub stamp: TotalStamp,
    pub s_caus: VectorClock,
}

/// The three delivery filters evaluated against the current state, as
/// stamps in ascending order. Useful for tracing why a message waits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stability {
    /// Causally ready: `s_caus <= causal`.
    pub causal_ready: Vec<TotalStamp>,
    /// Ready and no neighbor of the sender can still issue a smaller stamp.
    pub clock_stable: Vec<TotalStamp>,
    /// Additionally, no pending message of a neighbor carries a smaller stamp.
    pub deliverable: Vec<TotalStamp>,
}

#[derive(Debug, Clone)]
pub struct BroadcastState<P> {
    me: ProcessId,
    graph: ProximityGraph,
    causal: VectorClock,
    total: TotalView,
    pending: BTreeMap<TotalStamp, PendingEntry<P>>,
    delivered_log: Vec<(P, TotalStamp)>,
}

impl<P: Clone> BroadcastState<P> {
    pub fn new(me: ProcessId, graph: ProximityGraph) -> Self {
        let n = graph.n();
        assert!(me.0 < n, "{me} outside a system of {n} processes");
        BroadcastState {
            me,
            graph,
            causal: VectorClock::zeros(n),
            total: TotalView::zeros(n),
            pending: BTreeMap::new(),
            delivered_log: Vec::new(),
        }
    }

    pub fn id(&self) -> ProcessId {
        self.me
    }

    pub fn graph(&self) -> &ProximityGraph {
        &self.graph
    }

    pub fn causal(&self) -> &VectorClock {
        &self.causal
    }

    pub fn total(&self) -> &TotalView {
        &self.total
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingEntry<P>> {
        self.pending.values()
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn delivered_log(&self) -> &[(P, TotalStamp)] {
        &self.delivered_log
    }

    fn others(&self) -> impl Iterator<Item = ProcessId> + '_ {
        (0..self.graph.n())
            .map(ProcessId)
            .filter(move |&p| p != self.me)
    }

    /// Toco-broadcast `payload`. Returns the stamp given to the message and
    /// one `TOCOBC` envelope per other process.
    pub fn broadcast(&mut self, payload: P) -> (TotalStamp, Vec<Envelope<P>>) {
        let me = self.me;
        let s_tot = self.total.get(me) + 1;
        self.total.set(me, s_tot);
        let s_caus = self.causal.clone();
        let out = self
            .others()
            .map(|to| Envelope {
                to,
                msg: ProtocolMessage::Tocobc {
                    payload: payload.clone(),
                    s_caus: s_caus.clone(),
                    s_tot,
                    sender: me,
                },
            })
            .collect();
        let stamp = TotalStamp::new(s_tot, me);
        self.pending.insert(
            stamp,
            PendingEntry {
                payload,
                s_caus,
                s_tot,
                sender: me,
            },
        );
        // Later broadcasts from this process causally follow this one.
        self.causal.increment(me);
        (stamp, out)
    }

    pub fn on_receive_tocobc(
        &mut self,
        payload: P,
        s_caus: VectorClock,
        s_tot: u64,
        sender: ProcessId,
    ) -> Result<Vec<Envelope<P>>, BroadcastError> {
        if sender == self.me {
            return Err(BroadcastError::SelfMessage(sender));
        }
        if s_caus.len() != self.graph.n() {
            return Err(BroadcastError::VectorLength {
                expected: self.graph.n(),
                got: s_caus.len(),
            });
        }
        let stamp = TotalStamp::new(s_tot, sender);
        if self.pending.contains_key(&stamp) {
            return Err(BroadcastError::DuplicateStamp(stamp));
        }
        self.pending.insert(
            stamp,
            PendingEntry {
                payload,
                s_caus,
                s_tot,
                sender,
            },
        );
        self.total.set(sender, s_tot);
        let me = self.me;
        if self.total.get(me) <= s_tot {
            let last_date = s_tot + 1;
            self.total.set(me, last_date);
            Ok(self
                .others()
                .map(|to| Envelope {
                    to,
                    msg: ProtocolMessage::CatchUp {
                        last_date,
                        sender: me,
                    },
                })
                .collect())
        } else {
            Ok(Vec::new())
        }
    }

    pub fn on_receive_catch_up(&mut self, last_date: u64, sender: ProcessId) {
        self.total.set(sender, last_date);
    }

    /// Dispatches any protocol message to the matching handler.
    pub fn handle(&mut self, msg: ProtocolMessage<P>) -> Result<Vec<Envelope<P>>, BroadcastError> {
        match msg {
            ProtocolMessage::Tocobc {
                payload,
                s_caus,
                s_tot,
                sender,
            } => self.on_receive_tocobc(payload, s_caus, s_tot, sender),
            ProtocolMessage::CatchUp { last_date, sender } => {
                if sender == self.me {
                    return Err(BroadcastError::SelfMessage(sender));
                }
                self.on_receive_catch_up(last_date, sender);
                Ok(Vec::new())
            }
        }
    }

    /// Smallest pending stamp per sender.
    fn min_pending_by_sender(&self) -> Vec<Option<TotalStamp>> {
        let mut min = vec![None; self.graph.n()];
        // `pending` iterates in ascending stamp order, so the first hit wins.
        for stamp in self.pending.keys() {
            min[stamp.pid.0].get_or_insert(*stamp);
        }
        min
    }

    fn is_causally_ready(&self, e: &PendingEntry<P>) -> bool {
        e.s_caus
            .entries()
            .iter()
            .zip(self.causal.entries())
            .all(|(a, b)| a <= b)
    }

    fn is_clock_stable(&self, e: &PendingEntry<P>) -> bool {
        let stamp = e.stamp();
        self.neighbors_of(e.sender)
            .all(|k| stamp < self.total.stamp_of(k))
    }

    fn beats_pending_neighbors(&self, e: &PendingEntry<P>, min: &[Option<TotalStamp>]) -> bool {
        let stamp = e.stamp();
        self.neighbors_of(e.sender)
            .all(|k| min[k.0].is_none_or(|f| stamp < f))
    }

    fn neighbors_of(&self, p: ProcessId) -> impl Iterator<Item = ProcessId> + '_ {
        self.graph
            .neighbors(p)
            .expect("pending entries come from processes inside the graph")
            .iter()
            .copied()
    }

    /// Evaluates the delivery filters without changing any state.
    pub fn stability(&self) -> Stability {
        let min = self.min_pending_by_sender();
        let mut s = Stability::default();
        for e in self.pending.values() {
            if !self.is_causally_ready(e) {
                continue;
            }
            s.causal_ready.push(e.stamp());
            if !self.is_clock_stable(e) {
                continue;
            }
            s.clock_stable.push(e.stamp());
            if self.beats_pending_neighbors(e, &min) {
                s.deliverable.push(e.stamp());
            }
        }
        s
    }

    /// Delivers the deliverable message with the smallest stamp, if any.
    pub fn deliver_next(&mut self) -> Option<Delivery<P>> {
        let min = self.min_pending_by_sender();
        let stamp = self
            .pending
            .values()
            .find(|e| {
                self.is_causally_ready(e)
                    && self.is_clock_stable(e)
                    && self.beats_pending_neighbors(e, &min)
            })?
            .stamp();
        let entry = self.pending.remove(&stamp).expect("stamp was just found");
        if entry.sender != self.me {
            self.causal.increment(entry.sender);
        }
        self.delivered_log.push((entry.payload.clone(), stamp));
        Some(Delivery {
            payload: entry.payload,
            stamp,
            s_caus: entry.s_caus,
        })
    }

    /// Delivers until nothing more is deliverable. An empty result means the
    /// process has to wait for more network events.
    pub fn try_deliver(&mut self) -> Vec<Delivery<P>> {
        std::iter::from_fn(|| self.deliver_next()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize) -> ProcessId {
        ProcessId(i)
    }

    fn vc(v: &[u64]) -> VectorClock {
        VectorClock::from_entries(v.to_vec())
    }

    fn tocobc_parts(env: &Envelope<&'static str>) -> (VectorClock, u64, ProcessId) {
        match &env.msg {
            ProtocolMessage::Tocobc {
                s_caus,
                s_tot,
                sender,
                ..
            } => (s_caus.clone(), *s_tot, *sender),
            other => panic!("expected TOCOBC, got {other:?}"),
        }
    }

    #[test]
    fn first_broadcast_of_a_fresh_process() {
        let mut s = BroadcastState::new(p(0), ProximityGraph::complete(3));
        let (stamp, out) = s.broadcast("a");
        assert_eq!(stamp, TotalStamp::new(1, p(0)));
        assert_eq!(out.len(), 2);
        assert_eq!(
            out.iter().map(|e| e.to).collect::<Vec<_>>(),
            vec![p(1), p(2)]
        );
        for env in &out {
            assert_eq!(tocobc_parts(env), (vc(&[0, 0, 0]), 1, p(0)));
        }
        assert_eq!(s.causal(), &vc(&[1, 0, 0]));
        assert_eq!(s.total().get(p(0)), 1);
        assert_eq!(s.pending_len(), 1);
    }

    #[test]
    fn second_broadcast_with_nothing_received() {
        let mut s = BroadcastState::new(p(0), ProximityGraph::complete(3));
        s.broadcast("a");
        let (_, out) = s.broadcast("b");
        assert_eq!(tocobc_parts(&out[0]), (vc(&[1, 0, 0]), 2, p(0)));
    }

    #[test]
    fn broadcast_after_delivering_a_remote_message() {
        let mut s = BroadcastState::new(p(0), ProximityGraph::empty(3));
        s.on_receive_tocobc("x", vc(&[0, 0, 0]), 1, p(1)).unwrap();
        let delivered = s.try_deliver();
        assert_eq!(delivered.len(), 1);
        let (_, out) = s.broadcast("y");
        assert_eq!(tocobc_parts(&out[0]).0, vc(&[0, 1, 0]));
        // and the sender's own slot once it has broadcast before
        let mut s = BroadcastState::new(p(0), ProximityGraph::empty(3));
        s.broadcast("a");
        s.on_receive_tocobc("x", vc(&[0, 0, 0]), 1, p(1)).unwrap();
        s.try_deliver();
        let (_, out) = s.broadcast("b");
        assert_eq!(tocobc_parts(&out[0]).0, vc(&[1, 1, 0]));
    }

    #[test]
    fn receive_triggers_catch_up_when_behind() {
        let mut s = BroadcastState::<&str>::new(p(1), ProximityGraph::complete(3));
        let out = s.on_receive_tocobc("m", vc(&[0, 0, 0]), 1, p(0)).unwrap();
        assert_eq!(s.total().entries(), &[1, 2, 0]);
        assert_eq!(out.len(), 2);
        for env in &out {
            assert_eq!(
                env.msg,
                ProtocolMessage::CatchUp {
                    last_date: 2,
                    sender: p(1)
                }
            );
        }
        assert_eq!(
            out.iter().map(|e| e.to).collect::<Vec<_>>(),
            vec![p(0), p(2)]
        );
    }

    #[test]
    fn receive_without_catch_up_when_ahead() {
        let mut s = BroadcastState::<&str>::new(p(1), ProximityGraph::complete(3));
        for _ in 0..5 {
            s.broadcast("own");
        }
        assert_eq!(s.total().get(p(1)), 5);
        let out = s.on_receive_tocobc("m", vc(&[0, 0, 0]), 3, p(0)).unwrap();
        assert!(out.is_empty());
        assert_eq!(s.total().get(p(0)), 3);
        assert_eq!(s.total().get(p(1)), 5);
    }

    #[test]
    fn receive_at_equal_clock_catches_up() {
        let mut s = BroadcastState::<&str>::new(p(0), ProximityGraph::complete(3));
        for _ in 0..7 {
            s.broadcast("own");
        }
        let out = s.on_receive_tocobc("m", vc(&[0, 0, 0]), 7, p(2)).unwrap();
        assert_eq!(s.total().get(p(0)), 8);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn duplicate_stamp_is_an_integrity_error() {
        let mut s = BroadcastState::<&str>::new(p(1), ProximityGraph::complete(3));
        s.on_receive_tocobc("m", vc(&[0, 0, 0]), 1, p(0)).unwrap();
        assert_eq!(
            s.on_receive_tocobc("m", vc(&[0, 0, 0]), 1, p(0)),
            Err(BroadcastError::DuplicateStamp(TotalStamp::new(1, p(0))))
        );
    }

    #[test]
    fn catch_up_assigns_the_view() {
        let mut s = BroadcastState::<&str>::new(p(0), ProximityGraph::complete(3));
        for _ in 0..4 {
            s.broadcast("own");
        }
        s.on_receive_catch_up(6, p(1));
        assert_eq!(s.total().entries(), &[4, 6, 0]);
        s.on_receive_catch_up(5, p(2));
        s.on_receive_catch_up(9, p(2));
        assert_eq!(s.total().get(p(2)), 9);
        let before = s.total().clone();
        s.on_receive_catch_up(9, p(2));
        assert_eq!(s.total(), &before);
    }

    #[test]
    fn empty_graph_delivers_causally_ready_messages_at_once() {
        let mut s = BroadcastState::new(p(0), ProximityGraph::empty(3));
        s.on_receive_tocobc("e", vc(&[0, 0, 0]), 1, p(1)).unwrap();
        let d = s.try_deliver();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].payload, "e");
        assert_eq!(s.causal(), &vc(&[0, 1, 0]));
    }

    #[test]
    fn causal_gate_holds_back_messages() {
        let mut s = BroadcastState::new(p(1), ProximityGraph::empty(3));
        s.on_receive_tocobc("late", vc(&[1, 0, 0]), 2, p(2))
            .unwrap();
        assert!(s.try_deliver().is_empty());
        assert!(s.stability().causal_ready.is_empty());
    }

    #[test]
    fn complete_graph_tie_goes_to_the_smaller_pid() {
        let mut s = BroadcastState::new(p(2), ProximityGraph::complete(3));
        s.on_receive_tocobc("b", vc(&[0, 0, 0]), 1, p(1)).unwrap();
        s.on_receive_tocobc("a", vc(&[0, 0, 0]), 1, p(0)).unwrap();
        assert_eq!(s.total().entries(), &[1, 1, 2]);
        // <1,p0> is below <1,p1> and <2,p2>, so "a" is stable; "b" still
        // waits for p0's clock to move past it.
        let order: Vec<_> = s.try_deliver().into_iter().map(|d| d.payload).collect();
        assert_eq!(order, vec!["a"]);
        s.on_receive_catch_up(2, p(0));
        let order: Vec<_> = s.try_deliver().into_iter().map(|d| d.payload).collect();
        assert_eq!(order, vec!["b"]);
    }

    #[test]
    fn tie_break_holds_under_every_arrival_schedule() {
        // p0 sends TOCOBC(a) then CATCH_UP(2); p1 sends TOCOBC(b) then
        // CATCH_UP(2). Enumerate every FIFO-respecting interleaving at p2.
        let from_p0 = [
            ProtocolMessage::Tocobc {
                payload: "a",
                s_caus: vc(&[0, 0, 0]),
                s_tot: 1,
                sender: p(0),
            },
            ProtocolMessage::CatchUp {
                last_date: 2,
                sender: p(0),
            },
        ];
        let from_p1 = [
            ProtocolMessage::Tocobc {
                payload: "b",
                s_caus: vc(&[0, 0, 0]),
                s_tot: 1,
                sender: p(1),
            },
            ProtocolMessage::CatchUp {
                last_date: 2,
                sender: p(1),
            },
        ];
        let mut schedules = 0;
        for mask in 0u8..16 {
            if mask.count_ones() != 2 {
                continue;
            }
            let (mut i, mut j) = (0, 0);
            let mut s = BroadcastState::new(p(2), ProximityGraph::complete(3));
            let mut order = Vec::new();
            for slot in 0..4 {
                let msg = if mask & (1 << slot) != 0 {
                    i += 1;
                    from_p0[i - 1].clone()
                } else {
                    j += 1;
                    from_p1[j - 1].clone()
                };
                s.handle(msg).unwrap();
                order.extend(s.try_deliver().into_iter().map(|d| d.payload));
            }
            assert_eq!(order, vec!["a", "b"], "schedule mask {mask:04b}");
            schedules += 1;
        }
        assert_eq!(schedules, 6);
    }

    #[test]
    fn complete_graph_waits_for_a_smaller_pending_neighbor_stamp() {
        let mut s = BroadcastState::new(p(2), ProximityGraph::complete(3));
        // p1's message is ready and clock-stable, but p0's message with a
        // smaller stamp is still causally blocked.
        s.on_receive_tocobc("blocked", vc(&[0, 0, 1]), 1, p(0))
            .unwrap();
        s.on_receive_tocobc("ready", vc(&[0, 0, 0]), 2, p(1))
            .unwrap();
        s.on_receive_catch_up(5, p(0));
        s.on_receive_catch_up(5, p(1));
        let st = s.stability();
        assert_eq!(st.clock_stable, vec![TotalStamp::new(2, p(1))]);
        assert!(st.deliverable.is_empty());
        assert!(s.try_deliver().is_empty());
    }

    #[test]
    fn own_messages_skip_the_causal_increment_on_delivery() {
        let mut s = BroadcastState::new(p(0), ProximityGraph::empty(2));
        s.broadcast("mine");
        assert_eq!(s.causal(), &vc(&[1, 0]));
        let d = s.try_deliver();
        assert_eq!(d.len(), 1);
        assert_eq!(s.causal(), &vc(&[1, 0]));
        assert_eq!(s.delivered_log().len(), 1);
    }

    #[test]
    fn single_process_system_delivers_its_own_messages() {
        let mut s = BroadcastState::new(p(0), ProximityGraph::empty(1));
        let (_, out) = s.broadcast(1u8);
        assert!(out.is_empty());
        assert_eq!(s.try_deliver().len(), 1);
    }
}
