//! Runtime checks of the broadcast layer's local invariants.

use thiserror::Error;

use crate::clock::{ProcessId, TotalView, VectorClock};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantViolation {
    #[error("{pid}: causal vector went from {before} to {after}")]
    CausalRegressed {
        pid: ProcessId,
        before: VectorClock,
        after: VectorClock,
    },
    #[error("{pid}: total view entry for {entry} went from {before} to {after}")]
    TotalRegressed {
        pid: ProcessId,
        entry: ProcessId,
        before: u64,
        after: u64,
    },
    #[error("{pid}: sent clock {value} after already sending {previous}")]
    OutgoingNotIncreasing {
        pid: ProcessId,
        previous: u64,
        value: u64,
    },
    #[error(
        "{at}: delivered message #{seq} of {sender} out of causal order (expected #{expected})"
    )]
    DeliveryOutOfOrder {
        at: ProcessId,
        sender: ProcessId,
        seq: u64,
        expected: u64,
    },
    #[error("{at}: delivered {delivered} messages of {sender} but causal entry is {causal}")]
    CausalCountMismatch {
        at: ProcessId,
        sender: ProcessId,
        delivered: u64,
        causal: u64,
    },
}

/// Snapshots each process's clocks and verifies the invariants after every
/// simulator event.
#[derive(Debug, Clone)]
pub struct InvariantMonitor {
    causal: Vec<VectorClock>,
    total: Vec<TotalView>,
    last_sent: Vec<Option<u64>>,
    /// `delivered[i][j]`: messages of `j` delivered at `i`, remote senders only.
    delivered: Vec<Vec<u64>>,
}

impl InvariantMonitor {
    pub fn new(n: usize) -> Self {
        InvariantMonitor {
            causal: vec![VectorClock::zeros(n); n],
            total: vec![TotalView::zeros(n); n],
            last_sent: vec![None; n],
            delivered: vec![vec![0; n]; n],
        }
    }

    /// Called once per outgoing batch; a batch carries one clock value.
    pub fn on_send(&mut self, pid: ProcessId, value: u64) -> Result<(), InvariantViolation> {
        let slot = &mut self.last_sent[pid.0];
        if let Some(previous) = *slot {
            if value <= previous {
                return Err(InvariantViolation::OutgoingNotIncreasing {
                    pid,
                    previous,
                    value,
                });
            }
        }
        *slot = Some(value);
        Ok(())
    }

    /// `seq` is the sender's own entry of the message's causal vector, i.e.
    /// how many messages the sender broadcast before it.
    pub fn on_deliver(
        &mut self,
        at: ProcessId,
        sender: ProcessId,
        seq: u64,
    ) -> Result<(), InvariantViolation> {
        if at == sender {
            return Ok(());
        }
        let expected = self.delivered[at.0][sender.0];
        if seq != expected {
            return Err(InvariantViolation::DeliveryOutOfOrder {
                at,
                sender,
                seq,
                expected,
            });
        }
        self.delivered[at.0][sender.0] += 1;
        Ok(())
    }

    /// Compares the process's clocks with the last snapshot. At a quiescent
    /// point a remote sender's causal entry must equal the number of its
    /// messages delivered here, which together with in-order delivery means
    /// a message is delivered exactly when its sequence number is below it.
    pub fn after_step(
        &mut self,
        pid: ProcessId,
        causal: &VectorClock,
        total: &TotalView,
    ) -> Result<(), InvariantViolation> {
        let i = pid.0;
        if !self.causal[i].leq(causal).unwrap_or(false) {
            return Err(InvariantViolation::CausalRegressed {
                pid,
                before: self.causal[i].clone(),
                after: causal.clone(),
            });
        }
        for (k, (&before, &after)) in self.total[i]
            .entries()
            .iter()
            .zip(total.entries())
            .enumerate()
        {
            if after < before {
                return Err(InvariantViolation::TotalRegressed {
                    pid,
                    entry: ProcessId(k),
                    before,
                    after,
                });
            }
        }
        for (j, &c) in causal.entries().iter().enumerate() {
            if j != i && c != self.delivered[i][j] {
                return Err(InvariantViolation::CausalCountMismatch {
                    at: pid,
                    sender: ProcessId(j),
                    delivered: self.delivered[i][j],
                    causal: c,
                });
            }
        }
        self.causal[i] = causal.clone();
        self.total[i] = total.clone();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regressions_are_reported() {
        let mut m = InvariantMonitor::new(2);
        let c1 = VectorClock::from_entries(vec![1, 0]);
        let t1 = TotalView::from_entries(vec![1, 0]);
        m.after_step(ProcessId(0), &c1, &t1).unwrap();
        let c0 = VectorClock::zeros(2);
        assert!(matches!(
            m.after_step(ProcessId(0), &c0, &t1),
            Err(InvariantViolation::CausalRegressed { .. })
        ));
        assert!(matches!(
            m.after_step(ProcessId(0), &c1, &TotalView::zeros(2)),
            Err(InvariantViolation::TotalRegressed { .. })
        ));
    }

    #[test]
    fn outgoing_clocks_must_increase() {
        let mut m = InvariantMonitor::new(2);
        m.on_send(ProcessId(1), 1).unwrap();
        m.on_send(ProcessId(1), 3).unwrap();
        assert!(m.on_send(ProcessId(1), 3).is_err());
    }

    #[test]
    fn causal_entry_tracks_remote_deliveries() {
        let mut m = InvariantMonitor::new(2);
        let t = TotalView::zeros(2);
        assert!(m
            .after_step(ProcessId(0), &VectorClock::from_entries(vec![0, 1]), &t)
            .is_err());
        m.on_deliver(ProcessId(0), ProcessId(1), 0).unwrap();
        m.after_step(ProcessId(0), &VectorClock::from_entries(vec![0, 1]), &t)
            .unwrap();
        assert!(m.on_deliver(ProcessId(0), ProcessId(1), 2).is_err());
    }
}
