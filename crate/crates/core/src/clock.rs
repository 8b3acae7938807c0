//! Process identities and the two clock families carried by protocol messages.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense process index in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ProcessId(pub usize);

impl ProcessId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for ProcessId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

impl From<usize> for ProcessId {
    fn from(index: usize) -> Self {
        ProcessId(index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClockError {
    #[error("vector clock length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Per-process causal delivery vector. Entry `j` counts the messages from
/// `p_j` that the owner has delivered (or, for its own entry, broadcast).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VectorClock(Vec<u64>);

impl VectorClock {
    pub fn zeros(n: usize) -> Self {
        VectorClock(vec![0; n])
    }

    pub fn from_entries(entries: Vec<u64>) -> Self {
        VectorClock(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, pid: ProcessId) -> u64 {
        self.0[pid.0]
    }

    pub fn increment(&mut self, pid: ProcessId) {
        self.0[pid.0] += 1;
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    /// Entry-wise `self <= other`.
    pub fn leq(&self, other: &VectorClock) -> Result<bool, ClockError> {
        vc_leq(self, other)
    }
}

impl fmt::Display for VectorClock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// The usual partial order on vector clocks.
pub fn vc_leq(a: &VectorClock, b: &VectorClock) -> Result<bool, ClockError> {
    if a.len() != b.len() {
        return Err(ClockError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.0.iter().zip(&b.0).all(|(x, y)| x <= y))
}

/// A Lamport clock value paired with the process that issued it.
///
/// The derived ordering is lexicographic on `(time, pid)`: equal times are
/// broken by ascending process id, so the smaller pid wins a tie. Every
/// process uses the same rule, which is all the delivery protocol needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TotalStamp {
    pub time: u64,
    pub pid: ProcessId,
}

impl TotalStamp {
    pub fn new(time: u64, pid: ProcessId) -> Self {
        TotalStamp { time, pid }
    }
}

impl fmt::Display for TotalStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{}>", self.time, self.pid)
    }
}

pub fn stamp_less(a: TotalStamp, b: TotalStamp) -> bool {
    a < b
}

/// `total_i[1..n]`: the owner's own Lamport clock at its index, and the last
/// known value of every other process's clock elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TotalView(Vec<u64>);

impl TotalView {
    pub fn zeros(n: usize) -> Self {
        TotalView(vec![0; n])
    }

    pub fn from_entries(entries: Vec<u64>) -> Self {
        TotalView(entries)
    }

    pub fn get(&self, pid: ProcessId) -> u64 {
        self.0[pid.0]
    }

    pub fn set(&mut self, pid: ProcessId, value: u64) {
        self.0[pid.0] = value;
    }

    pub fn entries(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The stamp `<total[k], k>` used by the stability filter.
    pub fn stamp_of(&self, pid: ProcessId) -> TotalStamp {
        TotalStamp::new(self.get(pid), pid)
    }
}

impl fmt::Display for TotalView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        VectorClock(self.0.clone()).fmt(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vc(v: &[u64]) -> VectorClock {
        VectorClock::from_entries(v.to_vec())
    }

    #[test]
    fn vc_leq_examples() {
        assert!(vc_leq(&vc(&[0, 0, 0]), &vc(&[1, 2, 0])).unwrap());
        assert!(!vc_leq(&vc(&[1, 2]), &vc(&[2, 1])).unwrap());
        assert!(!vc_leq(&vc(&[2, 1]), &vc(&[1, 2])).unwrap());
        assert!(vc_leq(&vc(&[1, 1]), &vc(&[1, 1])).unwrap());
    }

    #[test]
    fn vc_leq_rejects_length_mismatch() {
        assert_eq!(
            vc_leq(&vc(&[0, 0]), &vc(&[0, 0, 0])),
            Err(ClockError::LengthMismatch { left: 2, right: 3 })
        );
    }

    #[test]
    fn vc_leq_is_a_partial_order_on_small_vectors() {
        let mut all = Vec::new();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    all.push(vc(&[a, b, c]));
                }
            }
        }
        for x in &all {
            assert!(vc_leq(x, x).unwrap());
            for y in &all {
                if vc_leq(x, y).unwrap() && vc_leq(y, x).unwrap() {
                    assert_eq!(x, y);
                }
                for z in &all {
                    if vc_leq(x, y).unwrap() && vc_leq(y, z).unwrap() {
                        assert!(vc_leq(x, z).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn stamp_examples() {
        let s = |t, p| TotalStamp::new(t, ProcessId(p));
        assert!(stamp_less(s(3, 1), s(5, 0)));
        assert!(stamp_less(s(4, 0), s(4, 2)));
        assert!(!stamp_less(s(4, 2), s(4, 2)));
    }

    #[test]
    fn stamp_less_is_a_strict_total_order() {
        let stamps: Vec<TotalStamp> = (0..4)
            .flat_map(|t| (0..3).map(move |p| TotalStamp::new(t, ProcessId(p))))
            .collect();
        for &a in &stamps {
            for &b in &stamps {
                let outcomes = [stamp_less(a, b), stamp_less(b, a), a == b];
                assert_eq!(outcomes.iter().filter(|x| **x).count(), 1, "{a} {b}");
                // Same answer as spelling the tie-break out by hand.
                let manual = a.time < b.time || (a.time == b.time && a.pid.0 < b.pid.0);
                assert_eq!(stamp_less(a, b), manual);
                for &c in &stamps {
                    if stamp_less(a, b) && stamp_less(b, c) {
                        assert!(stamp_less(a, c));
                    }
                }
            }
        }
    }
}
