//! The causal order induced by a history: process order plus read-from
//! links, transitively closed.

use std::collections::VecDeque;

use super::facts::Facts;
use super::relation::Relation;
use super::{CheckError, Violation};
use crate::history::{History, OpId};

/// Closure of process order and read-from links. A read of the initial
/// value has no incoming link; it is treated as reading from a virtual
/// write that precedes every operation.
pub fn build_read_from(history: &History) -> Result<Relation, CheckError> {
    let facts = Facts::new(history)?;
    read_from_order(&facts).map_err(CheckError::Rejected)
}

pub(crate) fn read_from_order(f: &Facts) -> Result<Relation, Violation> {
    let mut edges = Vec::new();
    for ops in &f.by_process {
        edges.extend(ops.windows(2).map(|w| (w[0], w[1])));
    }
    for r in 0..f.len() {
        if let (false, Some(w)) = (f.is_write[r], f.source[r]) {
            edges.push((w, r));
        }
    }
    let mut order = Relation::new(f.len());
    for (i, &(a, b)) in edges.iter().enumerate() {
        if order.add(a, b).is_err() {
            return Err(Violation::Cycle {
                ops: cycle_through(&edges[..=i], a, b),
            });
        }
    }
    Ok(order)
}

/// A cycle that the edge `a -> b` closes, found by breadth-first search
/// from `b` back to `a`.
fn cycle_through(edges: &[(usize, usize)], a: usize, b: usize) -> Vec<OpId> {
    let mut parent = std::collections::BTreeMap::new();
    let mut queue = VecDeque::from([b]);
    parent.insert(b, b);
    while let Some(x) = queue.pop_front() {
        if x == a {
            break;
        }
        for &(s, t) in edges {
            if s == x && !parent.contains_key(&t) {
                parent.insert(t, x);
                queue.push_back(t);
            }
        }
    }
    let mut path = vec![a];
    let mut cur = a;
    while cur != b {
        cur = parent[&cur];
        path.push(cur);
    }
    path.reverse();
    path.push(b);
    path.into_iter().map(OpId).collect()
}

/// Accepts iff no read returns a value that `order` shows overwritten:
/// there is no write `w'` on the same register with `w < w' < r`, where
/// `w` is the read's source (or the initial value, which precedes all).
pub fn check_causal_legality(order: &Relation, history: &History) -> Result<(), CheckError> {
    let facts = Facts::new(history)?;
    causal_violation(&facts, order).map_or(Ok(()), |v| Err(CheckError::Rejected(v)))
}

pub(crate) fn causal_violation(f: &Facts, order: &Relation) -> Option<Violation> {
    for r in (0..f.len()).filter(|&o| f.is_read(o)) {
        let src = f.source[r];
        for &w in &f.writes_on[f.register[r]] {
            if Some(w) == src || !order.precedes(w, r) {
                continue;
            }
            if src.is_none_or(|s| order.precedes(s, w)) {
                return Some(Violation::OverwrittenRead {
                    read: OpId(r),
                    source: src.map(OpId),
                    overwritten_by: OpId(w),
                });
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rf_edge_and_process_order() {
        let mut h = History::new(2);
        let w = h.write(0, "X", 1);
        let r = h.read(1, "X", Some(1));
        let r2 = h.read(1, "Y", None);
        let order = build_read_from(&h).unwrap();
        assert!(order.precedes(w.0, r.0));
        assert!(order.precedes(w.0, r2.0));
        assert!(!order.precedes(r2.0, w.0));
    }

    #[test]
    fn reading_own_future_write_is_a_cycle() {
        let mut h = History::new(1);
        h.read(0, "X", Some(1));
        h.write(0, "X", 1);
        match build_read_from(&h) {
            Err(CheckError::Rejected(Violation::Cycle { ops })) => {
                assert_eq!(ops.first(), ops.last());
                assert!(ops.len() >= 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn overwritten_read_rejected() {
        let mut h = History::new(2);
        h.write(0, "X", 1);
        h.write(0, "X", 2);
        h.read(1, "X", Some(2));
        h.read(1, "X", Some(1));
        let order = build_read_from(&h).unwrap();
        assert!(matches!(
            check_causal_legality(&order, &h),
            Err(CheckError::Rejected(Violation::OverwrittenRead { .. }))
        ));
    }

    #[test]
    fn initial_read_after_causal_write_rejected() {
        let mut h = History::new(2);
        h.write(0, "X", 1);
        h.read(1, "X", Some(1));
        h.read(1, "X", None);
        let order = build_read_from(&h).unwrap();
        assert!(check_causal_legality(&order, &h).is_err());
    }

    #[test]
    fn concurrent_writes_in_opposite_orders_are_causal() {
        let mut h = History::new(4);
        h.write(0, "X", 2);
        h.write(1, "X", 3);
        h.read(2, "X", Some(2));
        h.read(2, "X", Some(3));
        h.read(3, "X", Some(3));
        h.read(3, "X", Some(2));
        let order = build_read_from(&h).unwrap();
        check_causal_legality(&order, &h).unwrap();
    }
}
