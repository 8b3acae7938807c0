//! Extends the causal order until every pair of operations issued by
//! neighboring processes is ordered.

use std::collections::BTreeMap;

use super::causal::causal_violation;
use super::facts::Facts;
use super::relation::Relation;
use super::CheckError;
use crate::clock::{ProcessId, TotalStamp};
use crate::graph::ProximityGraph;
use crate::history::History;

/// Orients still-unordered pairs of writes from neighboring processes. Where
/// the recorded deliveries show every process agreeing on an order, that
/// order is used; otherwise the pair is oriented by invocation position.
pub fn extend_ww(
    order: &Relation,
    history: &History,
    graph: &ProximityGraph,
) -> Result<Relation, CheckError> {
    let f = Facts::new(history)?;
    let mut out = order.clone();
    ww_links(&f, history, graph, &mut out);
    checked(&f, out)
}

/// Adds a read-to-write edge for every unordered neighbor pair where the
/// write already follows the read's source.
pub fn extend_rw_links(
    order: &Relation,
    history: &History,
    graph: &ProximityGraph,
) -> Result<Relation, CheckError> {
    let f = Facts::new(history)?;
    let mut out = order.clone();
    rw_links(&f, graph, &mut out);
    checked(&f, out)
}

/// Orders every remaining neighbor (read, write) pair read-first.
pub fn extend_r_rw_links(
    order: &Relation,
    history: &History,
    graph: &ProximityGraph,
) -> Result<Relation, CheckError> {
    let f = Facts::new(history)?;
    let mut out = order.clone();
    r_rw_links(&f, graph, &mut out);
    checked(&f, out)
}

/// Orders every remaining pair of reads by neighboring processes, earlier
/// invocation first. Only such pairs are left after the r-rw stage.
pub fn extend_read_read(
    order: &Relation,
    history: &History,
    graph: &ProximityGraph,
) -> Result<Relation, CheckError> {
    let f = Facts::new(history)?;
    let mut out = order.clone();
    read_read_links(&f, graph, &mut out);
    checked(&f, out)
}

fn checked(f: &Facts, order: Relation) -> Result<Relation, CheckError> {
    match causal_violation(f, &order) {
        Some(v) => Err(CheckError::Rejected(v)),
        None => Ok(order),
    }
}

/// `pos[p][stamp]`: index of the delivery of `stamp` at process `p`.
fn delivery_positions(history: &History) -> Vec<BTreeMap<TotalStamp, usize>> {
    (0..history.n)
        .map(|p| {
            history
                .deliveries_at(ProcessId(p))
                .into_iter()
                .enumerate()
                .map(|(i, s)| (s, i))
                .collect()
        })
        .collect()
}

/// Whether every process that delivered both messages delivered `a` first.
/// `None` when no process delivered both or processes disagree.
fn agreed_first(pos: &[BTreeMap<TotalStamp, usize>], a: TotalStamp, b: TotalStamp) -> Option<bool> {
    let mut verdict = None;
    for p in pos {
        if let (Some(x), Some(y)) = (p.get(&a), p.get(&b)) {
            let first = x < y;
            if verdict.is_some_and(|v| v != first) {
                return None;
            }
            verdict = Some(first);
        }
    }
    verdict
}

pub(crate) fn by_position(f: &Facts, a: usize, b: usize) -> (usize, usize) {
    if (f.invoked[a], a) <= (f.invoked[b], b) {
        (a, b)
    } else {
        (b, a)
    }
}

pub(crate) fn ww_links(f: &Facts, history: &History, graph: &ProximityGraph, order: &mut Relation) {
    let pos = delivery_positions(history);
    for (a, b) in f.neighbor_pairs(graph) {
        if !(f.is_write[a] && f.is_write[b]) || order.comparable(a, b) {
            continue;
        }
        let stamps = (history.ops[a].message, history.ops[b].message);
        let (x, y) = match stamps {
            (Some(sa), Some(sb)) => match agreed_first(&pos, sa, sb) {
                Some(true) => (a, b),
                Some(false) => (b, a),
                None => by_position(f, a, b),
            },
            _ => by_position(f, a, b),
        };
        order
            .add(x, y)
            .expect("incomparable pairs never close a cycle");
    }
}

/// Splits a neighbor pair into (read, write) if it is one.
fn read_write(f: &Facts, a: usize, b: usize) -> Option<(usize, usize)> {
    match (f.is_write[a], f.is_write[b]) {
        (false, true) => Some((a, b)),
        (true, false) => Some((b, a)),
        _ => None,
    }
}

pub(crate) fn rw_links(f: &Facts, graph: &ProximityGraph, order: &mut Relation) {
    let pairs: Vec<(usize, usize)> = f
        .neighbor_pairs(graph)
        .into_iter()
        .filter_map(|(a, b)| read_write(f, a, b))
        .collect();
    loop {
        let mut changed = false;
        for &(r, w) in &pairs {
            if order.comparable(r, w) {
                continue;
            }
            if f.source[r].is_none_or(|s| order.precedes(s, w)) {
                order
                    .add(r, w)
                    .expect("incomparable pairs never close a cycle");
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

pub(crate) fn r_rw_links(f: &Facts, graph: &ProximityGraph, order: &mut Relation) {
    for (a, b) in f.neighbor_pairs(graph) {
        if let Some((r, w)) = read_write(f, a, b) {
            if !order.comparable(r, w) {
                order
                    .add(r, w)
                    .expect("incomparable pairs never close a cycle");
            }
        }
    }
}

/// Like [`r_rw_links`], but a write the reader had already observed (lower
/// rank in the reader's view) is placed before the read.
pub(crate) fn r_rw_links_observed(
    f: &Facts,
    graph: &ProximityGraph,
    ranks: &[Vec<u64>],
    order: &mut Relation,
) {
    for (a, b) in f.neighbor_pairs(graph) {
        if let Some((r, w)) = read_write(f, a, b) {
            if !order.comparable(r, w) {
                let rank = &ranks[f.pid[r]];
                let (x, y) = if (rank[w], w) < (rank[r], r) {
                    (w, r)
                } else {
                    (r, w)
                };
                order
                    .add(x, y)
                    .expect("incomparable pairs never close a cycle");
            }
        }
    }
}

pub(crate) fn read_read_links(f: &Facts, graph: &ProximityGraph, order: &mut Relation) {
    for (a, b) in f.neighbor_pairs(graph) {
        if f.is_read(a) && f.is_read(b) && !order.comparable(a, b) {
            let (x, y) = by_position(f, a, b);
            order
                .add(x, y)
                .expect("incomparable pairs never close a cycle");
        }
    }
}

/// Whether every neighbor pair is ordered.
pub(crate) fn is_neighbor_total(f: &Facts, graph: &ProximityGraph, order: &Relation) -> bool {
    f.neighbor_pairs(graph)
        .into_iter()
        .all(|(a, b)| order.comparable(a, b))
}

#[cfg(test)]
mod tests {
    use super::super::causal::build_read_from;
    use super::*;

    #[test]
    fn empty_graph_adds_nothing() {
        let mut h = History::new(2);
        h.write(0, "X", 1);
        h.read(0, "Y", None);
        h.write(1, "Y", 1);
        h.read(1, "X", None);
        let g = ProximityGraph::empty(2);
        let base = build_read_from(&h).unwrap();
        let ww = extend_ww(&base, &h, &g).unwrap();
        let rw = extend_rw_links(&ww, &h, &g).unwrap();
        let all = extend_r_rw_links(&rw, &h, &g).unwrap();
        assert_eq!(all, base);
    }

    #[test]
    fn single_unrelated_pair_gets_one_r_rw_edge() {
        let mut h = History::new(2);
        let w = h.write(0, "X", 1);
        let w2 = h.write(1, "Y", 1);
        let r = h.read(1, "Y", Some(1));
        let g = ProximityGraph::complete(2);
        let base = build_read_from(&h).unwrap();
        let ww = extend_ww(&base, &h, &g).unwrap();
        assert!(ww.comparable(w.0, w2.0));
        let all = extend_r_rw_links(&extend_rw_links(&ww, &h, &g).unwrap(), &h, &g).unwrap();
        assert!(all.comparable(r.0, w.0));
        let f = Facts::new(&h).unwrap();
        assert!(is_neighbor_total(&f, &g, &all));
    }

    #[test]
    fn rw_link_protects_read_from() {
        // w_r(X,1) -> r_p(X,1), and w_r precedes w_q, so r_p must precede w_q.
        let mut h = History::new(3);
        let wr = h.write(2, "X", 1);
        let rq = h.read(1, "X", Some(1));
        let wq = h.write(1, "X", 2);
        let rp = h.read(0, "X", Some(1));
        let g = ProximityGraph::parse(3, "0-1").unwrap();
        let base = build_read_from(&h).unwrap();
        assert!(base.precedes(wr.0, wq.0) && base.precedes(rq.0, wq.0));
        let rw = extend_rw_links(&base, &h, &g).unwrap();
        assert!(rw.precedes(rp.0, wq.0));
    }

    #[test]
    fn ww_follows_agreed_delivery_order() {
        use crate::history::{BroadcastEvent, EventKind};
        let mut h = History::new(2);
        let a = h.write(0, "X", 1);
        let b = h.write(1, "X", 2);
        let sa = TotalStamp::new(5, ProcessId(0));
        let sb = TotalStamp::new(1, ProcessId(1));
        h.ops[a.0].message = Some(sa);
        h.ops[b.0].message = Some(sb);
        for p in 0..2 {
            for s in [sb, sa] {
                h.events.push(BroadcastEvent {
                    time: 0,
                    kind: EventKind::Deliver,
                    pid: ProcessId(p),
                    stamp: s,
                });
            }
        }
        let g = ProximityGraph::complete(2);
        let ww = extend_ww(&build_read_from(&h).unwrap(), &h, &g).unwrap();
        assert!(ww.precedes(b.0, a.0));
    }
}
