//! Independent oracle that decides fisheye consistency straight from the
//! definition by enumeration. Exponential; only for tiny histories.

use std::collections::BTreeMap;

use super::witness::{Method, Witness};
use super::CheckError;
use crate::graph::ProximityGraph;
use crate::history::{History, OpId, OpKind};

/// Largest history [`brute_force_check`] accepts.
pub const BRUTE_FORCE_CAP: usize = 10;

type Matrix = Vec<Vec<bool>>;

fn close(mut m: Matrix) -> Matrix {
    let n = m.len();
    for k in 0..n {
        for i in 0..n {
            if m[i][k] {
                for j in 0..n {
                    if m[k][j] {
                        m[i][j] = true;
                    }
                }
            }
        }
    }
    m
}

fn acyclic(m: &Matrix) -> bool {
    (0..m.len()).all(|i| !m[i][i])
}

struct Problem<'a> {
    h: &'a History,
    base: Matrix,
    views: Vec<Vec<usize>>,
    /// Neighbor pairs inside each process's view.
    view_pairs: Vec<Vec<(usize, usize)>>,
    /// Neighbor pairs no single view contains.
    free_pairs: Vec<(usize, usize)>,
    /// Legal sequences per process, grouped by how they orient `view_pairs`.
    groups: Vec<BTreeMap<Vec<bool>, Vec<Vec<usize>>>>,
}

/// Returns a witness iff the history is fisheye consistent for `graph`.
pub fn brute_force_check(
    history: &History,
    graph: &ProximityGraph,
) -> Result<Option<Witness>, CheckError> {
    history.validate()?;
    let m = history.ops.len();
    if m > BRUTE_FORCE_CAP {
        return Err(CheckError::TooLarge {
            ops: m,
            cap: BRUTE_FORCE_CAP,
        });
    }
    if graph.n() != history.n {
        return Err(CheckError::GraphSize {
            graph: graph.n(),
            history: history.n,
        });
    }
    let ops = &history.ops;
    let mut base = vec![vec![false; m]; m];
    for a in 0..m {
        for b in a + 1..m {
            if ops[a].pid == ops[b].pid {
                base[a][b] = true;
            }
        }
        if let OpKind::Read {
            register,
            value: Some(v),
        } = &ops[a].kind
        {
            let w = (0..m)
                .find(|&w| {
                    ops[w].kind
                        == OpKind::Write {
                            register: register.clone(),
                            value: *v,
                        }
                })
                .expect("validated histories only read written values");
            base[w][a] = true;
        }
    }
    let base = close(base);
    if !acyclic(&base) {
        return Ok(None);
    }
    let views: Vec<Vec<usize>> = (0..history.n)
        .map(|p| {
            (0..m)
                .filter(|&o| ops[o].pid.0 == p || ops[o].is_write())
                .collect()
        })
        .collect();
    let mut neighbor_pairs = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            if ops[a].pid != ops[b].pid && graph.are_neighbors(ops[a].pid, ops[b].pid) {
                neighbor_pairs.push((a, b));
            }
        }
    }
    let view_pairs: Vec<Vec<(usize, usize)>> = views
        .iter()
        .map(|v| {
            neighbor_pairs
                .iter()
                .copied()
                .filter(|(a, b)| v.contains(a) && v.contains(b))
                .collect()
        })
        .collect();
    let free_pairs = neighbor_pairs
        .iter()
        .copied()
        .filter(|pair| view_pairs.iter().all(|vp| !vp.contains(pair)))
        .collect();
    let mut problem = Problem {
        h: history,
        base,
        views,
        view_pairs,
        free_pairs,
        groups: Vec::new(),
    };
    for p in 0..history.n {
        let mut group: BTreeMap<Vec<bool>, Vec<Vec<usize>>> = BTreeMap::new();
        for seq in legal_sequences(&problem, p) {
            let pos = positions(m, &seq);
            let sig = problem.view_pairs[p]
                .iter()
                .map(|&(a, b)| pos[a] < pos[b])
                .collect();
            group.entry(sig).or_default().push(seq);
        }
        if group.is_empty() {
            return Ok(None);
        }
        problem.groups.push(group);
    }
    let mut chosen = Vec::new();
    Ok(pick(&problem, &mut BTreeMap::new(), &mut chosen))
}

fn positions(m: usize, seq: &[usize]) -> Vec<usize> {
    let mut pos = vec![usize::MAX; m];
    for (i, &o) in seq.iter().enumerate() {
        pos[o] = i;
    }
    pos
}

/// Every legal ordering of process `p`'s view that respects the base order.
fn legal_sequences(pr: &Problem<'_>, p: usize) -> Vec<Vec<usize>> {
    fn rec(pr: &Problem<'_>, view: &[usize], seq: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if seq.len() == view.len() {
            out.push(seq.clone());
            return;
        }
        for &o in view {
            if seq.contains(&o) {
                continue;
            }
            if view.iter().any(|&x| pr.base[x][o] && !seq.contains(&x)) {
                continue;
            }
            if let OpKind::Read { register, value } = &pr.h.ops[o].kind {
                let current = seq.iter().rev().find_map(|&x| match &pr.h.ops[x].kind {
                    OpKind::Write { register: r, value } if r == register => Some(*value),
                    _ => None,
                });
                if current != *value {
                    continue;
                }
            }
            seq.push(o);
            rec(pr, view, seq, out);
            seq.pop();
        }
    }
    let mut out = Vec::new();
    rec(pr, &pr.views[p], &mut Vec::new(), &mut out);
    out
}

/// Chooses a signature per process, consistently on shared pairs.
fn pick(
    pr: &Problem<'_>,
    fixed: &mut BTreeMap<(usize, usize), bool>,
    chosen: &mut Vec<Vec<bool>>,
) -> Option<Witness> {
    let p = chosen.len();
    if p == pr.views.len() {
        return complete(pr, fixed, chosen);
    }
    for sig in pr.groups[p].keys() {
        let pairs = &pr.view_pairs[p];
        if pairs
            .iter()
            .zip(sig)
            .any(|(pair, &o)| fixed.get(pair).is_some_and(|&f| f != o))
        {
            continue;
        }
        let added: Vec<((usize, usize), bool)> = pairs
            .iter()
            .zip(sig)
            .filter(|(pair, _)| !fixed.contains_key(pair))
            .map(|(&pair, &o)| (pair, o))
            .collect();
        fixed.extend(added.iter().copied());
        chosen.push(sig.clone());
        if let Some(w) = pick(pr, fixed, chosen) {
            return Some(w);
        }
        chosen.pop();
        for (pair, _) in added {
            fixed.remove(&pair);
        }
    }
    None
}

/// Tries every orientation of the pairs no view decides.
fn complete(
    pr: &Problem<'_>,
    fixed: &BTreeMap<(usize, usize), bool>,
    chosen: &[Vec<bool>],
) -> Option<Witness> {
    let k = pr.free_pairs.len();
    for mask in 0u64..(1 << k) {
        let mut r = pr.base.clone();
        let orient = |r: &mut Matrix, (a, b): (usize, usize), forward: bool| {
            if forward {
                r[a][b] = true;
            } else {
                r[b][a] = true;
            }
        };
        for (&pair, &o) in fixed {
            orient(&mut r, pair, o);
        }
        for (i, &pair) in pr.free_pairs.iter().enumerate() {
            orient(&mut r, pair, mask >> i & 1 == 1);
        }
        let r = close(r);
        if !acyclic(&r) {
            continue;
        }
        let mut views = Vec::new();
        for (p, sig) in chosen.iter().enumerate() {
            let view = &pr.views[p];
            let fits = pr.groups[p][sig].iter().find(|seq| {
                let pos = positions(r.len(), seq);
                view.iter()
                    .all(|&a| view.iter().all(|&b| !r[a][b] || pos[a] < pos[b]))
            });
            match fits {
                Some(seq) => views.push(seq.iter().map(|&o| OpId(o)).collect()),
                None => break,
            }
        }
        if views.len() == chosen.len() {
            let mut order = Vec::new();
            for (a, row) in r.iter().enumerate() {
                for (b, &x) in row.iter().enumerate() {
                    if x {
                        order.push((OpId(a), OpId(b)));
                    }
                }
            }
            return Some(Witness {
                method: Method::BruteForce,
                order,
                views,
            });
        }
    }
    None
}
