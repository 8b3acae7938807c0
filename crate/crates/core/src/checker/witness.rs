//! Certificates for accepted histories, checkable without the checker.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::graph::ProximityGraph;
use crate::history::{History, OpId, OpKind};

/// How an accepting order was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// The staged construction (read-from, ww, rw, r-rw links).
    Construction,
    /// Exhaustive search over neighbor-pair orientations.
    Search,
    /// The brute-force oracle.
    BruteForce,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub method: Method,
    /// The subsuming order, as all of its (transitively closed) pairs.
    pub order: Vec<(OpId, OpId)>,
    /// One legal sequential view per process.
    pub views: Vec<Vec<OpId>>,
}

impl Witness {
    /// Re-checks every clause of the definition from scratch.
    pub fn validate(&self, history: &History, graph: &ProximityGraph) -> Result<(), String> {
        let m = history.ops.len();
        let mut before = vec![vec![false; m]; m];
        for &(a, b) in &self.order {
            if a.0 >= m || b.0 >= m {
                return Err(format!("order mentions unknown operation {a} or {b}"));
            }
            before[a.0][b.0] = true;
        }
        for a in 0..m {
            if before[a][a] {
                return Err(format!("order is reflexive at op{a}"));
            }
            for b in 0..m {
                for c in 0..m {
                    if before[a][b] && before[b][c] && !before[a][c] {
                        return Err(format!("order is not transitive at op{a}, op{b}, op{c}"));
                    }
                }
            }
        }
        let mut last: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, op) in history.ops.iter().enumerate() {
            if let Some(&prev) = last.get(&op.pid.0) {
                if !before[prev][i] {
                    return Err(format!("order misses process order op{prev} -> op{i}"));
                }
            }
            last.insert(op.pid.0, i);
        }
        let writer: BTreeMap<(&str, i64), usize> = history
            .ops
            .iter()
            .enumerate()
            .filter_map(|(i, op)| match &op.kind {
                OpKind::Write { register, value } => Some(((register.as_str(), value.0), i)),
                OpKind::Read { .. } => None,
            })
            .collect();
        for (i, op) in history.ops.iter().enumerate() {
            if let OpKind::Read {
                register,
                value: Some(v),
            } = &op.kind
            {
                let w = writer[&(register.as_str(), v.0)];
                if !before[w][i] {
                    return Err(format!("order misses read-from op{w} -> op{i}"));
                }
            }
        }
        for a in 0..m {
            for b in a + 1..m {
                let (p, q) = (history.ops[a].pid, history.ops[b].pid);
                if p != q && graph.are_neighbors(p, q) && !before[a][b] && !before[b][a] {
                    return Err(format!("neighbors' op{a} and op{b} are unordered"));
                }
            }
        }
        if self.views.len() != history.n {
            return Err(format!(
                "{} views for {} processes",
                self.views.len(),
                history.n
            ));
        }
        for (p, view) in self.views.iter().enumerate() {
            let expected: BTreeSet<usize> = history
                .ops
                .iter()
                .enumerate()
                .filter(|(_, op)| op.pid.0 == p || op.is_write())
                .map(|(i, _)| i)
                .collect();
            let got: BTreeSet<usize> = view.iter().map(|o| o.0).collect();
            if got != expected || view.len() != expected.len() {
                return Err(format!(
                    "view of p{p} is not a permutation of its operations and all writes"
                ));
            }
            let mut current: BTreeMap<&str, i64> = BTreeMap::new();
            for (i, &o) in view.iter().enumerate() {
                for &earlier in &view[..i] {
                    if before[o.0][earlier.0] {
                        return Err(format!(
                            "view of p{p} places {earlier} before {o} against the order"
                        ));
                    }
                }
                match &history.ops[o.0].kind {
                    OpKind::Write { register, value } => {
                        current.insert(register, value.0);
                    }
                    OpKind::Read { register, value } => {
                        if current.get(register.as_str()).copied() != value.map(|v| v.0) {
                            return Err(format!("view of p{p} makes {o} illegal"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
