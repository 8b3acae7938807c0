use std::collections::BTreeMap;

use crate::graph::ProximityGraph;
use crate::history::{History, HistoryError, OpId};

/// Per-operation facts the checker stages look up repeatedly.
#[derive(Debug, Clone)]
pub(crate) struct Facts {
    pub n: usize,
    pub pid: Vec<usize>,
    pub is_write: Vec<bool>,
    /// Interned register index.
    pub register: Vec<usize>,
    pub register_count: usize,
    /// For reads: the write they return, `None` for the initial value.
    pub source: Vec<Option<usize>>,
    pub writes_on: Vec<Vec<usize>>,
    pub reads_on: Vec<Vec<usize>>,
    pub by_process: Vec<Vec<usize>>,
    pub invoked: Vec<usize>,
}

impl Facts {
    pub fn new(history: &History) -> Result<Self, HistoryError> {
        history.validate()?;
        let mut names: BTreeMap<&str, usize> = BTreeMap::new();
        let register: Vec<usize> = history
            .ops
            .iter()
            .map(|op| {
                let next = names.len();
                *names.entry(op.register()).or_insert(next)
            })
            .collect();
        let register_count = names.len();
        let sources = history.read_sources();
        let m = history.ops.len();
        let mut f = Facts {
            n: history.n,
            pid: history.ops.iter().map(|op| op.pid.0).collect(),
            is_write: history.ops.iter().map(|op| op.is_write()).collect(),
            register,
            register_count,
            source: (0..m)
                .map(|i| sources.get(&OpId(i)).copied().flatten().map(|s| s.0))
                .collect(),
            writes_on: vec![Vec::new(); register_count],
            reads_on: vec![Vec::new(); register_count],
            by_process: vec![Vec::new(); history.n],
            invoked: history.ops.iter().map(|op| op.invoked).collect(),
        };
        for i in 0..m {
            if f.is_write[i] {
                f.writes_on[f.register[i]].push(i);
            } else {
                f.reads_on[f.register[i]].push(i);
            }
            f.by_process[f.pid[i]].push(i);
        }
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.pid.len()
    }

    pub fn is_read(&self, op: usize) -> bool {
        !self.is_write[op]
    }

    /// Operations of process `p` plus every write, in id order.
    pub fn view(&self, p: usize) -> Vec<usize> {
        (0..self.len())
            .filter(|&o| self.pid[o] == p || self.is_write[o])
            .collect()
    }

    /// Unordered pairs `(a, b)`, `a < b`, of operations issued by distinct
    /// neighbors in `graph`.
    pub fn neighbor_pairs(&self, graph: &ProximityGraph) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.len() {
            for b in a + 1..self.len() {
                let (p, q) = (self.pid[a], self.pid[b]);
                if p != q && graph.are_neighbors(p.into(), q.into()) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}
