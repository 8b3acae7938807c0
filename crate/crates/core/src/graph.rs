//! Undirected proximity graphs over process ids.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::ProcessId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("process {pid} out of range for a system of {n} processes")]
    OutOfRange { pid: usize, n: usize },
    #[error("self-loop on {0}")]
    SelfLoop(ProcessId),
    #[error("malformed graph description `{0}`")]
    Malformed(String),
}

/// Processes joined by an edge must see each other's operations in one
/// agreed order; unconnected processes only get causal guarantees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProximityGraph {
    n: usize,
    adjacency: Vec<BTreeSet<ProcessId>>,
}

impl ProximityGraph {
    pub fn empty(n: usize) -> Self {
        ProximityGraph {
            n,
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for p in 0..n {
            for q in (p + 1)..n {
                g.insert(ProcessId(p), ProcessId(q));
            }
        }
        g
    }

    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (ProcessId, ProcessId)>,
    {
        let mut g = Self::empty(n);
        for (p, q) in edges {
            g.add_edge(p, q)?;
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, p: ProcessId, q: ProcessId) -> Result<(), GraphError> {
        self.check(p)?;
        self.check(q)?;
        if p == q {
            return Err(GraphError::SelfLoop(p));
        }
        self.insert(p, q);
        Ok(())
    }

    fn insert(&mut self, p: ProcessId, q: ProcessId) {
        self.adjacency[p.0].insert(q);
        self.adjacency[q.0].insert(p);
    }

    fn check(&self, p: ProcessId) -> Result<(), GraphError> {
        if p.0 >= self.n {
            Err(GraphError::OutOfRange {
                pid: p.0,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, p: ProcessId) -> Result<&BTreeSet<ProcessId>, GraphError> {
        self.check(p)?;
        Ok(&self.adjacency[p.0])
    }

    /// `false` for out-of-range ids and for `p == q`.
    pub fn are_neighbors(&self, p: ProcessId, q: ProcessId) -> bool {
        p.0 < self.n && self.adjacency[p.0].contains(&q)
    }

    /// Edges as ordered pairs `(p, q)` with `p < q`.
    pub fn edges(&self) -> impl Iterator<Item = (ProcessId, ProcessId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(p, adj)| {
            adj.iter()
                .filter(move |q| q.0 > p)
                .map(move |&q| (ProcessId(p), q))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn is_empty_graph(&self) -> bool {
        self.edge_count() == 0
    }

    pub fn is_complete(&self) -> bool {
        self.edge_count() == self.n * self.n.saturating_sub(1) / 2
    }

    /// Every edge of `self` is also an edge of `other`.
    pub fn is_subgraph_of(&self, other: &ProximityGraph) -> bool {
        self.n == other.n && self.edges().all(|(p, q)| other.are_neighbors(p, q))
    }

    /// Parses `empty`, `complete`, or a comma-separated edge list such as
    /// `0-1,2-3`, for a system of `n` processes.
    pub fn parse(n: usize, text: &str) -> Result<Self, GraphError> {
        text.parse::<GraphDescription>()?.resolve(n)
    }

    /// Inverse of [`ProximityGraph::parse`]; keywords are preferred when they apply.
    pub fn describe(&self) -> String {
        if self.is_empty_graph() {
            "empty".to_string()
        } else if self.is_complete() {
            "complete".to_string()
        } else {
            self.edge_list()
        }
    }

    pub fn edge_list(&self) -> String {
        self.edges()
            .map(|(p, q)| format!("{}-{}", p.0, q.0))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// All graphs on `n` processes, one per subset of the possible edges.
    pub fn all_graphs(n: usize) -> Vec<ProximityGraph> {
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .collect();
        (0u64..(1 << pairs.len()))
            .map(|mask| {
                let mut g = ProximityGraph::empty(n);
                for (bit, &(p, q)) in pairs.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        g.insert(ProcessId(p), ProcessId(q));
                    }
                }
                g
            })
            .collect()
    }
}

impl fmt::Display for ProximityGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// A graph description that has not been bound to a system size yet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphDescription {
    Empty,
    Complete,
    Edges(Vec<(usize, usize)>),
}

impl GraphDescription {
    pub fn resolve(&self, n: usize) -> Result<ProximityGraph, GraphError> {
        match self {
            GraphDescription::Empty => Ok(ProximityGraph::empty(n)),
            GraphDescription::Complete => Ok(ProximityGraph::complete(n)),
            GraphDescription::Edges(edges) => ProximityGraph::from_edges(
                n,
                edges.iter().map(|&(p, q)| (ProcessId(p), ProcessId(q))),
            ),
        }
    }
}

impl FromStr for GraphDescription {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s {
            "empty" | "" => return Ok(GraphDescription::Empty),
            "complete" => return Ok(GraphDescription::Complete),
            _ => {}
        }
        let malformed = || GraphError::Malformed(s.to_string());
        let mut edges = Vec::new();
        for part in s.split(',') {
            let (a, b) = part.trim().split_once('-').ok_or_else(malformed)?;
            let a = a.trim().parse().map_err(|_| malformed())?;
            let b = b.trim().parse().map_err(|_| malformed())?;
            edges.push((a, b));
        }
        Ok(GraphDescription::Edges(edges))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_examples() {
        let g = ProximityGraph::empty(3);
        assert!(g.neighbors(ProcessId(1)).unwrap().is_empty());

        let k4 = ProximityGraph::complete(4);
        let n0: Vec<_> = k4
            .neighbors(ProcessId(0))
            .unwrap()
            .iter()
            .copied()
            .collect();
        assert_eq!(n0, vec![ProcessId(1), ProcessId(2), ProcessId(3)]);

        // p, q, r, s = 0, 1, 2, 3 with edges {p,q} and {r,s}
        let fig = ProximityGraph::parse(4, "0-1,2-3").unwrap();
        let nq: Vec<_> = fig
            .neighbors(ProcessId(1))
            .unwrap()
            .iter()
            .copied()
            .collect();
        assert_eq!(nq, vec![ProcessId(0)]);
    }

    #[test]
    fn neighbors_out_of_range() {
        let g = ProximityGraph::complete(2);
        assert_eq!(
            g.neighbors(ProcessId(2)),
            Err(GraphError::OutOfRange { pid: 2, n: 2 })
        );
    }

    #[test]
    fn rejects_self_loops_and_bad_ids() {
        assert_eq!(
            ProximityGraph::parse(3, "1-1"),
            Err(GraphError::SelfLoop(ProcessId(1)))
        );
        assert!(matches!(
            ProximityGraph::parse(3, "0-3"),
            Err(GraphError::OutOfRange { pid: 3, n: 3 })
        ));
        assert!(matches!(
            ProximityGraph::parse(3, "0+1"),
            Err(GraphError::Malformed(_))
        ));
    }

    #[test]
    fn neighbor_relation_is_symmetric_and_irreflexive() {
        for g in ProximityGraph::all_graphs(4) {
            for p in 0..4 {
                let p = ProcessId(p);
                let np = g.neighbors(p).unwrap();
                assert!(!np.contains(&p));
                for &q in np {
                    assert!(g.neighbors(q).unwrap().contains(&p));
                }
            }
        }
    }

    #[test]
    fn describe_round_trips() {
        for g in ProximityGraph::all_graphs(3) {
            assert_eq!(ProximityGraph::parse(3, &g.describe()).unwrap(), g);
        }
        assert_eq!(ProximityGraph::all_graphs(3).len(), 8);
    }
}
