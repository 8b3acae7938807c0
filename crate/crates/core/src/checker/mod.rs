//! Checks recorded histories against the broadcast contract and against
//! causal, sequential and fisheye consistency.
//!
//! [`check_fisheye`] first tries the staged construction that the
//! correctness argument for the register store uses, which succeeds on
//! genuine runs. If that construction gets stuck it falls back to an exact
//! search, so the verdict never depends on the construction's heuristics.

mod broadcast;
mod brute;
mod causal;
mod extend;
mod facts;
mod linearize;
mod relation;
mod search;
mod witness;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::ProcessId;
use crate::graph::ProximityGraph;
use crate::history::{History, HistoryError, OpId};

pub use broadcast::{build_message_causal_order, check_broadcast_properties, BroadcastViolation};
pub use brute::{brute_force_check, BRUTE_FORCE_CAP};
pub use causal::{build_read_from, check_causal_legality};
pub use extend::{extend_r_rw_links, extend_read_read, extend_rw_links, extend_ww};
pub use relation::{CycleError, Relation};
pub use witness::{Method, Witness};

use facts::Facts;
use linearize::{linearize, ranks, Budget};

/// Why a history is not in the checked condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    /// Process order and read-from links form a cycle (a value was read
    /// before it was written). The first and last entries coincide.
    Cycle { ops: Vec<OpId> },
    /// A read returns a value that is already overwritten in causal order.
    OverwrittenRead {
        read: OpId,
        source: Option<OpId>,
        overwritten_by: OpId,
    },
    /// No legal sequential view for this process respects causal order.
    NoLegalView { pid: ProcessId },
    /// Views exist, but no way of ordering the neighbors' operations
    /// keeps all of them legal.
    NoNeighborOrder,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { ops } => {
                let path: Vec<String> = ops.iter().map(ToString::to_string).collect();
                write!(f, "causal cycle {}", path.join(" -> "))
            }
            Violation::OverwrittenRead {
                read,
                source,
                overwritten_by,
            } => match source {
                Some(s) => write!(f, "{read} reads from {s}, overwritten by {overwritten_by}"),
                None => write!(f, "{read} reads the initial value after {overwritten_by}"),
            },
            Violation::NoLegalView { pid } => {
                write!(f, "{pid} has no legal view respecting causal order")
            }
            Violation::NoNeighborOrder => {
                write!(
                    f,
                    "no ordering of neighbor operations keeps every view legal"
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted(Witness),
    Rejected(Violation),
}

impl Verdict {
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Accepted(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error(transparent)]
    Malformed(#[from] HistoryError),
    #[error("graph over {graph} processes for a history over {history}")]
    GraphSize { graph: usize, history: usize },
    #[error("search budget of {budget} steps exhausted")]
    SearchBudgetExceeded { budget: u64 },
    #[error("fisheye needs a proximity graph and the history records none")]
    MissingGraph,
    #[error("{ops} operations exceed the brute-force cap of {cap}")]
    TooLarge { ops: usize, cap: usize },
    /// Returned by the individual construction stages; [`check_fisheye`]
    /// reports violations as [`Verdict::Rejected`] instead.
    #[error("{0}")]
    Rejected(Violation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Search steps before giving up with [`CheckError::SearchBudgetExceeded`].
    pub budget: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { budget: 2_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Condition {
    Cc,
    Sc,
    Fisheye,
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cc" => Ok(Condition::Cc),
            "sc" => Ok(Condition::Sc),
            "fisheye" => Ok(Condition::Fisheye),
            other => Err(format!(
                "unknown condition {other:?} (expected cc, sc or fisheye)"
            )),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::Cc => "cc",
            Condition::Sc => "sc",
            Condition::Fisheye => "fisheye",
        })
    }
}

impl Condition {
    /// The proximity graph this condition amounts to. Fisheye needs one.
    pub fn graph(self, n: usize, fisheye: Option<&ProximityGraph>) -> Option<ProximityGraph> {
        match self {
            Condition::Cc => Some(ProximityGraph::empty(n)),
            Condition::Sc => Some(ProximityGraph::complete(n)),
            Condition::Fisheye => fisheye.cloned(),
        }
    }
}

pub fn check_fisheye(history: &History, graph: &ProximityGraph) -> Result<Verdict, CheckError> {
    check_fisheye_with(history, graph, &CheckOptions::default())
}

/// Causal consistency: fisheye consistency over the empty graph.
pub fn check_cc(history: &History) -> Result<Verdict, CheckError> {
    check_fisheye(history, &ProximityGraph::empty(history.n))
}

/// Sequential consistency: fisheye consistency over the complete graph.
pub fn check_sc(history: &History) -> Result<Verdict, CheckError> {
    check_fisheye(history, &ProximityGraph::complete(history.n))
}

pub fn check_fisheye_with(
    history: &History,
    graph: &ProximityGraph,
    options: &CheckOptions,
) -> Result<Verdict, CheckError> {
    let f = Facts::new(history)?;
    if graph.n() != history.n {
        return Err(CheckError::GraphSize {
            graph: graph.n(),
            history: history.n,
        });
    }
    let base = match causal::read_from_order(&f) {
        Ok(order) => order,
        Err(v) => return Ok(Verdict::Rejected(v)),
    };
    // Any acceptable order contains the read-from order, so a violation
    // here rules every one of them out.
    if let Some(v) = causal::causal_violation(&f, &base) {
        return Ok(Verdict::Rejected(v));
    }
    let ranks: Vec<Vec<u64>> = (0..history.n).map(|p| ranks(history, p)).collect();
    let mut budget = Budget::new(options.budget);
    for observed in [false, true] {
        if let Some(w) = construct(&f, history, graph, &base, &ranks, observed, &mut budget)? {
            return Ok(Verdict::Accepted(w));
        }
    }
    Ok(
        match search::search(&f, graph, base, &ranks, &mut budget)? {
            search::Outcome::Found { order, views } => {
                Verdict::Accepted(witness(Method::Search, &order, views))
            }
            search::Outcome::NoView(p) => {
                Verdict::Rejected(Violation::NoLegalView { pid: ProcessId(p) })
            }
            search::Outcome::Exhausted => Verdict::Rejected(Violation::NoNeighborOrder),
        },
    )
}

/// Checks a history against a named condition; `graph` is only used for
/// fisheye and defaults to the one recorded in the history.
pub fn check_condition(
    history: &History,
    condition: Condition,
    graph: Option<&ProximityGraph>,
) -> Result<Verdict, CheckError> {
    let g = condition
        .graph(history.n, graph.or(history.graph.as_ref()))
        .ok_or(CheckError::MissingGraph)?;
    check_fisheye(history, &g)
}

/// The staged construction. `None` means it got stuck, not that the
/// history is rejected.
///
/// Taken literally, the r-rw stage always puts the read first, which can
/// make a read return an overwritten value even on genuine runs. With
/// `observed` set, pairs are instead oriented the way the reader saw them.
fn construct(
    f: &Facts,
    history: &History,
    graph: &ProximityGraph,
    base: &Relation,
    ranks: &[Vec<u64>],
    observed: bool,
    budget: &mut Budget,
) -> Result<Option<Witness>, CheckError> {
    let mut order = base.clone();
    extend::ww_links(f, history, graph, &mut order);
    if causal::causal_violation(f, &order).is_some() {
        return Ok(None);
    }
    extend::rw_links(f, graph, &mut order);
    if observed {
        extend::r_rw_links_observed(f, graph, ranks, &mut order);
    } else {
        extend::r_rw_links(f, graph, &mut order);
    }
    extend::read_read_links(f, graph, &mut order);
    if causal::causal_violation(f, &order).is_some() {
        return Ok(None);
    }
    debug_assert!(extend::is_neighbor_total(f, graph, &order));
    let mut views = Vec::with_capacity(f.n);
    for (p, rank) in ranks.iter().enumerate() {
        match linearize(f, &order, p, rank, budget)? {
            Some(v) => views.push(v),
            None => return Ok(None),
        }
    }
    Ok(Some(witness(Method::Construction, &order, views)))
}

fn witness(method: Method, order: &Relation, views: Vec<Vec<usize>>) -> Witness {
    Witness {
        method,
        order: order.pairs().map(|(a, b)| (OpId(a), OpId(b))).collect(),
        views: views
            .into_iter()
            .map(|v| v.into_iter().map(OpId).collect())
            .collect(),
    }
}
