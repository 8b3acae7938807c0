//! Recorded executions: register operations plus broadcast-level events.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::{ProcessId, TotalStamp};
use crate::graph::ProximityGraph;
use crate::store::{show_read, Value};

/// Index of an operation in [`History::ops`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct OpId(pub usize);

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "op{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OpKind {
    Read {
        register: String,
        value: Option<Value>,
    },
    Write {
        register: String,
        value: Value,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Operation {
    pub pid: ProcessId,
    pub kind: OpKind,
    /// Program step that issued the operation, when it came from a simulation.
    pub step: Option<usize>,
    /// Number of events recorded before the invocation.
    pub invoked: usize,
    /// Number of events recorded before the response.
    pub responded: usize,
    /// Broadcast stamp of a write's message, when known.
    pub message: Option<TotalStamp>,
}

impl Operation {
    pub fn register(&self) -> &str {
        match &self.kind {
            OpKind::Read { register, .. } | OpKind::Write { register, .. } => register,
        }
    }

    pub fn is_write(&self) -> bool {
        matches!(self.kind, OpKind::Write { .. })
    }

    pub fn is_read(&self) -> bool {
        matches!(self.kind, OpKind::Read { .. })
    }

    /// The written value, or the value a read returned.
    pub fn value(&self) -> Option<Value> {
        match &self.kind {
            OpKind::Read { value, .. } => *value,
            OpKind::Write { value, .. } => Some(*value),
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            OpKind::Read { register, value } => {
                write!(f, "r_{}({register},{})", self.pid, show_read(*value))
            }
            OpKind::Write { register, value } => write!(f, "w_{}({register},{value})", self.pid),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Broadcast,
    Receive,
    Deliver,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Broadcast => "broadcast",
            EventKind::Receive => "receive",
            EventKind::Deliver => "deliver",
        }
    }
}

/// A broadcast-layer event at process `pid` concerning message `stamp`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BroadcastEvent {
    pub time: u64,
    pub kind: EventKind,
    pub pid: ProcessId,
    pub stamp: TotalStamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HistoryError {
    #[error("{op}: process {pid} outside a system of {n} processes")]
    ProcessOutOfRange { op: OpId, pid: ProcessId, n: usize },
    #[error("value {value} written twice to {register}")]
    DuplicateWrite { register: String, value: Value },
    #[error("{op} reads {register}={value}, which is never written")]
    ReadOfUnwrittenValue {
        op: OpId,
        register: String,
        value: Value,
    },
    #[error("{op} responds before it is invoked")]
    ResponseBeforeInvocation { op: OpId },
    #[error("event {index}: process {pid} outside a system of {n} processes")]
    EventOutOfRange {
        index: usize,
        pid: ProcessId,
        n: usize,
    },
    #[error("graph is over {graph} processes, history over {history}")]
    GraphSize { graph: usize, history: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    pub n: usize,
    /// Proximity graph the run used, if recorded.
    pub graph: Option<ProximityGraph>,
    pub seed: Option<u64>,
    /// Operations; each process's subsequence is its process order.
    pub ops: Vec<Operation>,
    /// Broadcast events in global execution order.
    pub events: Vec<BroadcastEvent>,
}

impl History {
    pub fn new(n: usize) -> Self {
        History {
            n,
            graph: None,
            seed: None,
            ops: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn with_graph(mut self, graph: ProximityGraph) -> Self {
        self.graph = Some(graph);
        self
    }

    pub fn op(&self, id: OpId) -> &Operation {
        &self.ops[id.0]
    }

    pub fn op_ids(&self) -> impl Iterator<Item = OpId> {
        (0..self.ops.len()).map(OpId)
    }

    pub fn ops_of(&self, pid: ProcessId) -> impl Iterator<Item = OpId> + '_ {
        self.op_ids().filter(move |&id| self.op(id).pid == pid)
    }

    pub fn writes(&self) -> impl Iterator<Item = OpId> + '_ {
        self.op_ids().filter(|&id| self.op(id).is_write())
    }

    pub fn reads(&self) -> impl Iterator<Item = OpId> + '_ {
        self.op_ids().filter(|&id| self.op(id).is_read())
    }

    /// Operations of `pid` plus the writes of every process, in id order.
    pub fn view_of(&self, pid: ProcessId) -> Vec<OpId> {
        self.op_ids()
            .filter(|&id| {
                let op = self.op(id);
                op.pid == pid || op.is_write()
            })
            .collect()
    }

    /// The write each read returns the value of; `None` marks the initial value.
    /// Requires a validated history.
    pub fn read_sources(&self) -> BTreeMap<OpId, Option<OpId>> {
        let writers: BTreeMap<(&str, Value), OpId> = self
            .writes()
            .filter_map(|id| Some(((self.op(id).register(), self.op(id).value()?), id)))
            .collect();
        self.reads()
            .map(|id| {
                let op = self.op(id);
                (id, op.value().map(|v| writers[&(op.register(), v)]))
            })
            .collect()
    }

    /// Checks the structural assumptions every checker relies on.
    pub fn validate(&self) -> Result<(), HistoryError> {
        let mut written = BTreeSet::new();
        for id in self.op_ids() {
            let op = self.op(id);
            if op.pid.0 >= self.n {
                return Err(HistoryError::ProcessOutOfRange {
                    op: id,
                    pid: op.pid,
                    n: self.n,
                });
            }
            if op.responded < op.invoked {
                return Err(HistoryError::ResponseBeforeInvocation { op: id });
            }
            if let OpKind::Write { register, value } = &op.kind {
                if !written.insert((register.clone(), *value)) {
                    return Err(HistoryError::DuplicateWrite {
                        register: register.clone(),
                        value: *value,
                    });
                }
            }
        }
        for id in self.reads() {
            let op = self.op(id);
            if let OpKind::Read {
                register,
                value: Some(v),
            } = &op.kind
            {
                if !written.contains(&(register.clone(), *v)) {
                    return Err(HistoryError::ReadOfUnwrittenValue {
                        op: id,
                        register: register.clone(),
                        value: *v,
                    });
                }
            }
        }
        for (index, e) in self.events.iter().enumerate() {
            if e.pid.0 >= self.n || e.stamp.pid.0 >= self.n {
                return Err(HistoryError::EventOutOfRange {
                    index,
                    pid: e.pid,
                    n: self.n,
                });
            }
        }
        if let Some(g) = &self.graph {
            if g.n() != self.n {
                return Err(HistoryError::GraphSize {
                    graph: g.n(),
                    history: self.n,
                });
            }
        }
        Ok(())
    }

    /// Stamps delivered at `pid`, in delivery order.
    pub fn deliveries_at(&self, pid: ProcessId) -> Vec<TotalStamp> {
        self.events
            .iter()
            .filter(|e| e.pid == pid && e.kind == EventKind::Deliver)
            .map(|e| e.stamp)
            .collect()
    }

    /// Stamps in the order they were broadcast.
    pub fn broadcasts(&self) -> Vec<TotalStamp> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Broadcast)
            .map(|e| e.stamp)
            .collect()
    }

    /// Appends a completed operation with no timing information.
    pub fn push(&mut self, pid: usize, kind: OpKind) -> OpId {
        let at = self.events.len();
        self.ops.push(Operation {
            pid: ProcessId(pid),
            kind,
            step: None,
            invoked: at,
            responded: at,
            message: None,
        });
        OpId(self.ops.len() - 1)
    }

    pub fn write(&mut self, pid: usize, register: &str, value: i64) -> OpId {
        self.push(
            pid,
            OpKind::Write {
                register: register.to_string(),
                value: Value(value),
            },
        )
    }

    pub fn read(&mut self, pid: usize, register: &str, value: Option<i64>) -> OpId {
        self.push(
            pid,
            OpKind::Read {
                register: register.to_string(),
                value: value.map(Value),
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_malformed_histories() {
        let mut h = History::new(2);
        h.write(0, "X", 1);
        h.write(1, "X", 1);
        assert!(matches!(
            h.validate(),
            Err(HistoryError::DuplicateWrite { .. })
        ));

        let mut h = History::new(2);
        h.read(0, "X", Some(5));
        assert!(matches!(
            h.validate(),
            Err(HistoryError::ReadOfUnwrittenValue { .. })
        ));

        let mut h = History::new(2);
        h.write(2, "X", 1);
        assert!(matches!(
            h.validate(),
            Err(HistoryError::ProcessOutOfRange { .. })
        ));
    }

    #[test]
    fn same_value_on_different_registers_is_fine() {
        let mut h = History::new(1);
        let wx = h.write(0, "X", 1);
        let wy = h.write(0, "Y", 1);
        let ry = h.read(0, "Y", Some(1));
        let rz = h.read(0, "Z", None);
        h.validate().unwrap();
        let src = h.read_sources();
        assert_eq!(src[&ry], Some(wy));
        assert_eq!(src[&rz], None);
        assert_ne!(wx, wy);
    }

    #[test]
    fn view_contains_own_ops_and_all_writes() {
        let mut h = History::new(2);
        let a = h.write(0, "X", 1);
        let b = h.read(1, "X", Some(1));
        let c = h.read(0, "X", None);
        assert_eq!(h.view_of(ProcessId(0)), vec![a, c]);
        assert_eq!(h.view_of(ProcessId(1)), vec![a, b]);
    }
}
