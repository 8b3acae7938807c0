//! Fisheye consistency: a hybrid total/causal order broadcast, a register
//! store built on it, a deterministic simulator and a history checker.

pub mod broadcast;
pub mod checker;
pub mod clock;
pub mod gen;
pub mod graph;
pub mod history;
pub mod history_io;
pub mod message;
pub mod scenario;
pub mod sim;
pub mod store;
pub mod sweep;

pub use broadcast::{BroadcastError, BroadcastState, Delivery, PendingEntry};
pub use clock::{ProcessId, TotalStamp, TotalView, VectorClock};
pub use graph::{GraphDescription, GraphError, ProximityGraph};
pub use history::{BroadcastEvent, EventKind, History, HistoryError, OpId, OpKind, Operation};
pub use message::{Envelope, ProtocolMessage};
pub use store::{RegisterStore, StoreError, Value, WriteMessage};
