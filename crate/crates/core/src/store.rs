//! Replicated read/write registers with local reads and writes that block
//! until their own broadcast is delivered back.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::ProcessId;

/// A value that can be written to a register. "Never written" is modelled
/// as `None` wherever a read result is returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Value(pub i64);

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Formats a read result, printing `bot` for the initial value.
pub fn show_read(v: Option<Value>) -> String {
    v.map_or_else(|| "bot".to_string(), |v| v.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WriteMessage {
    pub register: String,
    pub value: Value,
    pub writer: ProcessId,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("{0} started a write while another write was in flight")]
    WriteInFlight(ProcessId),
    #[error("{0} delivered its own write with no write in flight")]
    SpuriousRelease(ProcessId),
}

#[derive(Debug, Clone)]
pub struct RegisterStore {
    owner: ProcessId,
    values: BTreeMap<String, Value>,
    write_in_flight: bool,
}

impl RegisterStore {
    pub fn new(owner: ProcessId) -> Self {
        RegisterStore {
            owner,
            values: BTreeMap::new(),
            write_in_flight: false,
        }
    }

    pub fn owner(&self) -> ProcessId {
        self.owner
    }

    /// Arms the in-flight flag and returns the message to toco-broadcast.
    /// The write completes when [`RegisterStore::on_deliver_write`] sees
    /// this message come back.
    pub fn write(&mut self, register: &str, value: Value) -> Result<WriteMessage, StoreError> {
        if self.write_in_flight {
            return Err(StoreError::WriteInFlight(self.owner));
        }
        self.write_in_flight = true;
        Ok(WriteMessage {
            register: register.to_string(),
            value,
            writer: self.owner,
        })
    }

    pub fn read(&self, register: &str) -> Option<Value> {
        self.values.get(register).copied()
    }

    pub fn is_write_in_flight(&self) -> bool {
        self.write_in_flight
    }

    /// Applies a delivered write. Returns `true` when it released this
    /// process's own pending write.
    pub fn on_deliver_write(&mut self, msg: &WriteMessage) -> Result<bool, StoreError> {
        self.values.insert(msg.register.clone(), msg.value);
        if msg.writer == self.owner {
            if !self.write_in_flight {
                return Err(StoreError::SpuriousRelease(self.owner));
            }
            self.write_in_flight = false;
            return Ok(true);
        }
        Ok(false)
    }

    pub fn registers(&self) -> impl Iterator<Item = (&str, Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }
}
