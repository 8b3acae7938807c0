use serde::{Deserialize, Serialize};

use crate::clock::{ProcessId, TotalStamp, VectorClock};

/// Wire messages exchanged by the broadcast layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolMessage<P> {
    /// An application payload with its causal vector and Lamport stamp.
    Tocobc {
        payload: P,
        s_caus: VectorClock,
        s_tot: u64,
        sender: ProcessId,
    },
    /// Announces that `sender`'s Lamport clock advanced to `last_date`.
    CatchUp { last_date: u64, sender: ProcessId },
}

impl<P> ProtocolMessage<P> {
    pub fn sender(&self) -> ProcessId {
        match self {
            ProtocolMessage::Tocobc { sender, .. } | ProtocolMessage::CatchUp { sender, .. } => {
                *sender
            }
        }
    }

    /// The Lamport clock value this message advertises for its sender.
    pub fn advertised_clock(&self) -> u64 {
        match self {
            ProtocolMessage::Tocobc { s_tot, .. } => *s_tot,
            ProtocolMessage::CatchUp { last_date, .. } => *last_date,
        }
    }

    pub fn stamp(&self) -> Option<TotalStamp> {
        match self {
            ProtocolMessage::Tocobc { s_tot, sender, .. } => Some(TotalStamp::new(*s_tot, *sender)),
            ProtocolMessage::CatchUp { .. } => None,
        }
    }
}

/// A message addressed to one destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope<P> {
    pub to: ProcessId,
    pub msg: ProtocolMessage<P>,
}
