use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One step of a process's program.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Instruction {
    /// Blocking write; returns once the process delivers its own message.
    Write {
        register: String,
        value: i64,
    },
    Read {
        register: String,
    },
    /// Reads `register` until it holds `value`. Every distinct observed value
    /// is recorded as a read.
    RepeatReadUntil {
        register: String,
        value: i64,
    },
    /// Idles for a number of ticks while deliveries continue.
    Sleep {
        ticks: u64,
    },
    /// Non-blocking broadcast of an opaque payload, bypassing the store.
    Broadcast {
        tag: u64,
    },
    Nop,
}

impl Instruction {
    pub fn write(register: &str, value: i64) -> Self {
        Instruction::Write {
            register: register.to_string(),
            value,
        }
    }

    pub fn read(register: &str) -> Self {
        Instruction::Read {
            register: register.to_string(),
        }
    }

    pub fn until(register: &str, value: i64) -> Self {
        Instruction::RepeatReadUntil {
            register: register.to_string(),
            value,
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Write { register, value } => write!(f, "write {register} {value}"),
            Instruction::Read { register } => write!(f, "read {register}"),
            Instruction::RepeatReadUntil { register, value } => {
                write!(f, "until {register} {value}")
            }
            Instruction::Sleep { ticks } => write!(f, "sleep {ticks}"),
            Instruction::Broadcast { tag } => write!(f, "broadcast {tag}"),
            Instruction::Nop => write!(f, "nop"),
        }
    }
}

pub type Program = Vec<Instruction>;

impl FromStr for Instruction {
    type Err = String;

    /// Parses the form produced by `Display`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let int = |w: &str| -> Result<i64, String> {
            w.parse()
                .map_err(|_| format!("expected an integer, found `{w}`"))
        };
        let ticks = |w: &str| -> Result<u64, String> {
            w.parse()
                .map_err(|_| format!("expected a tick count, found `{w}`"))
        };
        match words.as_slice() {
            ["write", reg, v] => Ok(Instruction::write(reg, int(v)?)),
            ["read", reg] => Ok(Instruction::read(reg)),
            ["until", reg, v] => Ok(Instruction::until(reg, int(v)?)),
            ["sleep", t] => Ok(Instruction::Sleep { ticks: ticks(t)? }),
            ["broadcast", t] => Ok(Instruction::Broadcast { tag: ticks(t)? }),
            ["nop"] => Ok(Instruction::Nop),
            _ => Err(format!("unknown instruction `{s}`")),
        }
    }
}
