//! Text form of a [`History`], self-contained enough to check offline.
//!
//! ```text
//! fisheye-history v1
//! n 2
//! graph 0-1
//! seed 7
//! op 0 write X 1 step 0 inv 0 resp 2 msg 1 0
//! op 1 read X bot step 0 inv 0 resp 0 msg -
//! event 0 broadcast 0 1 0
//! ```
//!
//! Fields come in a fixed order. `graph` and `seed` take `none` when
//! unknown, `step` and `msg` take `-`. An event line is
//! `event <time> <kind> <pid> <stamp-time> <stamp-pid>`. Ops and events
//! may interleave; each keeps its own relative order.

use std::fmt::Write as _;

use thiserror::Error;

use crate::clock::{ProcessId, TotalStamp};
use crate::graph::{GraphDescription, ProximityGraph};
use crate::history::{BroadcastEvent, EventKind, History, OpKind, Operation};
use crate::store::{show_read, Value};

pub const HEADER: &str = "fisheye-history v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct HistoryParseError {
    pub line: usize,
    pub message: String,
}

pub fn emit(history: &History) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "n {}", history.n);
    let graph = history
        .graph
        .as_ref()
        .map_or("none".into(), |g| g.describe());
    let _ = writeln!(out, "graph {graph}");
    let seed = history.seed.map_or("none".into(), |s| s.to_string());
    let _ = writeln!(out, "seed {seed}");
    for op in &history.ops {
        let step = op.step.map_or("-".into(), |s| s.to_string());
        let msg = op
            .message
            .map_or("-".into(), |m| format!("{} {}", m.time, m.pid.0));
        let kind = match &op.kind {
            OpKind::Write { register, value } => format!("write {register} {value}"),
            OpKind::Read { register, value } => format!("read {register} {}", show_read(*value)),
        };
        let _ = writeln!(
            out,
            "op {} {kind} step {step} inv {} resp {} msg {msg}",
            op.pid.0, op.invoked, op.responded
        );
    }
    for e in &history.events {
        let _ = writeln!(
            out,
            "event {} {} {} {} {}",
            e.time,
            e.kind.as_str(),
            e.pid.0,
            e.stamp.time,
            e.stamp.pid.0
        );
    }
    out
}

/// Parses a history and validates it.
pub fn parse(text: &str) -> Result<History, HistoryParseError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, message: String| HistoryParseError { line, message };
    match lines.next() {
        Some((_, HEADER)) => {}
        Some((line, other)) => {
            return Err(err(line, format!("expected `{HEADER}`, found `{other}`")))
        }
        None => return Err(err(1, "empty history".into())),
    }
    let mut history: Option<History> = None;
    let mut last = 1;
    for (line, text) in lines {
        last = line;
        parse_line(&mut history, text).map_err(|m| err(line, m))?;
    }
    let history = history.ok_or_else(|| err(last, "missing `n`".into()))?;
    history.validate().map_err(|e| err(last, e.to_string()))?;
    Ok(history)
}

fn parse_line(history: &mut Option<History>, text: &str) -> Result<(), String> {
    let words: Vec<&str> = text.split_whitespace().collect();
    if let ["n", n] = words.as_slice() {
        if history.is_some() {
            return Err("`n` given twice".into());
        }
        *history = Some(History::new(number(n)?));
        return Ok(());
    }
    let h = history.as_mut().ok_or("`n` must come first")?;
    match words.as_slice() {
        ["graph", "none"] => h.graph = None,
        ["graph", spec] => {
            let g: ProximityGraph = spec
                .parse::<GraphDescription>()
                .and_then(|d| d.resolve(h.n))
                .map_err(|e| e.to_string())?;
            h.graph = Some(g);
        }
        ["seed", "none"] => h.seed = None,
        ["seed", s] => h.seed = Some(number(s)?),
        ["op", pid, kind, register, value, "step", step, "inv", inv, "resp", resp, "msg", msg @ ..] =>
        {
            let kind = match *kind {
                "write" => OpKind::Write {
                    register: register.to_string(),
                    value: Value(number(value)?),
                },
                "read" => OpKind::Read {
                    register: register.to_string(),
                    value: match *value {
                        "bot" => None,
                        v => Some(Value(number(v)?)),
                    },
                },
                other => return Err(format!("unknown operation `{other}`")),
            };
            let message = match msg {
                ["-"] => None,
                [time, pid] => Some(TotalStamp::new(number(time)?, ProcessId(number(pid)?))),
                _ => return Err("`msg` takes `-` or a stamp `<time> <pid>`".into()),
            };
            h.ops.push(Operation {
                pid: ProcessId(number(pid)?),
                kind,
                step: match *step {
                    "-" => None,
                    s => Some(number(s)?),
                },
                invoked: number(inv)?,
                responded: number(resp)?,
                message,
            });
        }
        ["event", time, kind, pid, st, sp] => {
            let kind = match *kind {
                "broadcast" => EventKind::Broadcast,
                "receive" => EventKind::Receive,
                "deliver" => EventKind::Deliver,
                other => return Err(format!("unknown event kind `{other}`")),
            };
            h.events.push(BroadcastEvent {
                time: number(time)?,
                kind,
                pid: ProcessId(number(pid)?),
                stamp: TotalStamp::new(number(st)?, ProcessId(number(sp)?)),
            });
        }
        _ => return Err(format!("cannot parse `{text}`")),
    }
    Ok(())
}

fn number<T: std::str::FromStr>(word: &str) -> Result<T, String> {
    word.parse()
        .map_err(|_| format!("expected a number, found `{word}`"))
}
