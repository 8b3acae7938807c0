//! Discrete-event simulation of processes running the register store over
//! the broadcast layer on a seeded asynchronous network.

mod invariants;
mod network;
mod program;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::broadcast::{BroadcastError, BroadcastState};
use crate::clock::{ProcessId, TotalStamp};
use crate::graph::ProximityGraph;
use crate::history::{BroadcastEvent, EventKind, History, OpId, OpKind, Operation};
use crate::message::{Envelope, ProtocolMessage};
use crate::store::{show_read, RegisterStore, StoreError, Value, WriteMessage};

pub use invariants::{InvariantMonitor, InvariantViolation};
pub use network::{DelayError, DelayRange, Network};
pub use program::{Instruction, Program};

/// What the broadcast layer carries in a simulation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Write(WriteMessage),
    Raw { tag: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub graph: ProximityGraph,
    pub seed: u64,
    pub delays: DelayRange,
    pub channel_delays: BTreeMap<(usize, usize), DelayRange>,
    /// Verify clock monotonicity and delivery bookkeeping after every event.
    pub check_invariants: bool,
    /// Abort after this many events.
    pub max_events: usize,
}

impl SimConfig {
    pub fn new(graph: ProximityGraph, seed: u64) -> Self {
        SimConfig {
            graph,
            seed,
            delays: DelayRange::default(),
            channel_delays: BTreeMap::new(),
            check_invariants: cfg!(debug_assertions),
            max_events: 1_000_000,
        }
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    Tocobc { stamp: TotalStamp },
    CatchUp { last_date: u64 },
}

/// One point-to-point message, for drawing space-time diagrams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageTrace {
    pub from: ProcessId,
    pub to: ProcessId,
    pub sent: u64,
    pub arrived: u64,
    pub kind: MessageKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StuckProcess {
    pub pid: ProcessId,
    pub pc: usize,
    pub waiting_on: String,
    pub pending: Vec<TotalStamp>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("expected {expected} programs, got {got}")]
    ProgramCount { expected: usize, got: usize },
    #[error("no events left at t={time} but {} process(es) cannot finish", stuck.len())]
    Deadlock {
        time: u64,
        stuck: Vec<StuckProcess>,
        history: Box<History>,
    },
    #[error("invariant violated at t={time}: {violation}")]
    Invariant {
        time: u64,
        violation: InvariantViolation,
    },
    #[error(transparent)]
    Broadcast(#[from] BroadcastError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("gave up after {limit} events")]
    EventLimit { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub history: History,
    pub messages: Vec<MessageTrace>,
    /// Payloads in delivery order, per process.
    pub delivered: Vec<Vec<(Payload, TotalStamp)>>,
    /// Simulated invocation and response time of each operation.
    pub op_times: Vec<(u64, u64)>,
    pub end_time: u64,
}

impl RunOutcome {
    /// Values returned by the reads that program step `step` of `pid` issued.
    pub fn reads_at(&self, pid: usize, step: usize) -> Vec<Option<Value>> {
        self.history
            .ops
            .iter()
            .filter(|op| op.pid.0 == pid && op.step == Some(step))
            .filter_map(|op| match op.kind {
                OpKind::Read { value, .. } => Some(value),
                OpKind::Write { .. } => None,
            })
            .collect()
    }

    /// Stamps in delivery order at `pid`.
    pub fn delivery_order(&self, pid: usize) -> Vec<TotalStamp> {
        self.delivered[pid].iter().map(|(_, s)| *s).collect()
    }
}

/// Runs `programs` (one per process) to completion.
pub fn simulate(config: &SimConfig, programs: &[Program]) -> Result<RunOutcome, SimError> {
    Simulation::new(config, programs)?.run()
}

#[derive(Debug, Clone)]
enum Status {
    Ready,
    AwaitingWrite(OpId),
    Polling {
        register: String,
        value: Value,
        last: Option<Option<Value>>,
    },
    Sleeping,
    Done,
}

#[derive(Debug)]
struct Process {
    bcast: BroadcastState<Payload>,
    store: RegisterStore,
    program: Program,
    pc: usize,
    status: Status,
}

#[derive(Debug)]
enum Event {
    Arrival {
        to: ProcessId,
        msg: ProtocolMessage<Payload>,
    },
    Wake(ProcessId),
}

struct Simulation {
    procs: Vec<Process>,
    net: Network,
    queue: BTreeMap<(u64, u64), Event>,
    seq: u64,
    now: u64,
    history: History,
    messages: Vec<MessageTrace>,
    op_times: Vec<(u64, u64)>,
    monitor: Option<InvariantMonitor>,
    max_events: usize,
}

impl Simulation {
    fn new(config: &SimConfig, programs: &[Program]) -> Result<Self, SimError> {
        let n = config.n();
        if programs.len() != n {
            return Err(SimError::ProgramCount {
                expected: n,
                got: programs.len(),
            });
        }
        let procs = programs
            .iter()
            .enumerate()
            .map(|(i, program)| Process {
                bcast: BroadcastState::new(ProcessId(i), config.graph.clone()),
                store: RegisterStore::new(ProcessId(i)),
                program: program.clone(),
                pc: 0,
                status: Status::Ready,
            })
            .collect();
        let mut history = History::new(n).with_graph(config.graph.clone());
        history.seed = Some(config.seed);
        Ok(Simulation {
            procs,
            net: Network::new(n, config.seed, config.delays, config.channel_delays.clone()),
            queue: BTreeMap::new(),
            seq: 0,
            now: 0,
            history,
            messages: Vec::new(),
            op_times: Vec::new(),
            monitor: config.check_invariants.then(|| InvariantMonitor::new(n)),
            max_events: config.max_events,
        })
    }

    fn push(&mut self, at: u64, event: Event) {
        self.queue.insert((at, self.seq), event);
        self.seq += 1;
    }

    fn record(&mut self, kind: EventKind, pid: ProcessId, stamp: TotalStamp) {
        self.history.events.push(BroadcastEvent {
            time: self.now,
            kind,
            pid,
            stamp,
        });
    }

    fn invariant<T>(&self, r: Result<T, InvariantViolation>) -> Result<T, SimError> {
        r.map_err(|violation| SimError::Invariant {
            time: self.now,
            violation,
        })
    }

    fn send(&mut self, from: ProcessId, envelopes: Vec<Envelope<Payload>>) -> Result<(), SimError> {
        if let (Some(first), Some(m)) = (envelopes.first(), self.monitor.as_mut()) {
            let r = m.on_send(from, first.msg.advertised_clock());
            self.invariant(r)?;
        }
        for Envelope { to, msg } in envelopes {
            let arrived = self.net.schedule(from.0, to.0, self.now);
            let kind = match &msg {
                ProtocolMessage::Tocobc { s_tot, sender, .. } => MessageKind::Tocobc {
                    stamp: TotalStamp::new(*s_tot, *sender),
                },
                ProtocolMessage::CatchUp { last_date, .. } => MessageKind::CatchUp {
                    last_date: *last_date,
                },
            };
            self.messages.push(MessageTrace {
                from,
                to,
                sent: self.now,
                arrived,
                kind,
            });
            self.push(arrived, Event::Arrival { to, msg });
        }
        Ok(())
    }

    fn run(mut self) -> Result<RunOutcome, SimError> {
        for i in 0..self.procs.len() {
            self.push(0, Event::Wake(ProcessId(i)));
        }
        let mut count = 0;
        while let Some(((time, _), event)) = self.queue.pop_first() {
            count += 1;
            if count > self.max_events {
                return Err(SimError::EventLimit {
                    limit: self.max_events,
                });
            }
            self.now = time;
            let pid = match event {
                Event::Arrival { to, msg } => {
                    if let Some(stamp) = msg.stamp() {
                        self.record(EventKind::Receive, to, stamp);
                    }
                    let out = self.procs[to.0].bcast.handle(msg)?;
                    self.send(to, out)?;
                    to
                }
                Event::Wake(pid) => {
                    let p = &mut self.procs[pid.0];
                    if matches!(p.status, Status::Sleeping) {
                        p.status = Status::Ready;
                    }
                    pid
                }
            };
            self.pump(pid)?;
            if let Some(m) = self.monitor.as_mut() {
                let p = &self.procs[pid.0];
                let r = m.after_step(pid, p.bcast.causal(), p.bcast.total());
                self.invariant(r)?;
            }
        }
        self.finish()
    }

    fn finish(self) -> Result<RunOutcome, SimError> {
        let stuck: Vec<StuckProcess> = self
            .procs
            .iter()
            .enumerate()
            .filter(|(_, p)| !matches!(p.status, Status::Done) || p.bcast.pending_len() > 0)
            .map(|(i, p)| StuckProcess {
                pid: ProcessId(i),
                pc: p.pc,
                waiting_on: match &p.status {
                    Status::Done => "nothing (undelivered messages)".to_string(),
                    Status::AwaitingWrite(_) => "delivery of its own write".to_string(),
                    Status::Polling {
                        register,
                        value,
                        last,
                    } => format!(
                        "{register}={value} (last read {})",
                        last.map(show_read).unwrap_or_else(|| "-".to_string())
                    ),
                    Status::Ready | Status::Sleeping => "its next step".to_string(),
                },
                pending: p.bcast.pending().map(|e| e.stamp()).collect(),
            })
            .collect();
        if !stuck.is_empty() {
            return Err(SimError::Deadlock {
                time: self.now,
                stuck,
                history: Box::new(self.history),
            });
        }
        Ok(RunOutcome {
            delivered: self
                .procs
                .iter()
                .map(|p| p.bcast.delivered_log().to_vec())
                .collect(),
            history: self.history,
            messages: self.messages,
            op_times: self.op_times,
            end_time: self.now,
        })
    }

    /// Alternates program steps and deliveries: the program runs until it
    /// blocks before each next delivery, so a poll can react to every value.
    fn pump(&mut self, pid: ProcessId) -> Result<(), SimError> {
        loop {
            while self.step(pid)? {}
            let Some(d) = self.procs[pid.0].bcast.deliver_next() else {
                return Ok(());
            };
            self.record(EventKind::Deliver, pid, d.stamp);
            if let Some(m) = self.monitor.as_mut() {
                let r = m.on_deliver(pid, d.stamp.pid, d.s_caus.get(d.stamp.pid));
                self.invariant(r)?;
            }
            if let Payload::Write(w) = &d.payload {
                let released = self.procs[pid.0].store.on_deliver_write(w)?;
                if released {
                    let responded = self.history.events.len();
                    let p = &mut self.procs[pid.0];
                    if let Status::AwaitingWrite(op) = p.status {
                        self.history.ops[op.0].responded = responded;
                        p.status = Status::Ready;
                        p.pc += 1;
                    }
                }
            }
            self.poll(pid);
        }
    }

    fn push_op(&mut self, pid: ProcessId, kind: OpKind, message: Option<TotalStamp>) -> OpId {
        let at = self.history.events.len();
        self.history.ops.push(Operation {
            pid,
            kind,
            step: Some(self.procs[pid.0].pc),
            invoked: at,
            responded: at,
            message,
        });
        self.op_times.push((self.now, self.now));
        OpId(self.history.ops.len() - 1)
    }

    /// Re-reads the register a polling process waits on. Repeated reads of
    /// the same value are recorded once.
    fn poll(&mut self, pid: ProcessId) {
        let p = &mut self.procs[pid.0];
        let Status::Polling {
            register,
            value,
            last,
        } = &mut p.status
        else {
            return;
        };
        let seen = p.store.read(register);
        let register = register.clone();
        let done = seen == Some(*value);
        let fresh = *last != Some(seen);
        *last = Some(seen);
        if fresh {
            self.push_op(
                pid,
                OpKind::Read {
                    register,
                    value: seen,
                },
                None,
            );
        }
        if done {
            let p = &mut self.procs[pid.0];
            p.status = Status::Ready;
            p.pc += 1;
        }
    }

    /// Executes one instruction if the process can. Returns whether it did.
    fn step(&mut self, pid: ProcessId) -> Result<bool, SimError> {
        let p = &mut self.procs[pid.0];
        if !matches!(p.status, Status::Ready) {
            return Ok(false);
        }
        let Some(ins) = p.program.get(p.pc).cloned() else {
            p.status = Status::Done;
            return Ok(false);
        };
        match ins {
            Instruction::Write { register, value } => {
                let msg = p.store.write(&register, Value(value))?;
                let (stamp, out) = p.bcast.broadcast(Payload::Write(msg));
                let op = self.push_op(
                    pid,
                    OpKind::Write {
                        register,
                        value: Value(value),
                    },
                    Some(stamp),
                );
                self.record(EventKind::Broadcast, pid, stamp);
                self.procs[pid.0].status = Status::AwaitingWrite(op);
                self.send(pid, out)?;
            }
            Instruction::Read { register } => {
                let value = p.store.read(&register);
                self.push_op(pid, OpKind::Read { register, value }, None);
                self.procs[pid.0].pc += 1;
            }
            Instruction::RepeatReadUntil { register, value } => {
                p.status = Status::Polling {
                    register,
                    value: Value(value),
                    last: None,
                };
                self.poll(pid);
            }
            Instruction::Sleep { ticks } => {
                p.status = Status::Sleeping;
                p.pc += 1;
                self.push(self.now + ticks, Event::Wake(pid));
            }
            Instruction::Broadcast { tag } => {
                let (stamp, out) = p.bcast.broadcast(Payload::Raw { tag });
                p.pc += 1;
                self.record(EventKind::Broadcast, pid, stamp);
                self.send(pid, out)?;
            }
            Instruction::Nop => p.pc += 1,
        }
        Ok(true)
    }
}
