//! Line-oriented scenario files: a system size, a proximity graph, a delay
//! model, one program per process, and optionally watched reads with the
//! outcome sets each graph allows for them.
//!
//! ```text
//! fisheye-scenario v1
//! n 2
//! name 0 paris
//! graph 0-1
//! seed 1
//! delays 1 10
//! channel 0 1 5 20
//! process 0
//!   write X 1
//!   read X
//! process 1
//!   write X 2
//! watch 0 1 a
//! expect 0-1 a 1 2
//! ```
//!
//! Program steps are numbered from 0 within each process. A watch names one
//! `read` or `until` step; its observed value is the last value that step
//! returned. `bot` stands for the initial value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphDescription, ProximityGraph};
use crate::sim::{simulate, DelayRange, Instruction, Program, RunOutcome, SimConfig, SimError};
use crate::store::{show_read, Value};

pub const HEADER: &str = "fisheye-scenario v1";

/// Three cities (paris, berlin, new-york) racing writes to X.
pub const FIG3: &str = include_str!("../scenarios/fig3.scenario");
/// Four processes (p, q, r, s) whose reads of X and Y tell the graphs apart.
pub const FIG6: &str = include_str!("../scenarios/fig6.scenario");
/// [`FIG6`] with sleeps that let the empty graph show every outcome it allows.
pub const FIG6_RELAXED: &str = include_str!("../scenarios/fig6-relaxed.scenario");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Watch {
    pub pid: usize,
    pub step: usize,
    pub name: String,
}

/// Values a watched read may return when the scenario runs under `graph`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Expectation {
    pub graph: ProximityGraph,
    pub watch: String,
    pub allowed: BTreeSet<Option<Value>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub watch: String,
    pub value: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub names: Vec<String>,
    pub graph: ProximityGraph,
    pub seed: u64,
    pub delays: DelayRange,
    pub channels: BTreeMap<(usize, usize), DelayRange>,
    pub programs: Vec<Program>,
    pub watches: Vec<Watch>,
    pub expectations: Vec<Expectation>,
}

impl Scenario {
    pub fn n(&self) -> usize {
        self.programs.len()
    }

    pub fn name(&self, pid: usize) -> &str {
        &self.names[pid]
    }

    pub fn config(&self, seed: u64, graph: Option<&ProximityGraph>) -> SimConfig {
        let mut config = SimConfig::new(graph.unwrap_or(&self.graph).clone(), seed);
        config.delays = self.delays;
        config.channel_delays = self.channels.clone();
        config
    }

    /// Runs the scenario, overriding the declared graph when one is given.
    pub fn run(&self, seed: u64, graph: Option<&ProximityGraph>) -> Result<RunOutcome, SimError> {
        simulate(&self.config(seed, graph), &self.programs)
    }

    /// Value returned by each watched step, in declaration order.
    pub fn observe(&self, outcome: &RunOutcome) -> Vec<Observation> {
        self.watches
            .iter()
            .map(|w| Observation {
                watch: w.name.clone(),
                value: outcome.reads_at(w.pid, w.step).last().copied().flatten(),
            })
            .collect()
    }

    pub fn allowed(&self, graph: &ProximityGraph, watch: &str) -> Option<&BTreeSet<Option<Value>>> {
        self.expectations
            .iter()
            .find(|e| &e.graph == graph && e.watch == watch)
            .map(|e| &e.allowed)
    }

    pub fn watch(&self, name: &str) -> Option<&Watch> {
        self.watches.iter().find(|w| w.name == name)
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        Parser::default().parse(text)
    }
}

#[derive(Default)]
struct Parser {
    n: Option<usize>,
    names: Vec<String>,
    graph: Option<ProximityGraph>,
    seed: u64,
    delays: Option<DelayRange>,
    channels: BTreeMap<(usize, usize), DelayRange>,
    programs: Vec<Program>,
    current: Option<usize>,
    watches: Vec<Watch>,
    expectations: Vec<Expectation>,
}

impl Parser {
    fn parse(mut self, text: &str) -> Result<Scenario, ScenarioError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, HEADER)) => {}
            Some((line, other)) => {
                return Err(ScenarioError {
                    line,
                    message: format!("expected `{HEADER}`, found `{other}`"),
                })
            }
            None => {
                return Err(ScenarioError {
                    line: 1,
                    message: "empty scenario".into(),
                })
            }
        }
        let mut last = 1;
        for (line, text) in lines {
            last = line;
            self.line(text)
                .map_err(|message| ScenarioError { line, message })?;
        }
        let fail = |message: &str| ScenarioError {
            line: last,
            message: message.to_string(),
        };
        let n = self.n.ok_or_else(|| fail("missing `n`"))?;
        for (w, watch) in self.watches.iter().enumerate() {
            if self.watches[..w].iter().any(|o| o.name == watch.name) {
                return Err(fail(&format!("watch `{}` declared twice", watch.name)));
            }
        }
        Ok(Scenario {
            names: self.names,
            graph: self.graph.unwrap_or_else(|| ProximityGraph::empty(n)),
            seed: self.seed,
            delays: self.delays.unwrap_or_default(),
            channels: self.channels,
            programs: self.programs,
            watches: self.watches,
            expectations: self.expectations,
        })
    }

    fn n(&self) -> Result<usize, String> {
        self.n.ok_or_else(|| "`n` must come first".to_string())
    }

    fn pid(&self, word: &str) -> Result<usize, String> {
        let n = self.n()?;
        let pid: usize = number(word)?;
        if pid >= n {
            return Err(format!("process {pid} out of range for n = {n}"));
        }
        Ok(pid)
    }

    fn graph(&self, word: &str) -> Result<ProximityGraph, String> {
        let n = self.n()?;
        word.parse::<GraphDescription>()
            .and_then(|d| d.resolve(n))
            .map_err(|e| e.to_string())
    }

    fn line(&mut self, text: &str) -> Result<(), String> {
        let words: Vec<&str> = text.split_whitespace().collect();
        match words.as_slice() {
            ["n", n] => {
                if self.n.is_some() {
                    return Err("`n` given twice".into());
                }
                let n: usize = number(n)?;
                if n == 0 {
                    return Err("a scenario needs at least one process".into());
                }
                self.n = Some(n);
                self.names = (0..n).map(|p| format!("p{p}")).collect();
                self.programs = vec![Vec::new(); n];
            }
            ["name", pid, label] => {
                let pid = self.pid(pid)?;
                self.names[pid] = label.to_string();
            }
            ["graph", spec] => self.graph = Some(self.graph(spec)?),
            ["seed", s] => self.seed = number(s)?,
            ["delays", min, max] => {
                self.n()?;
                self.delays = Some(range(min, max)?);
            }
            ["channel", from, to, min, max] => {
                let key = (self.pid(from)?, self.pid(to)?);
                if key.0 == key.1 {
                    return Err("a channel joins two distinct processes".into());
                }
                self.channels.insert(key, range(min, max)?);
            }
            ["process", pid] => self.current = Some(self.pid(pid)?),
            ["watch", pid, step, name] => {
                let pid = self.pid(pid)?;
                let step: usize = number(step)?;
                match self.programs[pid].get(step) {
                    Some(Instruction::Read { .. } | Instruction::RepeatReadUntil { .. }) => {}
                    Some(other) => {
                        return Err(format!("step {step} of {pid} is `{other}`, not a read"))
                    }
                    None => return Err(format!("process {pid} has no step {step}")),
                }
                self.watches.push(Watch {
                    pid,
                    step,
                    name: name.to_string(),
                });
            }
            ["expect", spec, watch, values @ ..] => {
                let graph = self.graph(spec)?;
                if !self.watches.iter().any(|w| w.name == *watch) {
                    return Err(format!("unknown watch `{watch}`"));
                }
                if values.is_empty() {
                    return Err("an expectation lists at least one value".into());
                }
                let allowed = values
                    .iter()
                    .map(|v| match *v {
                        "bot" => Ok(None),
                        v => number(v).map(|v| Some(Value(v))),
                    })
                    .collect::<Result<_, _>>()?;
                self.expectations.push(Expectation {
                    graph,
                    watch: watch.to_string(),
                    allowed,
                });
            }
            _ => {
                let instruction: Instruction = text.parse()?;
                let pid = self
                    .current
                    .ok_or_else(|| format!("`{text}` appears before any `process` line"))?;
                self.programs[pid].push(instruction);
            }
        }
        Ok(())
    }
}

fn number<T: std::str::FromStr>(word: &str) -> Result<T, String> {
    word.parse()
        .map_err(|_| format!("expected a number, found `{word}`"))
}

fn range(min: &str, max: &str) -> Result<DelayRange, String> {
    DelayRange::new(number(min)?, number(max)?).map_err(|e| e.to_string())
}

impl fmt::Display for Scenario {
    /// Canonical form; parsing it yields an equal scenario.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{HEADER}")?;
        writeln!(f, "n {}", self.n())?;
        for (pid, name) in self.names.iter().enumerate() {
            if *name != format!("p{pid}") {
                writeln!(f, "name {pid} {name}")?;
            }
        }
        writeln!(f, "graph {}", self.graph.describe())?;
        writeln!(f, "seed {}", self.seed)?;
        writeln!(f, "delays {} {}", self.delays.min, self.delays.max)?;
        for ((from, to), d) in &self.channels {
            writeln!(f, "channel {from} {to} {} {}", d.min, d.max)?;
        }
        for (pid, program) in self.programs.iter().enumerate() {
            writeln!(f, "process {pid}")?;
            for instruction in program {
                writeln!(f, "  {instruction}")?;
            }
        }
        for w in &self.watches {
            writeln!(f, "watch {} {} {}", w.pid, w.step, w.name)?;
        }
        for e in &self.expectations {
            let values: Vec<String> = e.allowed.iter().map(|v| show_read(*v)).collect();
            writeln!(
                f,
                "expect {} {} {}",
                e.graph.describe(),
                e.watch,
                values.join(" ")
            )?;
        }
        Ok(())
    }
}
