//! Runs a scenario over a range of seeds and tabulates what each watched
//! read returned, against the values the scenario allows.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::graph::ProximityGraph;
use crate::scenario::{Observation, Scenario};
use crate::sim::SimError;
use crate::store::Value;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeedResult {
    Observed(Vec<Observation>),
    /// The run stopped with processes still blocked.
    Deadlock(String),
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub result: SeedResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatchSummary {
    pub watch: String,
    /// Serialized as `[value, count]` pairs; JSON maps need string keys.
    #[serde(with = "pairs")]
    pub counts: BTreeMap<Option<Value>, usize>,
    /// `None` when the scenario declares nothing for this graph.
    pub allowed: Option<BTreeSet<Option<Value>>>,
}

impl WatchSummary {
    pub fn observed(&self) -> BTreeSet<Option<Value>> {
        self.counts.keys().copied().collect()
    }

    /// Observed values the scenario does not allow.
    pub fn outside(&self) -> BTreeSet<Option<Value>> {
        match &self.allowed {
            Some(allowed) => self.observed().difference(allowed).copied().collect(),
            None => BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepReport {
    pub graph: ProximityGraph,
    pub seeds: Range<u64>,
    /// Ordered by seed.
    pub runs: Vec<SeedRun>,
    pub watches: Vec<WatchSummary>,
}

impl SweepReport {
    pub fn deadlocks(&self) -> usize {
        self.count(|r| matches!(r, SeedResult::Deadlock(_)))
    }

    pub fn failures(&self) -> usize {
        self.count(|r| matches!(r, SeedResult::Failed(_)))
    }

    fn count(&self, pred: impl Fn(&SeedResult) -> bool) -> usize {
        self.runs.iter().filter(|r| pred(&r.result)).count()
    }

    pub fn contained(&self) -> bool {
        self.watches.iter().all(|w| w.outside().is_empty())
    }

    /// First seed whose run observed `value` on `watch`.
    pub fn seed_for(&self, watch: &str, value: Option<Value>) -> Option<u64> {
        self.runs.iter().find_map(|r| match &r.result {
            SeedResult::Observed(obs) => obs
                .iter()
                .any(|o| o.watch == watch && o.value == value)
                .then_some(r.seed),
            _ => None,
        })
    }
}

mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::store::Value;

    type Counts = BTreeMap<Option<Value>, usize>;

    pub fn serialize<S: Serializer>(counts: &Counts, s: S) -> Result<S::Ok, S::Error> {
        counts.iter().collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Counts, D::Error> {
        Ok(Vec::<(Option<Value>, usize)>::deserialize(d)?
            .into_iter()
            .collect())
    }
}

pub fn run_seed(scenario: &Scenario, seed: u64, graph: &ProximityGraph) -> SeedRun {
    let result = match scenario.run(seed, Some(graph)) {
        Ok(outcome) => SeedResult::Observed(scenario.observe(&outcome)),
        Err(e @ SimError::Deadlock { .. }) => SeedResult::Deadlock(e.to_string()),
        Err(e) => SeedResult::Failed(e.to_string()),
    };
    SeedRun { seed, result }
}

/// Runs every seed in `seeds` under `graph` (the scenario's own graph when
/// `None`). With the `parallel` feature seeds run on a thread pool; the
/// report is identical either way.
pub fn sweep(
    scenario: &Scenario,
    seeds: Range<u64>,
    graph: Option<&ProximityGraph>,
) -> SweepReport {
    let graph = graph.unwrap_or(&scenario.graph).clone();
    #[cfg(feature = "parallel")]
    let runs: Vec<SeedRun> = seeds
        .clone()
        .into_par_iter()
        .map(|seed| run_seed(scenario, seed, &graph))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<SeedRun> = seeds
        .clone()
        .map(|seed| run_seed(scenario, seed, &graph))
        .collect();

    let watches = scenario
        .watches
        .iter()
        .map(|w| {
            let mut counts = BTreeMap::new();
            for run in &runs {
                if let SeedResult::Observed(obs) = &run.result {
                    for o in obs.iter().filter(|o| o.watch == w.name) {
                        *counts.entry(o.value).or_insert(0) += 1;
                    }
                }
            }
            WatchSummary {
                watch: w.name.clone(),
                counts,
                allowed: scenario.allowed(&graph, &w.name).cloned(),
            }
        })
        .collect();
    SweepReport {
        graph,
        seeds,
        runs,
        watches,
    }
}
