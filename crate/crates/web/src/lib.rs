//! WebAssembly bindings for the browser demo. Every export takes and
//! returns plain strings (scenario or history text in, JSON out), so the
//! page needs no generated type glue beyond the functions themselves.

use fisheye::checker::{check_broadcast_properties, check_fisheye, Condition, Verdict};
use fisheye::history_io;
use fisheye::scenario::{Scenario, FIG3, FIG6, FIG6_RELAXED};
use fisheye::sim::{MessageKind, RunOutcome, SimError};
use fisheye::store::show_read;
use fisheye::sweep::{sweep, SeedResult};
use fisheye::{EventKind, History, ProximityGraph};
use serde_json::{json, Value as Json};
use wasm_bindgen::prelude::*;

/// Text of a bundled scenario: `fig3`, `fig6` or `fig6-relaxed`.
#[wasm_bindgen]
pub fn bundled_scenario(name: &str) -> Option<String> {
    match name {
        "fig3" => Some(FIG3),
        "fig6" => Some(FIG6),
        "fig6-relaxed" => Some(FIG6_RELAXED),
        _ => None,
    }
    .map(str::to_string)
}

/// Runs `scenario` once. An empty `graph` keeps the scenario's own.
#[wasm_bindgen]
pub fn run_scenario(scenario: &str, seed: u32, graph: &str) -> Result<String, JsError> {
    run_json(scenario, seed.into(), graph)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn sweep_scenario(scenario: &str, from: u32, to: u32, graph: &str) -> Result<String, JsError> {
    sweep_json(scenario, from.into(), to.into(), graph)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

/// Checks a history in text form; `graph` is only read for `fisheye`.
#[wasm_bindgen]
pub fn check_history(history: &str, condition: &str, graph: &str) -> Result<String, JsError> {
    check_json(history, condition, graph)
        .map(|v| v.to_string())
        .map_err(|e| JsError::new(&e))
}

fn graph_arg(n: usize, spec: &str) -> Result<Option<ProximityGraph>, String> {
    if spec.trim().is_empty() {
        return Ok(None);
    }
    ProximityGraph::parse(n, spec)
        .map(Some)
        .map_err(|e| e.to_string())
}

fn op_label(h: &History, stamp: fisheye::TotalStamp) -> String {
    h.ops
        .iter()
        .find(|op| op.message == Some(stamp))
        .map(|op| match &op.kind {
            fisheye::OpKind::Write { register, value } => format!("{register}={value}"),
            fisheye::OpKind::Read { .. } => op.to_string(),
        })
        .unwrap_or_else(|| format!("m{stamp}"))
}

fn verdict_json(h: &History, graph: &ProximityGraph) -> Json {
    match check_fisheye(h, graph) {
        Ok(Verdict::Accepted(w)) => json!({
            "accepted": true,
            "method": format!("{:?}", w.method),
            "views": w.views.iter().map(|v| v.iter().map(|&id| h.op(id).to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }),
        Ok(Verdict::Rejected(v)) => json!({ "accepted": false, "violation": v.to_string() }),
        Err(e) => json!({ "accepted": false, "error": e.to_string() }),
    }
}

fn outcome_json(s: &Scenario, out: &RunOutcome, graph: &ProximityGraph) -> Json {
    let h = &out.history;
    let messages: Vec<Json> = out
        .messages
        .iter()
        .map(|m| {
            let (kind, label) = match m.kind {
                MessageKind::Tocobc { stamp } => ("tocobc", op_label(h, stamp)),
                MessageKind::CatchUp { last_date } => ("catch-up", format!("clock {last_date}")),
            };
            json!({ "from": m.from.0, "to": m.to.0, "sent": m.sent, "arrived": m.arrived, "kind": kind, "label": label })
        })
        .collect();
    let deliveries: Vec<Json> = h
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Deliver)
        .map(|e| json!({ "pid": e.pid.0, "time": e.time, "label": op_label(h, e.stamp) }))
        .collect();
    let ops: Vec<Json> = h
        .ops
        .iter()
        .zip(&out.op_times)
        .map(|(op, &(start, end))| json!({ "pid": op.pid.0, "text": op.to_string(), "start": start, "end": end }))
        .collect();
    let observations: Vec<Json> = s
        .observe(out)
        .iter()
        .map(|o| json!({ "watch": o.watch, "value": show_read(o.value) }))
        .collect();
    json!({
        "status": "finished",
        "n": s.n(),
        "names": s.names,
        "graph": graph.describe(),
        "end_time": out.end_time,
        "messages": messages,
        "deliveries": deliveries,
        "ops": ops,
        "observations": observations,
        "broadcast": match check_broadcast_properties(h, graph) {
            Ok(()) => "all properties hold".to_string(),
            Err(e) => e.to_string(),
        },
        "verdict": verdict_json(h, graph),
        "history": history_io::emit(h),
    })
}

pub fn run_json(text: &str, seed: u64, graph: &str) -> Result<Json, String> {
    let s = Scenario::parse(text).map_err(|e| e.to_string())?;
    let graph = graph_arg(s.n(), graph)?.unwrap_or_else(|| s.graph.clone());
    match s.run(seed, Some(&graph)) {
        Ok(out) => Ok(outcome_json(&s, &out, &graph)),
        Err(SimError::Deadlock {
            time,
            stuck,
            history,
        }) => Ok(json!({
            "status": "deadlock",
            "n": s.n(),
            "names": s.names,
            "graph": graph.describe(),
            "time": time,
            "stuck": stuck.iter().map(|p| format!("{} at step {} waits for {}", s.name(p.pid.0), p.pc, p.waiting_on)).collect::<Vec<_>>(),
            "history": history_io::emit(&history),
        })),
        Err(e) => Err(e.to_string()),
    }
}

pub fn sweep_json(text: &str, from: u64, to: u64, graph: &str) -> Result<Json, String> {
    if from >= to {
        return Err(format!("empty seed range {from}..{to}"));
    }
    let s = Scenario::parse(text).map_err(|e| e.to_string())?;
    let graph = graph_arg(s.n(), graph)?;
    let r = sweep(&s, from..to, graph.as_ref());
    let watches: Vec<Json> = r
        .watches
        .iter()
        .map(|w| {
            let observed: Vec<Json> = w
                .counts
                .iter()
                .map(|(v, count)| json!({ "value": show_read(*v), "count": count, "first_seed": r.seed_for(&w.watch, *v) }))
                .collect();
            json!({
                "watch": w.watch,
                "observed": observed,
                "allowed": w.allowed.as_ref().map(|a| a.iter().map(|v| show_read(*v)).collect::<Vec<_>>()),
                "outside": w.outside().iter().map(|v| show_read(*v)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let first_deadlock = r
        .runs
        .iter()
        .find(|run| matches!(run.result, SeedResult::Deadlock(_)))
        .map(|run| run.seed);
    Ok(json!({
        "graph": r.graph.describe(),
        "runs": r.runs.len(),
        "deadlocks": r.deadlocks(),
        "first_deadlock": first_deadlock,
        "failures": r.failures(),
        "contained": r.contained(),
        "watches": watches,
    }))
}

pub fn check_json(text: &str, condition: &str, graph: &str) -> Result<Json, String> {
    let h = history_io::parse(text).map_err(|e| e.to_string())?;
    let condition: Condition = condition.parse()?;
    let explicit = graph_arg(h.n, graph)?;
    let g = condition
        .graph(h.n, explicit.as_ref().or(h.graph.as_ref()))
        .ok_or("fisheye needs a graph")?;
    let mut v = verdict_json(&h, &g);
    v["condition"] = json!(condition.to_string());
    v["graph"] = json!(g.describe());
    Ok(v)
}
