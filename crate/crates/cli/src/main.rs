use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fisheye::checker::{check_fisheye_with, CheckError, CheckOptions, Condition, Verdict};
use fisheye::history_io;
use fisheye::scenario::Scenario;
use fisheye::sim::SimError;
use fisheye::store::show_read;
use fisheye::sweep::{sweep, SweepReport};
use fisheye::{History, ProximityGraph};
use serde_json::json;

const EXIT_CODES: &str = "\
Exit codes:
  0  success (run finished, history accepted, sweep contained)
  1  history rejected, or a sweep observed a value outside the allowed set
  2  unreadable or malformed input
  3  liveness failure: a run ended with blocked processes
  4  the checker ran out of search budget";

#[derive(Parser)]
#[command(
    name = "fisheye",
    version,
    about = "Simulate the fisheye broadcast and register store, and check recorded histories",
    after_help = EXIT_CODES
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Report {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario once and write the recorded history.
    Run {
        scenario: PathBuf,
        /// Overrides the seed declared in the scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario's graph: `empty`, `complete` or an edge list like `0-1,2-3`.
        #[arg(long)]
        graph: Option<String>,
        /// Where to write the history. Without it the history goes to
        /// stdout and the summary to stderr.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        report: Report,
    },
    /// Check a recorded history against a consistency condition.
    Check {
        history: PathBuf,
        #[arg(long, default_value = "fisheye")]
        condition: Condition,
        /// Graph for `fisheye`; defaults to the one recorded in the history.
        #[arg(long)]
        graph: Option<String>,
        /// Search steps allowed before giving up.
        #[arg(long, default_value_t = CheckOptions::default().budget)]
        budget: u64,
        #[arg(long, value_enum, default_value = "text")]
        report: Report,
    },
    /// Run a scenario over a seed range and tabulate its watched reads.
    Sweep {
        scenario: PathBuf,
        /// Half-open range `A..B`.
        #[arg(long, default_value = "0..100", value_parser = parse_seeds)]
        seeds: Range<u64>,
        #[arg(long)]
        graph: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        report: Report,
    },
}

/// A failed command: what to print and which code to exit with.
struct Failure {
    code: u8,
    message: String,
}

fn input(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn parse_seeds(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, found `{s}`"))?;
    let a: u64 = a.trim().parse().map_err(|_| format!("bad start `{a}`"))?;
    let b: u64 = b.trim().parse().map_err(|_| format!("bad end `{b}`"))?;
    if a >= b {
        return Err(format!("empty seed range {a}..{b}"));
    }
    Ok(a..b)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    Scenario::parse(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn parse_graph(n: usize, spec: Option<&str>) -> Result<Option<ProximityGraph>, Failure> {
    spec.map(|s| ProximityGraph::parse(n, s).map_err(|e| input(format!("--graph: {e}"))))
        .transpose()
}

fn write_output(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            graph,
            output,
            report,
        } => run(&scenario, seed, graph.as_deref(), output.as_deref(), report),
        Command::Check {
            history,
            condition,
            graph,
            budget,
            report,
        } => check(&history, condition, graph.as_deref(), budget, report),
        Command::Sweep {
            scenario,
            seeds,
            graph,
            report,
        } => sweep_cmd(&scenario, seeds, graph.as_deref(), report),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(
    path: &Path,
    seed: Option<u64>,
    graph: Option<&str>,
    output: Option<&Path>,
    report: Report,
) -> Result<u8, Failure> {
    let scenario = load_scenario(path)?;
    let graph = parse_graph(scenario.n(), graph)?;
    let seed = seed.unwrap_or(scenario.seed);
    let (history, summary, code) = match scenario.run(seed, graph.as_ref()) {
        Ok(out) => {
            let obs = scenario.observe(&out);
            let summary = match report {
                Report::Json => json!({
                    "status": "finished",
                    "seed": seed,
                    "graph": out.history.graph.as_ref().map(|g| g.describe()),
                    "end_time": out.end_time,
                    "operations": out.history.ops.len(),
                    "messages": out.messages.len(),
                    "observations": obs,
                })
                .to_string(),
                Report::Text => {
                    let mut s = format!(
                        "finished at t={} with {} operations and {} messages",
                        out.end_time,
                        out.history.ops.len(),
                        out.messages.len()
                    );
                    for o in &obs {
                        let _ = write!(s, "\n{} = {}", o.watch, show_read(o.value));
                    }
                    s
                }
            };
            (out.history, summary, 0)
        }
        Err(SimError::Deadlock {
            time,
            stuck,
            history,
        }) => {
            let summary = match report {
                Report::Json => json!({
                    "status": "deadlock",
                    "seed": seed,
                    "time": time,
                    "stuck": stuck,
                })
                .to_string(),
                Report::Text => {
                    let mut s = format!("deadlock at t={time}");
                    for p in &stuck {
                        let _ = write!(
                            s,
                            "\n{} at step {} waiting on {} ({} pending)",
                            scenario.name(p.pid.0),
                            p.pc,
                            p.waiting_on,
                            p.pending.len()
                        );
                    }
                    s
                }
            };
            (*history, summary, 3)
        }
        Err(e) => return Err(input(e.to_string())),
    };
    let text = history_io::emit(&history);
    match output {
        Some(path) => {
            write_output(path, &text)?;
            println!("{summary}");
        }
        None => {
            print!("{text}");
            eprintln!("{summary}");
        }
    }
    Ok(code)
}

fn check(
    path: &Path,
    condition: Condition,
    graph: Option<&str>,
    budget: u64,
    report: Report,
) -> Result<u8, Failure> {
    let history: History =
        history_io::parse(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let explicit = parse_graph(history.n, graph)?;
    let graph = condition
        .graph(history.n, explicit.as_ref().or(history.graph.as_ref()))
        .ok_or_else(|| input("fisheye needs --graph: the history records no graph"))?;
    let options = CheckOptions { budget };
    let verdict = match check_fisheye_with(&history, &graph, &options) {
        Ok(v) => v,
        Err(CheckError::SearchBudgetExceeded { budget }) => {
            return Err(Failure {
                code: 4,
                message: format!("inconclusive: search budget of {budget} steps exhausted"),
            })
        }
        Err(e) => return Err(input(e.to_string())),
    };
    let code = if verdict.is_accepted() { 0 } else { 1 };
    match report {
        Report::Json => println!(
            "{}",
            json!({
                "condition": condition.to_string(),
                "graph": graph.describe(),
                "accepted": verdict.is_accepted(),
                "verdict": verdict,
            })
        ),
        Report::Text => print!("{}", verdict_text(&history, condition, &graph, &verdict)),
    }
    Ok(code)
}

fn verdict_text(h: &History, condition: Condition, g: &ProximityGraph, v: &Verdict) -> String {
    let mut s = String::new();
    match v {
        Verdict::Accepted(w) => {
            let _ = writeln!(s, "accepted: {condition} over graph {g} ({:?})", w.method);
            for (pid, view) in w.views.iter().enumerate() {
                let ops: Vec<String> = view.iter().map(|&id| h.op(id).to_string()).collect();
                let _ = writeln!(s, "  view of p{pid}: {}", ops.join(" "));
            }
        }
        Verdict::Rejected(violation) => {
            let _ = writeln!(s, "rejected: {condition} over graph {g}: {violation}");
            for (i, op) in h.ops.iter().enumerate() {
                let _ = writeln!(s, "  op{i} = {op}");
            }
        }
    }
    s
}

fn sweep_cmd(
    path: &Path,
    seeds: Range<u64>,
    graph: Option<&str>,
    report: Report,
) -> Result<u8, Failure> {
    let scenario = load_scenario(path)?;
    let graph = parse_graph(scenario.n(), graph)?;
    let result = sweep(&scenario, seeds, graph.as_ref());
    let code = if !result.contained() {
        1
    } else if result.deadlocks() + result.failures() > 0 {
        3
    } else {
        0
    };
    match report {
        Report::Json => println!("{}", json!(result)),
        Report::Text => print!("{}", sweep_text(&result)),
    }
    Ok(code)
}

fn sweep_text(r: &SweepReport) -> String {
    let mut s = format!(
        "graph {}, seeds {}..{}, {} runs, {} deadlocked, {} failed\n",
        r.graph,
        r.seeds.start,
        r.seeds.end,
        r.runs.len(),
        r.deadlocks(),
        r.failures()
    );
    for w in &r.watches {
        let observed: Vec<String> = w
            .counts
            .iter()
            .map(|(v, n)| format!("{}x{n}", show_read(*v)))
            .collect();
        let (allowed, verdict) = match &w.allowed {
            Some(a) => {
                let a: Vec<String> = a.iter().map(|v| show_read(*v)).collect();
                let outside: Vec<String> = w.outside().iter().map(|v| show_read(*v)).collect();
                let verdict = if outside.is_empty() {
                    "ok".to_string()
                } else {
                    format!("OUTSIDE {{{}}}", outside.join(", "))
                };
                (format!("{{{}}}", a.join(", ")), verdict)
            }
            None => ("-".to_string(), "no expectation".to_string()),
        };
        let _ = writeln!(
            s,
            "{:<8} observed {:<24} allowed {:<12} {verdict}",
            w.watch,
            observed.join(" "),
            allowed
        );
    }
    s
}
