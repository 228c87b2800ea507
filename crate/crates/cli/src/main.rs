//! `isfu`: run instruction sequences against service families, inspect
//! threads, translate register-machine programs and compute
//! functional-unit degrees.
//!
//! Exit codes: `run` uses 0 (reply T), 1 (reply F), 2 (proven divergent)
//! and 3 (budget exhausted). Other subcommands exit 0 on success. Usage
//! errors exit 64, unreadable or malformed input files 65.
//!
//! With `--json` every subcommand prints one JSON object per line.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use isfu_core::exec::{run, ExecMode, ExecStatus};
use isfu_core::finfu::{count_degrees_ordered, leq_by_closure, DegreeLimits, MoTable};
use isfu_core::funit::{parse_unit_table, FunctionalUnit};
use isfu_core::isa::{normalize, parse_program, InstructionSequence};
use isfu_core::natfu::{counter_unit, rm_run, rmlful, univ3_unit, univ_unit, RmOutcome, RmlProgram};
use isfu_core::services::{Reply, Service, ServiceFamily};
use isfu_core::threads::{compile_thread, extract_annotated, minimize, LinearSpec, ThreadEntry};
use isfu_core::{extract, Natural};
use serde_json::{json, Value};

const EXIT_USAGE: u8 = 64;
const EXIT_DATA: u8 = 65;
/// Behaviour codes are `u32`; `(2k + 1)^k` overflows past this.
const MAX_ENUMERABLE_K: usize = 7;

#[derive(Parser)]
#[command(name = "isfu", version, about = "Instruction sequences and functional units")]
struct Cli {
    /// Print one JSON object per line.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a program against a service family.
    Run(RunArgs),
    /// Print the thread extracted from a program.
    Extract {
        #[arg(long)]
        program: PathBuf,
        /// Print the minimal bisimilar specification instead.
        #[arg(long)]
        minimize: bool,
    },
    /// Rewrite a program into positive-test normal form.
    Normalize {
        #[arg(long)]
        program: PathBuf,
    },
    /// Translate a register-machine program into a program over Univ.
    Translate {
        #[arg(long)]
        rml: PathBuf,
    },
    /// Compare the register machine with the translated program.
    Cosim(CosimArgs),
    /// Count functional-unit degrees over a finite state space.
    Degrees(DegreesArgs),
    /// Decide whether the left unit is derivable from the right one.
    Leq {
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    /// Compile a thread specification (dump format) into a program.
    CompileThread {
        #[arg(long)]
        spec: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    program: PathBuf,
    /// Comma-separated `focus=kind:state` entries, e.g. `f=counter:0`.
    #[arg(long)]
    family: String,
    /// Step budget.
    #[arg(long, default_value_t = ExecMode::DEFAULT_BUDGET)]
    budget: u64,
    /// Disable exact cycle detection.
    #[arg(long)]
    no_cycle_detection: bool,
    /// Print one line per processed basic action.
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct CosimArgs {
    #[arg(long)]
    rml: PathBuf,
    /// Input range `A..B` (exclusive) or `A..=B`.
    #[arg(long, value_parser = parse_range)]
    inputs: (u64, u64),
    #[arg(long, default_value_t = ExecMode::DEFAULT_BUDGET)]
    budget: u64,
}

#[derive(Args)]
struct DegreesArgs {
    #[arg(long)]
    k: usize,
    /// Print one line per degree.
    #[arg(long)]
    list: bool,
    /// Largest accepted state-space size.
    #[arg(long, default_value_t = isfu_core::finfu::DEFAULT_MAX_K)]
    max_k: usize,
    /// Stop after this many closed sets (count becomes a lower bound).
    #[arg(long)]
    max_sets: Option<usize>,
    /// Stop after this many seconds (count becomes a lower bound).
    #[arg(long)]
    max_seconds: Option<u64>,
}

/// Inclusive input range.
fn parse_range(s: &str) -> Result<(u64, u64), String> {
    let bad = || format!("expected A..B or A..=B, got `{s}`");
    let (a, b, inclusive) = match s.split_once("..=") {
        Some((a, b)) => (a, b, true),
        None => s.split_once("..").map(|(a, b)| (a, b, false)).ok_or_else(bad)?,
    };
    let a: u64 = a.parse().map_err(|_| bad())?;
    let b: u64 = b.parse().map_err(|_| bad())?;
    let hi = if inclusive { Some(b) } else { b.checked_sub(1) };
    match hi {
        Some(hi) if hi >= a => Ok((a, hi)),
        _ => Err(format!("empty range `{s}`")),
    }
}

/// A failure with its exit code.
struct Failure(u8, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn data(msg: impl Into<String>) -> Failure {
    Failure(EXIT_DATA, msg.into())
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn read_program(path: &Path) -> Result<InstructionSequence, Failure> {
    parse_program(&read(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn read_unit(path: &Path) -> Result<FunctionalUnit, Failure> {
    parse_unit_table(&read(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn read_rml(path: &Path) -> Result<RmlProgram, Failure> {
    RmlProgram::parse(&read(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// Parses `f=counter:0,g=univ:12,h=table:<file>:<state>,k=empty`.
fn parse_family(lit: &str) -> Result<ServiceFamily, Failure> {
    let mut family = ServiceFamily::empty();
    for entry in lit.split(',').map(str::trim).filter(|e| !e.is_empty()) {
        let (focus, spec) =
            entry.split_once('=').ok_or_else(|| usage(format!("`{entry}`: expected focus=kind:state")))?;
        if family.get(focus).is_some() {
            return Err(usage(format!("focus `{focus}` given twice")));
        }
        let service = if spec == "empty" {
            Service::Empty
        } else {
            let (kind, state) =
                spec.rsplit_once(':').ok_or_else(|| usage(format!("`{entry}`: expected kind:state")))?;
            let state: Natural = state.parse().map_err(|_| usage(format!("`{entry}`: bad state `{state}`")))?;
            let unit = match kind {
                "counter" => counter_unit(),
                "univ" => univ_unit(),
                "univ3" => univ3_unit(),
                _ => match kind.strip_prefix("table:") {
                    Some(path) => read_unit(Path::new(path))?,
                    None => return Err(usage(format!("`{entry}`: unknown unit `{kind}`"))),
                },
            };
            Service::new(Arc::new(unit), state).map_err(|e| usage(format!("`{entry}`: {e}")))?
        };
        let single = ServiceFamily::singleton(focus, service).map_err(|e| usage(e.to_string()))?;
        family = family.compose(&single);
    }
    Ok(family)
}

fn service_text(s: &Service) -> String {
    s.state().map_or_else(|| "empty".to_string(), Natural::to_string)
}

fn state_text(family: &ServiceFamily) -> String {
    match family.len() {
        0 => "none".into(),
        1 => family.iter().map(|(_, s)| service_text(s)).collect(),
        _ => family.iter().map(|(f, s)| format!("{f}:{}", service_text(s))).collect::<Vec<_>>().join(","),
    }
}

fn status_text(s: ExecStatus) -> &'static str {
    match s {
        ExecStatus::Completed => "completed",
        ExecStatus::ProvenDivergent => "divergent",
        ExecStatus::BudgetExhausted => "budget",
    }
}

fn cmd_run(a: &RunArgs, json: bool) -> Result<u8, Failure> {
    let x = read_program(&a.program)?;
    let family = parse_family(&a.family)?;
    let mode =
        ExecMode::new(Some(a.budget), !a.no_cycle_detection).map_err(|e| usage(e.to_string()))?.with_trace(a.trace);
    let (spec, positions) = extract_annotated(&x);
    let out = run(&spec, &family, &mode);
    if json {
        let fam: serde_json::Map<String, Value> =
            out.family.iter().map(|(f, s)| (f.to_string(), Value::String(service_text(s)))).collect();
        println!(
            "{}",
            json!({"type": "result", "reply": out.reply.to_string(), "status": status_text(out.status),
                   "steps": out.steps, "family": fam})
        );
    } else {
        println!("reply={} state={}", out.reply, state_text(&out.family));
        println!("status={} steps={}", status_text(out.status), out.steps);
    }
    for step in &out.trace {
        let pos = positions.get(step.thread_state).copied().flatten().map_or("-".into(), |p| p.to_string());
        let state = step.state.as_ref().map_or("empty".into(), Natural::to_string);
        if json {
            println!(
                "{}",
                json!({"type": "step", "pos": pos, "action": step.action.to_string(),
                       "reply": step.reply.to_string(), "state": state})
            );
        } else {
            println!("pos={pos} action={} reply={} state={state}", step.action, step.reply);
        }
    }
    Ok(match (out.status, out.reply) {
        (ExecStatus::Completed, Reply::T) => 0,
        (ExecStatus::Completed, _) => 1,
        (ExecStatus::ProvenDivergent, _) => 2,
        (ExecStatus::BudgetExhausted, _) => 3,
    })
}

fn print_spec(s: &LinearSpec, json: bool) {
    if !json {
        print!("{s}");
        return;
    }
    for (id, e) in s.entries().iter().enumerate() {
        let root = id == s.root();
        let v = match e {
            ThreadEntry::Deadlock => json!({"id": id, "root": root, "kind": "D"}),
            ThreadEntry::TermP => json!({"id": id, "root": root, "kind": "S+"}),
            ThreadEntry::TermN => json!({"id": id, "root": root, "kind": "S-"}),
            ThreadEntry::Post { action, on_true, on_false } => json!({"id": id, "root": root, "kind": "post",
                "action": action.to_string(), "on_true": on_true, "on_false": on_false}),
        };
        println!("{v}");
    }
}

fn print_program(x: &InstructionSequence, json: bool) {
    if json {
        println!("{}", json!({"program": x.to_string(), "length": x.len()}));
    } else {
        println!("{x}");
    }
}

fn cmd_cosim(a: &CosimArgs, json: bool) -> Result<u8, Failure> {
    let p = read_rml(&a.rml)?;
    let x = rmlful(&p);
    let mode = ExecMode::new(Some(a.budget), true).map_err(|e| usage(e.to_string()))?;
    let univ = Arc::new(univ_unit());
    let spec = extract(&x);
    let mut all_agree = true;
    for n in a.inputs.0..=a.inputs.1 {
        let n = Natural::from(n);
        let oracle = match rm_run(&p, &n, &mode) {
            Ok(RmOutcome::Halted(b, v)) => format!("{},{v}", Reply::from_bool(b)),
            Ok(RmOutcome::Divergent) => "D".into(),
            Err(_) => "budget".into(),
        };
        let family = isfu_core::exec::unit_family("f", Arc::clone(&univ), n.clone());
        let out = run(&spec, &family, &mode);
        let translated = match out.status {
            ExecStatus::Completed => format!("{},{}", out.reply, state_text(&out.family)),
            ExecStatus::ProvenDivergent => "D".into(),
            ExecStatus::BudgetExhausted => "budget".into(),
        };
        let agree = oracle == translated;
        all_agree &= agree;
        if json {
            println!("{}", json!({"input": n.to_string(), "oracle": oracle, "translated": translated, "agree": agree}));
        } else {
            println!("n={n} oracle={oracle} translated={translated} agree={agree}");
        }
    }
    Ok(if all_agree { 0 } else { 1 })
}

fn table_text(t: &MoTable) -> String {
    t.iter().map(|(b, s)| format!("{}{s}", if *b { 'T' } else { 'F' })).collect::<Vec<_>>().join(" ")
}

fn cmd_degrees(a: &DegreesArgs, json: bool) -> Result<u8, Failure> {
    if a.k == 0 || a.k > a.max_k {
        return Err(usage(format!("--k must be between 1 and {}", a.max_k)));
    }
    if a.k > MAX_ENUMERABLE_K {
        return Err(usage(format!("state spaces beyond {MAX_ENUMERABLE_K} states are not supported")));
    }
    let limits = DegreeLimits { max_sets: a.max_sets, max_time: a.max_seconds.map(Duration::from_secs) };
    let order: Vec<u32> = (0..(2 * a.k as u32).pow(a.k as u32)).collect();
    let d = count_degrees_ordered(a.k, &limits, &order);
    if json {
        println!("{}", json!({"type": "count", "k": a.k, "degrees": d.count, "exact": d.exact}));
    } else {
        println!("degrees={}", d.count);
        println!("exact={}", d.exact);
    }
    if a.list {
        for deg in &d.degrees {
            let gens: Vec<String> = deg.generators.iter().map(table_text).collect();
            if json {
                println!(
                    "{}",
                    json!({"type": "degree", "fingerprint": deg.closed.fingerprint(),
                           "size": deg.closed.len(), "generators": gens})
                );
            } else {
                println!(
                    "fingerprint={} size={} generators=[{}]",
                    deg.closed.fingerprint(),
                    deg.closed.len(),
                    gens.join("; ")
                );
            }
        }
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<u8, Failure> {
    let json = cli.json;
    match cli.command {
        Command::Run(a) => cmd_run(&a, json),
        Command::Extract { program, minimize: min } => {
            let s = extract(&read_program(&program)?).reachable_part();
            print_spec(&if min { minimize(&s) } else { s }, json);
            Ok(0)
        }
        Command::Normalize { program } => {
            print_program(&normalize(&read_program(&program)?), json);
            Ok(0)
        }
        Command::Translate { rml } => {
            print_program(&rmlful(&read_rml(&rml)?), json);
            Ok(0)
        }
        Command::Cosim(a) => cmd_cosim(&a, json),
        Command::Degrees(a) => cmd_degrees(&a, json),
        Command::Leq { left, right } => {
            let holds = leq_by_closure(&read_unit(&left)?, &read_unit(&right)?).map_err(|e| data(e.to_string()))?;
            if json {
                println!("{}", json!({"leq": holds}));
            } else {
                println!("{holds}");
            }
            Ok(0)
        }
        Command::CompileThread { spec } => {
            let s: LinearSpec = read(&spec)?.parse().map_err(|e| data(format!("{}: {e}", spec.display())))?;
            print_program(&compile_thread(&s).map_err(|e| data(e.to_string()))?, json);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("isfu: {msg}");
            ExitCode::from(code)
        }
    }
}
