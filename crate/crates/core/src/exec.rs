//! Apply and reply: running a regular thread against a service family.
//!
//! [`run`] steps the configuration (thread state, family) one action at a
//! time. Deadlock, a missing focus and a rejected method end the run as
//! [`ExecStatus::ProvenDivergent`]; so does an exact repeat of a
//! configuration when cycle detection is on. Anything else that does not
//! terminate within the step budget is reported as
//! [`ExecStatus::BudgetExhausted`], which makes no claim either way.

use std::collections::{BTreeSet, HashSet, VecDeque};

use thiserror::Error;

use crate::funit::FunctionalUnit;
use crate::isa::BasicInstruction;
use crate::services::{service_step, Reply, Service, ServiceFamily};
use crate::threads::{Action, LinearSpec, ThreadEntry};
use crate::Natural;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("an execution mode needs a step budget, cycle detection, or both")]
    Unbounded,
}

/// Limits for a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecMode {
    budget: Option<u64>,
    detect_cycles: bool,
    record_trace: bool,
}

impl ExecMode {
    pub const DEFAULT_BUDGET: u64 = 1_000_000;

    pub fn new(budget: Option<u64>, detect_cycles: bool) -> Result<Self, ExecError> {
        if budget.is_none() && !detect_cycles {
            return Err(ExecError::Unbounded);
        }
        Ok(ExecMode { budget, detect_cycles, record_trace: false })
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn budget(&self) -> Option<u64> {
        self.budget
    }

    pub fn detect_cycles(&self) -> bool {
        self.detect_cycles
    }
}

impl Default for ExecMode {
    fn default() -> Self {
        ExecMode { budget: Some(Self::DEFAULT_BUDGET), detect_cycles: true, record_trace: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecStatus {
    Completed,
    ProvenDivergent,
    BudgetExhausted,
}

/// One processed basic action.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Thread state that performed the action.
    pub thread_state: usize,
    pub action: BasicInstruction,
    pub reply: Reply,
    /// State of the focused service after processing; `None` if it became
    /// (or was) empty.
    pub state: Option<Natural>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecOutcome {
    pub status: ExecStatus,
    /// `T`/`F` when completed, `D` otherwise.
    pub reply: Reply,
    /// Final family when completed, the empty family otherwise.
    pub family: ServiceFamily,
    /// Actions performed, including `tau`.
    pub steps: u64,
    /// Recorded only when the mode asks for it.
    pub trace: Vec<TraceStep>,
}

impl ExecOutcome {
    fn stop(status: ExecStatus, steps: u64, trace: Vec<TraceStep>) -> Self {
        ExecOutcome { status, reply: Reply::D, family: ServiceFamily::empty(), steps, trace }
    }
}

type Configuration = (usize, Vec<Option<Natural>>);

fn configuration(state: usize, family: &ServiceFamily) -> Configuration {
    (state, family.iter().map(|(_, s)| s.state().cloned()).collect())
}

/// Computes `t • u` and `t ! u` together.
pub fn run(t: &LinearSpec, u: &ServiceFamily, mode: &ExecMode) -> ExecOutcome {
    let mut family = u.clone();
    let mut current = t.root();
    let mut steps = 0u64;
    let mut seen: HashSet<Configuration> = HashSet::new();
    let mut trace = Vec::new();
    loop {
        let (action, on_true, on_false) = match t.entry(current) {
            ThreadEntry::TermP | ThreadEntry::TermN => {
                let reply = Reply::from_bool(matches!(t.entry(current), ThreadEntry::TermP));
                return ExecOutcome { status: ExecStatus::Completed, reply, family, steps, trace };
            }
            ThreadEntry::Deadlock => return ExecOutcome::stop(ExecStatus::ProvenDivergent, steps, trace),
            ThreadEntry::Post { action, on_true, on_false } => (action, *on_true, *on_false),
        };
        if mode.budget.is_some_and(|b| steps >= b) {
            return ExecOutcome::stop(ExecStatus::BudgetExhausted, steps, trace);
        }
        if mode.detect_cycles && !seen.insert(configuration(current, &family)) {
            return ExecOutcome::stop(ExecStatus::ProvenDivergent, steps, trace);
        }
        steps += 1;
        let a = match action {
            Action::Tau => {
                current = on_true;
                continue;
            }
            Action::Basic(a) => a,
        };
        let Some(service) = family.get(a.focus()) else {
            return ExecOutcome::stop(ExecStatus::ProvenDivergent, steps, trace);
        };
        let (reply, next) = service_step(service, a.method());
        if mode.record_trace {
            trace.push(TraceStep { thread_state: current, action: a.clone(), reply, state: next.state().cloned() });
        }
        current = match reply {
            Reply::T => on_true,
            Reply::F => on_false,
            Reply::D => return ExecOutcome::stop(ExecStatus::ProvenDivergent, steps, trace),
        };
        family.replace(a.focus(), next);
    }
}

/// Replays a recorded trace against the initial family, returning the
/// family after the last step.
pub fn replay(u: &ServiceFamily, trace: &[TraceStep]) -> ServiceFamily {
    let mut family = u.clone();
    for step in trace {
        if let Some(service) = family.get(step.action.focus()) {
            let (_, next) = service_step(service, step.action.method());
            family.replace(step.action.focus(), next);
        }
    }
    family
}

/// States reachable from a start state through effects of a unit's methods.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reachability {
    pub states: BTreeSet<Natural>,
    /// True if the closure was reached without exceeding the bound.
    pub complete: bool,
}

/// Breadth-first closure of `{s0}` under every method's effect, stopping
/// once `bound` distinct states have been collected.
pub fn reachable_states(h: &FunctionalUnit, s0: &Natural, bound: usize) -> Reachability {
    let mut states = BTreeSet::new();
    if bound == 0 {
        return Reachability { states, complete: false };
    }
    states.insert(s0.clone());
    let mut queue = VecDeque::from([s0.clone()]);
    while let Some(s) = queue.pop_front() {
        for (_, op) in h.ops() {
            let (_, next) = op.apply(&s);
            if states.contains(&next) {
                continue;
            }
            if states.len() == bound {
                return Reachability { states, complete: false };
            }
            states.insert(next.clone());
            queue.push_back(next);
        }
    }
    Reachability { states, complete: true }
}

/// Convenience: a family with a single unit-backed service.
pub fn unit_family(focus: &str, unit: std::sync::Arc<FunctionalUnit>, state: Natural) -> ServiceFamily {
    let service = Service::new(unit, state).expect("state inside the unit's space");
    ServiceFamily::singleton(focus, service).expect("valid focus")
}
