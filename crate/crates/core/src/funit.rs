//! Functional units and derived method operations.
//!
//! A functional unit is a finite map from method names to method
//! operations, total functions `S -> Bool x S` over a state space. An
//! instruction sequence over a unit's interface derives a partial method
//! operation by running it against a single service `f.H(s)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_traits::ToPrimitive;
use thiserror::Error;

use crate::exec::{reachable_states, run, unit_family, ExecMode, ExecStatus};
use crate::finfu;
use crate::isa::{is_ident, normalize, Instruction, InstructionSequence};
use crate::natfu::NatOp;
use crate::threads::{extract, LinearSpec};
use crate::Natural;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FunitError {
    #[error("`{0}` is not a valid method name")]
    InvalidMethod(String),
    #[error("method `{0}` is defined twice")]
    DuplicateMethod(String),
    #[error("method `{0}` is not in the interface")]
    UnknownMethod(String),
    #[error("table for `{method}` has {found} rows, expected {expected}")]
    TableSize { method: String, expected: usize, found: usize },
    #[error("table for `{method}` maps to state {state}, outside 0..{size}")]
    TableRange { method: String, state: usize, size: usize },
    #[error("method `{0}` needs a state space over the naturals")]
    NeedsNaturals(String),
    #[error("instruction `{0}` uses a focus other than `{1}`")]
    ForeignFocus(String, String),
    #[error("no implementation given for method `{0}`")]
    MissingImpl(String),
    #[error("operation requires finite state spaces of equal size")]
    StateSpaceMismatch,
    #[error("unit table: {0}")]
    TableFormat(String),
}

/// State space of a functional unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateSpace {
    Naturals,
    /// States `0..k`.
    Finite(usize),
}

impl StateSpace {
    pub fn contains(&self, s: &Natural) -> bool {
        match self {
            StateSpace::Naturals => true,
            StateSpace::Finite(k) => s.to_usize().is_some_and(|s| s < *k),
        }
    }
}

type NatFn = dyn Fn(&Natural) -> (bool, Natural) + Send + Sync;

#[derive(Clone)]
enum Repr {
    Table(Arc<[(bool, usize)]>),
    Builtin(NatOp),
    Custom { name: String, f: Arc<NatFn> },
}

/// A total function from states to a reply and a next state.
#[derive(Clone)]
pub struct MethodOperation {
    repr: Repr,
}

impl MethodOperation {
    /// Finite presentation: row `s` gives the value at state `s`.
    pub fn table(rows: Vec<(bool, usize)>) -> Self {
        MethodOperation { repr: Repr::Table(rows.into()) }
    }

    pub fn builtin(op: NatOp) -> Self {
        MethodOperation { repr: Repr::Builtin(op) }
    }

    /// An operation given by a closure. Two custom operations compare equal
    /// only if they share the same closure.
    pub fn custom(name: impl Into<String>, f: impl Fn(&Natural) -> (bool, Natural) + Send + Sync + 'static) -> Self {
        MethodOperation { repr: Repr::Custom { name: name.into(), f: Arc::new(f) } }
    }

    pub fn apply(&self, s: &Natural) -> (bool, Natural) {
        match &self.repr {
            Repr::Table(rows) => {
                let i = s
                    .to_usize()
                    .filter(|&i| i < rows.len())
                    .unwrap_or_else(|| panic!("state {s} outside a table of {} states", rows.len()));
                let (b, t) = rows[i];
                (b, Natural::from(t))
            }
            Repr::Builtin(op) => op.apply(s),
            Repr::Custom { f, .. } => f(s),
        }
    }

    pub fn as_table(&self) -> Option<&[(bool, usize)]> {
        match &self.repr {
            Repr::Table(rows) => Some(rows),
            _ => None,
        }
    }

    pub fn as_builtin(&self) -> Option<&NatOp> {
        match &self.repr {
            Repr::Builtin(op) => Some(op),
            _ => None,
        }
    }
}

impl PartialEq for MethodOperation {
    fn eq(&self, other: &Self) -> bool {
        match (&self.repr, &other.repr) {
            (Repr::Table(a), Repr::Table(b)) => a == b,
            (Repr::Builtin(a), Repr::Builtin(b)) => a == b,
            (Repr::Custom { f: a, .. }, Repr::Custom { f: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl fmt::Debug for MethodOperation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.repr {
            Repr::Table(rows) => f.debug_tuple("Table").field(rows).finish(),
            Repr::Builtin(op) => f.debug_tuple("Builtin").field(op).finish(),
            Repr::Custom { name, .. } => f.debug_tuple("Custom").field(name).finish(),
        }
    }
}

/// A finite set of named method operations over one state space.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalUnit {
    space: StateSpace,
    ops: BTreeMap<String, MethodOperation>,
}

impl FunctionalUnit {
    pub fn new<N, I>(space: StateSpace, ops: I) -> Result<Self, FunitError>
    where
        N: Into<String>,
        I: IntoIterator<Item = (N, MethodOperation)>,
    {
        let mut map = BTreeMap::new();
        for (name, op) in ops {
            let name = name.into();
            if !is_ident(&name) {
                return Err(FunitError::InvalidMethod(name));
            }
            match (&op.repr, space) {
                (Repr::Table(rows), StateSpace::Finite(k)) => {
                    if rows.len() != k {
                        return Err(FunitError::TableSize { method: name, expected: k, found: rows.len() });
                    }
                    if let Some(&(_, s)) = rows.iter().find(|(_, s)| *s >= k) {
                        return Err(FunitError::TableRange { method: name, state: s, size: k });
                    }
                }
                (Repr::Table(rows), StateSpace::Naturals) => {
                    return Err(FunitError::TableSize { method: name, expected: 0, found: rows.len() })
                }
                (Repr::Builtin(_), StateSpace::Finite(_)) => return Err(FunitError::NeedsNaturals(name)),
                _ => {}
            }
            if map.insert(name.clone(), op).is_some() {
                return Err(FunitError::DuplicateMethod(name));
            }
        }
        Ok(FunctionalUnit { space, ops: map })
    }

    /// The unit with an empty interface.
    pub fn empty(space: StateSpace) -> Self {
        FunctionalUnit { space, ops: BTreeMap::new() }
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn interface(&self) -> impl Iterator<Item = &str> {
        self.ops.keys().map(String::as_str)
    }

    pub fn ops(&self) -> impl Iterator<Item = (&str, &MethodOperation)> {
        self.ops.iter().map(|(n, o)| (n.as_str(), o))
    }

    pub fn get(&self, method: &str) -> Option<&MethodOperation> {
        self.ops.get(method)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// `⟨I, H⟩`: the unit restricted to the methods in `names`.
    pub fn restrict<S: AsRef<str>>(&self, names: &[S]) -> Result<Self, FunitError> {
        let mut ops = BTreeMap::new();
        for n in names {
            let n = n.as_ref();
            let op = self.ops.get(n).ok_or_else(|| FunitError::UnknownMethod(n.to_string()))?;
            ops.insert(n.to_string(), op.clone());
        }
        Ok(FunctionalUnit { space: self.space, ops })
    }

    /// The method tables of a finite unit, in interface order.
    pub fn tables(&self) -> Option<(usize, Vec<finfu::MoTable>)> {
        let StateSpace::Finite(k) = self.space else { return None };
        let tables = self.ops.values().map(|op| op.as_table().map(<[_]>::to_vec)).collect::<Option<Vec<_>>>()?;
        Some((k, tables))
    }
}

pub fn restrict<S: AsRef<str>>(h: &FunctionalUnit, names: &[S]) -> Result<FunctionalUnit, FunitError> {
    h.restrict(names)
}

/// Value of a derived operation at one state.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DerivedValue {
    Defined(bool, Natural),
    /// The run is provably divergent.
    Undefined,
    /// The step budget ran out first.
    Unknown,
}

/// Outcome of evaluating a derived operation on a whole finite space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tabulation {
    Total(Vec<(bool, usize)>),
    /// Undefined at (at least) this state.
    Undefined(usize),
    /// No divergence found, but this state exhausted the budget.
    Unknown(usize),
}

/// `|x|_H`: the partial method operation produced by a program.
#[derive(Debug, Clone)]
pub struct PartialMethodOperation {
    thread: LinearSpec,
    unit: Arc<FunctionalUnit>,
    focus: String,
    mode: ExecMode,
}

impl PartialMethodOperation {
    pub fn eval(&self, s: &Natural) -> DerivedValue {
        let family = unit_family(&self.focus, Arc::clone(&self.unit), s.clone());
        let out = run(&self.thread, &family, &self.mode);
        match out.status {
            ExecStatus::Completed => {
                let b = out.reply.as_bool().expect("completed runs reply T or F");
                let state = out
                    .family
                    .get(&self.focus)
                    .and_then(|svc| svc.state())
                    .cloned()
                    .expect("the focused service survives a completed run");
                DerivedValue::Defined(b, state)
            }
            ExecStatus::ProvenDivergent => DerivedValue::Undefined,
            ExecStatus::BudgetExhausted => DerivedValue::Unknown,
        }
    }

    /// Evaluates every state of a finite unit.
    pub fn tabulate(&self) -> Option<Tabulation> {
        let StateSpace::Finite(k) = self.unit.space() else { return None };
        let mut rows = Vec::with_capacity(k);
        let mut unknown = None;
        for s in 0..k {
            match self.eval(&Natural::from(s)) {
                DerivedValue::Defined(b, t) => rows.push((b, t.to_usize().expect("finite state"))),
                DerivedValue::Undefined => return Some(Tabulation::Undefined(s)),
                DerivedValue::Unknown => {
                    unknown.get_or_insert(s);
                    rows.push((false, 0));
                }
            }
        }
        Some(match unknown {
            Some(s) => Tabulation::Unknown(s),
            None => Tabulation::Total(rows),
        })
    }

    pub fn thread(&self) -> &LinearSpec {
        &self.thread
    }
}

/// Builds `|x|_H` for the given focus; every basic instruction of `x` must
/// use that focus and a method of `H`.
pub fn derived_op(
    x: &InstructionSequence,
    h: &FunctionalUnit,
    focus: &str,
    mode: &ExecMode,
) -> Result<PartialMethodOperation, FunitError> {
    for a in x.basic_instructions() {
        if a.focus() != focus {
            return Err(FunitError::ForeignFocus(a.to_string(), focus.to_string()));
        }
        if h.get(a.method()).is_none() {
            return Err(FunitError::UnknownMethod(a.method().to_string()));
        }
    }
    Ok(PartialMethodOperation {
        thread: extract(x),
        unit: Arc::new(h.clone()),
        focus: focus.to_string(),
        mode: mode.clone(),
    })
}

fn to_normal_form(x: &InstructionSequence) -> InstructionSequence {
    if x.is_normal_form() {
        x.clone()
    } else {
        normalize(x)
    }
}

/// Body of a normal-form program without its `!t ; !f` tail; jumps that
/// leave the program are replaced by `#0` so they still deadlock once the
/// body is spliced into a larger program.
fn inline_body(x: &InstructionSequence) -> Vec<Instruction> {
    let x = to_normal_form(x);
    let k = x.len() - 2;
    x.iter()
        .take(k)
        .enumerate()
        .map(|(j, u)| {
            let target = match u {
                Instruction::FwdJump(l) => Some(x.forward(j + 1, l)),
                Instruction::BwdJump(l) => Some(x.backward(j + 1, l)),
                _ => None,
            };
            match target {
                Some(crate::isa::Target::Before | crate::isa::Target::Past) => Instruction::fwd(0),
                _ => u.clone(),
            }
        })
        .collect()
}

/// Substitutes, for every positive test `+f.m` of `x_m`, the body of the
/// program implementing `m`.
///
/// Both `x_m` and the implementations are first brought to normal form.
/// A body of length `k` replacing the test at position `p` is followed by
/// `#2 ; #2`, so the body's positive exit continues at the test's
/// true-successor and its negative exit at the false-successor; jumps of
/// `x_m` spanning `p` are widened by `k + 1`. Inserted bodies are not
/// scanned again.
pub fn inline_compose(
    x_m: &InstructionSequence,
    impls: &BTreeMap<String, InstructionSequence>,
) -> Result<InstructionSequence, FunitError> {
    let x = to_normal_form(x_m);
    let mut bodies: BTreeMap<&str, Vec<Instruction>> = BTreeMap::new();
    for u in x.iter() {
        if let Instruction::PosTest(a) = u {
            if !bodies.contains_key(a.method()) {
                let imp = impls.get(a.method()).ok_or_else(|| FunitError::MissingImpl(a.method().to_string()))?;
                bodies.insert(a.method(), inline_body(imp));
            }
        }
    }
    let mut instrs: Vec<Instruction> = x.iter().cloned().collect();
    let mut i = 0;
    while i < instrs.len() {
        let Instruction::PosTest(a) = &instrs[i] else {
            i += 1;
            continue;
        };
        let body = &bodies[a.method()];
        let widen = Natural::from(body.len() + 1);
        let p = i + 1;
        for (j, u) in instrs.iter_mut().enumerate() {
            let q = j + 1;
            match u {
                Instruction::FwdJump(l) if q < p && *l > Natural::from(p - q) => *l += &widen,
                Instruction::BwdJump(l) if q > p && *l >= Natural::from(q - p) => *l += &widen,
                _ => {}
            }
        }
        let mut block = body.clone();
        block.push(Instruction::fwd(2));
        block.push(Instruction::fwd(2));
        let n = block.len();
        instrs.splice(i..=i, block);
        i += n;
    }
    Ok(InstructionSequence::new(instrs).expect("nonempty"))
}

/// `H ≤ H'` for units over the same finite state space.
pub fn check_leq_finite(h: &FunctionalUnit, h2: &FunctionalUnit) -> Result<bool, FunitError> {
    finfu::leq_by_closure(h, h2)
}

/// `H ≡ H'` for units over the same finite state space.
pub fn check_equiv_finite(h: &FunctionalUnit, h2: &FunctionalUnit) -> Result<bool, FunitError> {
    Ok(check_leq_finite(h, h2)? && check_leq_finite(h2, h)?)
}

/// Sound refutation: true means no program over `H` maps `s` to
/// `target`, because the target state is not reachable from `s` at all.
/// False means inconclusive (or reachable).
pub fn refute_derivability(h: &FunctionalUnit, s: &Natural, target: &(bool, Natural), bound: usize) -> bool {
    let r = reachable_states(h, s, bound);
    r.complete && !r.states.contains(&target.1)
}

/// Parses the finite-unit table format:
///
/// ```text
/// states 2
/// method m
/// 0 -> T 1
/// 1 -> F 0
/// ```
pub fn parse_unit_table(text: &str) -> Result<FunctionalUnit, FunitError> {
    let bad = |m: String| FunitError::TableFormat(m);
    let mut tokens = text.split_whitespace();
    let mut expect = |what: &str| tokens.next().ok_or_else(|| bad(format!("expected {what}, found end of input")));
    let kw = expect("`states`")?;
    if kw != "states" {
        return Err(bad(format!("expected `states`, found `{kw}`")));
    }
    let k: usize = expect("state count")?.parse().map_err(|_| bad("bad state count".into()))?;
    if k == 0 {
        return Err(bad("state count must be positive".into()));
    }
    let mut ops: Vec<(String, MethodOperation)> = Vec::new();
    let mut seen = BTreeSet::new();
    let rest: Vec<&str> = tokens.collect();
    let mut it = rest.into_iter();
    while let Some(kw) = it.next() {
        if kw != "method" {
            return Err(bad(format!("expected `method`, found `{kw}`")));
        }
        let name = it.next().ok_or_else(|| bad("expected method name".into()))?.to_string();
        let mut rows: Vec<Option<(bool, usize)>> = vec![None; k];
        for _ in 0..k {
            let mut field = |what: &str| it.next().ok_or_else(|| bad(format!("`{name}`: expected {what}")));
            let s: usize = field("state")?.parse().map_err(|_| bad(format!("`{name}`: bad state")))?;
            if field("`->`")? != "->" {
                return Err(bad(format!("`{name}`: expected `->`")));
            }
            let b = match field("reply")? {
                "T" => true,
                "F" => false,
                other => return Err(bad(format!("`{name}`: bad reply `{other}`"))),
            };
            let t: usize = field("next state")?.parse().map_err(|_| bad(format!("`{name}`: bad state")))?;
            if s >= k || t >= k {
                return Err(bad(format!("`{name}`: state out of range")));
            }
            if rows[s].replace((b, t)).is_some() {
                return Err(bad(format!("`{name}`: state {s} listed twice")));
            }
        }
        if !seen.insert(name.clone()) {
            return Err(FunitError::DuplicateMethod(name));
        }
        let rows = rows.into_iter().map(|r| r.expect("k distinct rows")).collect();
        ops.push((name, MethodOperation::table(rows)));
    }
    FunctionalUnit::new(StateSpace::Finite(k), ops)
}

/// Renders a finite unit in the table format; `None` for units that are
/// not finite tables.
pub fn render_unit_table(h: &FunctionalUnit) -> Option<String> {
    let (k, tables) = h.tables()?;
    let mut out = format!("states {k}\n");
    for (name, rows) in h.interface().zip(tables) {
        out.push_str(&format!("method {name}\n"));
        for (s, (b, t)) in rows.iter().enumerate() {
            out.push_str(&format!("{s} -> {} {t}\n", if *b { "T" } else { "F" }));
        }
    }
    Some(out)
}
