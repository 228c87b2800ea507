//! Regular threads presented as finite linear recursive specifications.
//!
//! A [`LinearSpec`] is a finite list of equations, each of the form `D`,
//! `S+`, `S-` or `x ⊴ a ⊵ y`. Thread extraction turns an instruction
//! sequence into one; [`compile_thread`] goes the other way. Equality of
//! threads is decided semantically by [`bisimilar`].

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::isa::{self, BasicInstruction, Instruction, InstructionSequence, Target};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Tau,
    Basic(BasicInstruction),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Tau => f.write_str("tau"),
            Action::Basic(a) => write!(f, "{a}"),
        }
    }
}

/// Right-hand side of one equation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ThreadEntry {
    Deadlock,
    TermP,
    TermN,
    Post { action: Action, on_true: usize, on_false: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ThreadError {
    #[error("a linear specification needs at least one state")]
    Empty,
    #[error("state {0} is out of range")]
    BadState(usize),
    #[error("operation is only defined on tau-free threads")]
    ContainsTau,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// A finite linear recursive specification with a designated root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearSpec {
    entries: Vec<ThreadEntry>,
    root: usize,
}

impl LinearSpec {
    pub fn new(entries: Vec<ThreadEntry>, root: usize) -> Result<Self, ThreadError> {
        if entries.is_empty() {
            return Err(ThreadError::Empty);
        }
        let n = entries.len();
        if root >= n {
            return Err(ThreadError::BadState(root));
        }
        for e in &entries {
            if let ThreadEntry::Post { on_true, on_false, .. } = e {
                for &s in [on_true, on_false] {
                    if s >= n {
                        return Err(ThreadError::BadState(s));
                    }
                }
            }
        }
        Ok(LinearSpec { entries, root })
    }

    /// Single-state spec for a constant thread.
    pub fn constant(entry: ThreadEntry) -> Self {
        assert!(!matches!(entry, ThreadEntry::Post { .. }), "constant spec needs D, S+ or S-");
        LinearSpec { entries: vec![entry], root: 0 }
    }

    pub fn entries(&self) -> &[ThreadEntry] {
        &self.entries
    }

    pub fn entry(&self, state: usize) -> &ThreadEntry {
        &self.entries[state]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// The same equations solved for a different variable.
    pub fn with_root(&self, root: usize) -> Result<Self, ThreadError> {
        if root >= self.entries.len() {
            return Err(ThreadError::BadState(root));
        }
        Ok(LinearSpec { entries: self.entries.clone(), root })
    }

    pub fn is_tau_free(&self) -> bool {
        !self.entries.iter().any(|e| matches!(e, ThreadEntry::Post { action: Action::Tau, .. }))
    }

    fn require_tau_free(&self) -> Result<(), ThreadError> {
        if self.is_tau_free() {
            Ok(())
        } else {
            Err(ThreadError::ContainsTau)
        }
    }

    /// Drops states unreachable from the root and renumbers in BFS order
    /// (root first, true branch before false branch).
    pub fn reachable_part(&self) -> LinearSpec {
        let mut ids: HashMap<usize, usize> = HashMap::new();
        let mut order = Vec::new();
        let mut queue = VecDeque::from([self.root]);
        ids.insert(self.root, 0);
        order.push(self.root);
        while let Some(s) = queue.pop_front() {
            if let ThreadEntry::Post { on_true, on_false, .. } = &self.entries[s] {
                for &t in [on_true, on_false] {
                    if let std::collections::hash_map::Entry::Vacant(e) = ids.entry(t) {
                        e.insert(order.len());
                        order.push(t);
                        queue.push_back(t);
                    }
                }
            }
        }
        let entries = order
            .iter()
            .map(|&s| match &self.entries[s] {
                ThreadEntry::Post { action, on_true, on_false } => {
                    ThreadEntry::Post { action: action.clone(), on_true: ids[on_true], on_false: ids[on_false] }
                }
                e => e.clone(),
            })
            .collect();
        LinearSpec { entries, root: 0 }
    }
}

impl fmt::Display for LinearSpec {
    /// One line per state: `<id>: D | S+ | S- | <action> ? <t> : <f>`,
    /// with the root line prefixed by `*`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.entries.iter().enumerate() {
            if i == self.root {
                f.write_str("*")?;
            }
            write!(f, "{i}: ")?;
            match e {
                ThreadEntry::Deadlock => f.write_str("D")?,
                ThreadEntry::TermP => f.write_str("S+")?,
                ThreadEntry::TermN => f.write_str("S-")?,
                ThreadEntry::Post { action, on_true, on_false } => write!(f, "{action} ? {on_true} : {on_false}")?,
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

impl FromStr for LinearSpec {
    type Err = ThreadError;

    /// Parses the dump format produced by `Display`. State ids must be
    /// exactly `0..n` (in any order) and exactly one line carries `*`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut slots: Vec<Option<ThreadEntry>> = Vec::new();
        let mut root = None;
        for (lineno, raw) in s.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: &str| ThreadError::Syntax { line: lineno + 1, message: message.into() };
            let (head, body) = line.split_once(':').ok_or_else(|| syntax("expected `<id>:`"))?;
            let head = head.trim();
            let (is_root, id) = match head.strip_prefix('*') {
                Some(rest) => (true, rest.trim()),
                None => (false, head),
            };
            let id: usize = id.parse().map_err(|_| syntax("bad state id"))?;
            let body = body.trim();
            let entry = match body {
                "D" => ThreadEntry::Deadlock,
                "S+" => ThreadEntry::TermP,
                "S-" => ThreadEntry::TermN,
                _ => {
                    let (act, rest) = body.split_once('?').ok_or_else(|| syntax("expected `?`"))?;
                    let (t, f) = rest.split_once(':').ok_or_else(|| syntax("expected `:`"))?;
                    let act = act.trim();
                    let action = if act == "tau" {
                        Action::Tau
                    } else {
                        let (fo, m) = act.split_once('.').ok_or_else(|| syntax("bad action"))?;
                        Action::Basic(BasicInstruction::new(fo, m).map_err(|_| syntax("bad action"))?)
                    };
                    ThreadEntry::Post {
                        action,
                        on_true: t.trim().parse().map_err(|_| syntax("bad state id"))?,
                        on_false: f.trim().parse().map_err(|_| syntax("bad state id"))?,
                    }
                }
            };
            if slots.len() <= id {
                slots.resize(id + 1, None);
            }
            if slots[id].replace(entry).is_some() {
                return Err(syntax("duplicate state id"));
            }
            if is_root {
                if root.is_some() {
                    return Err(syntax("more than one root"));
                }
                root = Some(id);
            }
        }
        let entries = slots
            .into_iter()
            .enumerate()
            .map(|(i, e)| e.ok_or(ThreadError::BadState(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let root = root.ok_or(ThreadError::Syntax { line: 0, message: "no root marked with `*`".into() })?;
        LinearSpec::new(entries, root)
    }
}

/// Follows jumps from position `i`; `None` means deadlock (out of range or
/// the start of an infinite jump chain).
fn resolve(x: &InstructionSequence, i: usize) -> Option<usize> {
    let mut pos = i;
    let mut visited = Vec::new();
    loop {
        let u = x.get(pos)?;
        let next = match u {
            Instruction::FwdJump(l) => x.forward(pos, l),
            Instruction::BwdJump(l) => x.backward(pos, l),
            _ => return Some(pos),
        };
        if visited.contains(&pos) {
            return None;
        }
        visited.push(pos);
        match next {
            Target::At(j) => pos = j,
            Target::Before | Target::Past => return None,
        }
    }
}

/// Thread extraction, also reporting for every state the instruction
/// position it came from (`None` for the shared deadlock state).
pub fn extract_annotated(x: &InstructionSequence) -> (LinearSpec, Vec<Option<usize>>) {
    let mut ids: HashMap<Option<usize>, usize> = HashMap::new();
    let mut origin: Vec<Option<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let mut intern = |p: Option<usize>, origin: &mut Vec<Option<usize>>, queue: &mut VecDeque<Option<usize>>| {
        *ids.entry(p).or_insert_with(|| {
            origin.push(p);
            queue.push_back(p);
            origin.len() - 1
        })
    };
    let root = intern(resolve(x, 1), &mut origin, &mut queue);
    let mut entries: Vec<ThreadEntry> = Vec::new();
    // States are created in the same order they are queued, so entries can
    // be pushed as the queue drains.
    while let Some(p) = queue.pop_front() {
        let entry = match p {
            None => ThreadEntry::Deadlock,
            Some(i) => match &x.instructions()[i - 1] {
                Instruction::HaltP => ThreadEntry::TermP,
                Instruction::HaltN => ThreadEntry::TermN,
                Instruction::Plain(a) => {
                    let next = intern(resolve(x, i + 1), &mut origin, &mut queue);
                    ThreadEntry::Post { action: Action::Basic(a.clone()), on_true: next, on_false: next }
                }
                Instruction::PosTest(a) => {
                    let t = intern(resolve(x, i + 1), &mut origin, &mut queue);
                    let f = intern(resolve(x, i + 2), &mut origin, &mut queue);
                    ThreadEntry::Post { action: Action::Basic(a.clone()), on_true: t, on_false: f }
                }
                Instruction::NegTest(a) => {
                    let f = intern(resolve(x, i + 1), &mut origin, &mut queue);
                    let t = intern(resolve(x, i + 2), &mut origin, &mut queue);
                    ThreadEntry::Post { action: Action::Basic(a.clone()), on_true: t, on_false: f }
                }
                Instruction::FwdJump(_) | Instruction::BwdJump(_) => unreachable!("jumps are resolved"),
            },
        };
        entries.push(entry);
    }
    (LinearSpec { entries, root }, origin)
}

/// Thread extraction `|x|`.
pub fn extract(x: &InstructionSequence) -> LinearSpec {
    extract_annotated(x).0
}

/// A finite thread (a tree), as produced by projection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FiniteThread {
    Deadlock,
    TermP,
    TermN,
    Post(Action, Box<FiniteThread>, Box<FiniteThread>),
}

impl FiniteThread {
    pub fn post(action: Action, on_true: FiniteThread, on_false: FiniteThread) -> Self {
        FiniteThread::Post(action, Box::new(on_true), Box::new(on_false))
    }

    pub fn depth(&self) -> usize {
        match self {
            FiniteThread::Post(_, t, f) => 1 + t.depth().max(f.depth()),
            _ => 0,
        }
    }

    /// Linear specification with one state per tree node (root is state 0).
    pub fn to_spec(&self) -> LinearSpec {
        fn go(t: &FiniteThread, entries: &mut Vec<ThreadEntry>) -> usize {
            let id = entries.len();
            match t {
                FiniteThread::Deadlock => entries.push(ThreadEntry::Deadlock),
                FiniteThread::TermP => entries.push(ThreadEntry::TermP),
                FiniteThread::TermN => entries.push(ThreadEntry::TermN),
                FiniteThread::Post(a, p, q) => {
                    entries.push(ThreadEntry::Deadlock);
                    let on_true = go(p, entries);
                    let on_false = go(q, entries);
                    entries[id] = ThreadEntry::Post { action: a.clone(), on_true, on_false };
                }
            }
            id
        }
        let mut entries = Vec::new();
        go(self, &mut entries);
        LinearSpec { entries, root: 0 }
    }
}

impl fmt::Display for FiniteThread {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FiniteThread::Deadlock => f.write_str("D"),
            FiniteThread::TermP => f.write_str("S+"),
            FiniteThread::TermN => f.write_str("S-"),
            FiniteThread::Post(a, p, q) => write!(f, "({p} <| {a} |> {q})"),
        }
    }
}

/// The projection `π_n`: the thread cut off after `n` actions.
pub fn project(s: &LinearSpec, n: usize) -> FiniteThread {
    project_from(s, s.root, n)
}

fn project_from(s: &LinearSpec, state: usize, n: usize) -> FiniteThread {
    if n == 0 {
        return FiniteThread::Deadlock;
    }
    match &s.entries[state] {
        ThreadEntry::Deadlock => FiniteThread::Deadlock,
        ThreadEntry::TermP => FiniteThread::TermP,
        ThreadEntry::TermN => FiniteThread::TermN,
        ThreadEntry::Post { action, on_true, on_false } => {
            FiniteThread::post(action.clone(), project_from(s, *on_true, n - 1), project_from(s, *on_false, n - 1))
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Decides bisimilarity of two tau-free specifications.
///
/// Both structures are deterministic, so a union-find pass over state pairs
/// reachable from the roots suffices.
pub fn bisimilar(a: &LinearSpec, b: &LinearSpec) -> Result<bool, ThreadError> {
    a.require_tau_free()?;
    b.require_tau_free()?;
    let off = a.len();
    let mut parent: Vec<usize> = (0..off + b.len()).collect();
    let mut todo = vec![(a.root, b.root)];
    while let Some((p, q)) = todo.pop() {
        let (rp, rq) = (find(&mut parent, p), find(&mut parent, q + off));
        if rp == rq {
            continue;
        }
        parent[rp] = rq;
        match (&a.entries[p], &b.entries[q]) {
            (ThreadEntry::Deadlock, ThreadEntry::Deadlock)
            | (ThreadEntry::TermP, ThreadEntry::TermP)
            | (ThreadEntry::TermN, ThreadEntry::TermN) => {}
            (
                ThreadEntry::Post { action: x, on_true: pt, on_false: pf },
                ThreadEntry::Post { action: y, on_true: qt, on_false: qf },
            ) if x == y => {
                todo.push((*pt, *qt));
                todo.push((*pf, *qf));
            }
            _ => return Ok(false),
        }
    }
    Ok(true)
}

/// Minimizes a specification by partition refinement on (entry kind,
/// action) labels, then renumbers canonically. Bisimilar specs minimize to
/// identical values.
pub fn minimize(s: &LinearSpec) -> LinearSpec {
    let s = s.reachable_part();
    let n = s.len();
    let label = |e: &ThreadEntry| -> (u8, Option<Action>) {
        match e {
            ThreadEntry::Deadlock => (0, None),
            ThreadEntry::TermP => (1, None),
            ThreadEntry::TermN => (2, None),
            ThreadEntry::Post { action, .. } => (3, Some(action.clone())),
        }
    };
    let mut block: Vec<usize> = {
        let mut ids = HashMap::new();
        s.entries
            .iter()
            .map(|e| {
                let next = ids.len();
                *ids.entry(label(e)).or_insert(next)
            })
            .collect()
    };
    let mut count = block.iter().copied().max().map_or(0, |m| m + 1);
    loop {
        let mut ids: HashMap<(usize, usize, usize), usize> = HashMap::new();
        let refined: Vec<usize> = (0..n)
            .map(|i| {
                let succ = match &s.entries[i] {
                    ThreadEntry::Post { on_true, on_false, .. } => (block[*on_true], block[*on_false]),
                    _ => (usize::MAX, usize::MAX),
                };
                let next = ids.len();
                *ids.entry((block[i], succ.0, succ.1)).or_insert(next)
            })
            .collect();
        let new_count = ids.len();
        block = refined;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let mut entries = vec![ThreadEntry::Deadlock; count];
    for i in 0..n {
        entries[block[i]] = match &s.entries[i] {
            ThreadEntry::Post { action, on_true, on_false } => {
                ThreadEntry::Post { action: action.clone(), on_true: block[*on_true], on_false: block[*on_false] }
            }
            e => e.clone(),
        };
    }
    LinearSpec { entries, root: block[s.root] }.reachable_part()
}

/// Compiles a tau-free thread into an instruction sequence whose extraction
/// is bisimilar to it. Each `Post` state becomes `+a ; <jump> ; <jump>`,
/// constants become `!t`, `!f` or `#0`. The root's block comes first.
pub fn compile_thread(s: &LinearSpec) -> Result<InstructionSequence, ThreadError> {
    s.require_tau_free()?;
    let s = s.reachable_part();
    let size = |e: &ThreadEntry| if matches!(e, ThreadEntry::Post { .. }) { 3 } else { 1 };
    let mut start = Vec::with_capacity(s.len());
    let mut next = 1;
    for e in &s.entries {
        start.push(next);
        next += size(e);
    }
    let jump = |from: usize, to: usize| {
        if to >= from {
            Instruction::fwd(to - from)
        } else {
            Instruction::bwd(from - to)
        }
    };
    let mut out = Vec::with_capacity(next - 1);
    for (id, e) in s.entries.iter().enumerate() {
        let p = start[id];
        match e {
            ThreadEntry::Deadlock => out.push(Instruction::fwd(0)),
            ThreadEntry::TermP => out.push(Instruction::HaltP),
            ThreadEntry::TermN => out.push(Instruction::HaltN),
            ThreadEntry::Post { action: Action::Basic(a), on_true, on_false } => {
                out.push(Instruction::PosTest(a.clone()));
                out.push(jump(p + 1, start[*on_true]));
                out.push(jump(p + 2, start[*on_false]));
            }
            ThreadEntry::Post { action: Action::Tau, .. } => unreachable!("checked tau-free"),
        }
    }
    Ok(InstructionSequence::new(out).expect("at least one state"))
}

/// Axiom T1 applied everywhere: `x ⊴ τ ⊵ y` becomes `x ⊴ τ ⊵ x`.
pub fn tau_contract(t: &FiniteThread) -> FiniteThread {
    match t {
        FiniteThread::Post(Action::Tau, p, _) => {
            let p = tau_contract(p);
            FiniteThread::post(Action::Tau, p.clone(), p)
        }
        FiniteThread::Post(a, p, q) => FiniteThread::post(a.clone(), tau_contract(p), tau_contract(q)),
        c => c.clone(),
    }
}

/// Parses a program and extracts its thread; test and CLI convenience.
pub fn extract_text(text: &str) -> Result<LinearSpec, isa::ParseError> {
    Ok(extract(&isa::parse_program(text)?))
}
