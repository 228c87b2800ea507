//! Strategies and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;

use isfu_core::finfu::{table_unit, MoTable};
use isfu_core::funit::{FunctionalUnit, MethodOperation, StateSpace};
use isfu_core::isa::{BasicInstruction, Instruction, InstructionSequence};
use isfu_core::services::{Service, ServiceFamily};
use isfu_core::threads::{Action, FiniteThread, LinearSpec, ThreadEntry};
use isfu_core::Natural;
use proptest::prelude::*;

pub const FOCI: [&str; 3] = ["f", "g", "h"];
pub const METHODS: [&str; 3] = ["a", "b", "c"];

pub fn basic(f: &str, m: &str) -> BasicInstruction {
    BasicInstruction::new(f, m).unwrap()
}

pub fn arb_basic(foci: &'static [&'static str], methods: &'static [&'static str]) -> BoxedStrategy<BasicInstruction> {
    (prop::sample::select(foci), prop::sample::select(methods)).prop_map(|(f, m)| basic(f, m)).boxed()
}

/// Any instruction; jump counters stay within `0..=reach`.
pub fn arb_instruction(
    foci: &'static [&'static str],
    methods: &'static [&'static str],
    reach: usize,
) -> BoxedStrategy<Instruction> {
    prop_oneof![
        3 => arb_basic(foci, methods).prop_map(Instruction::Plain),
        3 => arb_basic(foci, methods).prop_map(Instruction::PosTest),
        3 => arb_basic(foci, methods).prop_map(Instruction::NegTest),
        2 => (0..=reach).prop_map(Instruction::fwd),
        2 => (0..=reach).prop_map(Instruction::bwd),
        1 => Just(Instruction::HaltP),
        1 => Just(Instruction::HaltN),
    ]
    .boxed()
}

pub fn arb_program(
    foci: &'static [&'static str],
    methods: &'static [&'static str],
    max_len: usize,
) -> BoxedStrategy<InstructionSequence> {
    prop::collection::vec(arb_instruction(foci, methods, max_len + 2), 1..=max_len)
        .prop_map(|v| InstructionSequence::new(v).unwrap())
        .boxed()
}

pub fn arb_entry(states: usize, actions: Vec<Action>) -> BoxedStrategy<ThreadEntry> {
    prop_oneof![
        1 => Just(ThreadEntry::Deadlock),
        1 => Just(ThreadEntry::TermP),
        1 => Just(ThreadEntry::TermN),
        4 => (prop::sample::select(actions), 0..states, 0..states)
            .prop_map(|(action, on_true, on_false)| ThreadEntry::Post { action, on_true, on_false }),
    ]
    .boxed()
}

pub fn basic_actions(foci: &[&str], methods: &[&str]) -> Vec<Action> {
    foci.iter().flat_map(|f| methods.iter().map(move |m| Action::Basic(basic(f, m)))).collect()
}

/// Tau-free linear specifications with `1..=max_states` states.
pub fn arb_spec(max_states: usize, actions: Vec<Action>) -> BoxedStrategy<LinearSpec> {
    (1..=max_states)
        .prop_flat_map(move |n| (prop::collection::vec(arb_entry(n, actions.clone()), n), 0..n))
        .prop_map(|(entries, root)| LinearSpec::new(entries, root).unwrap())
        .boxed()
}

pub fn arb_finite_thread(depth: u32, actions: Vec<Action>) -> BoxedStrategy<FiniteThread> {
    let leaf = prop_oneof![Just(FiniteThread::Deadlock), Just(FiniteThread::TermP), Just(FiniteThread::TermN)];
    leaf.prop_recursive(depth, 64, 2, move |inner| {
        (prop::sample::select(actions.clone()), inner.clone(), inner).prop_map(|(a, p, q)| FiniteThread::post(a, p, q))
    })
    .boxed()
}

/// `x ⊴ a ⊵ y` as a linear specification.
pub fn post_spec(a: Action, x: &LinearSpec, y: &LinearSpec) -> LinearSpec {
    let shift = |e: &ThreadEntry, by: usize| match e {
        ThreadEntry::Post { action, on_true, on_false } => {
            ThreadEntry::Post { action: action.clone(), on_true: on_true + by, on_false: on_false + by }
        }
        other => other.clone(),
    };
    let mut entries = vec![ThreadEntry::Post { action: a, on_true: 1 + x.root(), on_false: 1 + x.len() + y.root() }];
    entries.extend(x.entries().iter().map(|e| shift(e, 1)));
    entries.extend(y.entries().iter().map(|e| shift(e, 1 + x.len())));
    LinearSpec::new(entries, 0).unwrap()
}

pub fn arb_table(k: usize) -> BoxedStrategy<MoTable> {
    prop::collection::vec((any::<bool>(), 0..k), k).boxed()
}

/// Finite unit over `S_k` with the given methods.
pub fn arb_table_unit(k: usize, methods: &'static [&'static str]) -> BoxedStrategy<FunctionalUnit> {
    prop::collection::vec(arb_table(k), methods.len())
        .prop_map(move |tables| {
            FunctionalUnit::new(
                StateSpace::Finite(k),
                methods.iter().zip(tables).map(|(m, t)| (*m, MethodOperation::table(t))),
            )
            .unwrap()
        })
        .boxed()
}

/// A service: empty, or a finite unit over 3 states in some state.
pub fn arb_service() -> BoxedStrategy<Service> {
    prop_oneof![
        1 => Just(Service::Empty),
        5 => (arb_table_unit(3, &METHODS[..2]), 0u32..3)
            .prop_map(|(h, s)| Service::new(Arc::new(h), Natural::from(s)).unwrap()),
    ]
    .boxed()
}

/// A family over a subset of [`FOCI`].
pub fn arb_family() -> BoxedStrategy<ServiceFamily> {
    prop::collection::vec((prop::sample::select(&FOCI[..]), arb_service()), 0..4)
        .prop_map(|entries| {
            let mut seen = BTreeSet::new();
            entries
                .into_iter()
                .filter(|(f, _)| seen.insert(*f))
                .fold(ServiceFamily::empty(), |u, (f, s)| u.compose(&ServiceFamily::singleton(f, s).unwrap()))
        })
        .boxed()
}

/// Subset of `MO(S_2)` as a bit mask, turned into a unit `m0, m1, ..`.
pub fn unit_from_mask(mask: u16) -> FunctionalUnit {
    table_unit(2, &tables_from_mask(mask)).unwrap()
}

pub fn tables_from_mask(mask: u16) -> Vec<MoTable> {
    all_mo2().into_iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, t)| t).collect()
}

/// The 16 method operations on two states, enumerated independently of
/// the library.
pub fn all_mo2() -> Vec<MoTable> {
    let values = [(false, 0), (false, 1), (true, 0), (true, 1)];
    let mut out = Vec::new();
    for a in values {
        for b in values {
            out.push(vec![a, b]);
        }
    }
    out
}

/// Runs a program over a single table unit at focus `f`, by direct
/// interpretation. `None` means divergence.
pub fn interpret(x: &[Instruction], tables: &[(&str, &MoTable)], mut s: usize) -> Option<(bool, usize)> {
    let k = x.len();
    let mut pc = 1usize;
    let mut seen = BTreeSet::new();
    loop {
        if pc == 0 || pc > k || !seen.insert((pc, s)) {
            return None;
        }
        let test = |a: &BasicInstruction, s: usize| {
            tables.iter().find(|(m, _)| *m == a.method()).filter(|_| a.focus() == "f").map(|(_, t)| t[s])
        };
        pc = match &x[pc - 1] {
            Instruction::HaltP => return Some((true, s)),
            Instruction::HaltN => return Some((false, s)),
            Instruction::FwdJump(l) => {
                let l: usize = l.try_into().ok()?;
                if l == 0 {
                    return None;
                }
                pc + l
            }
            Instruction::BwdJump(l) => {
                let l: usize = l.try_into().ok()?;
                if l == 0 {
                    return None;
                }
                pc.checked_sub(l)?
            }
            Instruction::Plain(a) => {
                let (_, t) = test(a, s)?;
                s = t;
                pc + 1
            }
            Instruction::PosTest(a) | Instruction::NegTest(a) => {
                let (b, t) = test(a, s)?;
                s = t;
                let positive = matches!(&x[pc - 1], Instruction::PosTest(_));
                if b == positive {
                    pc + 1
                } else {
                    pc + 2
                }
            }
        };
    }
}

/// Total operations computed by normalized programs `u1 ; .. ; uj ; !t ; !f`
/// with `j <= 4` over the single method `m`, where each `ui` is `+f.m`,
/// `#l` or `\l` with `l <= j + 2`.
pub fn brute_force_closure(m: &MoTable) -> BTreeSet<MoTable> {
    let k = m.len();
    let mut found = BTreeSet::new();
    for j in 0..=4usize {
        let mut choices = vec![Instruction::PosTest(basic("f", "m"))];
        for l in 0..=j + 2 {
            choices.push(Instruction::fwd(l));
            choices.push(Instruction::bwd(l));
        }
        let n = choices.len();
        for mut code in 0..n.pow(j as u32) {
            let mut x = Vec::with_capacity(j + 2);
            for _ in 0..j {
                x.push(choices[code % n].clone());
                code /= n;
            }
            x.push(Instruction::HaltP);
            x.push(Instruction::HaltN);
            let rows: Option<MoTable> = (0..k).map(|s| interpret(&x, &[("m", m)], s)).collect();
            if let Some(rows) = rows {
                found.insert(rows);
            }
        }
    }
    found
}

/// The register-machine corpus: name, program text.
pub const RML_CORPUS: [(&str, &str); 7] = [
    ("identity", "+r0.iszero ; #4 ; r0.decr ; r2.incr ; \\4"),
    ("successor", "+r0.iszero ; #4 ; r0.decr ; r2.incr ; \\4 ; r2.incr ; #1"),
    ("add3", "+r0.iszero ; #4 ; r0.decr ; r2.incr ; \\4 ; r2.incr ; r2.incr ; r2.incr"),
    ("zero_test", "+r0.iszero ; #2 ; r1.incr"),
    ("monus3", "r0.decr ; r0.decr ; r0.decr ; +r0.iszero ; #4 ; r0.decr ; r2.incr ; \\4"),
    ("double", "+r0.iszero ; #5 ; r0.decr ; r2.incr ; r2.incr ; \\5"),
    ("halt_even", "+r0.iszero ; !t ; r0.decr ; +r0.iszero ; !f ; r0.decr ; r2.incr ; \\7"),
];

/// Programs for parse/render roundtrips.
pub const PROGRAM_CORPUS: [&str; 52] = [
    "!t",
    "!f",
    "#0",
    "\\0",
    "#1",
    "\\1",
    "f.m",
    "+f.m",
    "-f.m",
    "f.m ; !t ; !f",
    "+f.m ; !t ; !f",
    "-f.m ; !t ; !f",
    "#2 ; !t ; \\2",
    "f.incr ; f.incr ; +f.iszero ; !t ; !f",
    "+f.iszero ; \\1 ; !t",
    "f.decr ; +f.iszero ; !t ; \\3",
    "f.g1 ; #1 ; +f.g3 ; !t ; !f",
    "f.g1 ; f.g2 ; f.g2 ; +f.g3 ; !t ; !f",
    "f.exp2 ; #1 ; -f.iszero1 ; #3 ; f.fact5 ; !t ; f.fact5 ; !f",
    "+r0.iszero ; #4 ; r0.decr ; r2.incr ; \\4 ; r2.incr ; #1",
    "r0.decr ; r0.decr ; r0.decr ; +r0.iszero ; #4 ; r0.decr ; r2.incr ; \\4",
    "#123456789012345678901234567890 ; !t",
    "\\98765432109876543210 ; !f",
    "f_1.m_2 ; !t",
    "abc.def ; -abc.def ; +abc.def",
    "a.b ; c.d ; e.f ; g.h ; i.j",
    "+f.a ; #2 ; #2 ; !t ; !f",
    "+f.b ; #2 ; #2 ; !t ; !f",
    "-g.x ; \\3 ; #7 ; !t",
    "!t ; !t ; !t",
    "!f ; !t ; !f",
    "#1 ; #1 ; #1 ; !t",
    "\\1 ; \\2 ; \\3",
    "+f.m ; #1 ; #2 ; #2 ; !t ; !f",
    "#1 ; !t ; !f",
    "f.setzero ; f.incr ; -f.decr ; !f ; !t",
    "+u.v ; -u.v ; u.v ; #4 ; \\4 ; !t ; !f",
    "h.decr_2 ; +h.iszero ; !t ; !f",
    "f.succ0 ; f.succ1 ; f.succ2 ; f.succ3 ; f.succ4 ; f.succ5",
    "f.pred0 ; +f.iszero0 ; !t ; \\2",
    "x0.y0 ; #10 ; !t",
    "+f.m ; \\0 ; !f",
    "-f.m ; #0 ; !t",
    "f.a ; f.b ; f.c ; !t",
    "#4 ; f.a ; f.b ; f.c ; !f",
    "+f.g ; +f.g ; +f.g ; !t ; !f",
    "-f.g ; -f.g ; -f.g ; !t ; !f",
    "r1.incr ; !t ; \\5",
    "r3.incr ; \\1",
    "f.m ; #1",
    "\\4 ; f.m ; !t ; #2 ; !f",
    "+z9.q ; !f ; !t",
];
pub mod props;
