//! Property checks, shared by the property suite and the acceptance
//! runner. Each takes generated inputs and fails through `prop_assert!`.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use isfu_core::exec::{replay, run, unit_family, ExecMode, ExecOutcome, ExecStatus};
use isfu_core::finfu::{count_degrees_ordered, derived_closure, leq_by_closure, DegreeLimits, MoTable};
use isfu_core::funit::{derived_op, inline_compose, DerivedValue, FunctionalUnit, Tabulation};
use isfu_core::isa::{normalize, parse_program, render_program, InstructionSequence};
use isfu_core::natfu::{encode_registers, rm_run_traced, rmlful, univ_unit, NatOp, RmOutcome, RmlProgram};
use isfu_core::services::{service_step, Reply, Service, ServiceFamily};
use isfu_core::threads::{
    bisimilar, compile_thread, extract, project, tau_contract, Action, FiniteThread, LinearSpec, ThreadEntry,
};
use isfu_core::Natural;
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

use super::{basic, post_spec, tables_from_mask, unit_from_mask};

type Check = Result<(), TestCaseError>;

fn set(foci: &[&str]) -> BTreeSet<String> {
    foci.iter().map(|f| f.to_string()).collect()
}

// ---- isa / threads ----

pub fn parse_render_roundtrip(x: &InstructionSequence) -> Check {
    let text = render_program(x);
    prop_assert_eq!(&parse_program(&text).unwrap(), x);
    Ok(())
}

pub fn normalize_sound(x: &InstructionSequence) -> Check {
    let n = normalize(x);
    prop_assert!(n.is_normal_form(), "{} -> {}", x, n);
    prop_assert!(bisimilar(&extract(x), &extract(&n)).unwrap(), "{} -> {}", x, n);
    Ok(())
}

pub fn compile_roundtrip(s: &LinearSpec) -> Check {
    let x = compile_thread(s).unwrap();
    prop_assert!(bisimilar(&extract(&x), s).unwrap(), "{} compiled to {}", s, x);
    Ok(())
}

/// Reflexive, symmetric, transitive.
pub fn bisimilarity_equivalence(a: &LinearSpec, b: &LinearSpec, c: &LinearSpec) -> Check {
    prop_assert!(bisimilar(a, a).unwrap());
    let ab = bisimilar(a, b).unwrap();
    prop_assert_eq!(ab, bisimilar(b, a).unwrap());
    if ab && bisimilar(b, c).unwrap() {
        prop_assert!(bisimilar(a, c).unwrap());
    }
    Ok(())
}

/// A copy of `s` with states in reverse order plus an unreachable junk
/// state; bisimilar to `s` by construction.
pub fn scrambled(s: &LinearSpec) -> LinearSpec {
    let n = s.len();
    let map = |i: usize| n - 1 - i;
    let mut entries: Vec<ThreadEntry> = s
        .entries()
        .iter()
        .rev()
        .map(|e| match e {
            ThreadEntry::Post { action, on_true, on_false } => {
                ThreadEntry::Post { action: action.clone(), on_true: map(*on_true), on_false: map(*on_false) }
            }
            other => other.clone(),
        })
        .collect();
    entries.push(ThreadEntry::TermN);
    LinearSpec::new(entries, map(s.root())).unwrap()
}

/// Bisimilarity agrees with equality of all projections up to
/// `|a| * |b| + 1`.
pub fn aip_surrogate(a: &LinearSpec, b: &LinearSpec) -> Check {
    let bound = a.len() * b.len() + 1;
    let same = (0..=bound).all(|n| project(a, n) == project(b, n));
    prop_assert_eq!(bisimilar(a, b).unwrap(), same);
    Ok(())
}

pub fn projection_axioms(a: Action, x: &LinearSpec, y: &LinearSpec, n: usize) -> Check {
    prop_assert_eq!(project(x, 0), FiniteThread::Deadlock);
    for (entry, expected) in [
        (ThreadEntry::TermP, FiniteThread::TermP),
        (ThreadEntry::TermN, FiniteThread::TermN),
        (ThreadEntry::Deadlock, FiniteThread::Deadlock),
    ] {
        prop_assert_eq!(project(&LinearSpec::constant(entry), n + 1), expected);
    }
    let p = post_spec(a.clone(), x, y);
    prop_assert_eq!(project(&p, n + 1), FiniteThread::post(a, project(x, n), project(y, n)));
    Ok(())
}

pub fn t1_idempotent(t: &FiniteThread) -> Check {
    let once = tau_contract(t);
    prop_assert_eq!(tau_contract(&once), once.clone());
    fn check(t: &FiniteThread) -> bool {
        match t {
            FiniteThread::Post(Action::Tau, p, q) => p == q && check(p),
            FiniteThread::Post(_, p, q) => check(p) && check(q),
            _ => true,
        }
    }
    prop_assert!(check(&once));
    Ok(())
}

// ---- services ----

pub fn sfa_axioms(
    u: &ServiceFamily,
    v: &ServiceFamily,
    w: &ServiceFamily,
    s: &Service,
    s2: &Service,
    foci: &[&str],
) -> Check {
    let e = ServiceFamily::empty();
    prop_assert_eq!(u.compose(&e), u.clone(), "SFC1");
    prop_assert_eq!(u.compose(v), v.compose(u), "SFC2");
    prop_assert_eq!(u.compose(v).compose(w), u.compose(&v.compose(w)), "SFC3");
    let fh = ServiceFamily::singleton("f", s.clone()).unwrap();
    let fh2 = ServiceFamily::singleton("f", s2.clone()).unwrap();
    prop_assert_eq!(fh.compose(&fh2), ServiceFamily::singleton("f", Service::Empty).unwrap(), "SFC4");
    let big_f = set(foci);
    prop_assert_eq!(e.encapsulate(&big_f), e.clone(), "SFE1");
    if big_f.contains("f") {
        prop_assert_eq!(fh.encapsulate(&big_f), e.clone(), "SFE2");
    } else {
        prop_assert_eq!(fh.encapsulate(&big_f), fh.clone(), "SFE3");
    }
    prop_assert_eq!(u.compose(v).encapsulate(&big_f), u.encapsulate(&big_f).compose(&v.encapsulate(&big_f)), "SFE4");
    Ok(())
}

// ---- apply / reply ----

fn definite() -> ExecMode {
    ExecMode::new(None, true).unwrap()
}

fn same_result(a: &ExecOutcome, b: &ExecOutcome) -> Check {
    prop_assert_eq!(a.status, b.status);
    prop_assert_eq!(a.reply, b.reply);
    prop_assert_eq!(&a.family, &b.family);
    Ok(())
}

/// A1-A8 and R1-R8, instantiated against `run`. `u` must hold finite
/// services only so that every run has a definite outcome.
pub fn apply_reply_axioms(x: &LinearSpec, y: &LinearSpec, u: &ServiceFamily, h: &Service, m: &str) -> Check {
    let mode = definite();
    let go = |t: &LinearSpec, u: &ServiceFamily| run(t, u, &mode);

    let r = go(&LinearSpec::constant(ThreadEntry::TermP), u);
    prop_assert_eq!(&r.family, u, "A1");
    prop_assert_eq!(r.reply, Reply::T, "R1");
    let r = go(&LinearSpec::constant(ThreadEntry::TermN), u);
    prop_assert_eq!(&r.family, u, "A2");
    prop_assert_eq!(r.reply, Reply::F, "R2");
    let r = go(&LinearSpec::constant(ThreadEntry::Deadlock), u);
    prop_assert!(r.family.is_empty(), "A3");
    prop_assert_eq!(r.reply, Reply::D, "R3");

    // A4, R4: tau x
    same_result(&go(&post_spec(Action::Tau, x, x), u), &go(x, u))?;

    let fm = Action::Basic(basic("f", m));
    let t = post_spec(fm, x, y);
    let rest = u.encapsulate(&set(&["f"]));
    let r = go(&t, &rest);
    prop_assert!(r.family.is_empty(), "A5");
    prop_assert_eq!(r.reply, Reply::D, "R5");

    let with_f = ServiceFamily::singleton("f", h.clone()).unwrap().compose(&rest);
    let (reply, h2) = service_step(h, m);
    let after = ServiceFamily::singleton("f", h2).unwrap().compose(&rest);
    let r = go(&t, &with_f);
    match reply {
        Reply::T => same_result(&r, &go(x, &after))?,
        Reply::F => same_result(&r, &go(y, &after))?,
        Reply::D => {
            prop_assert!(r.family.is_empty(), "A8");
            prop_assert_eq!(r.reply, Reply::D, "R8");
        }
    }
    Ok(())
}

/// A completed run is unchanged by a larger budget or by switching cycle
/// detection off.
pub fn budget_monotone(t: &LinearSpec, u: &ServiceFamily, b1: u64, extra: u64) -> Check {
    let small = run(t, u, &ExecMode::new(Some(b1), true).unwrap());
    if small.status == ExecStatus::Completed {
        let big = run(t, u, &ExecMode::new(Some(b1 + extra), false).unwrap());
        same_result(&small, &big)?;
        prop_assert_eq!(small.steps, big.steps);
    }
    Ok(())
}

/// A completed run of `t` in `s` steps is reproduced by `π_n(t)` for
/// `n > s`, and `π_n(t)` never completes differently.
pub fn projection_compatible(t: &LinearSpec, u: &ServiceFamily, n: usize) -> Check {
    let mode = definite();
    let full = run(t, u, &mode);
    let cut = run(&project(t, n).to_spec(), u, &mode);
    if cut.status == ExecStatus::Completed {
        same_result(&cut, &full)?;
    }
    if full.status == ExecStatus::Completed && (full.steps as usize) < n {
        same_result(&cut, &full)?;
    }
    Ok(())
}

pub fn replay_sound(t: &LinearSpec, u: &ServiceFamily) -> Check {
    let out = run(t, u, &definite().with_trace(true));
    if out.status == ExecStatus::Completed {
        prop_assert_eq!(replay(u, &out.trace), out.family.clone());
        prop_assert_eq!(out.trace.len() as u64, out.steps);
    }
    Ok(())
}

// ---- finite units ----

pub fn theorem1(m1: u16, m2: u16, m3: u16) -> Check {
    let (h1, h2, h3) = (unit_from_mask(m1), unit_from_mask(m2), unit_from_mask(m3));
    let leq = |a: &FunctionalUnit, b: &FunctionalUnit| leq_by_closure(a, b).unwrap();
    let equiv = |a: &FunctionalUnit, b: &FunctionalUnit| leq(a, b) && leq(b, a);
    prop_assert!(leq(&h1, &h1), "reflexive");
    if leq(&h1, &h2) && leq(&h2, &h3) {
        prop_assert!(leq(&h1, &h3), "transitive");
    }
    prop_assert!(equiv(&h1, &h1));
    prop_assert_eq!(equiv(&h1, &h2), equiv(&h2, &h1));
    if equiv(&h1, &h2) && equiv(&h2, &h3) {
        prop_assert!(equiv(&h1, &h3));
    }

    let c1 = derived_closure(&tables_from_mask(m1), 2);
    prop_assert_eq!(derived_closure(&c1.members(), 2), c1.clone(), "idempotence");
    let c12 = derived_closure(&tables_from_mask(m1 | m2), 2);
    prop_assert!(c1.is_subset(&c12), "monotonicity");
    prop_assert!(c1.contains(&[(true, 0), (true, 1)]));
    prop_assert!(c1.contains(&[(false, 0), (false, 1)]));
    for t in tables_from_mask(m1) {
        prop_assert!(c1.contains(&t));
    }
    Ok(())
}

/// A chain `h1 ≤ h2 ≤ h3` built from closures, so transitivity is
/// exercised on non-vacuous premises.
pub fn theorem1_chain(m3: u16, pick2: u16, pick1: u16) -> Check {
    let t3 = tables_from_mask(m3);
    let c3 = derived_closure(&t3, 2).members();
    let t2: Vec<MoTable> =
        c3.iter().enumerate().filter(|(i, _)| pick2 & (1 << i) != 0).map(|(_, t)| t.clone()).collect();
    let c2 = derived_closure(&t2, 2).members();
    let t1: Vec<MoTable> =
        c2.iter().enumerate().filter(|(i, _)| pick1 & (1 << i) != 0).map(|(_, t)| t.clone()).collect();
    let unit = |t: &[MoTable]| isfu_core::finfu::table_unit(2, t).unwrap();
    let (h1, h2, h3) = (unit(&t1), unit(&t2), unit(&t3));
    prop_assert!(leq_by_closure(&h1, &h2).unwrap());
    prop_assert!(leq_by_closure(&h2, &h3).unwrap());
    prop_assert!(leq_by_closure(&h1, &h3).unwrap());
    Ok(())
}

pub fn degree_order_invariant(order: &[u32]) -> Check {
    let base: Vec<u32> = (0..16).collect();
    let a = count_degrees_ordered(2, &DegreeLimits::default(), &base);
    let b = count_degrees_ordered(2, &DegreeLimits::default(), order);
    prop_assert_eq!(b.count, 12);
    let sets =
        |d: &isfu_core::finfu::DegreeCount| d.degrees.iter().map(|d| d.closed.fingerprint()).collect::<BTreeSet<_>>();
    prop_assert_eq!(sets(&a), sets(&b));
    Ok(())
}

/// `|x|_{H'}` equals `|inline(x)|_H` where `H'` implements each method
/// by a program over `H`. Implementations must be total.
pub fn inline_sound(
    h: &FunctionalUnit,
    impls: &BTreeMap<String, InstructionSequence>,
    x: &InstructionSequence,
) -> Check {
    let mode = definite();
    let k = match h.space() {
        isfu_core::StateSpace::Finite(k) => k,
        _ => unreachable!(),
    };
    let mut ops = Vec::new();
    for (m, p) in impls {
        match derived_op(p, h, "f", &mode).unwrap().tabulate() {
            Some(Tabulation::Total(rows)) => ops.push((m.clone(), isfu_core::MethodOperation::table(rows))),
            other => return Err(TestCaseError::reject(format!("implementation of {m} not total: {other:?}"))),
        }
    }
    let h2 = FunctionalUnit::new(isfu_core::StateSpace::Finite(k), ops).unwrap();
    let composed = inline_compose(x, impls).unwrap();
    let outer = derived_op(x, &h2, "f", &mode).unwrap();
    let inner = derived_op(&composed, h, "f", &mode).unwrap();
    for s in 0..k {
        let s = Natural::from(s);
        prop_assert_eq!(outer.eval(&s), inner.eval(&s), "x = {}, composed = {}", x, composed);
    }
    Ok(())
}

// ---- naturals ----

/// The prime-divisor reading of G2 on `x = 2^a 3^b c`.
pub fn g2_discipline(a: u32, b: u32, c: u32) -> Check {
    let two = Natural::from(2u32);
    let three = Natural::from(3u32);
    let x = two.pow(a) * three.pow(b) * Natural::from(c);
    let got = NatOp::G2.apply(&x);
    let expected = if c != 1 {
        (false, Natural::zero())
    } else if b < 19 {
        (true, &x * 3u32)
    } else if b == 19 {
        (true, two.pow(a))
    } else {
        (false, Natural::zero())
    };
    prop_assert_eq!(got, expected, "a={} b={} c={}", a, b, c);
    Ok(())
}

/// The translation agrees with the register machine, and its trace keeps
/// the state equal to the prime encoding of the registers.
pub fn encoding_sound(p: &RmlProgram, input: u32) -> Check {
    let rm_mode = ExecMode::new(Some(400), true).unwrap();
    let n = Natural::from(input);
    let Ok((outcome, regs)) = rm_run_traced(p, &n, &rm_mode) else {
        return Ok(());
    };
    let x = rmlful(p);
    let univ = Arc::new(univ_unit());
    let mode = ExecMode::new(Some(500), true).unwrap().with_trace(true);
    let out = run(&extract(&x), &unit_family("f", Arc::clone(&univ), n.clone()), &mode);
    match &outcome {
        RmOutcome::Divergent => prop_assert_eq!(out.status, ExecStatus::ProvenDivergent, "{}", x),
        RmOutcome::Halted(b, v) => {
            prop_assert_eq!(out.status, ExecStatus::Completed, "{}", x);
            prop_assert_eq!(out.reply, Reply::from_bool(*b));
            let state = out.family.get("f").and_then(Service::state).cloned().unwrap();
            prop_assert_eq!(&state, v);
            // exp2, one step per register instruction, iszero1, fact5
            prop_assert_eq!(out.trace.len(), regs.len() + 3);
            prop_assert_eq!(out.trace[0].state.clone().unwrap(), isfu_core::natfu::pow2(&n));
            for (step, r) in out.trace[1..].iter().zip(&regs) {
                prop_assert_eq!(step.state.clone().unwrap(), encode_registers(r));
            }
        }
    }
    let d = derived_op(&x, &univ, "f", &ExecMode::new(Some(500), true).unwrap()).unwrap().eval(&n);
    let expected = match outcome {
        RmOutcome::Halted(b, v) => DerivedValue::Defined(b, v),
        RmOutcome::Divergent => DerivedValue::Undefined,
    };
    prop_assert_eq!(d, expected);
    Ok(())
}

pub fn one() -> Natural {
    Natural::one()
}
