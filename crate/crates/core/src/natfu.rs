//! Functional units over the natural numbers.
//!
//! Besides the unbounded counter and the `Decr_n` family, this module holds
//! the universal units: [`univ_unit`] simulates a six-register machine by
//! keeping register `i` in the exponent of the `i`-th prime, and
//! [`univ3_unit`] reaches all twenty of its operations through three
//! methods. [`rmlful`] translates register-machine programs to programs
//! over `Univ`, and [`rm_run`] is a direct register-machine interpreter to
//! check the translation against.

use std::collections::HashSet;
use std::sync::Arc;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::exec::ExecMode;
use crate::funit::{FunctionalUnit, MethodOperation, StateSpace};
use crate::isa::{BasicInstruction, Instruction, InstructionSequence};
use crate::Natural;

/// `p_0 .. p_5`.
pub const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

pub const REGISTERS: usize = 6;

/// Closed-form method operations on the naturals.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NatOp {
    Setzero,
    Incr,
    Decr,
    Iszero,
    /// `Decr_n`.
    DecrBy(Natural),
    Exp2,
    Fact5,
    /// `succ_i`, multiply by `p_i`.
    Succ(usize),
    /// `pred_i`, divide by `p_i` when possible.
    Pred(usize),
    /// `iszero_i`, test for `p_i` not dividing the state.
    RegIszero(usize),
    G1,
    G2,
    G3,
}

/// Multiplicity of `p` in `x`. The maximum is unbounded for `x = 0`; we
/// take 0 there.
pub fn multiplicity(x: &Natural, p: u32) -> usize {
    if x.is_zero() {
        return 0;
    }
    let p = Natural::from(p);
    let mut x = x.clone();
    let mut n = 0;
    loop {
        let (q, r) = x.div_rem(&p);
        if !r.is_zero() {
            return n;
        }
        x = q;
        n += 1;
    }
}

/// `2^x`. Panics if `x` does not fit in 32 bits; such a power would not
/// fit in memory anyway.
pub fn pow2(x: &Natural) -> Natural {
    let e = x.to_u32().unwrap_or_else(|| panic!("exponent {x} too large"));
    Natural::one() << e
}

fn three_pow(e: u32) -> Natural {
    Natural::from(3u32).pow(e)
}

/// True for `x = 2^a 3^b`: every prime divisor is 2 or 3.
fn only_twos_and_threes(x: &Natural) -> bool {
    if x.is_zero() {
        return false;
    }
    let mut x = x.clone();
    for p in [2u32, 3] {
        let p = Natural::from(p);
        while (&x % &p).is_zero() {
            x /= &p;
        }
    }
    x.is_one()
}

impl NatOp {
    pub fn apply(&self, x: &Natural) -> (bool, Natural) {
        match self {
            NatOp::Setzero => (true, Natural::zero()),
            NatOp::Incr => (true, x + 1u32),
            NatOp::Decr => {
                if x.is_zero() {
                    (false, Natural::zero())
                } else {
                    (true, x - 1u32)
                }
            }
            NatOp::Iszero => (x.is_zero(), x.clone()),
            NatOp::DecrBy(n) => {
                if x >= n {
                    (true, x - n)
                } else {
                    (false, Natural::zero())
                }
            }
            NatOp::Exp2 => (true, pow2(x)),
            NatOp::Fact5 => (true, Natural::from(multiplicity(x, 5))),
            NatOp::Succ(i) => (true, x * PRIMES[*i]),
            NatOp::Pred(i) => {
                let (q, r) = x.div_rem(&Natural::from(PRIMES[*i]));
                if r.is_zero() {
                    (true, q)
                } else {
                    (false, x.clone())
                }
            }
            NatOp::RegIszero(i) => (!(x % PRIMES[*i]).is_zero(), x.clone()),
            NatOp::G1 => (true, pow2(x)),
            NatOp::G2 => {
                if !only_twos_and_threes(x) || (x % three_pow(20)).is_zero() {
                    (false, Natural::zero())
                } else if (x % three_pow(19)).is_zero() {
                    (true, x / three_pow(19))
                } else {
                    (true, x * 3u32)
                }
            }
            NatOp::G3 => {
                let index = multiplicity(x, 3);
                if index < UNIV_SIZE {
                    univ_op(index).apply(&Natural::from(multiplicity(x, 2)))
                } else {
                    (false, Natural::zero())
                }
            }
        }
    }
}

/// Number of method operations of `Univ`.
pub const UNIV_SIZE: usize = 20;

/// `M_i` in the canonical order: `exp2`, `fact5`, then `succ_r`, `pred_r`,
/// `iszero_r` for each register `r`.
pub fn univ_op(i: usize) -> NatOp {
    match i {
        0 => NatOp::Exp2,
        1 => NatOp::Fact5,
        _ => {
            assert!(i < UNIV_SIZE, "Univ has {UNIV_SIZE} operations");
            let r = (i - 2) / 3;
            match (i - 2) % 3 {
                0 => NatOp::Succ(r),
                1 => NatOp::Pred(r),
                _ => NatOp::RegIszero(r),
            }
        }
    }
}

/// Method name of `M_i`.
pub fn univ_method_name(i: usize) -> String {
    match univ_op(i) {
        NatOp::Exp2 => "exp2".into(),
        NatOp::Fact5 => "fact5".into(),
        NatOp::Succ(r) => format!("succ{r}"),
        NatOp::Pred(r) => format!("pred{r}"),
        NatOp::RegIszero(r) => format!("iszero{r}"),
        _ => unreachable!(),
    }
}

fn nat_unit<N: Into<String>>(ops: impl IntoIterator<Item = (N, NatOp)>) -> FunctionalUnit {
    FunctionalUnit::new(StateSpace::Naturals, ops.into_iter().map(|(n, op)| (n, MethodOperation::builtin(op))))
        .expect("builtin units are well formed")
}

/// The unbounded counter.
pub fn counter_unit() -> FunctionalUnit {
    nat_unit([("setzero", NatOp::Setzero), ("incr", NatOp::Incr), ("decr", NatOp::Decr), ("iszero", NatOp::Iszero)])
}

pub fn decr_n_method(n: u64) -> String {
    format!("decr_{n}")
}

/// `H_n = {decr_n ↦ Decr_n, iszero ↦ Iszero}`.
pub fn decr_n_unit(n: u64) -> FunctionalUnit {
    nat_unit([(decr_n_method(n), NatOp::DecrBy(Natural::from(n))), ("iszero".to_string(), NatOp::Iszero)])
}

/// The 20-method universal unit.
pub fn univ_unit() -> FunctionalUnit {
    nat_unit((0..UNIV_SIZE).map(|i| (univ_method_name(i), univ_op(i))))
}

/// The 3-method universal unit.
pub fn univ3_unit() -> FunctionalUnit {
    nat_unit([("g1", NatOp::G1), ("g2", NatOp::G2), ("g3", NatOp::G3)])
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NatError {
    #[error("Univ has operations 0..=19, got {0}")]
    IndexOutOfRange(usize),
    #[error("`{0}` is not a register instruction")]
    ForeignInstruction(String),
    #[error("test instruction at the last position (it may skip past the end)")]
    TrailingTest,
    #[error("step budget exhausted")]
    BudgetExhausted,
}

fn basic(focus: &str, method: &str) -> BasicInstruction {
    BasicInstruction::new(focus, method).expect("fixed identifiers")
}

/// `f.g1 ; (f.g2)^i ; +f.g3 ; !t ; !f`, which derives `M_i` over `Univ3`.
pub fn univ3_program(i: usize) -> Result<InstructionSequence, NatError> {
    if i >= UNIV_SIZE {
        return Err(NatError::IndexOutOfRange(i));
    }
    let mut x = vec![Instruction::Plain(basic("f", "g1"))];
    x.extend(crate::isa::repeat_instruction(&Instruction::Plain(basic("f", "g2")), i).into_instructions());
    x.extend([Instruction::PosTest(basic("f", "g3")), Instruction::HaltP, Instruction::HaltN]);
    Ok(InstructionSequence::new(x).expect("nonempty"))
}

/// Register-machine operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegOp {
    Incr,
    Decr,
    Iszero,
}

fn register_op(a: &BasicInstruction) -> Option<(usize, RegOp)> {
    let r = a.focus().strip_prefix('r')?;
    if r.len() != 1 {
        return None;
    }
    let r: usize = r.parse().ok().filter(|r| *r < REGISTERS)?;
    let op = match a.method() {
        "incr" => RegOp::Incr,
        "decr" => RegOp::Decr,
        "iszero" => RegOp::Iszero,
        _ => return None,
    };
    Some((r, op))
}

/// A program over the basic instructions `r0..r5 . incr|decr|iszero`.
///
/// A test instruction in the last position is rejected: its skip would
/// leave the program past the normal exit, which the translation cannot
/// distinguish from the exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RmlProgram {
    program: InstructionSequence,
    ops: Vec<Option<(usize, RegOp)>>,
}

impl RmlProgram {
    pub fn new(program: InstructionSequence) -> Result<Self, NatError> {
        let mut ops = Vec::with_capacity(program.len());
        for u in program.iter() {
            match u.basic() {
                Some(a) => ops.push(Some(register_op(a).ok_or_else(|| NatError::ForeignInstruction(a.to_string()))?)),
                None => ops.push(None),
            }
        }
        if matches!(program.instructions().last(), Some(Instruction::PosTest(_) | Instruction::NegTest(_))) {
            return Err(NatError::TrailingTest);
        }
        Ok(RmlProgram { program, ops })
    }

    pub fn parse(text: &str) -> Result<Self, RmlParseError> {
        Ok(RmlProgram::new(crate::isa::parse_program(text)?)?)
    }

    pub fn program(&self) -> &InstructionSequence {
        &self.program
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RmlParseError {
    #[error(transparent)]
    Syntax(#[from] crate::isa::ParseError),
    #[error(transparent)]
    Program(#[from] NatError),
}

pub type Registers = [Natural; REGISTERS];

/// `β(r1)` and `r2` on exit, or provable divergence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RmOutcome {
    Halted(bool, Natural),
    Divergent,
}

/// Next program counter; `Ok(k + 1)` is the normal exit, `Err(())` a
/// deadlock.
fn jump_target(k: usize, pc: usize, u: &Instruction) -> Result<usize, ()> {
    let target = match u {
        Instruction::FwdJump(l) => l.to_usize().and_then(|l| pc.checked_add(l)),
        Instruction::BwdJump(l) => l.to_usize().and_then(|l| pc.checked_sub(l)),
        _ => unreachable!("jumps only"),
    };
    match target {
        Some(t) if t >= 1 && t <= k + 1 && !(matches!(u, Instruction::FwdJump(_)) && t == pc) => Ok(t),
        _ => Err(()),
    }
}

/// Runs a register-machine program directly. Inputs go in `r0`; on exit
/// (control reaching one past the end, or `!t`/`!f`) the result is
/// `(β(r1), r2)` with `β(0) = T`. Every executed instruction counts toward
/// the budget.
pub fn rm_run(p: &RmlProgram, input: &Natural, mode: &ExecMode) -> Result<RmOutcome, NatError> {
    rm_run_traced(p, input, mode).map(|(o, _)| o)
}

/// Like [`rm_run`], also returning the register contents after every
/// executed basic instruction.
pub fn rm_run_traced(
    p: &RmlProgram,
    input: &Natural,
    mode: &ExecMode,
) -> Result<(RmOutcome, Vec<Registers>), NatError> {
    let k = p.program.len();
    let mut regs: Registers = Default::default();
    regs[0] = input.clone();
    let mut pc = 1usize;
    let mut steps = 0u64;
    let mut seen: HashSet<(usize, Registers)> = HashSet::new();
    let mut trace = Vec::new();
    loop {
        if pc == k + 1 {
            return Ok((RmOutcome::Halted(regs[1].is_zero(), regs[2].clone()), trace));
        }
        if mode.budget().is_some_and(|b| steps >= b) {
            return Err(NatError::BudgetExhausted);
        }
        if mode.detect_cycles() && !seen.insert((pc, regs.clone())) {
            return Ok((RmOutcome::Divergent, trace));
        }
        steps += 1;
        let u = &p.program.instructions()[pc - 1];
        pc = match u {
            Instruction::HaltP | Instruction::HaltN => {
                return Ok((RmOutcome::Halted(regs[1].is_zero(), regs[2].clone()), trace));
            }
            Instruction::FwdJump(_) | Instruction::BwdJump(_) => match jump_target(k, pc, u) {
                Ok(t) => t,
                Err(()) => return Ok((RmOutcome::Divergent, trace)),
            },
            _ => {
                let (r, op) = p.ops[pc - 1].expect("validated register instruction");
                let reply = match op {
                    RegOp::Incr => {
                        regs[r] += 1u32;
                        true
                    }
                    RegOp::Decr => {
                        if regs[r].is_zero() {
                            false
                        } else {
                            regs[r] -= 1u32;
                            true
                        }
                    }
                    RegOp::Iszero => regs[r].is_zero(),
                };
                trace.push(regs.clone());
                let next = match u {
                    Instruction::Plain(_) => pc + 1,
                    Instruction::PosTest(_) if reply => pc + 1,
                    Instruction::PosTest(_) => pc + 2,
                    _ if reply => pc + 2,
                    _ => pc + 1,
                };
                if next > k + 1 {
                    return Ok((RmOutcome::Divergent, trace));
                }
                next
            }
        };
    }
}

/// `∏ p_i^{r_i}`.
pub fn encode_registers(regs: &Registers) -> Natural {
    regs.iter().zip(PRIMES).fold(Natural::one(), |acc, (r, p)| {
        let e = r.to_u32().expect("register too large to encode");
        acc * Natural::from(p).pow(e)
    })
}

/// Translates a register-machine program into a program over `Univ`:
///
/// ```text
/// f.exp2 ; φ(u1) ; … ; φ(uk) ; -f.iszero1 ; #3 ; f.fact5 ; !t ; f.fact5 ; !f
/// ```
///
/// `φ` maps `ri.incr`, `ri.decr`, `ri.iszero` to `f.succi`, `f.predi`,
/// `f.iszeroi` keeping test polarity. Jumps that stay within `1..=k+1`
/// are kept; jumps leaving that range become `#0`. `!t`/`!f` at position
/// `i` become `#(k+1-i)`, the jump to the decoding block.
pub fn rmlful(p: &RmlProgram) -> InstructionSequence {
    let k = p.program.len();
    let mut out = vec![Instruction::Plain(basic("f", "exp2"))];
    for (j, u) in p.program.iter().enumerate() {
        let i = j + 1;
        let psi = |a: &BasicInstruction| {
            let (r, op) = register_op(a).expect("validated register instruction");
            let m = match op {
                RegOp::Incr => format!("succ{r}"),
                RegOp::Decr => format!("pred{r}"),
                RegOp::Iszero => format!("iszero{r}"),
            };
            basic("f", &m)
        };
        out.push(match u {
            Instruction::Plain(a) => Instruction::Plain(psi(a)),
            Instruction::PosTest(a) => Instruction::PosTest(psi(a)),
            Instruction::NegTest(a) => Instruction::NegTest(psi(a)),
            Instruction::FwdJump(_) | Instruction::BwdJump(_) => match jump_target(k, i, u) {
                Ok(_) => u.clone(),
                Err(()) => Instruction::fwd(0),
            },
            Instruction::HaltP | Instruction::HaltN => Instruction::fwd(k + 1 - i),
        });
    }
    out.extend([
        Instruction::NegTest(basic("f", "iszero1")),
        Instruction::fwd(3),
        Instruction::Plain(basic("f", "fact5")),
        Instruction::HaltP,
        Instruction::Plain(basic("f", "fact5")),
        Instruction::HaltN,
    ]);
    InstructionSequence::new(out).expect("nonempty")
}

/// Shared handle to `Univ`, handy for building many services.
pub fn univ_arc() -> Arc<FunctionalUnit> {
    Arc::new(univ_unit())
}
