//! Instruction sequences with Boolean termination.
//!
//! Text syntax, one instruction per `;`-separated token:
//!
//! ```text
//! program   := instr (';' instr)*
//! instr     := basic | '+' basic | '-' basic | '#' nat | '\' nat | '!t' | '!f'
//! basic     := ident '.' ident
//! ident     := [a-z][a-z0-9_]*
//! nat       := '0' | [1-9][0-9]*
//! ```

use std::fmt;
use std::str::FromStr;

use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::Natural;

/// Returns true if `s` matches `[a-z][a-z0-9_]*`.
pub fn is_ident(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_lowercase() => {}
        _ => return false,
    }
    bytes.all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsaError {
    #[error("`{0}` is not a valid identifier")]
    InvalidIdent(String),
    #[error("an instruction sequence must contain at least one instruction")]
    EmptySequence,
}

/// A basic instruction `focus.method`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasicInstruction {
    focus: String,
    method: String,
}

impl BasicInstruction {
    pub fn new(focus: impl Into<String>, method: impl Into<String>) -> Result<Self, IsaError> {
        let focus = focus.into();
        let method = method.into();
        for part in [&focus, &method] {
            if !is_ident(part) {
                return Err(IsaError::InvalidIdent(part.clone()));
            }
        }
        Ok(BasicInstruction { focus, method })
    }

    pub fn focus(&self) -> &str {
        &self.focus
    }

    pub fn method(&self) -> &str {
        &self.method
    }
}

impl fmt::Display for BasicInstruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.focus, self.method)
    }
}

/// A primitive instruction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Instruction {
    Plain(BasicInstruction),
    PosTest(BasicInstruction),
    NegTest(BasicInstruction),
    FwdJump(Natural),
    BwdJump(Natural),
    HaltP,
    HaltN,
}

impl Instruction {
    pub fn fwd(l: usize) -> Self {
        Instruction::FwdJump(Natural::from(l))
    }

    pub fn bwd(l: usize) -> Self {
        Instruction::BwdJump(Natural::from(l))
    }

    /// The basic instruction carried by a plain or test instruction.
    pub fn basic(&self) -> Option<&BasicInstruction> {
        match self {
            Instruction::Plain(a) | Instruction::PosTest(a) | Instruction::NegTest(a) => Some(a),
            _ => None,
        }
    }

    pub fn is_jump(&self) -> bool {
        matches!(self, Instruction::FwdJump(_) | Instruction::BwdJump(_))
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Plain(a) => write!(f, "{a}"),
            Instruction::PosTest(a) => write!(f, "+{a}"),
            Instruction::NegTest(a) => write!(f, "-{a}"),
            Instruction::FwdJump(l) => write!(f, "#{l}"),
            Instruction::BwdJump(l) => write!(f, "\\{l}"),
            Instruction::HaltP => f.write_str("!t"),
            Instruction::HaltN => f.write_str("!f"),
        }
    }
}

/// Where control goes after leaving an instruction, in 1-based positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    /// A position in `1..=len`.
    At(usize),
    /// Before the first instruction (deadlock).
    Before,
    /// Past the last instruction (deadlock).
    Past,
}

/// A nonempty finite sequence of primitive instructions.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InstructionSequence {
    instructions: Vec<Instruction>,
}

impl InstructionSequence {
    pub fn new(instructions: Vec<Instruction>) -> Result<Self, IsaError> {
        if instructions.is_empty() {
            return Err(IsaError::EmptySequence);
        }
        Ok(InstructionSequence { instructions })
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn into_instructions(self) -> Vec<Instruction> {
        self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Instruction at 1-based position `i`.
    pub fn get(&self, i: usize) -> Option<&Instruction> {
        i.checked_sub(1).and_then(|j| self.instructions.get(j))
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instruction> {
        self.instructions.iter()
    }

    /// Concatenation `self ; other`.
    pub fn concat(&self, other: &InstructionSequence) -> InstructionSequence {
        let mut instructions = self.instructions.clone();
        instructions.extend(other.instructions.iter().cloned());
        InstructionSequence { instructions }
    }

    pub fn basic_instructions(&self) -> impl Iterator<Item = &BasicInstruction> {
        self.instructions.iter().filter_map(Instruction::basic)
    }

    /// Position reached by moving `l` forward from `i`.
    pub fn forward(&self, i: usize, l: &Natural) -> Target {
        match l.to_usize().and_then(|l| i.checked_add(l)) {
            Some(j) if (1..=self.len()).contains(&j) => Target::At(j),
            Some(0) => Target::Before,
            _ => Target::Past,
        }
    }

    /// Position reached by moving `l` backward from `i` (monus).
    pub fn backward(&self, i: usize, l: &Natural) -> Target {
        match l.to_usize() {
            Some(l) if l < i => {
                let j = i - l;
                if j <= self.len() {
                    Target::At(j)
                } else {
                    Target::Past
                }
            }
            _ => Target::Before,
        }
    }

    /// True for sequences of the form `u1 ; … ; uk ; !t ; !f` where every
    /// `ui` is a positive test or a jump.
    pub fn is_normal_form(&self) -> bool {
        let n = self.len();
        if n < 2 {
            return false;
        }
        self.instructions[n - 2] == Instruction::HaltP
            && self.instructions[n - 1] == Instruction::HaltN
            && self.instructions[..n - 2].iter().all(|u| matches!(u, Instruction::PosTest(_)) || u.is_jump())
    }
}

impl<'a> IntoIterator for &'a InstructionSequence {
    type Item = &'a Instruction;
    type IntoIter = std::slice::Iter<'a, Instruction>;

    fn into_iter(self) -> Self::IntoIter {
        self.instructions.iter()
    }
}

impl fmt::Display for InstructionSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, u) in self.instructions.iter().enumerate() {
            if i > 0 {
                f.write_str(" ; ")?;
            }
            write!(f, "{u}")?;
        }
        Ok(())
    }
}

/// Syntax error in program text; `position` is a byte offset.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty program")]
    Empty,
    #[error("syntax error at byte {position}: {message}")]
    Syntax { position: usize, message: String },
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax { position: self.pos, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        let start = self.pos;
        match self.peek() {
            Some(b) if b.is_ascii_lowercase() => self.pos += 1,
            _ => return self.err("expected identifier"),
        }
        while let Some(b) = self.peek() {
            if b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
    }

    fn basic(&mut self) -> Result<BasicInstruction, ParseError> {
        let focus = self.ident()?;
        if self.peek() != Some(b'.') {
            return self.err("expected `.` after focus");
        }
        self.pos += 1;
        let method = self.ident()?;
        Ok(BasicInstruction { focus, method })
    }

    fn nat(&mut self) -> Result<Natural, ParseError> {
        let start = self.pos;
        while matches!(self.peek(), Some(b) if b.is_ascii_digit()) {
            self.pos += 1;
        }
        let digits = &self.src[start..self.pos];
        if digits.is_empty() {
            return self.err("expected natural number");
        }
        if digits.len() > 1 && digits[0] == b'0' {
            self.pos = start;
            return self.err("leading zero in natural number");
        }
        Ok(Natural::parse_bytes(digits, 10).expect("digits only"))
    }

    fn instr(&mut self) -> Result<Instruction, ParseError> {
        match self.peek() {
            Some(b'+') => {
                self.pos += 1;
                self.skip_ws();
                Ok(Instruction::PosTest(self.basic()?))
            }
            Some(b'-') => {
                self.pos += 1;
                self.skip_ws();
                Ok(Instruction::NegTest(self.basic()?))
            }
            Some(b'#') => {
                self.pos += 1;
                self.skip_ws();
                Ok(Instruction::FwdJump(self.nat()?))
            }
            Some(b'\\') => {
                self.pos += 1;
                self.skip_ws();
                Ok(Instruction::BwdJump(self.nat()?))
            }
            Some(b'!') => {
                self.pos += 1;
                match self.peek() {
                    Some(b't') => {
                        self.pos += 1;
                        Ok(Instruction::HaltP)
                    }
                    Some(b'f') => {
                        self.pos += 1;
                        Ok(Instruction::HaltN)
                    }
                    _ => self.err("expected `t` or `f` after `!`"),
                }
            }
            Some(b) if b.is_ascii_lowercase() => Ok(Instruction::Plain(self.basic()?)),
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }
}

/// Parses program text.
pub fn parse_program(text: &str) -> Result<InstructionSequence, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    p.skip_ws();
    if p.peek().is_none() {
        return Err(ParseError::Empty);
    }
    let mut instructions = Vec::new();
    loop {
        p.skip_ws();
        instructions.push(p.instr()?);
        p.skip_ws();
        match p.peek() {
            None => break,
            Some(b';') => p.pos += 1,
            Some(_) => return p.err("expected `;` or end of input"),
        }
    }
    Ok(InstructionSequence { instructions })
}

impl FromStr for InstructionSequence {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_program(s)
    }
}

pub fn render_program(x: &InstructionSequence) -> String {
    x.to_string()
}

/// `u^n` with `u^0 = #1`, `u^1 = u` and `u^(n+2) = u ; u^(n+1)`.
pub fn repeat_instruction(u: &Instruction, n: usize) -> InstructionSequence {
    let instructions = if n == 0 { vec![Instruction::fwd(1)] } else { vec![u.clone(); n] };
    InstructionSequence { instructions }
}

/// Rewrites `x` into the form `u1 ; … ; uk ; !t ; !f` with every `ui` a
/// positive test or a jump, preserving the extracted thread up to
/// bisimilarity.
///
/// Each source instruction becomes a small block:
///
/// * `a` becomes `+a ; #1` (or `+a ; #1 ; <jump to deadlock>` when it is the
///   last instruction, since falling through would otherwise reach the tail);
/// * `+a` becomes `+a ; <jump to i+1> ; <jump to i+2>`, `-a` the same with
///   the two jumps swapped;
/// * jumps become a single jump to the block of their old target;
/// * `!t` and `!f` become jumps to the trailing `!t` and `!f`.
///
/// Targets outside the source sequence map to targets outside the result,
/// so deadlocks stay deadlocks.
pub fn normalize(x: &InstructionSequence) -> InstructionSequence {
    let k = x.len();
    let block_len = |i: usize, u: &Instruction| match u {
        Instruction::Plain(_) if i < k => 2,
        Instruction::Plain(_) | Instruction::PosTest(_) | Instruction::NegTest(_) => 3,
        _ => 1,
    };
    // start[i] is the first new position of the block for source position i.
    let mut start = vec![0usize; k + 2];
    let mut next = 1;
    for (j, u) in x.iter().enumerate() {
        start[j + 1] = next;
        next += block_len(j + 1, u);
    }
    let body_len = next - 1;
    let halt_p = body_len + 1;
    let halt_n = body_len + 2;
    let past = body_len + 3;

    let place = |t: Target| -> usize {
        match t {
            Target::At(j) => start[j],
            Target::Before => 0,
            Target::Past => past,
        }
    };
    let jump = |from: usize, to: usize| -> Instruction {
        if to >= from {
            Instruction::fwd(to - from)
        } else {
            Instruction::bwd(from - to)
        }
    };
    let rel = |i: usize, d: usize| -> Target {
        if i + d <= k {
            Target::At(i + d)
        } else {
            Target::Past
        }
    };

    let mut out = Vec::with_capacity(halt_n);
    for (j, u) in x.iter().enumerate() {
        let i = j + 1;
        let p = start[i];
        match u {
            Instruction::Plain(a) => {
                out.push(Instruction::PosTest(a.clone()));
                out.push(Instruction::fwd(1));
                if i == k {
                    out.push(jump(p + 2, past));
                }
            }
            Instruction::PosTest(a) => {
                out.push(Instruction::PosTest(a.clone()));
                out.push(jump(p + 1, place(rel(i, 1))));
                out.push(jump(p + 2, place(rel(i, 2))));
            }
            Instruction::NegTest(a) => {
                out.push(Instruction::PosTest(a.clone()));
                out.push(jump(p + 1, place(rel(i, 2))));
                out.push(jump(p + 2, place(rel(i, 1))));
            }
            Instruction::FwdJump(l) => out.push(jump(p, place(x.forward(i, l)))),
            Instruction::BwdJump(l) => {
                if l.is_zero() {
                    out.push(Instruction::bwd(0));
                } else {
                    out.push(jump(p, place(x.backward(i, l))));
                }
            }
            Instruction::HaltP => out.push(jump(p, halt_p)),
            Instruction::HaltN => out.push(jump(p, halt_n)),
        }
    }
    out.push(Instruction::HaltP);
    out.push(Instruction::HaltN);
    InstructionSequence { instructions: out }
}
