//! Instruction-sequence semantics and functional units.
//!
//! The crate is layered bottom-up:
//!
//! * [`isa`]: instruction sequences with Boolean termination, their text
//!   syntax, and the positive-test normal form.
//! * [`threads`]: regular threads as linear recursive specifications, thread
//!   extraction, projections, bisimulation and a compiler back to
//!   instruction sequences.
//! * [`services`]: services, service families, composition and
//!   encapsulation.
//! * [`exec`]: the apply/reply semantics of a thread running against a
//!   service family.
//! * [`funit`]: functional units, derived method operations and the
//!   `≤` relation.
//! * [`natfu`]: concrete units over the naturals (counter, the universal
//!   units) and the register-machine translation.
//! * [`finfu`]: exhaustive computations over finite state spaces.

pub mod exec;
pub mod finfu;
pub mod funit;
pub mod isa;
pub mod natfu;
pub mod services;
pub mod threads;

/// Arbitrary-precision natural number used for states and jump counters.
pub type Natural = num_bigint::BigUint;

pub use exec::{run, ExecMode, ExecOutcome, ExecStatus};
pub use funit::{FunctionalUnit, MethodOperation, StateSpace};
pub use isa::{BasicInstruction, Instruction, InstructionSequence};
pub use services::{Reply, Service, ServiceFamily};
pub use threads::{extract, LinearSpec, ThreadEntry};
