//! A bytecode virtual machine for a small dynamically typed language with
//! multi-level quickening: generic instructions are rewritten to
//! type-specialized boxed derivatives from run-time type feedback, and
//! straight-line sequences are then rewritten to derivatives that operate
//! on unboxed machine words, with guards and rollback deoptimization.

pub mod absint;
pub mod bytecode;
pub mod frontend;
pub mod harness;
pub mod interp;
pub mod quicken2;
pub mod values;
