//! Second-level quickening and rollback deoptimization.

use thiserror::Error;

use crate::absint::{self, Options, SequenceInfo};
use crate::bytecode::{root, specialize2, CodeObject, Opcode, RewriteError};
use crate::values::{RuntimeCounters, TypeTag};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeoptReason {
    /// A tier-2 load found a value of a different type (`pc` is the load).
    GuardFail { pc: usize },
    /// Tier-2 integer arithmetic left the signed 64-bit range.
    IntOverflow,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum QuickenError {
    #[error("stale sequence at {start}..{end}: instruction {pc} changed since analysis")]
    StaleSequence { start: usize, end: usize, pc: usize },
    #[error("sequence {start}..{end} has a side effect or branch at {pc}")]
    ImpureSequence { start: usize, end: usize, pc: usize },
    #[error("no unboxed derivative of {op} for {ty} at {pc}")]
    NoDerivative { pc: usize, op: &'static str, ty: TypeTag },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

fn is_pure_interior(op: Opcode) -> bool {
    !matches!(
        root(op),
        Opcode::StoreFast
            | Opcode::ReturnValue
            | Opcode::CallFunction
            | Opcode::LoadGlobal
            | Opcode::PopTop
            | Opcode::PopJumpIfFalse
            | Opcode::PopJumpIfTrue
            | Opcode::JumpAbsolute
    )
}

/// Rewrite every pc of `seq` to its unboxed derivative and register it.
pub fn rewrite_sequence(
    code: &mut CodeObject,
    seq: SequenceInfo,
    counters: &mut RuntimeCounters,
) -> Result<(), QuickenError> {
    let (start, end) = (seq.start_pc, seq.end_pc);
    let mut targets = Vec::with_capacity(seq.len());
    for pc in start..=end {
        let current = code.instructions.get(pc).ok_or(RewriteError::OutOfBounds(pc))?.op;
        if current != seq.parent_ops[pc - start] {
            return Err(QuickenError::StaleSequence { start, end, pc });
        }
        if pc != end && !is_pure_interior(current) {
            return Err(QuickenError::ImpureSequence { start, end, pc });
        }
        let ty = seq.type_at(pc);
        let d = specialize2(current, ty).ok_or(QuickenError::NoDerivative { pc, op: current.name(), ty })?;
        targets.push(d);
    }
    for (pc, d) in (start..=end).zip(targets) {
        code.quicken(pc, d, counters)?;
    }
    code.register_sequence(seq);
    Ok(())
}

/// Whether a window does any work between its loads and its terminator.
/// Windows of bare loads would only trade a shared box for a fresh one.
fn computes(code: &CodeObject, seq: &SequenceInfo) -> bool {
    code.instructions[seq.start_pc..seq.end_pc]
        .iter()
        .any(|ins| !matches!(root(ins.op), Opcode::LoadFast | Opcode::LoadConst))
}

/// Analyze `code` and rewrite every identified sequence that computes
/// something. Returns the number of sequences rewritten.
pub fn mlq_pass(
    code: &mut CodeObject,
    counters: &mut RuntimeCounters,
    options: Options,
) -> Result<usize, QuickenError> {
    let found: Vec<SequenceInfo> =
        absint::analyze(code, options).sequences.into_iter().filter(|s| computes(code, s)).collect();
    let n = found.len();
    for seq in found {
        rewrite_sequence(code, seq, counters)?;
    }
    code.needs_reanalysis = false;
    Ok(n)
}

/// Undo the sequence at `index`: restore the pre-rewrite opcodes, generalize
/// further according to `reason`, and unregister it. Returns the start pc,
/// where execution resumes with boxed semantics.
pub fn rollback(
    code: &mut CodeObject,
    index: usize,
    reason: DeoptReason,
    counters: &mut RuntimeCounters,
    options: Options,
) -> Result<usize, QuickenError> {
    let seq = code.remove_sequence(index);
    for (i, &parent) in seq.parent_ops.iter().enumerate() {
        let pc = seq.start_pc + i;
        let target = match reason {
            DeoptReason::GuardFail { pc: failed } if failed == pc => root(parent),
            DeoptReason::IntOverflow if parent.specialization_type() == Some(TypeTag::Int) => root(parent),
            _ => parent,
        };
        code.generalize_to(pc, target)?;
    }
    let attempts = code.deopt_counts.entry(seq.start_pc).or_insert(0);
    *attempts += 1;
    if *attempts < options.max_deopts {
        code.needs_reanalysis = true;
    }
    counters.deopt_events += 1;
    if matches!(reason, DeoptReason::GuardFail { .. }) {
        counters.guard_misses += 1;
    }
    Ok(seq.start_pc)
}
