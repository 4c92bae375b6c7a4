//! Type propagation over straight-line bytecode.
//!
//! A single forward scan simulates the operand stack over type tags. A
//! window opens at a load, collects type constraints from first-level
//! specialized operations, pushes them back to the loads that produced the
//! operands, and closes at a store, return or conditional jump. Windows that
//! hit anything with side effects or control flow are abandoned.

use std::fmt::Write as _;

use thiserror::Error;

use crate::bytecode::{root, specialize2, CodeObject, Constant, Instruction, Opcode};
use crate::values::{IntVal, TypeTag};

/// An optimizable region `[start_pc, end_pc]` with its type assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceInfo {
    pub start_pc: usize,
    /// Inclusive; the terminator.
    pub end_pc: usize,
    /// Specialization type of each pc, indexed from `start_pc`.
    pub pc_types: Vec<TypeTag>,
    /// Abstract stack (bottom first, relative to entry) before each pc.
    pub stack_types: Vec<Vec<TypeTag>>,
    /// Opcodes at analysis time; restored on deoptimization.
    pub parent_ops: Vec<Opcode>,
    /// Upper bound on the words the sequence holds on the operand stack.
    pub max_words: usize,
}

impl SequenceInfo {
    pub fn len(&self) -> usize {
        self.end_pc - self.start_pc + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, pc: usize) -> bool {
        (self.start_pc..=self.end_pc).contains(&pc)
    }

    pub fn type_at(&self, pc: usize) -> TypeTag {
        self.pc_types[pc - self.start_pc]
    }

    /// Stack width in words on entry to `pc`, relative to sequence entry.
    pub fn words_before(&self, pc: usize) -> usize {
        self.stack_types[pc - self.start_pc].iter().map(|t| t.word_width()).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Error)]
#[error("type conflict: {found} where {expected} is required")]
pub struct Conflict {
    pub expected: TypeTag,
    pub found: TypeTag,
}

/// Narrow an abstract slot to `expected`.
pub fn constrain(slot: TypeTag, expected: TypeTag) -> Result<TypeTag, Conflict> {
    match slot {
        TypeTag::Unknown => Ok(expected),
        t if t == expected => Ok(t),
        found => Err(Conflict { expected, found }),
    }
}

/// Effect of one instruction on an abstract stack (top is the last
/// element). Loads push the type their opcode is specialized for, or
/// Unknown.
pub fn transition(ins: Instruction, stack: &[TypeTag]) -> Result<Vec<TypeTag>, Conflict> {
    let op = ins.op;
    let mut s = stack.to_vec();
    let pop = |s: &mut Vec<TypeTag>| s.pop().unwrap_or(TypeTag::Unknown);
    let feedback = op.specialization_type();
    match root(op) {
        Opcode::LoadConst | Opcode::LoadFast | Opcode::LoadGlobal => {
            s.push(feedback.unwrap_or(TypeTag::Unknown))
        }
        Opcode::StoreFast | Opcode::PopTop | Opcode::ReturnValue => {
            let v = pop(&mut s);
            if let Some(t) = feedback {
                constrain(v, t)?;
            }
        }
        Opcode::PopJumpIfFalse | Opcode::PopJumpIfTrue => {
            let v = pop(&mut s);
            if op.tier() == 2 {
                constrain(v, TypeTag::Bool)?;
            }
        }
        Opcode::UnaryNegative => {
            let v = pop(&mut s);
            s.push(match feedback {
                Some(t) => constrain(v, t)?,
                None => TypeTag::Unknown,
            });
        }
        Opcode::JumpAbsolute => {}
        Opcode::CallFunction => {
            for _ in 0..=ins.arg {
                pop(&mut s);
            }
            s.push(TypeTag::Unknown);
        }
        _ => {
            let b = pop(&mut s);
            let a = pop(&mut s);
            match feedback {
                Some(t) => {
                    constrain(a, t)?;
                    constrain(b, t)?;
                    s.push(op.result_type().expect("specialized binary op has a result type"));
                }
                None => s.push(TypeTag::Unknown),
            }
        }
    }
    Ok(s)
}

/// Analysis knobs.
#[derive(Clone, Copy, Debug)]
pub struct Options {
    /// Start pcs deoptimized this many times are never reopened.
    pub max_deopts: u32,
}

impl Default for Options {
    fn default() -> Options {
        Options { max_deopts: 2 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Analysis {
    pub sequences: Vec<SequenceInfo>,
    /// Instruction visits, including back-propagation steps.
    pub visits: usize,
}

pub fn propagate(code: &CodeObject) -> Vec<SequenceInfo> {
    analyze(code, Options::default()).sequences
}

#[derive(Clone, Copy, Debug)]
struct Slot {
    tag: TypeTag,
    producer: usize,
}

struct Window {
    start: usize,
    stack: Vec<Slot>,
    /// Per-pc type, indexed from `start`.
    types: Vec<TypeTag>,
    /// Producers on the stack before each pc.
    snapshots: Vec<Vec<usize>>,
    /// Negations forward their type to the producer of their operand.
    links: Vec<Option<usize>>,
}

enum Outcome {
    Continue,
    Close,
    Abort,
}

impl Window {
    fn new(start: usize) -> Window {
        Window { start, stack: Vec::new(), types: Vec::new(), snapshots: Vec::new(), links: Vec::new() }
    }

    fn pop(&mut self) -> Option<Slot> {
        self.stack.pop()
    }

    /// Assign `ty` to the producer chain of a slot that was Unknown.
    fn back_propagate(&mut self, mut pc: usize, ty: TypeTag, visits: &mut usize) {
        loop {
            let i = pc - self.start;
            if self.types[i] != TypeTag::Unknown {
                return;
            }
            self.types[i] = ty;
            *visits += 1;
            match self.links[i] {
                Some(next) => pc = next,
                None => return,
            }
        }
    }

    fn narrow(&mut self, slot: Slot, ty: TypeTag, visits: &mut usize) -> bool {
        let current = self.tag_of(slot);
        match constrain(current, ty) {
            Ok(_) => {
                if current == TypeTag::Unknown {
                    self.back_propagate(slot.producer, ty, visits);
                }
                true
            }
            Err(_) => false,
        }
    }

    /// Current tag of a slot, accounting for later back-propagation.
    fn tag_of(&self, slot: Slot) -> TypeTag {
        if slot.tag != TypeTag::Unknown {
            return slot.tag;
        }
        self.types[slot.producer - self.start]
    }

    fn step(&mut self, code: &CodeObject, pc: usize, visits: &mut usize) -> Outcome {
        let ins = code.instructions[pc];
        let op = ins.op;
        self.snapshots.push(self.stack.iter().map(|s| s.producer).collect());
        self.types.push(TypeTag::Unknown);
        self.links.push(None);
        let i = pc - self.start;
        if op.tier() == 2 {
            return Outcome::Abort;
        }
        match op {
            Opcode::LoadFast => {
                self.stack.push(Slot { tag: TypeTag::Unknown, producer: pc });
                Outcome::Continue
            }
            Opcode::LoadConst => {
                let ty = match &code.constants[ins.arg as usize] {
                    Constant::Int(IntVal::Big(_)) => return Outcome::Abort,
                    c => c.type_tag(),
                };
                if !ty.is_native() {
                    return Outcome::Abort;
                }
                self.types[i] = ty;
                self.stack.push(Slot { tag: ty, producer: pc });
                Outcome::Continue
            }
            Opcode::UnaryNegative => {
                let Some(a) = self.pop() else { return Outcome::Abort };
                match self.tag_of(a) {
                    TypeTag::Unknown => self.links[i] = Some(a.producer),
                    t if t.is_native() => self.types[i] = t,
                    _ => return Outcome::Abort,
                }
                self.stack.push(Slot { tag: self.types[i], producer: pc });
                Outcome::Continue
            }
            Opcode::StoreFast | Opcode::ReturnValue => {
                let Some(v) = self.pop() else { return Outcome::Abort };
                if !self.stack.is_empty() {
                    return Outcome::Abort;
                }
                match self.tag_of(v) {
                    t if t.is_native() => {
                        self.types[i] = t;
                        Outcome::Close
                    }
                    _ => Outcome::Abort,
                }
            }
            Opcode::PopJumpIfFalse | Opcode::PopJumpIfTrue => {
                let Some(v) = self.pop() else { return Outcome::Abort };
                if !self.stack.is_empty() || self.tag_of(v) != TypeTag::Bool {
                    return Outcome::Abort;
                }
                self.types[i] = TypeTag::Bool;
                Outcome::Close
            }
            _ if op.tier() == 1 => {
                let ty = op.specialization_type().expect("tier-1 opcodes are typed");
                if specialize2(op, ty).is_none() {
                    return Outcome::Abort;
                }
                let (Some(b), Some(a)) = (self.pop(), self.pop()) else { return Outcome::Abort };
                if self.tag_of(a) == TypeTag::Bool || self.tag_of(b) == TypeTag::Bool {
                    return Outcome::Abort;
                }
                if !self.narrow(a, ty, visits) || !self.narrow(b, ty, visits) {
                    return Outcome::Abort;
                }
                self.types[i] = ty;
                let result = op.result_type().expect("tier-1 opcodes have result types");
                self.stack.push(Slot { tag: result, producer: pc });
                Outcome::Continue
            }
            // generic operations, calls, globals, unconditional jumps, pops
            _ => Outcome::Abort,
        }
    }

    /// Finish a closed window. Any residue of Unknown drops it.
    fn finish(self, code: &CodeObject, end: usize) -> Option<SequenceInfo> {
        if self.types.contains(&TypeTag::Unknown) {
            return None;
        }
        let start = self.start;
        let parent_ops: Vec<Opcode> = code.instructions[start..=end].iter().map(|i| i.op).collect();
        for (op, &ty) in parent_ops.iter().zip(&self.types) {
            specialize2(*op, ty)?;
        }
        let result_of = |pc: usize| {
            let op = code.instructions[pc].op;
            match op.tier() {
                1 => op.result_type().expect("typed"),
                _ => self.types[pc - start],
            }
        };
        let stack_types: Vec<Vec<TypeTag>> =
            self.snapshots.iter().map(|snap| snap.iter().map(|&p| result_of(p)).collect()).collect();
        // every instruction pushes at most one two-word value
        let max_words = stack_types
            .iter()
            .map(|st| st.iter().map(|t| t.word_width()).sum::<usize>() + 2)
            .max()
            .unwrap_or(2);
        Some(SequenceInfo {
            start_pc: start,
            end_pc: end,
            pc_types: self.types,
            stack_types,
            parent_ops,
            max_words,
        })
    }
}

pub fn analyze(code: &CodeObject, options: Options) -> Analysis {
    let mut out = Analysis::default();
    let mut window: Option<Window> = None;
    for pc in 0..code.instructions.len() {
        if window.as_ref().is_some_and(|w| pc > w.start && code.is_jump_target(pc)) {
            window = None;
        }
        if window.is_none() {
            let op = code.instructions[pc].op;
            let blacklisted = code.deopt_counts.get(&pc).is_some_and(|&n| n >= options.max_deopts);
            if op.is_sequence_start() && !blacklisted {
                window = Some(Window::new(pc));
            } else {
                out.visits += 1;
                continue;
            }
        }
        let w = window.as_mut().expect("window is open");
        out.visits += 1;
        match w.step(code, pc, &mut out.visits) {
            Outcome::Continue => {}
            Outcome::Abort => window = None,
            Outcome::Close => {
                let w = window.take().expect("window is open");
                if let Some(seq) = w.finish(code, pc) {
                    out.sequences.push(seq);
                }
            }
        }
    }
    out
}

/// Stable text listing of identified sequences.
pub fn dump(code: &CodeObject, sequences: &[SequenceInfo]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}: {} sequence(s)", code.name, sequences.len());
    for seq in sequences {
        let _ = writeln!(s, "  sequence {}..{}", seq.start_pc, seq.end_pc);
        for pc in seq.start_pc..=seq.end_pc {
            let i = pc - seq.start_pc;
            let op = seq.parent_ops[i];
            let imm = code.immediate_text(pc).map(|t| format!(" {t}")).unwrap_or_default();
            let stack: Vec<&str> = seq.stack_types[i].iter().map(|t| t.name()).collect();
            let _ = writeln!(
                s,
                "    {pc} {}{imm} : {} [{}]",
                op.name(),
                seq.pc_types[i].name(),
                stack.join(", ")
            );
        }
    }
    s
}
