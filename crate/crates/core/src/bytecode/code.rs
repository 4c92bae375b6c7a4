use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::opcode::{is_ancestor, Immediate, Instruction, Opcode};
use crate::absint::SequenceInfo;
use crate::values::{Complex, Handle, IntVal, RuntimeCounters, TypeTag, Word};

const NO_SEQUENCE: u32 = u32::MAX;

/// A literal in a code object's constant pool.
#[derive(Clone, Debug, PartialEq)]
pub enum Constant {
    Int(IntVal),
    Float(f64),
    Complex(Complex),
    Str(String),
    Bool(bool),
    None,
}

impl Constant {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            Constant::Int(_) => TypeTag::Int,
            Constant::Float(_) => TypeTag::Float,
            Constant::Complex(_) => TypeTag::Complex,
            Constant::Str(_) => TypeTag::Str,
            Constant::Bool(_) => TypeTag::Bool,
            Constant::None => TypeTag::None,
        }
    }

    /// Machine words for constants that can be pushed unboxed.
    pub fn native_words(&self) -> Option<[Word; 2]> {
        match self {
            Constant::Int(IntVal::Small(v)) => Some([Word(*v as u64), Word(0)]),
            Constant::Float(v) => Some([Word(v.to_bits()), Word(0)]),
            Constant::Complex(c) => Some([Word(c.re.to_bits()), Word(c.im.to_bits())]),
            _ => None,
        }
    }

    /// Identity used for pool deduplication: floats by bit pattern.
    pub fn same(&self, other: &Constant) -> bool {
        match (self, other) {
            (Constant::Float(a), Constant::Float(b)) => a.to_bits() == b.to_bits(),
            (Constant::Complex(a), Constant::Complex(b)) => {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            }
            _ => self == other,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(v) => write!(f, "{v}"),
            Constant::Float(v) => f.write_str(&crate::values::numeric::format_float(*v)),
            Constant::Complex(c) => f.write_str(&crate::values::numeric::format_complex(*c)),
            Constant::Str(s) => write!(f, "{s:?}"),
            Constant::Bool(b) => write!(f, "{b}"),
            Constant::None => f.write_str("none"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("cannot rewrite pc {pc} ({original}) to {derivative}: not a derivative of the original")]
    IllegalRewrite { pc: usize, original: &'static str, derivative: &'static str },
    #[error("pc {0} out of bounds")]
    OutOfBounds(usize),
}

/// A function body: the rewrite target of quickening.
#[derive(Clone, Debug)]
pub struct CodeObject {
    pub name: String,
    pub arity: usize,
    pub n_locals: usize,
    pub local_names: Vec<String>,
    pub instructions: Vec<Instruction>,
    /// Tier-0 ancestor of every cell, maintained across rewrites.
    pub original_opcodes: Vec<Opcode>,
    pub constants: Vec<Constant>,
    /// Boxed constants, filled when the code is loaded into a VM.
    pub const_handles: Vec<Handle>,
    pub const_words: Vec<[Word; 2]>,
    pub max_depth: usize,
    /// Statically simulated stack depth before each pc (None if unreachable).
    pub depth_at: Vec<Option<u32>>,
    pub call_count: u64,
    pub sequences: Vec<SequenceInfo>,
    seq_start: Vec<u32>,
    jump_target: Vec<bool>,
    pub miss_counts: Vec<u8>,
    /// Deoptimizations per sequence start pc.
    pub deopt_counts: HashMap<usize, u32>,
    pub needs_reanalysis: bool,
}

impl CodeObject {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        local_names: Vec<String>,
        instructions: Vec<Instruction>,
        constants: Vec<Constant>,
    ) -> CodeObject {
        let n = instructions.len();
        let mut jump_target = vec![false; n + 1];
        for ins in &instructions {
            if ins.op.is_jump() {
                if let Some(t) = jump_target.get_mut(ins.arg as usize) {
                    *t = true;
                }
            }
        }
        let const_words = constants.iter().map(|c| c.native_words().unwrap_or([Word(0); 2])).collect();
        let mut code = CodeObject {
            name: name.into(),
            arity,
            n_locals: local_names.len(),
            local_names,
            original_opcodes: instructions.iter().map(|i| i.op).collect(),
            instructions,
            constants,
            const_handles: Vec::new(),
            const_words,
            max_depth: 0,
            depth_at: Vec::new(),
            call_count: 0,
            sequences: Vec::new(),
            seq_start: vec![NO_SEQUENCE; n],
            jump_target,
            miss_counts: vec![0; n],
            deopt_counts: HashMap::new(),
            needs_reanalysis: false,
        };
        let (max, depths) = super::stack_depths(&code);
        code.max_depth = max;
        code.depth_at = depths;
        code
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    /// Allocated operand stack capacity in words: room for every slot to
    /// hold a two-word complex number.
    pub fn stack_capacity(&self) -> usize {
        2 * self.max_depth
    }

    pub fn is_jump_target(&self, pc: usize) -> bool {
        self.jump_target.get(pc).copied().unwrap_or(false)
    }

    pub fn opcodes(&self) -> Vec<Opcode> {
        self.instructions.iter().map(|i| i.op).collect()
    }

    /// Replace the opcode at `p` with a derivative of its original. The
    /// immediate is preserved and no other cell changes.
    pub fn quicken(
        &mut self,
        p: usize,
        derivative: Opcode,
        counters: &mut RuntimeCounters,
    ) -> Result<(), RewriteError> {
        let original = *self.original_opcodes.get(p).ok_or(RewriteError::OutOfBounds(p))?;
        if !is_ancestor(original, derivative) {
            return Err(RewriteError::IllegalRewrite {
                pc: p,
                original: original.name(),
                derivative: derivative.name(),
            });
        }
        self.instructions[p].op = derivative;
        counters.quicken_rewrites += 1;
        Ok(())
    }

    /// Rewrite `p` back to `target`, which must be an ancestor of the
    /// current opcode.
    pub fn generalize_to(&mut self, p: usize, target: Opcode) -> Result<(), RewriteError> {
        let current = self.instructions.get(p).ok_or(RewriteError::OutOfBounds(p))?.op;
        if !is_ancestor(target, current) {
            return Err(RewriteError::IllegalRewrite {
                pc: p,
                original: current.name(),
                derivative: target.name(),
            });
        }
        self.instructions[p].op = target;
        Ok(())
    }

    pub fn sequence_starting_at(&self, pc: usize) -> Option<usize> {
        match self.seq_start.get(pc) {
            Some(&i) if i != NO_SEQUENCE => Some(i as usize),
            _ => None,
        }
    }

    pub fn register_sequence(&mut self, seq: SequenceInfo) {
        self.seq_start[seq.start_pc] = self.sequences.len() as u32;
        self.sequences.push(seq);
    }

    pub fn remove_sequence(&mut self, index: usize) -> SequenceInfo {
        let seq = self.sequences.remove(index);
        self.reindex_sequences();
        seq
    }

    fn reindex_sequences(&mut self) {
        self.seq_start.iter_mut().for_each(|s| *s = NO_SEQUENCE);
        for (i, s) in self.sequences.iter().enumerate() {
            self.seq_start[s.start_pc] = i as u32;
        }
    }

    /// Human-readable immediate for the cell at `pc`.
    pub fn immediate_text(&self, pc: usize) -> Option<String> {
        let ins = self.instructions[pc];
        match ins.op.immediate() {
            Immediate::None => None,
            Immediate::Compare => Some(crate::values::CompareKind::from_arg(ins.arg).symbol().to_string()),
            _ => Some(ins.arg.to_string()),
        }
    }
}
