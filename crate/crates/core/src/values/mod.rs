//! Guest object model.
//!
//! Values live in a reference-counted [`Heap`] and are addressed by
//! [`Handle`]s. The operand stack carries untyped 64-bit [`Word`]s: outside
//! an optimized sequence each word is a handle, inside one it may hold a
//! reinterpreted machine number (see [`word`]).

mod counters;
mod heap;
pub mod numeric;
pub mod word;

pub use counters::RuntimeCounters;
pub use heap::{BoxedValue, FunctionRef, Handle, Heap, Payload, UnboxError, ValueError};
pub use numeric::{CompareKind, Complex, GuestError, IntVal};
pub use word::{of_word, word_of, MachineValue, Word, WordError, Words};

use std::fmt;

/// Runtime type of a value, doubling as the abstract interpreter's lattice
/// element (`Unknown` is top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Unknown,
    Int,
    Float,
    Complex,
    Str,
    Bool,
    Function,
    None,
    List,
}

impl TypeTag {
    pub fn name(self) -> &'static str {
        match self {
            TypeTag::Unknown => "Value",
            TypeTag::Int => "Int",
            TypeTag::Float => "Float",
            TypeTag::Complex => "Complex",
            TypeTag::Str => "Str",
            TypeTag::Bool => "Bool",
            TypeTag::Function => "Function",
            TypeTag::None => "None",
            TypeTag::List => "List",
        }
    }

    /// Types with an unboxed machine representation on the operand stack.
    pub fn is_native(self) -> bool {
        matches!(self, TypeTag::Int | TypeTag::Float | TypeTag::Complex)
    }

    /// Operand-stack words occupied by an unboxed value of this type.
    pub fn word_width(self) -> usize {
        if self == TypeTag::Complex {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
