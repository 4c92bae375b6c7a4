//! Opcodes of all three tiers. The enum and its tables are generated by
//! `build.rs` from the derivative matrix.

use crate::values::TypeTag;

include!(concat!(env!("OUT_DIR"), "/opcodes.rs"));

/// Kind of the immediate operand stored next to an opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Immediate {
    None,
    Const,
    Local,
    Global,
    Jump,
    Compare,
    Argc,
}

/// One fixed-width bytecode cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub op: Opcode,
    pub arg: u32,
}

impl Instruction {
    pub const fn new(op: Opcode, arg: u32) -> Instruction {
        Instruction { op, arg }
    }

    pub const fn bare(op: Opcode) -> Instruction {
        Instruction { op, arg: 0 }
    }
}

/// One step up the derivative chain. Tier-0 opcodes map to themselves.
pub fn generalize(op: Opcode) -> Opcode {
    op.parent()
}

/// The tier-0 ancestor (at most two steps up).
pub fn root(op: Opcode) -> Opcode {
    op.parent().parent()
}

/// Whether `ancestor` is on `op`'s chain of parents (including `op` itself).
pub fn is_ancestor(ancestor: Opcode, op: Opcode) -> bool {
    let mut cur = op;
    loop {
        if cur == ancestor {
            return true;
        }
        let next = cur.parent();
        if next == cur {
            return false;
        }
        cur = next;
    }
}

impl Opcode {
    pub fn is_jump(self) -> bool {
        self.immediate() == Immediate::Jump
    }

    /// Valid first instruction of an optimizable sequence.
    pub fn is_sequence_start(self) -> bool {
        matches!(self, Opcode::LoadConst | Opcode::LoadFast)
    }

    /// Valid terminator of an optimizable sequence.
    pub fn is_sequence_end(self) -> bool {
        matches!(
            self,
            Opcode::PopJumpIfFalse | Opcode::PopJumpIfTrue | Opcode::ReturnValue | Opcode::StoreFast
        )
    }

    /// Tier-0 binary operator opcodes.
    pub fn is_binary(self) -> bool {
        matches!(
            self,
            Opcode::BinaryAdd
                | Opcode::BinarySubtract
                | Opcode::BinaryMultiply
                | Opcode::BinaryTrueDivide
                | Opcode::BinaryPower
                | Opcode::BinaryModulo
        )
    }

    /// Operations whose result type follows the lattice conversion rules.
    pub fn result_type(self) -> Option<TypeTag> {
        let ty = self.specialization_type()?;
        let root = root(self);
        Some(match root {
            Opcode::CompareOp => TypeTag::Bool,
            Opcode::BinaryTrueDivide if ty == TypeTag::Int => TypeTag::Float,
            _ => ty,
        })
    }

    pub fn by_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.name() == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_level_examples() {
        assert_eq!(specialize1(Opcode::BinaryMultiply, TypeTag::Float), Some(Opcode::IncaFloatMult));
        assert_eq!(Opcode::IncaFloatMult.name(), "INCA_FLOAT_MULT");
        assert_eq!(specialize1(Opcode::BinaryAdd, TypeTag::Str), Some(Opcode::IncaStrAdd));
        assert_eq!(specialize1(Opcode::BinaryPower, TypeTag::Str), None);
    }

    #[test]
    fn second_level_examples() {
        assert_eq!(specialize2(Opcode::IncaFloatMult, TypeTag::Float), Some(Opcode::NamaFloatMultiply));
        assert_eq!(specialize2(Opcode::LoadFast, TypeTag::Float), Some(Opcode::NamaFloatLoadFast));
        assert_eq!(Opcode::NamaFloatLoadFast.name(), "NAMA_FLOAT_LOAD_FAST");
        assert_eq!(specialize2(Opcode::IncaIntPower, TypeTag::Int), None);
    }

    #[test]
    fn generalize_examples() {
        assert_eq!(generalize(Opcode::NamaFloatMultiply), Opcode::IncaFloatMult);
        assert_eq!(generalize(Opcode::IncaFloatMult), Opcode::BinaryMultiply);
        assert_eq!(generalize(Opcode::LoadConst), Opcode::LoadConst);
        for &op in Opcode::ALL {
            let r = generalize(generalize(op));
            assert_eq!(generalize(r), r, "{} not fixed after two steps", op.name());
            assert_eq!(r.tier(), 0);
        }
    }

    #[test]
    fn tier2_parents_prefer_tier1() {
        assert_eq!(Opcode::NamaIntAdd.parent(), Opcode::IncaIntAdd);
        assert_eq!(Opcode::NamaFloatLoadFast.parent(), Opcode::LoadFast);
        assert_eq!(Opcode::NamaComplexNegative.parent(), Opcode::UnaryNegative);
        assert_eq!(Opcode::NamaPopJumpIfTrue.parent(), Opcode::PopJumpIfTrue);
    }

    #[test]
    fn conversion_rules() {
        assert_eq!(Opcode::IncaIntTrueDivide.result_type(), Some(TypeTag::Float));
        assert_eq!(Opcode::NamaIntTrueDivide.result_type(), Some(TypeTag::Float));
        assert_eq!(Opcode::IncaComplexCompare.result_type(), Some(TypeTag::Bool));
        assert_eq!(Opcode::IncaIntAdd.result_type(), Some(TypeTag::Int));
    }
}
