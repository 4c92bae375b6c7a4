//! Instruction set, code objects and disassembly.

mod code;
mod disasm;
mod module;
mod opcode;

pub use code::{CodeObject, Constant, RewriteError};
pub use disasm::{disassemble, disassemble_with_constants};
pub use module::{Builtin, Global, Module};
pub use opcode::{
    generalize, is_ancestor, root, specialize1, specialize2, Immediate, Instruction, Opcode, TIER1_COUNT,
    TIER2_COUNT,
};

/// Net operand-stack effect of an instruction, in values.
pub fn stack_effect(ins: Instruction) -> i32 {
    use Opcode::*;
    match root(ins.op) {
        LoadConst | LoadFast | LoadGlobal => 1,
        StoreFast | PopTop | ReturnValue | PopJumpIfFalse | PopJumpIfTrue => -1,
        BinaryAdd | BinarySubtract | BinaryMultiply | BinaryTrueDivide | BinaryPower | BinaryModulo
        | CompareOp => -1,
        UnaryNegative | JumpAbsolute => 0,
        CallFunction => -(ins.arg as i32),
        _ => unreachable!("root is tier 0"),
    }
}

/// Simulate the tier-0 stack discipline over all paths. Returns the maximum
/// depth and the depth before each reachable pc.
///
/// Panics if two paths reach a pc at different depths or the stack
/// underflows; the compiler never emits such code.
pub fn stack_depths(code: &CodeObject) -> (usize, Vec<Option<u32>>) {
    let n = code.instructions.len();
    let mut depth: Vec<Option<u32>> = vec![None; n];
    let mut work = Vec::new();
    if n > 0 {
        depth[0] = Some(0);
        work.push(0usize);
    }
    let mut max = 0usize;
    while let Some(pc) = work.pop() {
        let d = depth[pc].unwrap() as i32;
        let ins = code.instructions[pc];
        let after = d + stack_effect(ins);
        assert!(after >= 0, "stack underflow at pc {pc} in {}", code.name);
        // CALL_FUNCTION peaks before popping
        max = max.max(d as usize).max(after as usize);
        let mut succ = [None, None];
        match root(ins.op) {
            Opcode::ReturnValue => {}
            Opcode::JumpAbsolute => succ[0] = Some(ins.arg as usize),
            Opcode::PopJumpIfFalse | Opcode::PopJumpIfTrue => {
                succ[0] = Some(ins.arg as usize);
                succ[1] = Some(pc + 1);
            }
            _ => succ[0] = Some(pc + 1),
        }
        for s in succ.into_iter().flatten() {
            if s >= n {
                continue;
            }
            match depth[s] {
                Some(existing) => {
                    assert_eq!(existing as i32, after, "inconsistent stack depth at pc {s} in {}", code.name)
                }
                None => {
                    depth[s] = Some(after as u32);
                    work.push(s);
                }
            }
        }
    }
    (max, depth)
}
