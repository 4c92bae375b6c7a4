use std::fmt::Write as _;

use super::CodeObject;

/// One line per instruction: `index NAME [immediate]`, followed by a tier
/// marker (`[inca]` / `[nama]`) for derived opcodes.
pub fn disassemble(code: &CodeObject) -> String {
    let mut out = String::new();
    for (pc, ins) in code.instructions.iter().enumerate() {
        let _ = write!(out, "{pc} {}", ins.op.name());
        if let Some(imm) = code.immediate_text(pc) {
            let _ = write!(out, " {imm}");
        }
        match ins.op.tier() {
            1 => out.push_str("  [inca]"),
            2 => out.push_str("  [nama]"),
            _ => {}
        }
        out.push('\n');
    }
    out
}

/// Disassembly preceded by a header and the constant pool.
pub fn disassemble_with_constants(code: &CodeObject) -> String {
    let mut out = format!(
        "code {} (arity {}, locals {}, max depth {})\n",
        code.name, code.arity, code.n_locals, code.max_depth
    );
    for (i, c) in code.constants.iter().enumerate() {
        let _ = writeln!(out, "  const {i} = {c}");
    }
    out.push_str(&disassemble(code));
    out
}
