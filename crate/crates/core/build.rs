//! Instruction-set generator.
//!
//! Every tier-1 (INCA) and tier-2 (NAMA) instruction is produced here from a
//! validity matrix and a small set of per-operation templates. The output is
//! two files in `OUT_DIR`:
//!
//! * `opcodes.rs`: the `Opcode` enum with names, tiers, immediates, parent
//!   links and the `specialize1`/`specialize2` tables.
//! * `derived_exec.rs`: the dispatch arms for every derived opcode, spliced
//!   into the interpreter as a method on `Vm`.
//!
//! A matrix row without a matching template aborts the build.

use std::collections::BTreeSet;
use std::env;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// (variant, NAME, immediate kind)
const TIER0: &[(&str, &str, &str)] = &[
    ("LoadConst", "LOAD_CONST", "Const"),
    ("LoadFast", "LOAD_FAST", "Local"),
    ("StoreFast", "STORE_FAST", "Local"),
    ("BinaryAdd", "BINARY_ADD", "None"),
    ("BinarySubtract", "BINARY_SUBTRACT", "None"),
    ("BinaryMultiply", "BINARY_MULTIPLY", "None"),
    ("BinaryTrueDivide", "BINARY_TRUE_DIVIDE", "None"),
    ("BinaryPower", "BINARY_POWER", "None"),
    ("BinaryModulo", "BINARY_MODULO", "None"),
    ("UnaryNegative", "UNARY_NEGATIVE", "None"),
    ("CompareOp", "COMPARE_OP", "Compare"),
    ("PopJumpIfFalse", "POP_JUMP_IF_FALSE", "Jump"),
    ("PopJumpIfTrue", "POP_JUMP_IF_TRUE", "Jump"),
    ("JumpAbsolute", "JUMP_ABSOLUTE", "Jump"),
    ("CallFunction", "CALL_FUNCTION", "Argc"),
    ("ReturnValue", "RETURN_VALUE", "None"),
    ("PopTop", "POP_TOP", "None"),
    ("LoadGlobal", "LOAD_GLOBAL", "Global"),
];

/// Binary operations that have type-specialized derivatives, with the
/// tier-0 parent they derive from.
const OPS: &[(&str, &str)] = &[
    ("ADD", "BinaryAdd"),
    ("SUBTRACT", "BinarySubtract"),
    ("MULTIPLY", "BinaryMultiply"),
    ("TRUE_DIVIDE", "BinaryTrueDivide"),
    ("POWER", "BinaryPower"),
    ("MODULO", "BinaryModulo"),
    ("COMPARE", "CompareOp"),
];

const TYPES1: &[&str] = &["INT", "FLOAT", "COMPLEX", "STR"];
const TYPES2: &[&str] = &["INT", "FLOAT", "COMPLEX"];

fn tier1_valid(ty: &str, op: &str) -> bool {
    match ty {
        "INT" | "FLOAT" => true,
        "COMPLEX" => !matches!(op, "POWER" | "MODULO"),
        "STR" => matches!(op, "ADD" | "COMPARE"),
        _ => false,
    }
}

/// Tier-2 arithmetic beyond the per-type common core.
fn tier2_arith_valid(ty: &str, op: &str) -> bool {
    matches!(
        (ty, op),
        (_, "ADD" | "SUBTRACT" | "MULTIPLY")
            | ("FLOAT", "TRUE_DIVIDE" | "POWER" | "MODULO")
            | ("INT", "TRUE_DIVIDE" | "MODULO")
            | ("INT" | "FLOAT", "COMPARE")
    )
}

fn camel(s: &str) -> String {
    s.split('_')
        .map(|w| {
            let lower = w.to_ascii_lowercase();
            let mut c = lower.chars();
            match c.next() {
                Some(f) => f.to_ascii_uppercase().to_string() + c.as_str(),
                None => String::new(),
            }
        })
        .collect()
}

fn type_tag(ty: &str) -> &'static str {
    match ty {
        "INT" => "TypeTag::Int",
        "FLOAT" => "TypeTag::Float",
        "COMPLEX" => "TypeTag::Complex",
        "STR" => "TypeTag::Str",
        "BOOL" => "TypeTag::Bool",
        _ => panic!("unknown type {ty}"),
    }
}

/// The tier-1 display name abbreviates MULTIPLY the way the original
/// INCA instruction set did.
fn tier1_name(ty: &str, op: &str) -> String {
    let op = if op == "MULTIPLY" { "MULT" } else { op };
    format!("INCA_{ty}_{op}")
}

struct Op {
    variant: String,
    name: String,
    tier: u8,
    imm: String,
    parent: String,
    /// Type the opcode is specialized for (operand type).
    spec_ty: Option<String>,
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

/// Payload pattern binding `a` / `b` for a boxed tier-1 operand.
fn inca_pattern(ty: &str, var: &str) -> String {
    match ty {
        "INT" => format!("Payload::Int({var})"),
        "FLOAT" => format!("Payload::Float({var})"),
        "COMPLEX" => format!("Payload::Complex({var})"),
        "STR" => format!("Payload::Str({var})"),
        _ => panic!("no pattern for {ty}"),
    }
}

/// Machine operation on borrowed boxed payloads. Evaluates to
/// `Result<_, GuestError>`.
fn inca_expr(ty: &str, op: &str) -> Option<&'static str> {
    Some(match (ty, op) {
        ("INT", "ADD") => "Ok(numeric::int_add(a, b))",
        ("INT", "SUBTRACT") => "Ok(numeric::int_sub(a, b))",
        ("INT", "MULTIPLY") => "Ok(numeric::int_mul(a, b))",
        ("INT", "TRUE_DIVIDE") => "numeric::int_true_divide(a, b)",
        ("INT", "POWER") => "numeric::int_pow(a, b)",
        ("INT", "MODULO") => "numeric::int_mod(a, b)",
        ("INT", "COMPARE") => "Ok(numeric::int_compare(CompareKind::from_arg(arg), a, b))",
        ("FLOAT", "ADD") => "Ok(numeric::float_add(*a, *b))",
        ("FLOAT", "SUBTRACT") => "Ok(numeric::float_sub(*a, *b))",
        ("FLOAT", "MULTIPLY") => "Ok(numeric::float_mul(*a, *b))",
        ("FLOAT", "TRUE_DIVIDE") => "numeric::float_true_divide(*a, *b)",
        ("FLOAT", "POWER") => "numeric::float_pow(*a, *b)",
        ("FLOAT", "MODULO") => "numeric::float_mod(*a, *b)",
        ("FLOAT", "COMPARE") => "Ok(numeric::float_compare(CompareKind::from_arg(arg), *a, *b))",
        ("COMPLEX", "ADD") => "Ok(numeric::complex_add(*a, *b))",
        ("COMPLEX", "SUBTRACT") => "Ok(numeric::complex_sub(*a, *b))",
        ("COMPLEX", "MULTIPLY") => "Ok(numeric::complex_mul(*a, *b))",
        ("COMPLEX", "TRUE_DIVIDE") => "numeric::complex_true_divide(*a, *b)",
        ("COMPLEX", "COMPARE") => "numeric::complex_compare(CompareKind::from_arg(arg), *a, *b)",
        ("STR", "ADD") => "Ok(numeric::str_concat(a, b))",
        ("STR", "COMPARE") => "Ok(numeric::str_compare(CompareKind::from_arg(arg), a, b))",
        _ => return None,
    })
}

/// How the tier-1 result is boxed.
fn inca_box(ty: &str, op: &str) -> &'static str {
    match (ty, op) {
        (_, "COMPARE") => "self.heap.bool_handle(r)",
        ("INT", "TRUE_DIVIDE") => "self.heap.box_float(r)",
        ("INT", _) => "self.heap.box_intval(r)",
        ("FLOAT", _) => "self.heap.box_float(r)",
        ("COMPLEX", _) => "self.heap.box_complex(r)",
        ("STR", _) => "self.heap.box_str(r)",
        _ => panic!("no boxing for {ty}/{op}"),
    }
}

fn inca_template(op: &Op, ty: &str, bin: &str) -> String {
    let expr =
        inca_expr(ty, bin).unwrap_or_else(|| panic!("matrix row ({bin}, {ty}, tier 1) has no template"));
    format!(
        r#"            Opcode::{variant} => {{
                let w = self.pop_handle(frame);
                let v = self.top_handle(frame);
                let fast = match (self.heap.payload(v), self.heap.payload(w)) {{
                    ({pa}, {pb}) => Some({expr}),
                    _ => None,
                }};
                match fast {{
                    Some(r) => {{
                        let r = match r {{
                            Ok(r) => r,
                            Err(e) => return Err(self.fail_binary(w, e)),
                        }};
                        if self.config.audit {{
                            self.audit_guard(v, w, {tag});
                        }}
                        let x = {boxing};
                        self.finish_binary(frame, v, w, x)?;
                    }}
                    // misspeculation: continue with the parent's generic path
                    None => self.inca_miss(frame, v, w)?,
                }}
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
        pa = inca_pattern(ty, "a"),
        pb = inca_pattern(ty, "b"),
        expr = expr,
        tag = type_tag(ty),
        boxing = inca_box(ty, bin),
    )
}

fn machine_ty(ty: &str) -> &'static str {
    match ty {
        "INT" => "i64",
        "FLOAT" => "f64",
        "COMPLEX" => "complex",
        "BOOL" => "bool",
        _ => panic!("no machine type for {ty}"),
    }
}

/// Machine operation over unboxed operands `a`, `b`. Integer overflow
/// leaves the native domain and deoptimizes.
fn nama_expr(ty: &str, op: &str) -> Option<(&'static str, &'static str)> {
    Some(match (ty, op) {
        ("INT", "ADD") => ("a.checked_add(b).ok_or(Exit::Deopt(DeoptReason::IntOverflow))?", "INT"),
        ("INT", "SUBTRACT") => ("a.checked_sub(b).ok_or(Exit::Deopt(DeoptReason::IntOverflow))?", "INT"),
        ("INT", "MULTIPLY") => ("a.checked_mul(b).ok_or(Exit::Deopt(DeoptReason::IntOverflow))?", "INT"),
        ("INT", "TRUE_DIVIDE") => ("numeric::i64_true_divide(a, b)?", "FLOAT"),
        ("INT", "MODULO") => ("numeric::i64_mod(a, b)?", "INT"),
        ("INT", "COMPARE") => ("numeric::i64_compare(CompareKind::from_arg(arg), a, b)", "BOOL"),
        ("FLOAT", "ADD") => ("a + b", "FLOAT"),
        ("FLOAT", "SUBTRACT") => ("a - b", "FLOAT"),
        ("FLOAT", "MULTIPLY") => ("a * b", "FLOAT"),
        ("FLOAT", "TRUE_DIVIDE") => ("numeric::float_true_divide(a, b)?", "FLOAT"),
        ("FLOAT", "POWER") => ("numeric::float_pow(a, b)?", "FLOAT"),
        ("FLOAT", "MODULO") => ("numeric::float_mod(a, b)?", "FLOAT"),
        ("FLOAT", "COMPARE") => ("numeric::float_compare(CompareKind::from_arg(arg), a, b)", "BOOL"),
        ("COMPLEX", "ADD") => ("numeric::complex_add(a, b)", "COMPLEX"),
        ("COMPLEX", "SUBTRACT") => ("numeric::complex_sub(a, b)", "COMPLEX"),
        ("COMPLEX", "MULTIPLY") => ("numeric::complex_mul(a, b)", "COMPLEX"),
        _ => return None,
    })
}

fn nama_binary_template(op: &Op, ty: &str, bin: &str) -> String {
    let (expr, rty) =
        nama_expr(ty, bin).unwrap_or_else(|| panic!("matrix row ({bin}, {ty}, tier 2) has no template"));
    let mt = machine_ty(ty);
    format!(
        r#"            Opcode::{variant} => {{
                let b = self.pop_{mt}();
                let a = self.pop_{mt}();
                let r = {expr};
                self.push_{rt}(r);
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
        rt = machine_ty(rty),
    )
}

fn nama_negative_template(op: &Op, ty: &str) -> String {
    let expr = match ty {
        "INT" => "a.checked_neg().ok_or(Exit::Deopt(DeoptReason::IntOverflow))?",
        "FLOAT" => "-a",
        "COMPLEX" => "numeric::complex_neg(a)",
        _ => panic!("no negation template for {ty}"),
    };
    let mt = machine_ty(ty);
    format!(
        r#"            Opcode::{variant} => {{
                let a = self.pop_{mt}();
                let r = {expr};
                self.push_{mt}(r);
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
    )
}

fn unbox_pattern(ty: &str) -> &'static str {
    match ty {
        "INT" => "Payload::Int(IntVal::Small(x))",
        "FLOAT" => "Payload::Float(x)",
        "COMPLEX" => "Payload::Complex(x)",
        _ => panic!("no unbox pattern for {ty}"),
    }
}

fn nama_load_fast_template(op: &Op, ty: &str) -> String {
    format!(
        r#"            Opcode::{variant} => {{
                if self.enter_sequence(frame)? {{
                    return self.run_sequence(frame);
                }}
                let h = self.guarded_local(frame, arg)?;
                let x = match self.heap.payload(h) {{
                    {pat} => *x,
                    // misspeculation, generalize
                    _ => return Err(Exit::Deopt(DeoptReason::GuardFail {{ pc: frame.pc - 1 }})),
                }};
                self.push_{mt}(x);
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
        pat = unbox_pattern(ty),
        mt = machine_ty(ty),
    )
}

fn nama_load_const_template(op: &Op, ty: &str) -> String {
    let width = if ty == "COMPLEX" { 2 } else { 1 };
    format!(
        r#"            Opcode::{variant} => {{
                if self.enter_sequence(frame)? {{
                    return self.run_sequence(frame);
                }}
                self.push_const_words(frame, arg, {width});
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
    )
}

fn box_machine(ty: &str) -> &'static str {
    match ty {
        "INT" => "self.heap.box_int(r)",
        "FLOAT" => "self.heap.box_float(r)",
        "COMPLEX" => "self.heap.box_complex(r)",
        _ => panic!("no boxing for {ty}"),
    }
}

fn nama_store_template(op: &Op, ty: &str) -> String {
    format!(
        r#"            Opcode::{variant} => {{
                self.leave_sequence(frame);
                let r = self.pop_{mt}();
                let h = {boxing};
                self.store_local(frame, arg, h)?;
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
        mt = machine_ty(ty),
        boxing = box_machine(ty),
    )
}

fn nama_return_template(op: &Op, ty: &str) -> String {
    format!(
        r#"            Opcode::{variant} => {{
                self.leave_sequence(frame);
                let r = self.pop_{mt}();
                let h = {boxing};
                self.push_handle(h);
                Ok(Step::Return)
            }}
"#,
        variant = op.variant,
        mt = machine_ty(ty),
        boxing = box_machine(ty),
    )
}

fn nama_jump_template(op: &Op, jump_when: bool) -> String {
    let negate = if jump_when { "" } else { "!" };
    format!(
        r#"            Opcode::{variant} => {{
                self.leave_sequence(frame);
                if {negate}self.pop_bool() {{
                    frame.pc = arg as usize;
                }}
                Ok(Step::Continue)
            }}
"#,
        variant = op.variant,
    )
}

// ---------------------------------------------------------------------------

fn main() {
    println!("cargo:rerun-if-changed=build.rs");

    let mut ops: Vec<Op> = Vec::new();
    for (variant, name, imm) in TIER0 {
        ops.push(Op {
            variant: variant.to_string(),
            name: name.to_string(),
            tier: 0,
            imm: imm.to_string(),
            parent: variant.to_string(),
            spec_ty: None,
        });
    }

    // tier 1
    let mut spec1: Vec<(String, String, String)> = Vec::new(); // (parent, type, derivative)
    let mut arms1: Vec<(String, String)> = Vec::new();
    for ty in TYPES1 {
        for (bin, parent) in OPS {
            if !tier1_valid(ty, bin) {
                continue;
            }
            let name = tier1_name(ty, bin);
            let op = Op {
                variant: camel(&name),
                name: name.clone(),
                tier: 1,
                imm: if *bin == "COMPARE" { "Compare" } else { "None" }.to_string(),
                parent: parent.to_string(),
                spec_ty: Some(ty.to_string()),
            };
            arms1.push((name.clone(), inca_template(&op, ty, bin)));
            spec1.push((parent.to_string(), ty.to_string(), op.variant.clone()));
            ops.push(op);
        }
    }
    let tier1_variants: BTreeSet<String> = spec1.iter().map(|s| s.2.clone()).collect();

    // tier 2
    let mut spec2: Vec<(String, String, String)> = Vec::new();
    let mut arms2: Vec<(String, String)> = Vec::new();
    for ty in TYPES2 {
        let structural: &[(&str, &str, &str)] = &[
            ("LOAD_FAST", "LoadFast", "Local"),
            ("LOAD_CONST", "LoadConst", "Const"),
            ("STORE_FAST", "StoreFast", "Local"),
            ("RETURN", "ReturnValue", "None"),
        ];
        for (suffix, parent, imm) in structural {
            let name = format!("NAMA_{ty}_{suffix}");
            let op = Op {
                variant: camel(&name),
                name: name.clone(),
                tier: 2,
                imm: imm.to_string(),
                parent: parent.to_string(),
                spec_ty: Some(ty.to_string()),
            };
            let arm = match *suffix {
                "LOAD_FAST" => nama_load_fast_template(&op, ty),
                "LOAD_CONST" => nama_load_const_template(&op, ty),
                "STORE_FAST" => nama_store_template(&op, ty),
                _ => nama_return_template(&op, ty),
            };
            arms2.push((name, arm));
            spec2.push((parent.to_string(), ty.to_string(), op.variant.clone()));
            ops.push(op);
        }
        for (bin, _) in OPS {
            if !tier2_arith_valid(ty, bin) {
                continue;
            }
            let parent = camel(&tier1_name(ty, bin));
            if !tier1_variants.contains(&parent) {
                panic!("tier-2 {ty}/{bin} has no tier-1 parent");
            }
            let name = format!("NAMA_{ty}_{bin}");
            let op = Op {
                variant: camel(&name),
                name: name.clone(),
                tier: 2,
                imm: if *bin == "COMPARE" { "Compare" } else { "None" }.to_string(),
                parent: parent.clone(),
                spec_ty: Some(ty.to_string()),
            };
            arms2.push((name, nama_binary_template(&op, ty, bin)));
            spec2.push((parent, ty.to_string(), op.variant.clone()));
            ops.push(op);
        }
        let name = format!("NAMA_{ty}_NEGATIVE");
        let op = Op {
            variant: camel(&name),
            name: name.clone(),
            tier: 2,
            imm: "None".into(),
            parent: "UnaryNegative".into(),
            spec_ty: Some(ty.to_string()),
        };
        arms2.push((name, nama_negative_template(&op, ty)));
        spec2.push(("UnaryNegative".into(), ty.to_string(), op.variant.clone()));
        ops.push(op);
    }
    for (suffix, parent, when) in [("FALSE", "PopJumpIfFalse", false), ("TRUE", "PopJumpIfTrue", true)] {
        let name = format!("NAMA_POP_JUMP_IF_{suffix}");
        let op = Op {
            variant: camel(&name),
            name: name.clone(),
            tier: 2,
            imm: "Jump".into(),
            parent: parent.into(),
            spec_ty: Some("BOOL".into()),
        };
        arms2.push((name, nama_jump_template(&op, when)));
        spec2.push((parent.into(), "BOOL".into(), op.variant.clone()));
        ops.push(op);
    }

    // Generated counts must match the matrix enumerated independently.
    let expected1: usize = TYPES1.iter().map(|t| OPS.iter().filter(|(o, _)| tier1_valid(t, o)).count()).sum();
    assert_eq!(arms1.len(), expected1, "tier-1 template/matrix mismatch");
    let expected2: usize =
        TYPES2.iter().map(|t| 5 + OPS.iter().filter(|(o, _)| tier2_arith_valid(t, o)).count()).sum::<usize>()
            + 2;
    assert_eq!(arms2.len(), expected2, "tier-2 template/matrix mismatch");
    assert!(ops.len() <= 256, "opcode space exhausted");

    let out_dir = env::var("OUT_DIR").unwrap();
    fs::write(
        Path::new(&out_dir).join("opcodes.rs"),
        render_opcodes(&ops, &spec1, &spec2, arms1.len(), arms2.len()),
    )
    .unwrap();
    fs::write(Path::new(&out_dir).join("derived_exec.rs"), render_exec(&arms1, &arms2)).unwrap();
}

fn render_opcodes(
    ops: &[Op],
    spec1: &[(String, String, String)],
    spec2: &[(String, String, String)],
    n1: usize,
    n2: usize,
) -> String {
    let mut s = String::new();
    s.push_str("// @generated by build.rs from the derivative matrix. Do not edit.\n\n");
    s.push_str("#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]\n#[repr(u8)]\npub enum Opcode {\n");
    for op in ops {
        let _ = writeln!(s, "    {},", op.variant);
    }
    s.push_str("}\n\n");

    let _ = writeln!(s, "/// Number of generated tier-1 derivatives.\npub const TIER1_COUNT: usize = {n1};");
    let _ =
        writeln!(s, "/// Number of generated tier-2 derivatives.\npub const TIER2_COUNT: usize = {n2};\n");

    s.push_str("impl Opcode {\n    pub const ALL: &'static [Opcode] = &[\n");
    for op in ops {
        let _ = writeln!(s, "        Opcode::{},", op.variant);
    }
    s.push_str("    ];\n\n");

    s.push_str("    pub const fn name(self) -> &'static str {\n        match self {\n");
    for op in ops {
        let _ = writeln!(s, "            Opcode::{} => \"{}\",", op.variant, op.name);
    }
    s.push_str("        }\n    }\n\n");

    s.push_str("    #[inline]\n    pub const fn tier(self) -> u8 {\n        match self {\n");
    for op in ops {
        let _ = writeln!(s, "            Opcode::{} => {},", op.variant, op.tier);
    }
    s.push_str("        }\n    }\n\n");

    s.push_str("    pub const fn immediate(self) -> Immediate {\n        match self {\n");
    for op in ops {
        let _ = writeln!(s, "            Opcode::{} => Immediate::{},", op.variant, op.imm);
    }
    s.push_str("        }\n    }\n\n");

    s.push_str("    /// The unique parent; tier-0 opcodes are their own parent.\n");
    s.push_str("    pub const fn parent(self) -> Opcode {\n        match self {\n");
    for op in ops {
        let _ = writeln!(s, "            Opcode::{} => Opcode::{},", op.variant, op.parent);
    }
    s.push_str("        }\n    }\n\n");

    s.push_str("    /// Type a derived opcode is specialized for.\n");
    s.push_str("    pub const fn specialization_type(self) -> Option<TypeTag> {\n        match self {\n");
    for op in ops {
        match &op.spec_ty {
            Some(t) => {
                let _ = writeln!(s, "            Opcode::{} => Some({}),", op.variant, type_tag(t));
            }
            None => {
                let _ = writeln!(s, "            Opcode::{} => None,", op.variant);
            }
        }
    }
    s.push_str("        }\n    }\n");
    s.push_str("}\n\n");

    s.push_str("/// First-level derivative of a tier-0 opcode for one operand type.\n");
    s.push_str("pub fn specialize1(op: Opcode, ty: TypeTag) -> Option<Opcode> {\n    match (op, ty) {\n");
    for (p, t, d) in spec1 {
        let _ = writeln!(s, "        (Opcode::{p}, {}) => Some(Opcode::{d}),", type_tag(t));
    }
    s.push_str("        _ => None,\n    }\n}\n\n");

    s.push_str("/// Second-level (unboxed) derivative.\n");
    s.push_str("pub fn specialize2(op: Opcode, ty: TypeTag) -> Option<Opcode> {\n    match (op, ty) {\n");
    for (p, t, d) in spec2 {
        let _ = writeln!(s, "        (Opcode::{p}, {}) => Some(Opcode::{d}),", type_tag(t));
    }
    s.push_str("        _ => None,\n    }\n}\n");
    s
}

/// Tier-2 arms rewritten to operate on the runner's local word buffer.
fn sequence_arm(arm: &str) -> String {
    const ENTRY: &str = "                if self.enter_sequence(frame)? {\n                    return self.run_sequence(frame);\n                }\n";
    let mut a = arm.replace(ENTRY, "");
    for ty in ["i64", "f64", "complex", "bool"] {
        a = a.replace(&format!("self.pop_{ty}()"), &format!("st.pop_{ty}()"));
        a = a.replace(&format!("self.push_{ty}("), &format!("st.push_{ty}("));
    }
    for width in [1, 2] {
        a = a.replace(
            &format!("self.push_const_words(frame, arg, {width})"),
            &format!("st.push_const(self.functions[frame.func].const_words[arg as usize], {width})"),
        );
    }
    assert!(!a.contains("self.pop_") && !a.contains("enter_sequence"), "unconverted arm: {a}");
    const TAIL: &str = "                Ok(Step::Continue)\n            }\n";
    if a.contains("self.leave_sequence(frame)") {
        // terminators leave the runner with their step
        let (head, body) = a.split_once(" => {").expect("arm header");
        format!("{head} => return {{{}", body.trim_end().to_string() + ",\n")
    } else {
        // everything else falls through to the next instruction
        let body = a.strip_suffix(TAIL).unwrap_or_else(|| panic!("arm without a continue tail: {a}"));
        format!("{body}            }}\n")
    }
}

fn render_sequence_runner(arms2: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str("impl Vm {\n");
    s.push_str("    /// Run the sequence entered at `frame.pc - 1` through its terminator\n");
    s.push_str("    /// with the unboxed words in a local buffer.\n");
    s.push_str("    fn run_sequence(&mut self, frame: &mut Frame) -> Result<Step, Exit> {\n");
    s.push_str("        let mut st = SeqStack::new();\n");
    s.push_str("        frame.pc -= 1;\n");
    s.push_str("        loop {\n");
    s.push_str("            let ins = self.functions[frame.func].instructions[frame.pc];\n");
    s.push_str("            frame.pc += 1;\n");
    s.push_str("            let arg = ins.arg;\n");
    s.push_str("            match ins.op {\n");
    for (_, arm) in arms2 {
        s.push_str(&sequence_arm(arm));
    }
    s.push_str(
        "                op => return Err(internal(format!(\"{op:?} inside a tier-2 sequence\")).into()),\n",
    );
    s.push_str("            }\n");
    s.push_str("        }\n    }\n}\n\n");
    s
}

fn render_exec(arms1: &[(String, String)], arms2: &[(String, String)]) -> String {
    let mut s = String::new();
    s.push_str("// @generated by build.rs from the derivative templates. Do not edit.\n\n");
    s.push_str("impl Vm {\n");
    s.push_str("    #[inline(always)]\n    fn exec_derived(&mut self, op: Opcode, arg: u32, frame: &mut Frame) -> Result<Step, Exit> {\n");
    s.push_str("        let _ = arg;\n");
    s.push_str("        match op {\n");
    for (_, arm) in arms1.iter().chain(arms2) {
        s.push_str(arm);
    }
    s.push_str("            _ => self.exec_generic(Instruction::new(op, arg), frame),\n");
    s.push_str("        }\n    }\n}\n\n");
    s.push_str(&render_sequence_runner(arms2));
    s.push_str("/// Source text of every generated derivative arm, by opcode name.\n");
    s.push_str("pub const DERIVATIVE_SOURCES: &[(&str, &str)] = &[\n");
    for (name, arm) in arms1.iter().chain(arms2) {
        let _ = writeln!(s, "    ({name:?}, {arm:?}),");
    }
    s.push_str("];\n");
    s
}
