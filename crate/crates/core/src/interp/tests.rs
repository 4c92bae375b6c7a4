use super::*;
use crate::bytecode::disassemble;
use crate::frontend::compile_source;

fn vm(src: &str, tier: Tier) -> Vm {
    Vm::new(compile_source(src).unwrap(), VmConfig::new(tier))
}

const SUM: &str = "def sum(a, b): return a + b";

fn call_sum(vm: &mut Vm, a: Handle, b: Handle) -> Result<Handle, VmError> {
    let f = vm.global("sum").unwrap();
    vm.call(f, &[a, b])
}

#[test]
fn sum_of_ints_and_strs() {
    let mut vm = vm(SUM, Tier::Mlq);
    let (a, b) = (vm.heap.box_int(3), vm.heap.box_int(4));
    let r = call_sum(&mut vm, a, b).unwrap();
    assert_eq!(vm.heap.payload(r), &Payload::Int(IntVal::Small(7)));
    let (x, y) = (vm.heap.box_str("a".into()), vm.heap.box_str("b".into()));
    let r2 = call_sum(&mut vm, x, y).unwrap();
    assert_eq!(vm.heap.display(r2), "ab");
    for h in [a, b, r, x, y, r2] {
        vm.heap.decref(h).unwrap();
    }
    vm.teardown().unwrap();
    assert_eq!(vm.heap.live(), 0);
}

#[test]
fn arity_mismatch() {
    let mut vm = vm(SUM, Tier::Baseline);
    let a = vm.heap.box_int(3);
    let f = vm.global("sum").unwrap();
    let e = vm.call(f, &[a]).unwrap_err();
    assert!(e.to_string().contains("takes 2 argument(s) but 1 were given"), "{e}");
    vm.heap.decref(a).unwrap();
    vm.teardown().unwrap();
    assert_eq!(vm.heap.live(), 0);
}

#[test]
fn generic_add_counts_and_quickens() {
    let mut vm = vm(SUM, Tier::Inca);
    assert_eq!(vm.snapshot_counters(), RuntimeCounters::default());
    let (a, b) = (vm.heap.box_int(3), vm.heap.box_int(4));
    let before = vm.snapshot_counters();
    let r = call_sum(&mut vm, a, b).unwrap();
    let d = vm.snapshot_counters().delta(&before);
    assert_eq!(d.dyn_dispatches, 1);
    assert_eq!(d.box_allocs, 1);
    assert_eq!(d.quicken_rewrites, 1);
    let sum = vm.function_index("sum").unwrap();
    assert_eq!(vm.functions[sum].instructions[2].op, Opcode::IncaIntAdd);
    assert_eq!(vm.heap.payload(r), &Payload::Int(IntVal::Small(7)));
}

#[test]
fn baseline_never_rewrites() {
    let mut vm = vm(SUM, Tier::Baseline);
    for _ in 0..3 {
        let (a, b) = (vm.heap.box_int(3), vm.heap.box_int(4));
        let before = vm.snapshot_counters();
        call_sum(&mut vm, a, b).unwrap();
        assert_eq!(vm.snapshot_counters().delta(&before).dyn_dispatches, 1);
    }
    let sum = vm.function_index("sum").unwrap();
    assert_eq!(vm.functions[sum].instructions[2].op, Opcode::BinaryAdd);
}

#[test]
fn inca_miss_falls_back_to_generic() {
    let mut vm = vm("def f(a, b): return a - b", Tier::Inca);
    let (x, y) = (vm.heap.box_float(5.0), vm.heap.box_float(3.0));
    let f = vm.global("f").unwrap();
    vm.call(f, &[x, y]).unwrap();
    let fi = vm.function_index("f").unwrap();
    assert_eq!(vm.functions[fi].instructions[2].op, Opcode::IncaFloatSubtract);
    let i = vm.heap.box_int(1);
    let before = vm.snapshot_counters();
    let r = vm.call(f, &[x, i]).unwrap();
    let d = vm.snapshot_counters().delta(&before);
    assert_eq!(vm.heap.payload(r), &Payload::Float(4.0));
    assert_eq!(d.guard_misses, 1);
    assert_eq!(d.dyn_dispatches, 1);
    assert_eq!(vm.functions[fi].instructions[2].op, Opcode::IncaFloatSubtract);
}

#[test]
fn miss_limit_generalizes_site() {
    let mut vm = vm("def f(a, b): return a - b", Tier::Inca);
    let f = vm.global("f").unwrap();
    let (x, y, i) = (vm.heap.box_float(5.0), vm.heap.box_float(3.0), vm.heap.box_int(1));
    vm.call(f, &[x, y]).unwrap();
    for _ in 0..8 {
        vm.call(f, &[x, i]).unwrap();
    }
    let fi = vm.function_index("f").unwrap();
    assert_eq!(vm.functions[fi].instructions[2].op, Opcode::BinarySubtract);
    // no re-quickening after the limit
    vm.call(f, &[x, y]).unwrap();
    assert_eq!(vm.functions[fi].instructions[2].op, Opcode::BinarySubtract);
}

#[test]
fn nama_subtract_on_raw_words() {
    let mut vm = vm("def f(a, b): return a - b", Tier::Mlq);
    let mut frame =
        Frame { func: 0, pc: 0, locals_base: 0, stack_base: 0, active_seq: None, seq_entry_depth: 0 };
    vm.push_f64(5.0);
    vm.push_f64(3.0);
    let before = vm.snapshot_counters();
    assert!(matches!(vm.exec_derived(Opcode::NamaFloatSubtract, 0, &mut frame), Ok(Step::Continue)));
    assert_eq!(vm.stack, vec![Word(2.0f64.to_bits())]);
    let d = vm.snapshot_counters().delta(&before);
    assert_eq!((d.box_allocs, d.rc_ops), (0, 0));
}

#[test]
fn float_kernel_goes_native_after_threshold() {
    let src = "def f(a, b): return a * b + 1.5";
    let mut vm = vm(src, Tier::Mlq);
    vm.config.audit = true;
    let f = vm.global("f").unwrap();
    let (x, y) = (vm.heap.box_float(2.0), vm.heap.box_float(3.0));
    for _ in 0..3 {
        let r = vm.call(f, &[x, y]).unwrap();
        assert_eq!(vm.heap.payload(r), &Payload::Float(7.5));
        vm.heap.decref(r).unwrap();
    }
    let fi = vm.function_index("f").unwrap();
    assert_eq!(
        disassemble(&vm.functions[fi]),
        "0 NAMA_FLOAT_LOAD_FAST 0  [nama]\n1 NAMA_FLOAT_LOAD_FAST 1  [nama]\n\
         2 NAMA_FLOAT_MULTIPLY  [nama]\n3 NAMA_FLOAT_LOAD_CONST 0  [nama]\n\
         4 NAMA_FLOAT_ADD  [nama]\n5 NAMA_FLOAT_RETURN  [nama]\n"
    );
    let report = vm.audit_report();
    assert!(report.violations.is_empty(), "{:?}", report.violations);
    assert!(report.sequence_checks >= 1);
}

#[test]
fn guard_fail_rolls_back() {
    let src = "def f(a, b): return a * b";
    let mut vm = vm(src, Tier::Mlq);
    vm.config.audit = true;
    let f = vm.global("f").unwrap();
    let (x, y) = (vm.heap.box_float(2.0), vm.heap.box_float(3.0));
    vm.call(f, &[x, y]).unwrap();
    vm.call(f, &[x, y]).unwrap();
    let s = vm.heap.box_str("ab".into());
    let before = vm.snapshot_counters();
    let e = vm.call(f, &[s, y]).unwrap_err();
    assert!(e.to_string().contains("unsupported operand"), "{e}");
    assert_eq!(vm.snapshot_counters().delta(&before).deopt_events, 1);
    let fi = vm.function_index("f").unwrap();
    assert_eq!(vm.functions[fi].instructions[2].op, Opcode::IncaFloatMult);
    assert!(vm.functions[fi].sequences.is_empty());
    assert!(vm.audit_report().violations.is_empty(), "{:?}", vm.audit_report().violations);
}

#[test]
fn int_overflow_deopts_to_bigint() {
    let src = "\
def fact(n) {
    r = 1
    while n > 1 {
        r = r * n
        n = n - 1
    }
    return r
}
print(fact(10))
print(fact(10))
print(fact(25))
";
    let mut vm = vm(src, Tier::Mlq);
    vm.run_main().unwrap();
    assert_eq!(vm.output(), "3628800\n3628800\n15511210043330985984000000\n");
    assert!(vm.snapshot_counters().deopt_events >= 1);
    vm.teardown().unwrap();
    assert_eq!(vm.heap.live(), 0);
}

#[test]
fn runtime_error_releases_everything() {
    let src = "def f(a) {\n b = a * 2.0\n return b / 0.0\n}\nx = 1.5\nprint(f(x))\nprint(f(x))";
    for tier in Tier::ALL {
        let mut vm = vm(src, tier);
        let e = vm.run_main().unwrap_err();
        assert_eq!(e.to_string(), "ZeroDivisionError: float division by zero");
        vm.teardown().unwrap();
        assert_eq!(vm.heap.live(), 0, "{tier}");
    }
}

#[test]
fn unbound_local_is_a_name_error() {
    let mut vm = vm("def f(c) {\n if c: x = 1\n return x\n}\nprint(f(false))", Tier::Baseline);
    let e = vm.run_main().unwrap_err();
    assert!(e.to_string().starts_with("NameError"), "{e}");
}

#[test]
fn recursion_limit() {
    let mut vm = vm("def f(n): return f(n + 1)\nf(0)", Tier::Baseline);
    let e = vm.run_main().unwrap_err();
    assert!(e.to_string().starts_with("RecursionError"), "{e}");
    vm.teardown().unwrap();
    assert_eq!(vm.heap.live(), 0);
}

#[test]
fn builtins() {
    let src = r#"
l = list(3, 0)
set(l, 1, 2.5)
print(l, len(l), get(l, 1), len("abc"), get("abc", 2))
print(sqrt(16), float(3), int(-2.7), fmt(3.14159, 3), chr(65), str(1j) + "!")
print(size(7), 7 / 2, 7 % -3, -7.5 % 2, 2 ** 70, 1 == 1.0, none == none, "a" < "b")
print((1+2j) * (3-1j), 2.0 ** 0.5, 1e20, 1e-5, -0.0, 0.1 + 0.2, true)
"#;
    let mut vm = vm(src, Tier::Mlq);
    vm.run_main().unwrap();
    assert_eq!(
        vm.output(),
        "[0, 2.5, 0] 3 2.5 3 c\n\
         4.0 3.0 -2 3.142 A 1j!\n\
         7 3.5 -2 0.5 1180591620717411303424 true true true\n\
         (5+5j) 1.4142135623730951 1e+20 1e-05 -0.0 0.30000000000000004 true\n"
    );
    vm.teardown().unwrap();
    assert_eq!(vm.heap.live(), 0);
}

#[test]
fn size_override() {
    let mut v = vm("print(size(7))", Tier::Baseline);
    v.config.size = Some(11);
    v.run_main().unwrap();
    assert_eq!(v.output(), "11\n");
}

#[test]
fn fault_injection_forces_one_deopt() {
    let src = "def f(a, b): return a * b\nx = 0.0\ni = 0\nwhile i < 5 {\n x = x + f(1.5, 2.0)\n i = i + 1\n}\nprint(x)";
    let mut baseline = vm(src, Tier::Baseline);
    baseline.run_main().unwrap();
    let m = compile_source(src).unwrap();
    let fi = m.function_index("f").unwrap();
    let mut config = VmConfig::new(Tier::Mlq);
    config.fault = Some(FaultSite { function: fi, pc: 1 });
    let mut v = Vm::new(m, config);
    v.run_main().unwrap();
    assert_eq!(v.output(), baseline.output());
    assert_eq!(v.snapshot_counters().deopt_events, 1);
}
