//! Property checks shared by the property suite and the acceptance gate.
//! Each returns the number of cases checked or the first failure.

use std::cell::Cell;
use std::collections::HashSet;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use mlq::bytecode::{generalize, is_ancestor, root, specialize1, specialize2, CodeObject, Opcode};
use mlq::interp::{Tier, VmConfig};
use mlq::values::{of_word, word_of, Heap, MachineValue, RuntimeCounters, TypeTag};

use super::{compile, corpus, refcount_imbalance, run, transcript, Program};

const TYPES: [TypeTag; 9] = [
    TypeTag::Unknown,
    TypeTag::Int,
    TypeTag::Float,
    TypeTag::Complex,
    TypeTag::Str,
    TypeTag::Bool,
    TypeTag::Function,
    TypeTag::None,
    TypeTag::List,
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn check<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<u64, String> {
    let count = Cell::new(0u64);
    runner(cases)
        .run(&strategy, |v| {
            count.set(count.get() + 1);
            test(v)
        })
        .map_err(|e| e.to_string())?;
    Ok(count.get())
}

fn machine_value() -> impl Strategy<Value = MachineValue> {
    prop_oneof![
        any::<i64>().prop_map(MachineValue::Int),
        any::<u64>().prop_map(|b| MachineValue::Float(f64::from_bits(b))),
        (any::<u64>(), any::<u64>())
            .prop_map(|(a, b)| MachineValue::Complex(f64::from_bits(a), f64::from_bits(b))),
        any::<bool>().prop_map(MachineValue::Bool),
    ]
}

/// of_word(word_of(v)) = v bit-exactly, over full-range ints and random
/// float bit patterns.
pub fn word_roundtrip(cases: u32) -> Result<u64, String> {
    check(cases, machine_value(), |v| {
        let words = word_of(v);
        prop_assert_eq!(words.len(), v.type_tag().word_width());
        let back = of_word(words.as_slice(), v.type_tag()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, v);
        Ok(())
    })
}

/// unbox(box(v)) = v, and releasing the box restores the heap.
pub fn box_roundtrip(cases: u32) -> Result<u64, String> {
    let boxable = machine_value().prop_filter("boxable", |v| !matches!(v, MachineValue::Bool(_)));
    check(cases, boxable, |v| {
        let mut heap = Heap::new();
        let before = (heap.live(), heap.outstanding_refs());
        let h = heap.box_value(v, v.type_tag()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        let back = heap.unbox(h, v.type_tag()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(back, v);
        heap.decref(h).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!((heap.live(), heap.outstanding_refs()), before);
        Ok(())
    })
}

/// Code objects of the whole corpus, as compiled.
fn corpus_code() -> Vec<CodeObject> {
    corpus().iter().flat_map(|p| compile(p).functions).collect()
}

/// A legal quicken rewrites exactly one cell; an illegal one changes
/// nothing.
pub fn quicken_locality(cases: u32) -> Result<u64, String> {
    let code = corpus_code();
    let strategy = (0..code.len(), any::<prop::sample::Index>(), any::<prop::sample::Index>());
    check(cases, strategy, |(f, pc, choice)| {
        let mut c = code[f].clone();
        let pc = pc.index(c.len());
        let original = c.original_opcodes[pc];
        let before = c.instructions.clone();
        let mut counters = RuntimeCounters::default();
        let legal: Vec<Opcode> = Opcode::ALL.iter().copied().filter(|&d| is_ancestor(original, d)).collect();
        let d = legal[choice.index(legal.len())];
        c.quicken(pc, d, &mut counters).map_err(|e| TestCaseError::fail(e.to_string()))?;
        for (i, (a, b)) in before.iter().zip(&c.instructions).enumerate() {
            if i == pc {
                prop_assert_eq!(b.op, d);
                prop_assert_eq!(b.arg, a.arg);
            } else {
                prop_assert_eq!(a, b);
            }
        }
        prop_assert_eq!(counters.quicken_rewrites, 1);
        let illegal: Vec<Opcode> =
            Opcode::ALL.iter().copied().filter(|&d| !is_ancestor(original, d)).collect();
        let bad = illegal[choice.index(illegal.len())];
        let snapshot = c.instructions.clone();
        prop_assert!(c.quicken(pc, bad, &mut counters).is_err());
        prop_assert_eq!(&snapshot, &c.instructions);
        Ok(())
    })
}

/// After any interleaving of quicken and generalize, every cell's two-step
/// generalization fixpoint is its original opcode.
pub fn ancestor_consistency(cases: u32) -> Result<u64, String> {
    let code = corpus_code();
    let step = (any::<prop::sample::Index>(), any::<prop::sample::Index>(), 0..3u8);
    let strategy = (0..code.len(), prop::collection::vec(step, 1..40));
    check(cases, strategy, |(f, steps)| {
        let mut c = code[f].clone();
        let mut counters = RuntimeCounters::default();
        for (pc, choice, kind) in steps {
            let pc = pc.index(c.len());
            let current = c.instructions[pc].op;
            let result = match kind {
                0 => {
                    let legal: Vec<Opcode> = Opcode::ALL
                        .iter()
                        .copied()
                        .filter(|&d| is_ancestor(c.original_opcodes[pc], d))
                        .collect();
                    c.quicken(pc, legal[choice.index(legal.len())], &mut counters)
                }
                1 => c.generalize_to(pc, generalize(current)),
                _ => c.generalize_to(pc, root(current)),
            };
            result.map_err(|e| TestCaseError::fail(e.to_string()))?;
            for (i, ins) in c.instructions.iter().enumerate() {
                prop_assert_eq!(generalize(generalize(ins.op)), c.original_opcodes[i]);
                prop_assert_eq!(root(ins.op), c.original_opcodes[i]);
            }
        }
        Ok(())
    })
}

/// The specialization tables are bijections onto their tiers and invert
/// through `generalize`. Exhaustive over every (opcode, type) pair.
pub fn table_bijectivity() -> Result<u64, String> {
    let mut pairs = 0u64;
    let mut images1 = HashSet::new();
    let mut images2 = HashSet::new();
    for &op in Opcode::ALL {
        for ty in TYPES {
            pairs += 1;
            if let Some(d) = specialize1(op, ty) {
                if op.tier() != 0
                    || generalize(d) != op
                    || d.tier() != 1
                    || d.specialization_type() != Some(ty)
                {
                    return Err(format!("specialize1({}, {ty}) = {} does not invert", op.name(), d.name()));
                }
                if !images1.insert(d) {
                    return Err(format!("{} is the image of two pairs", d.name()));
                }
            }
            if let Some(d) = specialize2(op, ty) {
                // Keyed by the direct parent: the tier-1 analogue when one
                // exists, else the tier-0 opcode.
                let expected_parent = if op.tier() == 0 { specialize1(op, ty).unwrap_or(op) } else { op };
                if op.tier() > 1
                    || generalize(d) != op
                    || expected_parent != op
                    || d.tier() != 2
                    || d.specialization_type() != Some(ty)
                {
                    return Err(format!(
                        "specialize2({}, {ty}) = {} has the wrong parent",
                        op.name(),
                        d.name()
                    ));
                }
                if !images2.insert(d) {
                    return Err(format!("{} is the image of two pairs", d.name()));
                }
            }
        }
    }
    for &op in Opcode::ALL {
        let image = match op.tier() {
            1 => &images1,
            2 => &images2,
            _ => continue,
        };
        if !image.contains(&op) {
            return Err(format!("{} is not produced by its table", op.name()));
        }
    }
    Ok(pairs)
}

// -- random guest programs ---------------------------------------------------

#[derive(Clone, Debug)]
enum Expr {
    Var(u8),
    Int(i64),
    Float(f64),
    Imag(f64),
    Bin(&'static str, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u8),
}

impl Expr {
    fn render(&self, names: &[String]) -> String {
        match self {
            Expr::Var(i) => names[*i as usize % names.len()].clone(),
            Expr::Int(v) => format!("({v})"),
            Expr::Float(v) => format!("({v:?})"),
            Expr::Imag(v) => format!("({v:?}j)"),
            // Divisors are kept away from zero for real operands.
            Expr::Bin(op @ ("/" | "%"), l, r) => {
                let r = r.render(names);
                format!("({} {op} (({r} * {r}) + 0.5))", l.render(names))
            }
            Expr::Bin(op, l, r) => format!("({} {op} {})", l.render(names), r.render(names)),
            Expr::Neg(e) => format!("(-{})", e.render(names)),
            Expr::Pow(e, k) => format!("({} ** {k})", e.render(names)),
        }
    }
}

/// Numeric expressions. Complex programs avoid `%`, `**` and ordering.
fn expr(complex: bool) -> BoxedStrategy<Expr> {
    let imag = if complex { 1 } else { 0 };
    let real_only = if complex { 0 } else { 1 };
    let leaf = prop_oneof![
        6 => any::<u8>().prop_map(Expr::Var),
        2 => (-9i64..10).prop_map(Expr::Int),
        2 => prop::sample::select(vec![0.5, -1.25, 3.0, 0.0, 1e10, -2.75]).prop_map(Expr::Float),
        imag => prop::sample::select(vec![1.0, -0.5, 2.0]).prop_map(Expr::Imag),
    ];
    leaf.prop_recursive(4, 24, 2, move |inner| {
        prop_oneof![
            6 => (prop::sample::select(vec!["+", "-", "*", "/"]), inner.clone(), inner.clone())
                .prop_map(|(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r))),
            real_only => (inner.clone(), inner.clone())
                .prop_map(|(l, r)| Expr::Bin("%", Box::new(l), Box::new(r))),
            1 => inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            real_only => (inner, 0u8..4).prop_map(|(e, k)| Expr::Pow(Box::new(e), k)),
        ]
    })
    .boxed()
}

#[derive(Clone, Debug)]
enum Stmt {
    Assign(Expr),
    Branch(&'static str, Expr, Expr, Expr, Expr),
    Loop(Expr),
}

fn stmt(complex: bool) -> impl Strategy<Value = Stmt> {
    let cmp = if complex { vec!["==", "!="] } else { vec!["<", "<=", "==", "!=", ">", ">="] };
    prop_oneof![
        4 => expr(complex).prop_map(Stmt::Assign),
        2 => (prop::sample::select(cmp), expr(complex), expr(complex), expr(complex), expr(complex))
            .prop_map(|(op, l, r, t, e)| Stmt::Branch(op, l, r, t, e)),
        2 => expr(complex).prop_map(Stmt::Loop),
    ]
}

fn argument(complex: bool) -> BoxedStrategy<String> {
    let int = (-50i64..50).prop_map(|v| format!("{v}"));
    let float = (-50i64..50).prop_map(|v| format!("{:?}", v as f64 * 0.25));
    if complex {
        prop_oneof![int, float, (-5i64..5, -5i64..5).prop_map(|(a, b)| format!("({a} + {b}j)")),].boxed()
    } else {
        prop_oneof![int, float].boxed()
    }
}

fn render_program(body: &[Stmt], a: &[String], b: &[String], reps: usize) -> String {
    let mut names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let mut src = String::from("def f(a, b, c) {\n");
    for (k, s) in body.iter().enumerate() {
        let x = format!("x{k}");
        match s {
            Stmt::Assign(e) => src += &format!("    {x} = {}\n", e.render(&names)),
            Stmt::Branch(op, l, r, t, e) => {
                src += &format!(
                    "    if {} {op} {} {{\n        {x} = {}\n    }} else {{\n        {x} = {}\n    }}\n",
                    l.render(&names),
                    r.render(&names),
                    t.render(&names),
                    e.render(&names)
                )
            }
            Stmt::Loop(e) => {
                src += &format!(
                    "    {x} = 0\n    j = 0\n    while j < 3 {{\n        {x} = {x} + {}\n        j = j + 1\n    }}\n",
                    e.render(&names)
                )
            }
        }
        names.push(x);
    }
    src += &format!("    return {}\n}}\n", names.last().expect("non-empty"));
    let call = |v: &[String]| format!("print(f({}))\n", v.join(", "));
    for _ in 0..reps {
        src += &call(a);
    }
    src += &call(b);
    for _ in 0..reps {
        src += &call(a);
    }
    src
}

/// A function of three parameters called repeatedly with two argument
/// patterns, so that both tiers of quickening and deoptimization occur.
fn guest_program() -> impl Strategy<Value = String> {
    prop_oneof![4 => Just(false), 1 => Just(true)].prop_flat_map(|complex| {
        let args = move || prop::collection::vec(argument(complex), 3);
        (prop::collection::vec(stmt(complex), 1..7), args(), args(), 2usize..5)
            .prop_map(|(body, a, b, reps)| render_program(&body, &a, &b, reps))
    })
}

/// Random programs: identical transcripts at every tier, a balanced heap
/// after every run, and a clean audit at the mlq tier.
pub fn random_programs(cases: u32) -> Result<u64, String> {
    check(cases, guest_program(), |source| {
        let p = Program { name: "random".into(), source: source.clone() };
        let base = run(&p, VmConfig::new(Tier::Baseline));
        let expected = transcript(&base);
        for tier in Tier::ALL {
            for audit in [false, true] {
                let mut config = VmConfig::new(tier);
                config.audit = audit;
                let out = run(&p, config);
                prop_assert_eq!(&transcript(&out), &expected, "{} audit={}\n{}", tier, audit, source);
                if let Some(e) = refcount_imbalance(&out) {
                    return Err(TestCaseError::fail(format!("{tier}: {e}\n{source}")));
                }
                prop_assert!(out.audit.violations.is_empty(), "{:?}\n{}", out.audit.violations, source);
            }
        }
        Ok(())
    })
}
