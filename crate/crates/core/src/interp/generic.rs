//! Dynamically typed operations used by tier-0 instructions and by the
//! tier-1 miss path.

use std::cmp::Ordering;
use std::rc::Rc;

use num_bigint::BigInt;
use num_traits::FromPrimitive;

use crate::bytecode::Opcode;
use crate::values::{numeric, CompareKind, Complex, GuestError, Handle, Heap, IntVal, Payload};

enum Out {
    Int(IntVal),
    Float(f64),
    Complex(Complex),
    Str(Rc<str>),
    Bool(bool),
}

fn symbol(op: Opcode) -> &'static str {
    match op {
        Opcode::BinaryAdd => "+",
        Opcode::BinarySubtract => "-",
        Opcode::BinaryMultiply => "*",
        Opcode::BinaryTrueDivide => "/",
        Opcode::BinaryPower => "**",
        Opcode::BinaryModulo => "%",
        _ => "?",
    }
}

fn unsupported(op: Opcode, a: &Payload, b: &Payload) -> GuestError {
    GuestError::type_error(format!(
        "unsupported operand type(s) for {}: '{}' and '{}'",
        symbol(op),
        a.type_tag(),
        b.type_tag()
    ))
}

pub fn int_to_float(v: &IntVal) -> Result<f64, GuestError> {
    let f = v.to_f64();
    if f.is_finite() {
        Ok(f)
    } else {
        Err(GuestError::new("OverflowError", "int too large to convert to float"))
    }
}

fn as_complex(p: &Payload) -> Result<Option<Complex>, GuestError> {
    Ok(match p {
        Payload::Int(v) => Some(Complex::new(int_to_float(v)?, 0.0)),
        Payload::Float(v) => Some(Complex::new(*v, 0.0)),
        Payload::Complex(c) => Some(*c),
        _ => None,
    })
}

fn int_arith(op: Opcode, a: &IntVal, b: &IntVal) -> Result<Out, GuestError> {
    Ok(match op {
        Opcode::BinaryAdd => Out::Int(numeric::int_add(a, b)),
        Opcode::BinarySubtract => Out::Int(numeric::int_sub(a, b)),
        Opcode::BinaryMultiply => Out::Int(numeric::int_mul(a, b)),
        Opcode::BinaryTrueDivide => Out::Float(numeric::int_true_divide(a, b)?),
        Opcode::BinaryPower => Out::Int(numeric::int_pow(a, b)?),
        Opcode::BinaryModulo => Out::Int(numeric::int_mod(a, b)?),
        _ => unreachable!("not an arithmetic opcode: {op:?}"),
    })
}

fn float_arith(op: Opcode, a: f64, b: f64) -> Result<Out, GuestError> {
    Ok(Out::Float(match op {
        Opcode::BinaryAdd => numeric::float_add(a, b),
        Opcode::BinarySubtract => numeric::float_sub(a, b),
        Opcode::BinaryMultiply => numeric::float_mul(a, b),
        Opcode::BinaryTrueDivide => numeric::float_true_divide(a, b)?,
        Opcode::BinaryPower => numeric::float_pow(a, b)?,
        Opcode::BinaryModulo => numeric::float_mod(a, b)?,
        _ => unreachable!("not an arithmetic opcode: {op:?}"),
    }))
}

fn arith(op: Opcode, a: &Payload, b: &Payload) -> Result<Out, GuestError> {
    use Payload as P;
    match (a, b) {
        (P::Int(x), P::Int(y)) => int_arith(op, x, y),
        (P::Float(x), P::Float(y)) => float_arith(op, *x, *y),
        (P::Int(x), P::Float(y)) => float_arith(op, int_to_float(x)?, *y),
        (P::Float(x), P::Int(y)) => float_arith(op, *x, int_to_float(y)?),
        (P::Str(x), P::Str(y)) if op == Opcode::BinaryAdd => Ok(Out::Str(numeric::str_concat(x, y))),
        _ => {
            let (Some(x), Some(y)) = (as_complex(a)?, as_complex(b)?) else {
                return Err(unsupported(op, a, b));
            };
            Ok(Out::Complex(match op {
                Opcode::BinaryAdd => numeric::complex_add(x, y),
                Opcode::BinarySubtract => numeric::complex_sub(x, y),
                Opcode::BinaryMultiply => numeric::complex_mul(x, y),
                Opcode::BinaryTrueDivide => numeric::complex_true_divide(x, y)?,
                _ => return Err(unsupported(op, a, b)),
            }))
        }
    }
}

/// Exact ordering between an integer and a float; `None` for NaN.
fn cmp_int_float(x: &IntVal, y: f64) -> Option<Ordering> {
    if y.is_nan() {
        return None;
    }
    if let IntVal::Small(v) = x {
        if v.unsigned_abs() <= 1 << 53 {
            return (*v as f64).partial_cmp(&y);
        }
    }
    if y.is_infinite() {
        return Some(if y > 0.0 { Ordering::Less } else { Ordering::Greater });
    }
    let floor = y.floor();
    let whole = BigInt::from_f64(floor).expect("finite float");
    Some(match x.to_big().cmp(&whole) {
        Ordering::Equal if y > floor => Ordering::Less,
        o => o,
    })
}

fn compare(kind: CompareKind, v: Handle, w: Handle, a: &Payload, b: &Payload) -> Result<bool, GuestError> {
    use Payload as P;
    let ordered = |o: Option<Ordering>| match o {
        Some(o) => kind.holds(o),
        None => kind == CompareKind::Ne,
    };
    Ok(match (a, b) {
        (P::Int(x), P::Int(y)) => numeric::int_compare(kind, x, y),
        (P::Float(x), P::Float(y)) => numeric::float_compare(kind, *x, *y),
        (P::Int(x), P::Float(y)) => ordered(cmp_int_float(x, *y)),
        (P::Float(x), P::Int(y)) => ordered(cmp_int_float(y, *x).map(Ordering::reverse)),
        (P::Str(x), P::Str(y)) => numeric::str_compare(kind, x, y),
        (P::Complex(_), _) | (_, P::Complex(_)) if as_complex(a)?.is_some() && as_complex(b)?.is_some() => {
            let (x, y) = (as_complex(a)?.unwrap(), as_complex(b)?.unwrap());
            numeric::complex_compare(kind, x, y)?
        }
        _ if kind.is_equality() => {
            let same = match (a, b) {
                (P::Bool(x), P::Bool(y)) => x == y,
                (P::None, P::None) => true,
                (P::Function(x), P::Function(y)) => x == y,
                (P::List(_), P::List(_)) => v == w,
                _ => false,
            };
            same == (kind == CompareKind::Eq)
        }
        _ => {
            return Err(GuestError::type_error(format!(
                "'{}' not supported between instances of '{}' and '{}'",
                kind.symbol(),
                a.type_tag(),
                b.type_tag()
            )))
        }
    })
}

/// Generic binary operation or comparison. Returns a new reference.
pub fn binary(heap: &mut Heap, op: Opcode, arg: u32, v: Handle, w: Handle) -> Result<Handle, GuestError> {
    let out = {
        let (a, b) = (heap.payload(v), heap.payload(w));
        if op == Opcode::CompareOp {
            Out::Bool(compare(CompareKind::from_arg(arg), v, w, a, b)?)
        } else {
            arith(op, a, b)?
        }
    };
    Ok(match out {
        Out::Int(x) => heap.box_intval(x),
        Out::Float(x) => heap.box_float(x),
        Out::Complex(x) => heap.box_complex(x),
        Out::Str(x) => heap.box_str(x),
        Out::Bool(x) => heap.bool_handle(x),
    })
}

pub fn negate(heap: &mut Heap, h: Handle) -> Result<Handle, GuestError> {
    let r = match heap.payload(h) {
        Payload::Int(v) => Out::Int(numeric::int_neg(v)),
        Payload::Float(v) => Out::Float(-v),
        Payload::Complex(c) => Out::Complex(numeric::complex_neg(*c)),
        p => return Err(GuestError::type_error(format!("bad operand type for unary -: '{}'", p.type_tag()))),
    };
    Ok(match r {
        Out::Int(x) => heap.box_intval(x),
        Out::Float(x) => heap.box_float(x),
        Out::Complex(x) => heap.box_complex(x),
        _ => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_float_ordering_is_exact() {
        let big = IntVal::Small((1 << 53) + 1);
        assert_eq!(cmp_int_float(&big, (1u64 << 53) as f64), Some(Ordering::Greater));
        assert_eq!(cmp_int_float(&IntVal::Small(2), 2.5), Some(Ordering::Less));
        assert_eq!(cmp_int_float(&IntVal::Small(3), 2.5), Some(Ordering::Greater));
        assert_eq!(cmp_int_float(&IntVal::Small(-3), -2.5), Some(Ordering::Less));
        assert_eq!(cmp_int_float(&IntVal::Small(1), f64::NAN), None);
    }

    #[test]
    fn mixed_arithmetic() {
        let mut heap = Heap::new();
        let a = heap.box_int(3);
        let b = heap.box_float(0.5);
        let r = binary(&mut heap, Opcode::BinaryMultiply, 0, a, b).unwrap();
        assert_eq!(heap.payload(r), &Payload::Float(1.5));
        let s = heap.box_str("x".into());
        let e = binary(&mut heap, Opcode::BinaryPower, 0, s, a).unwrap_err();
        assert_eq!(e.kind, "TypeError");
        let eq = binary(&mut heap, Opcode::CompareOp, CompareKind::Eq.as_arg(), s, a).unwrap();
        assert_eq!(heap.payload(eq), &Payload::Bool(false));
    }
}
