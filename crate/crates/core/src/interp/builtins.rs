use std::rc::Rc;

use num_bigint::BigInt;
use num_traits::FromPrimitive;

use super::generic::int_to_float;
use super::Vm;
use crate::bytecode::Builtin;
use crate::values::{GuestError, Handle, IntVal, Payload, TypeTag};

const MAX_LIST_LEN: i64 = 1 << 28;

fn index_error() -> GuestError {
    GuestError::new("IndexError", "index out of range")
}

fn expect_int(vm: &Vm, h: Handle, what: &str) -> Result<i64, GuestError> {
    match vm.heap.payload(h) {
        Payload::Int(IntVal::Small(v)) => Ok(*v),
        Payload::Int(IntVal::Big(_)) => Err(index_error()),
        p => Err(GuestError::type_error(format!("{what} must be Int, not '{}'", p.type_tag()))),
    }
}

fn index_in(len: usize, i: i64) -> Result<usize, GuestError> {
    usize::try_from(i).ok().filter(|&i| i < len).ok_or_else(index_error)
}

/// Common cases of element access and `sqrt`. Returns None when the
/// general path must run, which also reports any guest error.
#[inline]
pub(super) fn fast_call(vm: &mut Vm, b: Builtin, args: &[Handle]) -> Option<Result<Handle, GuestError>> {
    match (b, args) {
        (Builtin::Get, &[list, index]) => {
            let Payload::Int(IntVal::Small(i)) = *vm.heap.payload(index) else { return None };
            let Payload::List(items) = vm.heap.payload(list) else { return None };
            let h = *items.get(usize::try_from(i).ok()?)?;
            vm.heap.incref(h);
            Some(Ok(h))
        }
        (Builtin::Set, &[list, index, v]) => {
            let Payload::Int(IntVal::Small(i)) = *vm.heap.payload(index) else { return None };
            let items = vm.heap.list_mut(list)?;
            let slot = items.get_mut(usize::try_from(i).ok()?)?;
            let old = std::mem::replace(slot, v);
            vm.heap.incref(v);
            Some(match vm.heap.decref(old) {
                Ok(()) => Ok(vm.heap.none_handle()),
                Err(e) => Err(GuestError::new("InternalError", e.to_string())),
            })
        }
        (Builtin::Sqrt, &[x]) => match *vm.heap.payload(x) {
            Payload::Float(x) if x >= 0.0 => Some(Ok(vm.heap.box_float(x.sqrt()))),
            _ => None,
        },
        _ => None,
    }
}

/// Calls a host builtin. Arguments are borrowed; the result is a new
/// reference.
pub(super) fn call(vm: &mut Vm, b: Builtin, args: &[Handle]) -> Result<Handle, GuestError> {
    if let Some(n) = b.arity() {
        if args.len() != n {
            return Err(GuestError::type_error(format!(
                "{}() takes {n} argument(s) ({} given)",
                b.name(),
                args.len()
            )));
        }
    }
    match b {
        Builtin::Print => {
            let parts: Vec<String> = args.iter().map(|&h| vm.heap.display(h)).collect();
            vm.output.push_str(&parts.join(" "));
            vm.output.push('\n');
            Ok(vm.heap.none_handle())
        }
        Builtin::List => {
            let n = expect_int(vm, args[0], "list length")?;
            if !(0..=MAX_LIST_LEN).contains(&n) {
                return Err(GuestError::value_error(format!("invalid list length {n}")));
            }
            let fill = args[1];
            for _ in 0..n {
                vm.heap.incref(fill);
            }
            Ok(vm.heap.alloc(Payload::List(vec![fill; n as usize])))
        }
        Builtin::Get => {
            let i = expect_int(vm, args[1], "index")?;
            match vm.heap.payload(args[0]) {
                Payload::List(items) => {
                    let h = items[index_in(items.len(), i)?];
                    vm.heap.incref(h);
                    Ok(h)
                }
                Payload::Str(s) => {
                    let i = index_in(s.chars().count(), i)?;
                    let c: Rc<str> = s.chars().nth(i).expect("in range").to_string().into();
                    Ok(vm.heap.box_str(c))
                }
                p => Err(GuestError::type_error(format!("'{}' is not indexable", p.type_tag()))),
            }
        }
        Builtin::Set => {
            let i = expect_int(vm, args[1], "index")?;
            let v = args[2];
            let old = {
                let Some(items) = vm.heap.list_mut(args[0]) else {
                    let t = vm.heap.type_tag(args[0]);
                    return Err(GuestError::type_error(format!("'{t}' does not support item assignment")));
                };
                let i = index_in(items.len(), i)?;
                std::mem::replace(&mut items[i], v)
            };
            vm.heap.incref(v);
            vm.heap.decref(old).map_err(|e| GuestError::new("InternalError", e.to_string()))?;
            Ok(vm.heap.none_handle())
        }
        Builtin::Len => {
            let n = match vm.heap.payload(args[0]) {
                Payload::List(items) => items.len(),
                Payload::Str(s) => s.chars().count(),
                p => return Err(GuestError::type_error(format!("'{}' has no len()", p.type_tag()))),
            };
            Ok(vm.heap.box_int(n as i64))
        }
        Builtin::Sqrt => {
            let x = match vm.heap.payload(args[0]) {
                Payload::Int(v) => int_to_float(v)?,
                Payload::Float(v) => *v,
                p => {
                    return Err(GuestError::type_error(format!(
                        "must be real number, not '{}'",
                        p.type_tag()
                    )))
                }
            };
            if x < 0.0 {
                return Err(GuestError::value_error("math domain error"));
            }
            Ok(vm.heap.box_float(x.sqrt()))
        }
        Builtin::Float => {
            let x = match vm.heap.payload(args[0]) {
                Payload::Int(v) => int_to_float(v)?,
                Payload::Float(v) => *v,
                Payload::Str(s) => s.trim().parse::<f64>().map_err(|_| {
                    GuestError::value_error(format!("could not convert string to float: '{s}'"))
                })?,
                p => {
                    return Err(GuestError::type_error(format!(
                        "float() argument must be a number, not '{}'",
                        p.type_tag()
                    )))
                }
            };
            Ok(vm.heap.box_float(x))
        }
        Builtin::Int => {
            let v = match vm.heap.payload(args[0]) {
                Payload::Int(v) => v.clone(),
                Payload::Bool(b) => IntVal::Small(*b as i64),
                Payload::Float(x) => {
                    if !x.is_finite() {
                        return Err(GuestError::value_error(format!("cannot convert float {x} to integer")));
                    }
                    IntVal::from_big(BigInt::from_f64(x.trunc()).expect("finite"))
                }
                Payload::Str(s) => IntVal::from_big(
                    s.trim()
                        .parse::<BigInt>()
                        .map_err(|_| GuestError::value_error(format!("invalid literal for int(): '{s}'")))?,
                ),
                p => {
                    return Err(GuestError::type_error(format!(
                        "int() argument must be a number, not '{}'",
                        p.type_tag()
                    )))
                }
            };
            Ok(vm.heap.box_intval(v))
        }
        Builtin::Fmt => {
            let digits = expect_int(vm, args[1], "digits")?;
            if !(0..=40).contains(&digits) {
                return Err(GuestError::value_error("digits must be in 0..=40"));
            }
            let x = match vm.heap.payload(args[0]) {
                Payload::Int(v) => int_to_float(v)?,
                Payload::Float(v) => *v,
                p => {
                    return Err(GuestError::type_error(format!(
                        "fmt() needs a number, not '{}'",
                        p.type_tag()
                    )))
                }
            };
            let s = format!("{x:.prec$}", prec = digits as usize);
            Ok(vm.heap.box_str(s.into()))
        }
        Builtin::Chr => {
            let i = expect_int(vm, args[0], "code point")?;
            let c = u32::try_from(i)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| GuestError::value_error(format!("chr() arg not in range: {i}")))?;
            Ok(vm.heap.box_str(c.to_string().into()))
        }
        Builtin::Str => {
            let s = vm.heap.display(args[0]);
            Ok(vm.heap.box_str(s.into()))
        }
        Builtin::Size => {
            if vm.heap.type_tag(args[0]) != TypeTag::Int {
                return Err(GuestError::type_error("size() default must be Int"));
            }
            match vm.config.size {
                Some(n) => Ok(vm.heap.box_int(n)),
                None => {
                    vm.heap.incref(args[0]);
                    Ok(args[0])
                }
            }
        }
    }
}
