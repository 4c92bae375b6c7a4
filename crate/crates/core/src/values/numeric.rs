//! Guest arithmetic semantics.
//!
//! Every tier evaluates operators through these functions, so a boxed
//! generic add, a type-specialized add and an unboxed add perform exactly
//! the same binary64 (or integer) operation.

use std::cmp::Ordering;
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

/// A runtime error raised by guest code. Aborts the run.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind}: {message}")]
pub struct GuestError {
    pub kind: &'static str,
    pub message: String,
}

impl GuestError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        GuestError { kind, message: message.into() }
    }

    pub fn type_error(message: impl Into<String>) -> Self {
        GuestError::new("TypeError", message)
    }

    pub fn zero_division(message: impl Into<String>) -> Self {
        GuestError::new("ZeroDivisionError", message)
    }

    pub fn value_error(message: impl Into<String>) -> Self {
        GuestError::new("ValueError", message)
    }
}

/// Guest integer. `Big` is never used for values that fit in `i64`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IntVal {
    Small(i64),
    Big(BigInt),
}

impl IntVal {
    pub fn from_big(b: BigInt) -> IntVal {
        match b.to_i64() {
            Some(v) => IntVal::Small(v),
            None => IntVal::Big(b),
        }
    }

    pub fn to_big(&self) -> BigInt {
        match self {
            IntVal::Small(v) => BigInt::from(*v),
            IntVal::Big(b) => b.clone(),
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            IntVal::Small(v) => Some(*v),
            IntVal::Big(_) => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            IntVal::Small(v) => *v as f64,
            IntVal::Big(b) => {
                b.to_f64().unwrap_or(if b.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, IntVal::Small(0))
    }
}

impl fmt::Display for IntVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IntVal::Small(v) => write!(f, "{v}"),
            IntVal::Big(b) => write!(f, "{b}"),
        }
    }
}

impl Ord for IntVal {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (IntVal::Small(a), IntVal::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&other.to_big()),
        }
    }
}

impl PartialOrd for IntVal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const fn new(re: f64, im: f64) -> Complex {
        Complex { re, im }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CompareKind {
    Lt,
    Le,
    Eq,
    Ne,
    Gt,
    Ge,
}

impl CompareKind {
    pub const ALL: [CompareKind; 6] = [
        CompareKind::Lt,
        CompareKind::Le,
        CompareKind::Eq,
        CompareKind::Ne,
        CompareKind::Gt,
        CompareKind::Ge,
    ];

    #[inline]
    pub fn from_arg(arg: u32) -> CompareKind {
        CompareKind::ALL[arg as usize]
    }

    pub fn as_arg(self) -> u32 {
        self as u32
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CompareKind::Lt => "<",
            CompareKind::Le => "<=",
            CompareKind::Eq => "==",
            CompareKind::Ne => "!=",
            CompareKind::Gt => ">",
            CompareKind::Ge => ">=",
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CompareKind::Eq | CompareKind::Ne)
    }

    /// Operand order reversed: `a k b` iff `b k.swapped() a`.
    pub fn swapped(self) -> CompareKind {
        match self {
            CompareKind::Lt => CompareKind::Gt,
            CompareKind::Le => CompareKind::Ge,
            CompareKind::Gt => CompareKind::Lt,
            CompareKind::Ge => CompareKind::Le,
            k => k,
        }
    }

    #[inline]
    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareKind::Lt => ord == Ordering::Less,
            CompareKind::Le => ord != Ordering::Greater,
            CompareKind::Eq => ord == Ordering::Equal,
            CompareKind::Ne => ord != Ordering::Equal,
            CompareKind::Gt => ord == Ordering::Greater,
            CompareKind::Ge => ord != Ordering::Less,
        }
    }
}

// ---------------------------------------------------------------------------
// integers

#[inline]
pub fn int_add(a: &IntVal, b: &IntVal) -> IntVal {
    if let (IntVal::Small(x), IntVal::Small(y)) = (a, b) {
        if let Some(r) = x.checked_add(*y) {
            return IntVal::Small(r);
        }
    }
    IntVal::from_big(a.to_big() + b.to_big())
}

#[inline]
pub fn int_sub(a: &IntVal, b: &IntVal) -> IntVal {
    if let (IntVal::Small(x), IntVal::Small(y)) = (a, b) {
        if let Some(r) = x.checked_sub(*y) {
            return IntVal::Small(r);
        }
    }
    IntVal::from_big(a.to_big() - b.to_big())
}

#[inline]
pub fn int_mul(a: &IntVal, b: &IntVal) -> IntVal {
    if let (IntVal::Small(x), IntVal::Small(y)) = (a, b) {
        if let Some(r) = x.checked_mul(*y) {
            return IntVal::Small(r);
        }
    }
    IntVal::from_big(a.to_big() * b.to_big())
}

pub fn int_neg(a: &IntVal) -> IntVal {
    if let IntVal::Small(x) = a {
        if let Some(r) = x.checked_neg() {
            return IntVal::Small(r);
        }
    }
    IntVal::from_big(-a.to_big())
}

/// `/` on integers always yields a float.
#[inline]
pub fn int_true_divide(a: &IntVal, b: &IntVal) -> Result<f64, GuestError> {
    match (a, b) {
        (IntVal::Small(x), IntVal::Small(y)) => i64_true_divide(*x, *y),
        _ => {
            if b.is_zero() {
                return Err(GuestError::zero_division("division by zero"));
            }
            Ok(a.to_f64() / b.to_f64())
        }
    }
}

#[inline]
pub fn i64_true_divide(a: i64, b: i64) -> Result<f64, GuestError> {
    if b == 0 {
        return Err(GuestError::zero_division("division by zero"));
    }
    Ok(a as f64 / b as f64)
}

/// Floor modulo: the result takes the sign of the divisor.
#[inline]
pub fn i64_mod(a: i64, b: i64) -> Result<i64, GuestError> {
    if b == 0 {
        return Err(GuestError::zero_division("integer modulo by zero"));
    }
    let r = a.wrapping_rem(b);
    Ok(if r != 0 && ((r < 0) != (b < 0)) { r + b } else { r })
}

pub fn int_mod(a: &IntVal, b: &IntVal) -> Result<IntVal, GuestError> {
    match (a, b) {
        (IntVal::Small(x), IntVal::Small(y)) => i64_mod(*x, *y).map(IntVal::Small),
        _ => {
            if b.is_zero() {
                return Err(GuestError::zero_division("integer modulo by zero"));
            }
            Ok(IntVal::from_big(a.to_big().mod_floor(&b.to_big())))
        }
    }
}

pub fn int_pow(a: &IntVal, b: &IntVal) -> Result<IntVal, GuestError> {
    let exp = match b {
        IntVal::Small(e) if *e >= 0 => *e,
        IntVal::Small(_) => {
            return Err(GuestError::value_error("negative integer exponent"));
        }
        IntVal::Big(e) if e.is_negative() => {
            return Err(GuestError::value_error("negative integer exponent"));
        }
        IntVal::Big(_) => return Err(GuestError::value_error("exponent too large")),
    };
    let exp = u32::try_from(exp).map_err(|_| GuestError::value_error("exponent too large"))?;
    if let IntVal::Small(x) = a {
        if let Some(r) = x.checked_pow(exp) {
            return Ok(IntVal::Small(r));
        }
    }
    Ok(IntVal::from_big(num_traits::pow(a.to_big(), exp as usize)))
}

#[inline]
pub fn int_compare(kind: CompareKind, a: &IntVal, b: &IntVal) -> bool {
    match (a, b) {
        (IntVal::Small(x), IntVal::Small(y)) => i64_compare(kind, *x, *y),
        _ => kind.holds(a.cmp(b)),
    }
}

#[inline]
pub fn i64_compare(kind: CompareKind, a: i64, b: i64) -> bool {
    kind.holds(a.cmp(&b))
}

// ---------------------------------------------------------------------------
// floats

#[inline]
pub fn float_add(a: f64, b: f64) -> f64 {
    a + b
}

#[inline]
pub fn float_sub(a: f64, b: f64) -> f64 {
    a - b
}

#[inline]
pub fn float_mul(a: f64, b: f64) -> f64 {
    a * b
}

#[inline]
pub fn float_true_divide(a: f64, b: f64) -> Result<f64, GuestError> {
    if b == 0.0 {
        return Err(GuestError::zero_division("float division by zero"));
    }
    Ok(a / b)
}

pub fn float_pow(a: f64, b: f64) -> Result<f64, GuestError> {
    if a == 0.0 && b < 0.0 {
        return Err(GuestError::zero_division("0.0 cannot be raised to a negative power"));
    }
    if a < 0.0 && a.is_finite() && b.is_finite() && b.fract() != 0.0 {
        return Err(GuestError::value_error("negative number cannot be raised to a fractional power"));
    }
    Ok(a.powf(b))
}

pub fn float_mod(a: f64, b: f64) -> Result<f64, GuestError> {
    if b == 0.0 {
        return Err(GuestError::zero_division("float modulo"));
    }
    let m = a % b;
    Ok(if m != 0.0 {
        if (b < 0.0) != (m < 0.0) {
            m + b
        } else {
            m
        }
    } else {
        0.0f64.copysign(b)
    })
}

#[inline]
pub fn float_compare(kind: CompareKind, a: f64, b: f64) -> bool {
    match kind {
        CompareKind::Lt => a < b,
        CompareKind::Le => a <= b,
        CompareKind::Eq => a == b,
        CompareKind::Ne => a != b,
        CompareKind::Gt => a > b,
        CompareKind::Ge => a >= b,
    }
}

// ---------------------------------------------------------------------------
// complex

#[inline]
pub fn complex_add(a: Complex, b: Complex) -> Complex {
    Complex::new(a.re + b.re, a.im + b.im)
}

#[inline]
pub fn complex_sub(a: Complex, b: Complex) -> Complex {
    Complex::new(a.re - b.re, a.im - b.im)
}

#[inline]
pub fn complex_mul(a: Complex, b: Complex) -> Complex {
    Complex::new(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)
}

#[inline]
pub fn complex_neg(a: Complex) -> Complex {
    Complex::new(-a.re, -a.im)
}

/// Scaled complex division (avoids overflow in the denominator).
pub fn complex_true_divide(a: Complex, b: Complex) -> Result<Complex, GuestError> {
    let abs_re = b.re.abs();
    let abs_im = b.im.abs();
    if abs_re >= abs_im {
        if abs_re == 0.0 {
            return Err(GuestError::zero_division("complex division by zero"));
        }
        let ratio = b.im / b.re;
        let denom = b.re + b.im * ratio;
        Ok(Complex::new((a.re + a.im * ratio) / denom, (a.im - a.re * ratio) / denom))
    } else if abs_im >= abs_re {
        let ratio = b.re / b.im;
        let denom = b.re * ratio + b.im;
        Ok(Complex::new((a.re * ratio + a.im) / denom, (a.im * ratio - a.re) / denom))
    } else {
        // NaN components
        Ok(Complex::new(f64::NAN, f64::NAN))
    }
}

pub fn complex_compare(kind: CompareKind, a: Complex, b: Complex) -> Result<bool, GuestError> {
    match kind {
        CompareKind::Eq => Ok(a.re == b.re && a.im == b.im),
        CompareKind::Ne => Ok(!(a.re == b.re && a.im == b.im)),
        _ => {
            Err(GuestError::type_error(format!("'{}' not supported between complex numbers", kind.symbol())))
        }
    }
}

// ---------------------------------------------------------------------------
// strings

pub fn str_concat(a: &Rc<str>, b: &Rc<str>) -> Rc<str> {
    let mut s = String::with_capacity(a.len() + b.len());
    s.push_str(a);
    s.push_str(b);
    Rc::from(s)
}

pub fn str_compare(kind: CompareKind, a: &str, b: &str) -> bool {
    kind.holds(a.cmp(b))
}

// ---------------------------------------------------------------------------
// formatting

/// Shortest round-trip float rendering, always showing a fractional part
/// or exponent.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e16).contains(&a) {
        let s = format!("{x:e}");
        // signed exponent with at least two digits
        let (m, e) = s.split_once('e').expect("exponent form");
        let (sign, digits) = match e.strip_prefix('-') {
            Some(d) => ('-', d),
            None => ('+', e),
        };
        return format!("{m}e{sign}{digits:0>2}");
    }
    let s = format!("{x}");
    if s.contains('.') {
        s
    } else {
        s + ".0"
    }
}

pub fn format_complex(c: Complex) -> String {
    let im = format_component(c.im);
    if c.re == 0.0 && c.re.is_sign_positive() {
        format!("{im}j")
    } else {
        let re = format_component(c.re);
        let sign = if im.starts_with('-') { "" } else { "+" };
        format!("({re}{sign}{im}j)")
    }
}

fn format_component(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e16 {
        if x == 0.0 && x.is_sign_negative() {
            "-0".into()
        } else {
            format!("{}", x as i64)
        }
    } else {
        format_float(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floor_modulo_takes_divisor_sign() {
        assert_eq!(i64_mod(7, 3).unwrap(), 1);
        assert_eq!(i64_mod(-7, 3).unwrap(), 2);
        assert_eq!(i64_mod(7, -3).unwrap(), -2);
        assert_eq!(i64_mod(i64::MIN, -1).unwrap(), 0);
        assert!(i64_mod(1, 0).is_err());
        assert_eq!(float_mod(-1.0, 3.0).unwrap(), 2.0);
        assert!(float_mod(0.0, -2.0).unwrap().is_sign_negative());
    }

    #[test]
    fn small_and_big_paths_agree() {
        let a = IntVal::Small(i64::MAX);
        let one = IntVal::Small(1);
        let s = int_add(&a, &one);
        assert!(matches!(s, IntVal::Big(_)));
        assert_eq!(int_sub(&s, &one), a);
        assert_eq!(int_pow(&IntVal::Small(2), &IntVal::Small(10)).unwrap(), IntVal::Small(1024));
        assert!(int_pow(&IntVal::Small(2), &IntVal::Small(-1)).is_err());
    }

    #[test]
    fn float_rendering() {
        assert_eq!(format_float(1.0), "1.0");
        assert_eq!(format_float(2.5), "2.5");
        assert_eq!(format_float(1e16), "1e+16");
        assert_eq!(format_float(1e-5), "1e-05");
        assert_eq!(format_complex(Complex::new(0.0, 1.0)), "1j");
        assert_eq!(format_complex(Complex::new(1.0, -2.0)), "(1-2j)");
        assert_eq!(format_complex(Complex::new(1.5, 2.0)), "(1.5+2j)");
    }

    #[test]
    fn complex_division_matches_definition() {
        let q = complex_true_divide(Complex::new(1.0, 2.0), Complex::new(3.0, 4.0)).unwrap();
        assert!((q.re - 0.44).abs() < 1e-15 && (q.im - 0.08).abs() < 1e-15);
        assert!(complex_true_divide(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)).is_err());
    }
}
