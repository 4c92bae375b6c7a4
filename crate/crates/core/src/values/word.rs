//! Operand-stack word conversions.
//!
//! A [`Word`] carries no type; its meaning is fixed by the instruction that
//! produced it. Integers are cast bit-preservingly, floats are reinterpreted
//! (never numerically converted) and a complex number occupies two words,
//! real part first.

use std::fmt;

use thiserror::Error;

use super::{Complex, TypeTag};

#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
#[repr(transparent)]
pub struct Word(pub u64);

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Word({:#018x})", self.0)
    }
}

/// An unboxed machine value.
#[derive(Clone, Copy, Debug)]
pub enum MachineValue {
    Int(i64),
    Float(f64),
    Complex(f64, f64),
    Bool(bool),
}

impl MachineValue {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            MachineValue::Int(_) => TypeTag::Int,
            MachineValue::Float(_) => TypeTag::Float,
            MachineValue::Complex(..) => TypeTag::Complex,
            MachineValue::Bool(_) => TypeTag::Bool,
        }
    }

    pub fn complex(c: Complex) -> MachineValue {
        MachineValue::Complex(c.re, c.im)
    }
}

/// Bit-level equality: floats compare by representation, so `-0.0 != 0.0`
/// and identical NaN payloads are equal.
impl PartialEq for MachineValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (MachineValue::Int(a), MachineValue::Int(b)) => a == b,
            (MachineValue::Float(a), MachineValue::Float(b)) => a.to_bits() == b.to_bits(),
            (MachineValue::Complex(ar, ai), MachineValue::Complex(br, bi)) => {
                ar.to_bits() == br.to_bits() && ai.to_bits() == bi.to_bits()
            }
            (MachineValue::Bool(a), MachineValue::Bool(b)) => a == b,
            _ => false,
        }
    }
}

/// One or two words.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Words {
    words: [Word; 2],
    len: u8,
}

impl Words {
    fn one(w: Word) -> Words {
        Words { words: [w, Word(0)], len: 1 }
    }

    fn two(a: Word, b: Word) -> Words {
        Words { words: [a, b], len: 2 }
    }

    pub fn as_slice(&self) -> &[Word] {
        &self.words[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Raw pair used by constant tables; second word is zero for width 1.
    pub fn raw(&self) -> [Word; 2] {
        self.words
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("{tag} needs {expected} word(s), got {got}")]
    Width { tag: TypeTag, expected: usize, got: usize },
    #[error("{0} has no word representation")]
    NotNative(TypeTag),
}

#[inline]
pub fn word_of_i64(v: i64) -> Word {
    Word(v as u64)
}

#[inline]
pub fn i64_of_word(w: Word) -> i64 {
    w.0 as i64
}

#[inline]
pub fn word_of_f64(v: f64) -> Word {
    Word(v.to_bits())
}

#[inline]
pub fn f64_of_word(w: Word) -> f64 {
    f64::from_bits(w.0)
}

pub fn word_of(value: MachineValue) -> Words {
    match value {
        MachineValue::Int(v) => Words::one(word_of_i64(v)),
        MachineValue::Float(v) => Words::one(word_of_f64(v)),
        MachineValue::Complex(re, im) => Words::two(word_of_f64(re), word_of_f64(im)),
        MachineValue::Bool(b) => Words::one(Word(b as u64)),
    }
}

pub fn of_word(words: &[Word], tag: TypeTag) -> Result<MachineValue, WordError> {
    let expected = match tag {
        TypeTag::Int | TypeTag::Float | TypeTag::Bool => 1,
        TypeTag::Complex => 2,
        other => return Err(WordError::NotNative(other)),
    };
    if words.len() != expected {
        return Err(WordError::Width { tag, expected, got: words.len() });
    }
    Ok(match tag {
        TypeTag::Int => MachineValue::Int(i64_of_word(words[0])),
        TypeTag::Float => MachineValue::Float(f64_of_word(words[0])),
        TypeTag::Complex => MachineValue::Complex(f64_of_word(words[0]), f64_of_word(words[1])),
        _ => MachineValue::Bool(words[0].0 != 0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_word_is_ieee_encoding() {
        // 2.5 = 1.25 * 2^1: sign 0, biased exponent 1024, mantissa 0.25 * 2^52
        let oracle = (1024u64 << 52) | (1u64 << 50);
        assert_eq!(word_of(MachineValue::Float(2.5)).as_slice(), &[Word(oracle)]);
        assert_eq!(oracle, 0x4004_0000_0000_0000);
        assert_eq!(of_word(&[Word(oracle)], TypeTag::Float).unwrap(), MachineValue::Float(2.5));
    }

    #[test]
    fn int_word_is_twos_complement() {
        let oracle = u64::MAX; // -1 = 2^64 - 1 modulo 2^64
        assert_eq!(word_of(MachineValue::Int(-1)).as_slice(), &[Word(oracle)]);
    }

    #[test]
    fn complex_is_componentwise() {
        let w = word_of(MachineValue::Complex(1.5, 0.0));
        assert_eq!(w.as_slice(), &[Word(1.5f64.to_bits()), Word(0.0f64.to_bits())]);
        let back = of_word(word_of(MachineValue::Complex(3.0, 4.0)).as_slice(), TypeTag::Complex);
        assert_eq!(back.unwrap(), MachineValue::Complex(3.0, 4.0));
    }

    #[test]
    fn negative_zero_keeps_sign() {
        let back = of_word(word_of(MachineValue::Float(-0.0)).as_slice(), TypeTag::Float).unwrap();
        match back {
            MachineValue::Float(x) => assert!(x.is_sign_negative() && x == 0.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn width_mismatch_is_rejected() {
        assert!(of_word(&[Word(0)], TypeTag::Complex).is_err());
        assert!(of_word(&[Word(0)], TypeTag::Str).is_err());
        assert_eq!(word_of(MachineValue::Bool(true)).as_slice(), &[Word(1)]);
    }
}
