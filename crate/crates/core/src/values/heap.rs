use std::rc::Rc;

use thiserror::Error;

use super::numeric::{format_complex, format_float};
use super::{Complex, IntVal, MachineValue, RuntimeCounters, TypeTag};

/// Index of a heap slot. Stored on the operand stack as a plain word.
pub type Handle = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FunctionRef {
    Guest(u32),
    Builtin(u8),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Int(IntVal),
    Float(f64),
    Complex(Complex),
    Str(Rc<str>),
    Bool(bool),
    None,
    Function(FunctionRef),
    List(Vec<Handle>),
}

impl Payload {
    pub fn type_tag(&self) -> TypeTag {
        match self {
            Payload::Int(_) => TypeTag::Int,
            Payload::Float(_) => TypeTag::Float,
            Payload::Complex(_) => TypeTag::Complex,
            Payload::Str(_) => TypeTag::Str,
            Payload::Bool(_) => TypeTag::Bool,
            Payload::None => TypeTag::None,
            Payload::Function(_) => TypeTag::Function,
            Payload::List(_) => TypeTag::List,
        }
    }
}

/// A heap object with its reference count. A count of zero marks a free slot.
#[derive(Clone, Debug)]
pub struct BoxedValue {
    pub payload: Payload,
    pub refcount: u32,
}

impl BoxedValue {
    pub fn type_tag(&self) -> TypeTag {
        self.payload.type_tag()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum UnboxError {
    #[error("type mismatch: found {actual}, expected {expected}")]
    TypeMismatch { actual: TypeTag, expected: TypeTag },
    #[error("integer does not fit in 64 bits")]
    IntOutOfRange,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ValueError {
    #[error("refcount underflow on handle {0}")]
    RefcountUnderflow(Handle),
    #[error("cannot box a machine {0} as a guest value")]
    NotBoxable(TypeTag),
}

/// Reference-counted object store for one VM.
#[derive(Debug)]
pub struct Heap {
    slots: Vec<BoxedValue>,
    free: Vec<Handle>,
    live: usize,
    increfs: u64,
    decrefs: u64,
    allocs: u64,
    none: Handle,
    true_: Handle,
    false_: Handle,
    pub counters: RuntimeCounters,
}

impl Default for Heap {
    fn default() -> Self {
        Heap::new()
    }
}

impl Heap {
    pub fn new() -> Heap {
        let mut heap = Heap {
            slots: Vec::with_capacity(1024),
            free: Vec::new(),
            live: 0,
            increfs: 0,
            decrefs: 0,
            allocs: 0,
            none: 0,
            true_: 0,
            false_: 0,
            counters: RuntimeCounters::default(),
        };
        heap.none = heap.alloc(Payload::None);
        heap.true_ = heap.alloc(Payload::Bool(true));
        heap.false_ = heap.alloc(Payload::Bool(false));
        heap.counters = RuntimeCounters::default();
        heap
    }

    #[inline]
    pub fn payload(&self, h: Handle) -> &Payload {
        &self.slots[h as usize].payload
    }

    #[inline]
    pub fn value(&self, h: Handle) -> &BoxedValue {
        &self.slots[h as usize]
    }

    #[inline]
    pub fn type_tag(&self, h: Handle) -> TypeTag {
        self.slots[h as usize].payload.type_tag()
    }

    pub fn refcount(&self, h: Handle) -> u32 {
        self.slots[h as usize].refcount
    }

    /// Number of objects currently allocated.
    pub fn live(&self) -> usize {
        self.live
    }

    /// Sum of refcounts over live objects, computed from the event totals.
    pub fn outstanding_refs(&self) -> u64 {
        self.allocs + self.increfs - self.decrefs
    }

    /// Sum of refcounts by direct scan, for checking [`Heap::outstanding_refs`].
    pub fn scan_refs(&self) -> u64 {
        self.slots.iter().map(|s| s.refcount as u64).sum()
    }

    /// Fresh object with refcount 1.
    #[inline]
    pub fn alloc(&mut self, payload: Payload) -> Handle {
        self.counters.box_allocs += 1;
        self.allocs += 1;
        self.live += 1;
        match self.free.pop() {
            Some(h) => {
                let slot = &mut self.slots[h as usize];
                slot.payload = payload;
                slot.refcount = 1;
                h
            }
            None => {
                self.slots.push(BoxedValue { payload, refcount: 1 });
                (self.slots.len() - 1) as Handle
            }
        }
    }

    #[inline]
    pub fn box_int(&mut self, v: i64) -> Handle {
        self.alloc(Payload::Int(IntVal::Small(v)))
    }

    #[inline]
    pub fn box_intval(&mut self, v: IntVal) -> Handle {
        self.alloc(Payload::Int(v))
    }

    #[inline]
    pub fn box_float(&mut self, v: f64) -> Handle {
        self.alloc(Payload::Float(v))
    }

    #[inline]
    pub fn box_complex(&mut self, v: Complex) -> Handle {
        self.alloc(Payload::Complex(v))
    }

    #[inline]
    pub fn box_str(&mut self, v: Rc<str>) -> Handle {
        self.alloc(Payload::Str(v))
    }

    /// Box a machine value as a guest object of type `tag`.
    pub fn box_value(&mut self, value: MachineValue, tag: TypeTag) -> Result<Handle, ValueError> {
        match (value, tag) {
            (MachineValue::Int(v), TypeTag::Int) => Ok(self.box_int(v)),
            (MachineValue::Float(v), TypeTag::Float) => Ok(self.box_float(v)),
            (MachineValue::Complex(re, im), TypeTag::Complex) => Ok(self.box_complex(Complex::new(re, im))),
            _ => Err(ValueError::NotBoxable(tag)),
        }
    }

    pub fn unbox(&self, h: Handle, expected: TypeTag) -> Result<MachineValue, UnboxError> {
        let payload = self.payload(h);
        match (payload, expected) {
            (Payload::Int(IntVal::Small(v)), TypeTag::Int) => Ok(MachineValue::Int(*v)),
            (Payload::Int(IntVal::Big(_)), TypeTag::Int) => Err(UnboxError::IntOutOfRange),
            (Payload::Float(v), TypeTag::Float) => Ok(MachineValue::Float(*v)),
            (Payload::Complex(c), TypeTag::Complex) => Ok(MachineValue::complex(*c)),
            (Payload::Bool(b), TypeTag::Bool) => Ok(MachineValue::Bool(*b)),
            (p, _) => Err(UnboxError::TypeMismatch { actual: p.type_tag(), expected }),
        }
    }

    pub fn none(&self) -> Handle {
        self.none
    }

    /// New reference to the shared boolean object.
    #[inline]
    pub fn bool_handle(&mut self, b: bool) -> Handle {
        let h = if b { self.true_ } else { self.false_ };
        self.incref(h);
        h
    }

    /// New reference to the shared `None` object.
    #[inline]
    pub fn none_handle(&mut self) -> Handle {
        let h = self.none;
        self.incref(h);
        h
    }

    #[inline(always)]
    pub fn incref(&mut self, h: Handle) {
        self.counters.rc_ops += 1;
        self.increfs += 1;
        self.slots[h as usize].refcount += 1;
    }

    #[inline(always)]
    pub fn decref(&mut self, h: Handle) -> Result<(), ValueError> {
        self.counters.rc_ops += 1;
        let slot = &mut self.slots[h as usize];
        match slot.refcount {
            0 => Err(ValueError::RefcountUnderflow(h)),
            1 => {
                slot.refcount = 0;
                self.decrefs += 1;
                self.release(h)
            }
            _ => {
                slot.refcount -= 1;
                self.decrefs += 1;
                Ok(())
            }
        }
    }

    fn release(&mut self, h: Handle) -> Result<(), ValueError> {
        let payload = std::mem::replace(&mut self.slots[h as usize].payload, Payload::None);
        self.free.push(h);
        self.live -= 1;
        match payload {
            Payload::List(items) => self.release_items(items),
            _ => Ok(()),
        }
    }

    /// Drop the references held by a freed list, iteratively so that deep
    /// nesting cannot overflow the native stack.
    #[cold]
    fn release_items(&mut self, items: Vec<Handle>) -> Result<(), ValueError> {
        let mut pending = items;
        while let Some(item) = pending.pop() {
            self.counters.rc_ops += 1;
            let slot = &mut self.slots[item as usize];
            match slot.refcount {
                0 => return Err(ValueError::RefcountUnderflow(item)),
                1 => {
                    slot.refcount = 0;
                    self.decrefs += 1;
                    let payload = std::mem::replace(&mut slot.payload, Payload::None);
                    self.free.push(item);
                    self.live -= 1;
                    if let Payload::List(inner) = payload {
                        pending.extend(inner);
                    }
                }
                _ => {
                    slot.refcount -= 1;
                    self.decrefs += 1;
                }
            }
        }
        Ok(())
    }

    pub fn list_mut(&mut self, h: Handle) -> Option<&mut Vec<Handle>> {
        match &mut self.slots[h as usize].payload {
            Payload::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn truthy(&self, h: Handle) -> bool {
        match self.payload(h) {
            Payload::Int(v) => !v.is_zero(),
            Payload::Float(v) => *v != 0.0,
            Payload::Complex(c) => c.re != 0.0 || c.im != 0.0,
            Payload::Str(s) => !s.is_empty(),
            Payload::Bool(b) => *b,
            Payload::None => false,
            Payload::Function(_) => true,
            Payload::List(items) => !items.is_empty(),
        }
    }

    /// Text rendering used by `print` and `str`.
    pub fn display(&self, h: Handle) -> String {
        match self.payload(h) {
            Payload::Int(v) => v.to_string(),
            Payload::Float(v) => format_float(*v),
            Payload::Complex(c) => format_complex(*c),
            Payload::Str(s) => s.to_string(),
            Payload::Bool(true) => "true".into(),
            Payload::Bool(false) => "false".into(),
            Payload::None => "none".into(),
            Payload::Function(FunctionRef::Guest(id)) => format!("<function {id}>"),
            Payload::Function(FunctionRef::Builtin(id)) => format!("<builtin {id}>"),
            Payload::List(items) => {
                let parts: Vec<String> = items.iter().map(|&i| self.display(i)).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }

    /// Drop the references held by the shared singletons.
    pub fn release_singletons(&mut self) -> Result<(), ValueError> {
        for h in [self.none, self.true_, self.false_] {
            self.decref(h)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn box_starts_with_one_reference() {
        let mut heap = Heap::new();
        let h = heap.box_int(7);
        assert_eq!(heap.refcount(h), 1);
        assert_eq!(heap.payload(h), &Payload::Int(IntVal::Small(7)));
        assert_eq!(heap.counters.box_allocs, 1);
        let f = heap.box_value(MachineValue::Float(2.5), TypeTag::Float).unwrap();
        assert_eq!(heap.payload(f), &Payload::Float(2.5));
        let c = heap.box_value(MachineValue::Complex(1.0, -2.0), TypeTag::Complex).unwrap();
        assert_eq!(heap.payload(c), &Payload::Complex(Complex::new(1.0, -2.0)));
    }

    #[test]
    fn unbox_checks_tag_and_range() {
        let mut heap = Heap::new();
        let f = heap.box_float(2.5);
        assert_eq!(heap.unbox(f, TypeTag::Float).unwrap(), MachineValue::Float(2.5));

        let big = BigInt::from(2).pow(80);
        assert!(big > BigInt::from(i64::MAX));
        let b = heap.box_intval(IntVal::from_big(big));
        assert_eq!(heap.unbox(b, TypeTag::Int), Err(UnboxError::IntOutOfRange));

        let s = heap.box_str("x".into());
        assert_eq!(
            heap.unbox(s, TypeTag::Float),
            Err(UnboxError::TypeMismatch { actual: TypeTag::Str, expected: TypeTag::Float })
        );
    }

    #[test]
    fn refcount_transitions() {
        let mut heap = Heap::new();
        let h = heap.box_int(1);
        heap.incref(h);
        assert_eq!(heap.refcount(h), 2);
        heap.decref(h).unwrap();
        assert_eq!(heap.refcount(h), 1);
        let before = heap.counters.rc_ops;
        let live = heap.live();
        heap.decref(h).unwrap();
        assert_eq!(heap.counters.rc_ops, before + 1);
        assert_eq!(heap.live(), live - 1);
        assert_eq!(heap.decref(h), Err(ValueError::RefcountUnderflow(h)));
    }

    #[test]
    fn releasing_a_list_releases_its_items() {
        let mut heap = Heap::new();
        let a = heap.box_int(1);
        let b = heap.box_float(2.0);
        let l = heap.alloc(Payload::List(vec![a, b]));
        let live = heap.live();
        heap.decref(l).unwrap();
        assert_eq!(heap.live(), live - 3);
        assert_eq!(heap.outstanding_refs(), heap.scan_refs());
    }
}
