//! The dispatch loop for all three instruction tiers.

mod builtins;
mod generic;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::absint::{self, Options, SequenceInfo};
use crate::bytecode::{root, specialize1, CodeObject, Constant, Global, Instruction, Module, Opcode};
use crate::quicken2;
pub use crate::quicken2::DeoptReason;
use crate::values::{
    numeric, CompareKind, Complex, FunctionRef, GuestError, Handle, Heap, IntVal, Payload, RuntimeCounters,
    TypeTag, Word,
};

/// Marker for a local slot that has not been assigned.
pub const UNBOUND: Handle = Handle::MAX;

/// Highest instruction tier the VM may rewrite to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Baseline,
    Inca,
    Mlq,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Baseline, Tier::Inca, Tier::Mlq];

    pub fn name(self) -> &'static str {
        match self {
            Tier::Baseline => "baseline",
            Tier::Inca => "inca",
            Tier::Mlq => "mlq",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Tier {
    type Err = String;

    fn from_str(s: &str) -> Result<Tier, String> {
        Tier::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown tier '{s}' (expected baseline, inca or mlq)"))
    }
}

/// Forces one GuardFail at a tier-2 load: function index and pc.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FaultSite {
    pub function: usize,
    pub pc: usize,
}

#[derive(Clone, Debug)]
pub struct VmConfig {
    pub tier: Tier,
    /// Call count at which a function is analyzed and rewritten to tier 2.
    pub mlq_threshold: u64,
    /// Tier-1 guard misses at one site before it reverts to tier 0.
    pub miss_limit: u8,
    /// Deoptimizations per sequence start before it is blacklisted.
    pub max_deopts: u32,
    /// Re-check guards, sequence overhead, stack depths and analysis results.
    pub audit: bool,
    pub fault: Option<FaultSite>,
    /// Overrides the default passed to the `size` builtin.
    pub size: Option<i64>,
    pub recursion_limit: usize,
}

impl VmConfig {
    pub fn new(tier: Tier) -> VmConfig {
        VmConfig {
            tier,
            mlq_threshold: 2,
            miss_limit: 8,
            max_deopts: 2,
            audit: false,
            fault: None,
            size: None,
            recursion_limit: 1000,
        }
    }
}

impl Default for VmConfig {
    fn default() -> VmConfig {
        VmConfig::new(Tier::Mlq)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Frame {
    pub func: usize,
    pub pc: usize,
    pub locals_base: usize,
    /// Operand stack height (words) when the frame was entered.
    pub stack_base: usize,
    /// Index into the code object's sequences while inside one.
    pub active_seq: Option<usize>,
    /// Stack height in words recorded on entering `active_seq`.
    pub seq_entry_depth: usize,
}

pub enum Step {
    Continue,
    /// The return value is on top of the stack.
    Return,
    Call(Frame),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum VmError {
    #[error("{0}")]
    Guest(#[from] GuestError),
    #[error("internal error: {0}")]
    Internal(String),
}

/// Abnormal instruction outcome. Errors are boxed to keep the hot-path
/// result small.
pub enum Exit {
    Deopt(DeoptReason),
    Error(Box<VmError>),
}

impl From<GuestError> for Exit {
    #[cold]
    fn from(e: GuestError) -> Exit {
        Exit::Error(Box::new(VmError::Guest(e)))
    }
}

impl From<VmError> for Exit {
    #[cold]
    fn from(e: VmError) -> Exit {
        Exit::Error(Box::new(e))
    }
}

#[cold]
fn outside_sequence(pc: usize) -> VmError {
    internal(format!("tier-2 load at {pc} outside any sequence"))
}

fn internal(e: impl fmt::Display) -> VmError {
    VmError::Internal(e.to_string())
}

/// Results of audit-mode checking.
#[derive(Clone, Debug, Default)]
pub struct AuditReport {
    pub guard_checks: u64,
    pub sequence_checks: u64,
    pub depth_checks: u64,
    pub absint_checks: u64,
    pub violations: Vec<String>,
}

/// Tracks one execution of an analyzed region at tier 1 in audit mode.
#[derive(Clone, Copy, Debug)]
struct RegionVisit {
    func: usize,
    region: usize,
    misses_at_entry: u64,
    mismatch: bool,
}

pub struct Vm {
    pub heap: Heap,
    pub config: VmConfig,
    pub functions: Vec<CodeObject>,
    pub global_names: Vec<String>,
    globals: Vec<Handle>,
    main: usize,
    stack: Vec<Word>,
    locals: Vec<Handle>,
    output: String,
    fault_pending: bool,
    audit: AuditReport,
    seq_mark: RuntimeCounters,
    /// Analyzed windows with the opcodes they covered at analysis time.
    audit_regions: Vec<Vec<(SequenceInfo, Vec<Opcode>)>>,
    region_visit: Option<RegionVisit>,
    torn_down: bool,
}

impl Vm {
    pub fn new(module: Module, config: VmConfig) -> Vm {
        let Module { mut functions, globals: defs, global_names, main } = module;
        let mut heap = Heap::new();
        for code in &mut functions {
            code.const_handles = code
                .constants
                .iter()
                .map(|c| match c {
                    Constant::Int(v) => heap.box_intval(v.clone()),
                    Constant::Float(v) => heap.box_float(*v),
                    Constant::Complex(v) => heap.box_complex(*v),
                    Constant::Str(s) => heap.box_str(s.as_str().into()),
                    Constant::Bool(b) => heap.bool_handle(*b),
                    Constant::None => heap.none_handle(),
                })
                .collect();
        }
        let globals = defs
            .iter()
            .map(|g| {
                let f = match *g {
                    Global::Builtin(b) => FunctionRef::Builtin(b.index()),
                    Global::Function(i) => FunctionRef::Guest(i as u32),
                };
                heap.alloc(Payload::Function(f))
            })
            .collect();
        heap.counters = RuntimeCounters::default();
        let n = functions.len();
        let fault_pending = config.fault.is_some();
        let max_depth = functions.iter().map(|f| f.stack_capacity()).max().unwrap_or(0);
        Vm {
            heap,
            config,
            functions,
            global_names,
            globals,
            main,
            stack: Vec::with_capacity(64 * max_depth.max(1)),
            locals: Vec::with_capacity(256),
            output: String::new(),
            fault_pending,
            audit: AuditReport::default(),
            seq_mark: RuntimeCounters::default(),
            audit_regions: vec![Vec::new(); n],
            region_visit: None,
            torn_down: false,
        }
    }

    pub fn snapshot_counters(&self) -> RuntimeCounters {
        self.heap.counters
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn take_output(&mut self) -> String {
        std::mem::take(&mut self.output)
    }

    pub fn audit_report(&self) -> &AuditReport {
        &self.audit
    }

    pub fn main_index(&self) -> usize {
        self.main
    }

    pub fn function_index(&self, name: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.name == name)
    }

    /// Handle of the global bound to `name`.
    pub fn global(&self, name: &str) -> Option<Handle> {
        self.global_names.iter().position(|n| n == name).map(|i| self.globals[i])
    }

    /// Run the module body.
    pub fn run_main(&mut self) -> Result<(), VmError> {
        let h = self.invoke(self.main, &[])?;
        self.heap.decref(h).map_err(internal)
    }

    /// Call a function value with borrowed arguments. Returns a new
    /// reference to the result.
    pub fn call(&mut self, function: Handle, args: &[Handle]) -> Result<Handle, VmError> {
        for &a in args {
            self.heap.incref(a);
        }
        match *self.heap.payload(function) {
            Payload::Function(FunctionRef::Guest(i)) => self.invoke(i as usize, args),
            Payload::Function(FunctionRef::Builtin(b)) => {
                let b = crate::bytecode::Builtin::from_index(b).ok_or_else(|| internal("bad builtin"))?;
                let r = builtins::call(self, b, args);
                for &a in args {
                    self.heap.decref(a).map_err(internal)?;
                }
                Ok(r?)
            }
            ref p => {
                let t = p.type_tag();
                for &a in args {
                    self.heap.decref(a).map_err(internal)?;
                }
                Err(not_callable(t).into())
            }
        }
    }

    /// Release globals, constants and singletons. Afterwards no value is
    /// live unless a reference leaked.
    pub fn teardown(&mut self) -> Result<(), VmError> {
        if self.torn_down {
            return Ok(());
        }
        self.torn_down = true;
        for h in std::mem::take(&mut self.globals) {
            self.heap.decref(h).map_err(internal)?;
        }
        for i in 0..self.functions.len() {
            for h in std::mem::take(&mut self.functions[i].const_handles) {
                self.heap.decref(h).map_err(internal)?;
            }
        }
        self.heap.release_singletons().map_err(internal)
    }

    /// Run `func` to completion, taking ownership of `args`.
    fn invoke(&mut self, func: usize, args: &[Handle]) -> Result<Handle, VmError> {
        self.stack.extend(args.iter().map(|&h| Word(h as u64)));
        let frame = match self.enter(func, args.len(), 0) {
            Ok(f) => f,
            Err(Exit::Error(e)) => return Err(*e),
            Err(Exit::Deopt(_)) => return Err(internal("deopt outside a sequence")),
        };
        self.execute(frame)
    }

    /// Set up a frame for `func`, moving the top `argc` stack words into
    /// its locals and dropping `below` further words under them.
    fn enter(&mut self, func: usize, argc: usize, below: usize) -> Result<Frame, Exit> {
        let code = &self.functions[func];
        let base = self.stack.len() - argc;
        if argc != code.arity {
            let msg = format!("{}() takes {} argument(s) but {argc} were given", code.name, code.arity);
            for w in self.stack.drain(base..) {
                self.heap.decref(w.0 as Handle).map_err(internal)?;
            }
            self.stack.truncate(base - below);
            return Err(GuestError::type_error(msg).into());
        }
        let locals_base = self.locals.len();
        let n_locals = code.n_locals;
        self.locals.extend(self.stack[base..].iter().map(|w| w.0 as Handle));
        self.stack.truncate(base - below);
        self.locals.resize(locals_base + n_locals, UNBOUND);

        let threshold = self.config.mlq_threshold.max(1);
        let options = Options { max_deopts: self.config.max_deopts };
        let code = &mut self.functions[func];
        code.call_count += 1;
        let due = code.call_count == threshold || (code.needs_reanalysis && code.call_count >= threshold);
        if due {
            match self.config.tier {
                Tier::Mlq => {
                    quicken2::mlq_pass(code, &mut self.heap.counters, options).map_err(internal)?;
                }
                Tier::Inca if self.config.audit && code.call_count == threshold => {
                    self.audit_regions[func] = absint::analyze(code, options)
                        .sequences
                        .into_iter()
                        .map(|seq| {
                            let ops =
                                code.instructions[seq.start_pc..=seq.end_pc].iter().map(|i| i.op).collect();
                            (seq, ops)
                        })
                        .collect();
                }
                _ => {}
            }
        }
        Ok(Frame {
            func,
            pc: 0,
            locals_base,
            stack_base: self.stack.len(),
            active_seq: None,
            seq_entry_depth: 0,
        })
    }

    fn execute(&mut self, mut frame: Frame) -> Result<Handle, VmError> {
        let mut callers: Vec<Frame> = Vec::new();
        loop {
            let ins = self.functions[frame.func].instructions[frame.pc];
            if self.config.audit {
                self.audit_before(&frame, ins);
            }
            frame.pc += 1;
            // one dispatch over all tiers; tier-0 opcodes fall through to
            // the generic arm of the generated match
            let result = self.exec_derived(ins.op, ins.arg, &mut frame);
            let failure = match result {
                Ok(Step::Continue) => continue,
                Ok(Step::Return) => {
                    let h = self.pop_handle(&frame);
                    match self.release_locals(&frame) {
                        Ok(()) => match callers.pop() {
                            None => return Ok(h),
                            Some(caller) => {
                                frame = caller;
                                self.push_handle(h);
                                continue;
                            }
                        },
                        Err(e) => e,
                    }
                }
                Ok(Step::Call(callee)) => {
                    callers.push(std::mem::replace(&mut frame, callee));
                    if callers.len() < self.config.recursion_limit {
                        continue;
                    }
                    GuestError::new("RecursionError", "maximum recursion depth exceeded").into()
                }
                Err(Exit::Deopt(reason)) => match self.deopt(&mut frame, reason) {
                    Ok(()) => continue,
                    Err(e) => e,
                },
                Err(Exit::Error(e)) => *e,
            };
            self.unwind(frame, callers);
            return Err(failure);
        }
    }

    /// Roll back the active sequence and resume at its start.
    fn deopt(&mut self, frame: &mut Frame, reason: DeoptReason) -> Result<(), VmError> {
        let index = frame.active_seq.take().ok_or_else(|| internal("deopt outside a sequence"))?;
        self.stack.truncate(frame.seq_entry_depth);
        let options = Options { max_deopts: self.config.max_deopts };
        let code = &mut self.functions[frame.func];
        frame.pc =
            quicken2::rollback(code, index, reason, &mut self.heap.counters, options).map_err(internal)?;
        Ok(())
    }

    fn release_locals(&mut self, frame: &Frame) -> Result<(), VmError> {
        for i in frame.locals_base..self.locals.len() {
            let h = self.locals[i];
            if h != UNBOUND {
                self.heap.decref(h).map_err(internal)?;
            }
        }
        self.locals.truncate(frame.locals_base);
        Ok(())
    }

    /// Drop every reference held by the failing frame and its callers.
    fn unwind(&mut self, frame: Frame, callers: Vec<Frame>) {
        if frame.active_seq.is_some() {
            self.stack.truncate(frame.seq_entry_depth);
        }
        for f in std::iter::once(frame).chain(callers.into_iter().rev()) {
            while self.stack.len() > f.stack_base {
                let h = self.stack.pop().expect("non-empty").0 as Handle;
                let _ = self.heap.decref(h);
            }
            let _ = self.release_locals(&f);
        }
    }

    // -- tier 0 ------------------------------------------------------------

    #[inline(always)]
    fn exec_generic(&mut self, ins: Instruction, frame: &mut Frame) -> Result<Step, Exit> {
        let arg = ins.arg as usize;
        match ins.op {
            Opcode::LoadConst => {
                let h = self.functions[frame.func].const_handles[arg];
                self.heap.incref(h);
                self.push_handle(h);
            }
            Opcode::LoadFast => {
                let h = self.locals[frame.locals_base + arg];
                if h == UNBOUND {
                    return Err(self.unbound(frame, arg).into());
                }
                self.heap.incref(h);
                self.push_handle(h);
            }
            Opcode::StoreFast => {
                let h = self.pop_handle(frame);
                self.store_local(frame, ins.arg, h)?;
            }
            Opcode::LoadGlobal => {
                let h = self.globals[arg];
                self.heap.incref(h);
                self.push_handle(h);
            }
            Opcode::PopTop => {
                let h = self.pop_handle(frame);
                self.heap.decref(h).map_err(internal)?;
            }
            Opcode::BinaryAdd
            | Opcode::BinarySubtract
            | Opcode::BinaryMultiply
            | Opcode::BinaryTrueDivide
            | Opcode::BinaryPower
            | Opcode::BinaryModulo
            | Opcode::CompareOp => self.generic_binary(frame, ins)?,
            Opcode::UnaryNegative => {
                let h = self.top_handle(frame);
                self.heap.counters.dyn_dispatches += 1;
                let r = generic::negate(&mut self.heap, h)?;
                self.set_top(r);
                self.heap.decref(h).map_err(internal)?;
            }
            Opcode::PopJumpIfFalse | Opcode::PopJumpIfTrue => {
                let h = self.pop_handle(frame);
                let t = self.heap.truthy(h);
                self.heap.decref(h).map_err(internal)?;
                if t == (ins.op == Opcode::PopJumpIfTrue) {
                    frame.pc = arg;
                }
            }
            Opcode::JumpAbsolute => frame.pc = arg,
            Opcode::CallFunction => return self.call_function(arg),
            Opcode::ReturnValue => return Ok(Step::Return),
            op => unreachable!("{op:?} is not tier 0"),
        }
        Ok(Step::Continue)
    }

    fn unbound(&self, frame: &Frame, slot: usize) -> GuestError {
        let name = &self.functions[frame.func].local_names[slot];
        GuestError::new("NameError", format!("local variable '{name}' referenced before assignment"))
    }

    fn generic_binary(&mut self, frame: &mut Frame, ins: Instruction) -> Result<(), Exit> {
        let w = self.pop_handle(frame);
        let v = self.top_handle(frame);
        self.heap.counters.dyn_dispatches += 1;
        let x = match generic::binary(&mut self.heap, ins.op, ins.arg, v, w) {
            Ok(x) => x,
            Err(e) => return Err(self.fail_binary(w, e)),
        };
        let (tv, tw) = (self.heap.type_tag(v), self.heap.type_tag(w));
        self.finish_binary(frame, v, w, x)?;
        if self.config.tier != Tier::Baseline && tv == tw {
            let pc = frame.pc - 1;
            let code = &mut self.functions[frame.func];
            if code.miss_counts[pc] < self.config.miss_limit {
                if let Some(d) = specialize1(ins.op, tv) {
                    code.quicken(pc, d, &mut self.heap.counters).map_err(internal)?;
                }
            }
        }
        Ok(())
    }

    fn call_function(&mut self, argc: usize) -> Result<Step, Exit> {
        let base = self.stack.len() - argc;
        let callee = self.stack[base - 1].0 as Handle;
        let target = match *self.heap.payload(callee) {
            Payload::Function(f) => Ok(f),
            ref p => Err(p.type_tag()),
        };
        self.heap.decref(callee).map_err(internal)?;
        match target {
            // the callee word under the arguments is dropped with them
            Ok(FunctionRef::Guest(i)) => Ok(Step::Call(self.enter(i as usize, argc, 1)?)),
            Ok(f) => {
                let mut inline = [0 as Handle; 4];
                let spilled: Vec<Handle>;
                let args: &[Handle] = if argc <= inline.len() {
                    for (d, w) in inline.iter_mut().zip(&self.stack[base..]) {
                        *d = w.0 as Handle;
                    }
                    &inline[..argc]
                } else {
                    spilled = self.stack[base..].iter().map(|w| w.0 as Handle).collect();
                    &spilled
                };
                self.stack.truncate(base - 1);
                let r = match f {
                    FunctionRef::Builtin(b) => match crate::bytecode::Builtin::from_index(b) {
                        Some(b) => match builtins::fast_call(self, b, args) {
                            Some(r) => r,
                            None => builtins::call(self, b, args),
                        },
                        None => return Err(internal("bad builtin").into()),
                    },
                    FunctionRef::Guest(_) => unreachable!("handled above"),
                };
                for &a in args {
                    self.heap.decref(a).map_err(internal)?;
                }
                self.push_handle(r?);
                Ok(Step::Continue)
            }
            Err(t) => {
                let args = self.stack.split_off(base);
                self.stack.truncate(base - 1);
                for a in args {
                    self.heap.decref(a.0 as Handle).map_err(internal)?;
                }
                Err(not_callable(t).into())
            }
        }
    }

    // -- helpers shared with the generated derivatives ----------------------

    #[inline]
    fn push_handle(&mut self, h: Handle) {
        self.stack.push(Word(h as u64));
    }

    #[inline]
    fn pop_handle(&mut self, _frame: &Frame) -> Handle {
        self.stack.pop().expect("operand stack underflow").0 as Handle
    }

    #[inline]
    fn top_handle(&self, _frame: &Frame) -> Handle {
        self.stack.last().expect("operand stack underflow").0 as Handle
    }

    #[inline]
    fn set_top(&mut self, h: Handle) {
        *self.stack.last_mut().expect("operand stack underflow") = Word(h as u64);
    }

    /// Replace the left operand on top of the stack with the result and
    /// release both operands.
    #[inline]
    fn finish_binary(&mut self, _frame: &Frame, v: Handle, w: Handle, x: Handle) -> Result<(), Exit> {
        self.set_top(x);
        self.heap.decref(v).map_err(internal)?;
        self.heap.decref(w).map_err(internal)?;
        Ok(())
    }

    /// Error exit from a binary operation after the right operand was popped.
    fn fail_binary(&mut self, w: Handle, e: GuestError) -> Exit {
        match self.heap.decref(w) {
            Ok(()) => e.into(),
            Err(ie) => internal(ie).into(),
        }
    }

    /// Guard failure in a tier-1 instruction: run the parent's generic path.
    fn inca_miss(&mut self, frame: &mut Frame, v: Handle, w: Handle) -> Result<(), Exit> {
        let pc = frame.pc - 1;
        let ins = self.functions[frame.func].instructions[pc];
        let parent = root(ins.op);
        self.heap.counters.guard_misses += 1;
        self.heap.counters.dyn_dispatches += 1;
        let x = match generic::binary(&mut self.heap, parent, ins.arg, v, w) {
            Ok(x) => x,
            Err(e) => return Err(self.fail_binary(w, e)),
        };
        self.finish_binary(frame, v, w, x)?;
        let code = &mut self.functions[frame.func];
        let misses = &mut code.miss_counts[pc];
        *misses = misses.saturating_add(1);
        if *misses >= self.config.miss_limit {
            code.generalize_to(pc, parent).map_err(internal)?;
        }
        Ok(())
    }

    fn audit_guard(&mut self, v: Handle, w: Handle, ty: TypeTag) {
        self.audit.guard_checks += 1;
        let (a, b) = (self.heap.type_tag(v), self.heap.type_tag(w));
        if a != ty || b != ty {
            self.audit.violations.push(format!("tier-1 fast path for {ty} ran on ({a}, {b})"));
        }
    }

    /// Mark the sequence starting at the current load as active. Returns
    /// true when the dedicated runner should execute it.
    #[inline(always)]
    fn enter_sequence(&mut self, frame: &mut Frame) -> Result<bool, Exit> {
        if frame.active_seq.is_none() {
            return self.begin_sequence(frame);
        }
        Ok(false)
    }

    #[inline(always)]
    fn begin_sequence(&mut self, frame: &mut Frame) -> Result<bool, Exit> {
        let pc = frame.pc - 1;
        let code = &self.functions[frame.func];
        let Some(index) = code.sequence_starting_at(pc) else {
            return Err(outside_sequence(pc).into());
        };
        frame.active_seq = Some(index);
        frame.seq_entry_depth = self.stack.len();
        if self.config.audit {
            // audit checks run per instruction on the shared stack
            self.seq_mark = self.heap.counters;
            return Ok(false);
        }
        Ok(code.sequences[index].max_words <= SEQ_STACK_WORDS)
    }

    #[inline(always)]
    fn leave_sequence(&mut self, frame: &mut Frame) {
        if self.config.audit {
            self.audit_sequence_exit(frame);
        }
        frame.active_seq = None;
    }

    #[cold]
    #[inline(never)]
    fn audit_sequence_exit(&mut self, frame: &Frame) {
        self.audit.sequence_checks += 1;
        let d = self.heap.counters.delta(&self.seq_mark);
        if d.box_allocs != 0 || d.rc_ops != 0 {
            let name = &self.functions[frame.func].name;
            self.audit.violations.push(format!(
                "sequence interior in {name} before pc {} allocated {} and made {} rc ops",
                frame.pc - 1,
                d.box_allocs,
                d.rc_ops
            ));
        }
    }

    /// The local read by a tier-2 load, before its type guard.
    #[inline]
    fn guarded_local(&mut self, frame: &Frame, slot: u32) -> Result<Handle, Exit> {
        let pc = frame.pc - 1;
        if self.fault_pending {
            if let Some(site) = self.config.fault {
                if site.function == frame.func && site.pc == pc {
                    self.fault_pending = false;
                    return Err(Exit::Deopt(DeoptReason::GuardFail { pc }));
                }
            }
        }
        let h = self.locals[frame.locals_base + slot as usize];
        if h == UNBOUND {
            return Err(Exit::Deopt(DeoptReason::GuardFail { pc }));
        }
        Ok(h)
    }

    #[inline]
    fn push_const_words(&mut self, frame: &Frame, index: u32, width: usize) {
        let w = self.functions[frame.func].const_words[index as usize];
        self.stack.extend_from_slice(&w[..width]);
    }

    #[inline(always)]
    fn store_local(&mut self, frame: &Frame, slot: u32, h: Handle) -> Result<(), Exit> {
        let old = std::mem::replace(&mut self.locals[frame.locals_base + slot as usize], h);
        if old != UNBOUND {
            self.heap.decref(old).map_err(internal)?;
        }
        Ok(())
    }

    #[inline]
    fn pop_word(&mut self) -> Word {
        self.stack.pop().expect("operand stack underflow")
    }

    #[inline]
    fn pop_i64(&mut self) -> i64 {
        crate::values::word::i64_of_word(self.pop_word())
    }

    #[inline]
    fn push_i64(&mut self, v: i64) {
        self.stack.push(crate::values::word::word_of_i64(v));
    }

    #[inline]
    fn pop_f64(&mut self) -> f64 {
        crate::values::word::f64_of_word(self.pop_word())
    }

    #[inline]
    fn push_f64(&mut self, v: f64) {
        self.stack.push(crate::values::word::word_of_f64(v));
    }

    #[inline]
    fn pop_complex(&mut self) -> Complex {
        let im = self.pop_f64();
        let re = self.pop_f64();
        Complex::new(re, im)
    }

    #[inline]
    fn push_complex(&mut self, c: Complex) {
        self.push_f64(c.re);
        self.push_f64(c.im);
    }

    #[inline]
    fn pop_bool(&mut self) -> bool {
        self.pop_word().0 != 0
    }

    #[inline]
    fn push_bool(&mut self, b: bool) {
        self.stack.push(Word(b as u64));
    }

    // -- audit ---------------------------------------------------------------

    fn audit_before(&mut self, frame: &Frame, ins: Instruction) {
        let code = &self.functions[frame.func];
        let pc = frame.pc;
        let words = self.stack.len() - frame.stack_base;
        self.audit.depth_checks += 1;
        if words > code.stack_capacity() {
            self.audit.violations.push(format!(
                "{} pc {pc}: {words} stack words exceed capacity {}",
                code.name,
                code.stack_capacity()
            ));
        }
        match frame.active_seq {
            None => {
                let expected = code.depth_at[pc].map(|d| d as usize);
                if expected != Some(words) {
                    self.audit.violations.push(format!(
                        "{} pc {pc}: stack depth {words}, static simulation {expected:?}",
                        code.name
                    ));
                }
            }
            Some(i) => {
                let seq = &code.sequences[i];
                let expected = frame.seq_entry_depth - frame.stack_base + seq.words_before(pc);
                if expected != words {
                    self.audit.violations.push(format!(
                        "{} pc {pc}: {words} words inside sequence, layout needs {expected}",
                        code.name
                    ));
                }
            }
        }
        self.audit_region(frame, ins);
    }

    /// Compare concrete tags at tier 1 against analysis results.
    fn audit_region(&mut self, frame: &Frame, ins: Instruction) {
        let pc = frame.pc;
        let regions = &self.audit_regions[frame.func];
        if regions.is_empty() {
            return;
        }
        if let Some(r) = regions.iter().position(|(s, _)| s.start_pc == pc) {
            // Once a guard has been generalized away the window is no longer
            // protected, so a type change needs no miss.
            let (seq, ops) = &regions[r];
            let code = &self.functions[frame.func].instructions[seq.start_pc..=seq.end_pc];
            if code.iter().map(|i| i.op).ne(ops.iter().copied()) {
                self.region_visit = None;
                return;
            }
            self.region_visit = Some(RegionVisit {
                func: frame.func,
                region: r,
                misses_at_entry: self.heap.counters.guard_misses,
                mismatch: false,
            });
        }
        let Some(mut visit) = self.region_visit else { return };
        if visit.func != frame.func {
            return;
        }
        let seq = &regions[visit.region].0;
        if !seq.contains(pc) {
            self.region_visit = None;
            return;
        }
        if ins.op == Opcode::LoadFast {
            self.audit.absint_checks += 1;
            let h = self.locals[frame.locals_base + ins.arg as usize];
            let actual = if h == UNBOUND { TypeTag::Unknown } else { self.heap.type_tag(h) };
            visit.mismatch |= actual != seq.type_at(pc);
        }
        if pc == seq.end_pc {
            if visit.mismatch && self.heap.counters.guard_misses == visit.misses_at_entry {
                self.audit.violations.push(format!(
                    "{} {}..{}: loaded tags disagree with analysis without a guard miss",
                    self.functions[frame.func].name, seq.start_pc, seq.end_pc
                ));
            }
            self.region_visit = None;
        } else {
            self.region_visit = Some(visit);
        }
    }
}

const SEQ_STACK_WORDS: usize = 8;

/// Operand words of a running tier-2 sequence. Kept local to the runner so
/// the top index can live in a register.
struct SeqStack {
    words: [Word; SEQ_STACK_WORDS],
    len: usize,
}

impl SeqStack {
    #[inline(always)]
    fn new() -> SeqStack {
        SeqStack { words: [Word(0); SEQ_STACK_WORDS], len: 0 }
    }

    #[inline(always)]
    fn push_word(&mut self, w: Word) {
        self.words[self.len] = w;
        self.len += 1;
    }

    #[inline(always)]
    fn pop_word(&mut self) -> Word {
        self.len -= 1;
        self.words[self.len]
    }

    #[inline(always)]
    fn push_const(&mut self, w: [Word; 2], width: usize) {
        for &x in &w[..width] {
            self.push_word(x);
        }
    }

    #[inline(always)]
    fn pop_i64(&mut self) -> i64 {
        crate::values::word::i64_of_word(self.pop_word())
    }

    #[inline(always)]
    fn push_i64(&mut self, v: i64) {
        self.push_word(crate::values::word::word_of_i64(v));
    }

    #[inline(always)]
    fn pop_f64(&mut self) -> f64 {
        crate::values::word::f64_of_word(self.pop_word())
    }

    #[inline(always)]
    fn push_f64(&mut self, v: f64) {
        self.push_word(crate::values::word::word_of_f64(v));
    }

    #[inline(always)]
    fn pop_complex(&mut self) -> Complex {
        let im = self.pop_f64();
        let re = self.pop_f64();
        Complex::new(re, im)
    }

    #[inline(always)]
    fn push_complex(&mut self, c: Complex) {
        self.push_f64(c.re);
        self.push_f64(c.im);
    }

    #[inline(always)]
    fn pop_bool(&mut self) -> bool {
        self.pop_word().0 != 0
    }

    #[inline(always)]
    fn push_bool(&mut self, b: bool) {
        self.push_word(Word(b as u64));
    }
}

fn not_callable(t: TypeTag) -> GuestError {
    GuestError::type_error(format!("'{t}' object is not callable"))
}

include!(concat!(env!("OUT_DIR"), "/derived_exec.rs"));

#[cfg(test)]
mod tests;
