use std::collections::HashMap;

use super::ast::{BinOp, Cond, Expr, FunctionDef, Pos, Program, Stmt};
use super::FrontendError;
use crate::bytecode::{Builtin, CodeObject, Constant, Global, Instruction, Module, Opcode};

pub const MODULE_NAME: &str = "<module>";

pub fn compile(program: &Program) -> Result<Module, FrontendError> {
    let mut globals: Vec<Global> = Builtin::ALL.iter().map(|&b| Global::Builtin(b)).collect();
    let mut global_names: Vec<String> = Builtin::ALL.iter().map(|b| b.name().to_string()).collect();
    for (i, f) in program.functions.iter().enumerate() {
        if global_names.contains(&f.name) {
            return Err(compile_error(f.pos, format!("duplicate definition of '{}'", f.name)));
        }
        global_names.push(f.name.clone());
        globals.push(Global::Function(i));
    }
    let global_index: HashMap<&str, u32> =
        global_names.iter().enumerate().map(|(i, n)| (n.as_str(), i as u32)).collect();

    let mut functions = Vec::with_capacity(program.functions.len() + 1);
    for f in &program.functions {
        functions.push(FunctionCompiler::new(&f.params, &f.body, &global_index)?.finish(f)?);
    }
    let main_def = FunctionDef {
        name: MODULE_NAME.to_string(),
        params: Vec::new(),
        body: program.body.clone(),
        pos: Pos { line: 1, col: 1 },
    };
    functions.push(FunctionCompiler::new(&[], &program.body, &global_index)?.finish(&main_def)?);
    let main = functions.len() - 1;
    Ok(Module { functions, globals, global_names, main })
}

fn compile_error(pos: Pos, message: String) -> FrontendError {
    FrontendError::Compile { line: pos.line, col: pos.col, message }
}

struct FunctionCompiler<'g> {
    locals: Vec<String>,
    globals: &'g HashMap<&'g str, u32>,
    code: Vec<Instruction>,
    constants: Vec<Constant>,
}

impl<'g> FunctionCompiler<'g> {
    fn new(
        params: &[String],
        body: &[Stmt],
        globals: &'g HashMap<&'g str, u32>,
    ) -> Result<Self, FrontendError> {
        let mut locals: Vec<String> = Vec::new();
        for p in params {
            if locals.contains(p) {
                return Err(compile_error(Pos::default(), format!("duplicate parameter '{p}'")));
            }
            locals.push(p.clone());
        }
        collect_assigned(body, &mut locals);
        Ok(FunctionCompiler { locals, globals, code: Vec::new(), constants: Vec::new() })
    }

    fn finish(mut self, def: &FunctionDef) -> Result<CodeObject, FrontendError> {
        for s in &def.body {
            self.stmt(s)?;
        }
        if !matches!(def.body.last(), Some(Stmt::Return(_))) {
            let none = self.constant(Constant::None);
            self.emit(Opcode::LoadConst, none);
            self.emit(Opcode::ReturnValue, 0);
        }
        Ok(CodeObject::new(def.name.clone(), def.params.len(), self.locals, self.code, self.constants))
    }

    fn emit(&mut self, op: Opcode, arg: u32) -> usize {
        self.code.push(Instruction::new(op, arg));
        self.code.len() - 1
    }

    fn here(&self) -> u32 {
        self.code.len() as u32
    }

    fn patch(&mut self, at: usize, target: u32) {
        self.code[at].arg = target;
    }

    fn constant(&mut self, c: Constant) -> u32 {
        if let Some(i) = self.constants.iter().position(|k| k.same(&c)) {
            return i as u32;
        }
        self.constants.push(c);
        (self.constants.len() - 1) as u32
    }

    fn local(&self, name: &str) -> Option<u32> {
        self.locals.iter().position(|l| l == name).map(|i| i as u32)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), FrontendError> {
        match s {
            Stmt::Assign { name, value, .. } => {
                self.expr(value)?;
                let slot = self.local(name).expect("assigned names are collected as locals");
                self.emit(Opcode::StoreFast, slot);
            }
            Stmt::Expr(e) => {
                self.expr(e)?;
                self.emit(Opcode::PopTop, 0);
            }
            Stmt::Return(value) => {
                match value {
                    Some(e) => self.expr(e)?,
                    None => {
                        let none = self.constant(Constant::None);
                        self.emit(Opcode::LoadConst, none);
                    }
                }
                self.emit(Opcode::ReturnValue, 0);
            }
            Stmt::If { cond, then, otherwise } => {
                let to_else = self.branch_unless(cond)?;
                for s in then {
                    self.stmt(s)?;
                }
                if otherwise.is_empty() {
                    let end = self.here();
                    self.patch(to_else, end);
                } else {
                    let to_end = self.emit(Opcode::JumpAbsolute, 0);
                    let else_start = self.here();
                    self.patch(to_else, else_start);
                    for s in otherwise {
                        self.stmt(s)?;
                    }
                    let end = self.here();
                    self.patch(to_end, end);
                }
            }
            Stmt::While { cond, body } => {
                let head = self.here();
                let exit = self.branch_unless(cond)?;
                for s in body {
                    self.stmt(s)?;
                }
                self.emit(Opcode::JumpAbsolute, head);
                let end = self.here();
                self.patch(exit, end);
            }
        }
        Ok(())
    }

    /// Evaluates the condition and emits a jump taken when it does not hold.
    fn branch_unless(&mut self, cond: &Cond) -> Result<usize, FrontendError> {
        self.expr(&cond.expr)?;
        let op = if cond.negated { Opcode::PopJumpIfTrue } else { Opcode::PopJumpIfFalse };
        Ok(self.emit(op, 0))
    }

    fn expr(&mut self, e: &Expr) -> Result<(), FrontendError> {
        match e {
            Expr::Int(v) => self.load_const(Constant::Int(v.clone())),
            Expr::Float(v) => self.load_const(Constant::Float(*v)),
            Expr::Complex(re, im) => {
                self.load_const(Constant::Complex(crate::values::Complex::new(*re, *im)))
            }
            Expr::Str(s) => self.load_const(Constant::Str(s.clone())),
            Expr::Bool(b) => self.load_const(Constant::Bool(*b)),
            Expr::None => self.load_const(Constant::None),
            Expr::Var(name, pos) => self.load_name(name, *pos)?,
            Expr::Binary(op, lhs, rhs) => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                self.emit(binary_opcode(*op), 0);
            }
            Expr::Compare(kind, lhs, rhs) => {
                self.expr(lhs)?;
                self.expr(rhs)?;
                self.emit(Opcode::CompareOp, kind.as_arg());
            }
            Expr::Neg(operand) => {
                self.expr(operand)?;
                self.emit(Opcode::UnaryNegative, 0);
            }
            Expr::Call { callee, args, pos } => {
                self.load_name(callee, *pos)?;
                for a in args {
                    self.expr(a)?;
                }
                self.emit(Opcode::CallFunction, args.len() as u32);
            }
        }
        Ok(())
    }

    fn load_const(&mut self, c: Constant) {
        let i = self.constant(c);
        self.emit(Opcode::LoadConst, i);
    }

    fn load_name(&mut self, name: &str, pos: Pos) -> Result<(), FrontendError> {
        if let Some(slot) = self.local(name) {
            self.emit(Opcode::LoadFast, slot);
        } else if let Some(&g) = self.globals.get(name) {
            self.emit(Opcode::LoadGlobal, g);
        } else {
            return Err(compile_error(pos, format!("unknown name '{name}'")));
        }
        Ok(())
    }
}

fn binary_opcode(op: BinOp) -> Opcode {
    match op {
        BinOp::Add => Opcode::BinaryAdd,
        BinOp::Sub => Opcode::BinarySubtract,
        BinOp::Mul => Opcode::BinaryMultiply,
        BinOp::Div => Opcode::BinaryTrueDivide,
        BinOp::Pow => Opcode::BinaryPower,
        BinOp::Mod => Opcode::BinaryModulo,
    }
}

fn collect_assigned(body: &[Stmt], locals: &mut Vec<String>) {
    for s in body {
        match s {
            Stmt::Assign { name, .. } => {
                if !locals.contains(name) {
                    locals.push(name.clone());
                }
            }
            Stmt::If { then, otherwise, .. } => {
                collect_assigned(then, locals);
                collect_assigned(otherwise, locals);
            }
            Stmt::While { body, .. } => collect_assigned(body, locals),
            Stmt::Return(_) | Stmt::Expr(_) => {}
        }
    }
}
