use crate::values::{CompareKind, IntVal};

/// Source position, 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Program {
    pub functions: Vec<FunctionDef>,
    /// Top-level statements, compiled into the module body.
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub pos: Pos,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Mod,
}

/// Condition of `if`/`while`; `not` flips the branch sense.
#[derive(Clone, Debug, PartialEq)]
pub struct Cond {
    pub negated: bool,
    pub expr: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Assign { name: String, value: Expr, pos: Pos },
    If { cond: Cond, then: Vec<Stmt>, otherwise: Vec<Stmt> },
    While { cond: Cond, body: Vec<Stmt> },
    Return(Option<Expr>),
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Int(IntVal),
    Float(f64),
    /// Complex literal with the given (real, imaginary) parts.
    Complex(f64, f64),
    Str(String),
    Bool(bool),
    None,
    Var(String, Pos),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(CompareKind, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call {
        callee: String,
        args: Vec<Expr>,
        pos: Pos,
    },
}
