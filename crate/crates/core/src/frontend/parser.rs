use super::ast::{BinOp, Cond, Expr, FunctionDef, Pos, Program, Stmt};
use super::lexer::{Tok, Token};
use super::FrontendError;
use crate::values::{numeric, CompareKind};

pub struct Parser {
    toks: Vec<Token>,
    at: usize,
}

type PResult<T> = Result<T, FrontendError>;

impl Parser {
    pub fn new(toks: Vec<Token>) -> Parser {
        Parser { toks, at: 0 }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let pos = self.pos();
        Err(FrontendError::Syntax { line: pos.line, col: pos.col, message: message.into() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => self.error(format!("expected {what}, found {}", describe(&other))),
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    pub fn program(&mut self) -> PResult<Program> {
        let mut program = Program { functions: Vec::new(), body: Vec::new() };
        loop {
            self.skip_separators();
            match self.peek() {
                Tok::Eof => return Ok(program),
                Tok::Def => program.functions.push(self.function()?),
                _ => program.body.push(self.statement()?),
            }
        }
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let pos = self.pos();
        self.expect(Tok::Def, "'def'")?;
        let name = self.ident("function name")?;
        self.expect(Tok::LParen, "'('")?;
        let mut params = Vec::new();
        if !self.eat(&Tok::RParen) {
            loop {
                params.push(self.ident("parameter name")?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "',' or ')'")?;
            }
        }
        let body = self.block()?;
        Ok(FunctionDef { name, params, body, pos })
    }

    /// `{ stmt* }` or `: stmt`.
    fn block(&mut self) -> PResult<Vec<Stmt>> {
        if self.eat(&Tok::LBrace) {
            let mut body = Vec::new();
            loop {
                self.skip_separators();
                if self.eat(&Tok::RBrace) {
                    return Ok(body);
                }
                if *self.peek() == Tok::Eof {
                    return self.error("unterminated block, expected '}'");
                }
                body.push(self.statement()?);
            }
        } else if self.eat(&Tok::Colon) {
            Ok(vec![self.statement()?])
        } else {
            self.error(format!("expected '{{' or ':', found {}", describe(self.peek())))
        }
    }

    fn end_of_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Newline | Tok::Semi => {
                self.bump();
                Ok(())
            }
            Tok::RBrace | Tok::Eof => Ok(()),
            other => self.error(format!("expected end of statement, found {}", describe(other))),
        }
    }

    fn statement(&mut self) -> PResult<Stmt> {
        match self.peek().clone() {
            Tok::If => self.if_statement(),
            Tok::While => {
                self.bump();
                let cond = self.condition()?;
                let body = self.block()?;
                Ok(Stmt::While { cond, body })
            }
            Tok::Return => {
                self.bump();
                let value = match self.peek() {
                    Tok::Newline | Tok::Semi | Tok::RBrace | Tok::Eof => None,
                    _ => Some(self.expr()?),
                };
                self.end_of_statement()?;
                Ok(Stmt::Return(value))
            }
            Tok::Def => self.error("function definitions are only allowed at top level"),
            Tok::Ident(name) if self.toks.get(self.at + 1).map(|t| &t.tok) == Some(&Tok::Assign) => {
                let pos = self.pos();
                self.bump();
                self.bump();
                let value = self.expr()?;
                self.end_of_statement()?;
                Ok(Stmt::Assign { name, value, pos })
            }
            _ => {
                let e = self.expr()?;
                self.end_of_statement()?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    fn if_statement(&mut self) -> PResult<Stmt> {
        self.expect(Tok::If, "'if'")?;
        let cond = self.condition()?;
        let then = self.block()?;
        // `else` may follow on a later line
        let save = self.at;
        while *self.peek() == Tok::Newline {
            self.bump();
        }
        let otherwise = if self.eat(&Tok::Else) {
            if *self.peek() == Tok::If {
                vec![self.if_statement()?]
            } else {
                self.block()?
            }
        } else {
            self.at = save;
            Vec::new()
        };
        Ok(Stmt::If { cond, then, otherwise })
    }

    fn condition(&mut self) -> PResult<Cond> {
        let negated = self.eat(&Tok::Not);
        Ok(Cond { negated, expr: self.expr()? })
    }

    pub fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let kind = match self.peek() {
            Tok::Lt => CompareKind::Lt,
            Tok::Le => CompareKind::Le,
            Tok::EqEq => CompareKind::Eq,
            Tok::Ne => CompareKind::Ne,
            Tok::Gt => CompareKind::Gt,
            Tok::Ge => CompareKind::Ge,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.additive()?;
        if matches!(self.peek(), Tok::Lt | Tok::Le | Tok::EqEq | Tok::Ne | Tok::Gt | Tok::Ge) {
            return self.error("chained comparisons are not supported");
        }
        Ok(Expr::Compare(kind, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            let operand = self.unary()?;
            return Ok(negate(operand));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if self.eat(&Tok::StarStar) {
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let Token { tok, pos } = self.bump();
        Ok(match tok {
            Tok::Int(v) => Expr::Int(v),
            Tok::Float(v) => Expr::Float(v),
            Tok::Imag(v) => Expr::Complex(0.0, v),
            Tok::Str(s) => Expr::Str(s),
            Tok::True => Expr::Bool(true),
            Tok::False => Expr::Bool(false),
            Tok::None => Expr::None,
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                e
            }
            Tok::Ident(name) => {
                if self.eat(&Tok::LParen) {
                    let mut args = Vec::new();
                    if !self.eat(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma, "',' or ')'")?;
                        }
                    }
                    Expr::Call { callee: name, args, pos }
                } else {
                    Expr::Var(name, pos)
                }
            }
            other => {
                self.at -= 1;
                return self.error(format!("expected expression, found {}", describe(&other)));
            }
        })
    }
}

/// Unary minus folds into numeric literals.
fn negate(e: Expr) -> Expr {
    match e {
        Expr::Int(v) => Expr::Int(numeric::int_neg(&v)),
        Expr::Float(v) => Expr::Float(-v),
        Expr::Complex(re, im) => Expr::Complex(-re, -im),
        other => Expr::Neg(Box::new(other)),
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(n) => format!("identifier '{n}'"),
        Tok::Int(v) => format!("integer {v}"),
        Tok::Float(v) => format!("number {v}"),
        Tok::Imag(v) => format!("number {v}j"),
        Tok::Str(_) => "string literal".to_string(),
        Tok::Newline => "end of line".to_string(),
        Tok::Eof => "end of input".to_string(),
        other => format!("'{}'", symbol(other)),
    }
}

fn symbol(tok: &Tok) -> &'static str {
    match tok {
        Tok::Def => "def",
        Tok::If => "if",
        Tok::Else => "else",
        Tok::While => "while",
        Tok::Return => "return",
        Tok::Not => "not",
        Tok::True => "true",
        Tok::False => "false",
        Tok::None => "none",
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::StarStar => "**",
        Tok::Slash => "/",
        Tok::Percent => "%",
        Tok::Lt => "<",
        Tok::Le => "<=",
        Tok::EqEq => "==",
        Tok::Ne => "!=",
        Tok::Gt => ">",
        Tok::Ge => ">=",
        Tok::Assign => "=",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::LBrace => "{",
        Tok::RBrace => "}",
        Tok::Comma => ",",
        Tok::Colon => ":",
        Tok::Semi => ";",
        _ => "?",
    }
}
