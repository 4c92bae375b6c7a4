//! Guest language parser and bytecode compiler.
//!
//! Blocks are either braced (`{ ... }`) or a colon followed by a single
//! statement. Statements end at a newline or `;`. See `GRAMMAR.md` in the
//! crate root for the full grammar.

pub mod ast;
mod compiler;
mod lexer;
mod parser;

use thiserror::Error;

pub use compiler::{compile, MODULE_NAME};

use crate::bytecode::Module;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("compile error at {line}:{col}: {message}")]
    Compile { line: u32, col: u32, message: String },
}

pub fn parse(text: &str) -> Result<ast::Program, FrontendError> {
    let toks = lexer::tokenize(text)?;
    parser::Parser::new(toks).program()
}

pub fn compile_source(text: &str) -> Result<Module, FrontendError> {
    compile(&parse(text)?)
}
