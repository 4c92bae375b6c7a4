use num_bigint::BigInt;

use super::ast::Pos;
use super::FrontendError;
use crate::values::IntVal;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(IntVal),
    Float(f64),
    Imag(f64),
    Str(String),
    Def,
    If,
    Else,
    While,
    Return,
    Not,
    True,
    False,
    None,
    Plus,
    Minus,
    Star,
    StarStar,
    Slash,
    Percent,
    Lt,
    Le,
    EqEq,
    Ne,
    Gt,
    Ge,
    Assign,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Semi,
    Newline,
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, FrontendError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut paren_depth = 0usize;

    macro_rules! err {
        ($pos:expr, $($arg:tt)*) => {
            return Err(FrontendError::Syntax { line: $pos.line, col: $pos.col, message: format!($($arg)*) })
        };
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let advance = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        match c {
            '\n' => {
                if paren_depth == 0 {
                    out.push(Token { tok: Tok::Newline, pos });
                }
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => advance(1, &mut i, &mut col),
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '0'..='9' | '.' if c != '.' || chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                let start = i;
                let mut is_float = false;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                    i += 1;
                }
                if i < chars.len() && chars[i] == '.' {
                    is_float = true;
                    i += 1;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        is_float = true;
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().filter(|&&c| c != '_').collect();
                let imag = i < chars.len() && (chars[i] == 'j' || chars[i] == 'J');
                let tok = if imag {
                    i += 1;
                    match text.parse::<f64>() {
                        Ok(v) => Tok::Imag(v),
                        Err(_) => err!(pos, "malformed imaginary literal '{text}j'"),
                    }
                } else if is_float {
                    match text.parse::<f64>() {
                        Ok(v) => Tok::Float(v),
                        Err(_) => err!(pos, "malformed float literal '{text}'"),
                    }
                } else {
                    match text.parse::<BigInt>() {
                        Ok(v) => Tok::Int(IntVal::from_big(v)),
                        Err(_) => err!(pos, "malformed integer literal '{text}'"),
                    }
                };
                if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    err!(pos, "invalid character '{}' after number", chars[i]);
                }
                col += (i - start) as u32;
                out.push(Token { tok, pos });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += (i - start) as u32;
                let tok = match word.as_str() {
                    "def" => Tok::Def,
                    "if" => Tok::If,
                    "else" => Tok::Else,
                    "while" => Tok::While,
                    "return" => Tok::Return,
                    "not" => Tok::Not,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "none" => Tok::None,
                    _ => Tok::Ident(word),
                };
                out.push(Token { tok, pos });
            }
            '"' => {
                i += 1;
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.get(i) {
                        None | Some('\n') => err!(pos, "unterminated string literal"),
                        Some('"') => {
                            i += 1;
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            let esc = match chars.get(i + 1) {
                                Some('n') => '\n',
                                Some('t') => '\t',
                                Some('\\') => '\\',
                                Some('"') => '"',
                                Some(other) => err!(Pos { line, col }, "unknown escape '\\{other}'"),
                                None => err!(pos, "unterminated string literal"),
                            };
                            s.push(esc);
                            i += 2;
                            col += 2;
                        }
                        Some(&ch) => {
                            s.push(ch);
                            i += 1;
                            col += 1;
                        }
                    }
                }
                out.push(Token { tok: Tok::Str(s), pos });
            }
            _ => {
                let next = chars.get(i + 1).copied();
                let (tok, len) = match (c, next) {
                    ('*', Some('*')) => (Tok::StarStar, 2),
                    ('<', Some('=')) => (Tok::Le, 2),
                    ('>', Some('=')) => (Tok::Ge, 2),
                    ('=', Some('=')) => (Tok::EqEq, 2),
                    ('!', Some('=')) => (Tok::Ne, 2),
                    ('+', _) => (Tok::Plus, 1),
                    ('-', _) => (Tok::Minus, 1),
                    ('*', _) => (Tok::Star, 1),
                    ('/', _) => (Tok::Slash, 1),
                    ('%', _) => (Tok::Percent, 1),
                    ('<', _) => (Tok::Lt, 1),
                    ('>', _) => (Tok::Gt, 1),
                    ('=', _) => (Tok::Assign, 1),
                    ('(', _) => {
                        paren_depth += 1;
                        (Tok::LParen, 1)
                    }
                    (')', _) => {
                        paren_depth = paren_depth.saturating_sub(1);
                        (Tok::RParen, 1)
                    }
                    ('{', _) => (Tok::LBrace, 1),
                    ('}', _) => (Tok::RBrace, 1),
                    (',', _) => (Tok::Comma, 1),
                    (':', _) => (Tok::Colon, 1),
                    (';', _) => (Tok::Semi, 1),
                    _ => err!(pos, "unexpected character '{c}'"),
                };
                advance(len, &mut i, &mut col);
                out.push(Token { tok, pos });
            }
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}
