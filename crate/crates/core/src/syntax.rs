//! Tokenizer and term-level parser shared by the fact, tree and rule formats.

use std::borrow::Cow;
use std::fmt;

use thiserror::Error;

use crate::kb::{Atom, Term, Var};
use crate::symbol::Sym;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {col}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Amp,
    Pipe,
    Tilde,
    Colon,
    ColonDash,
    Eq,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Str(s) => write!(f, "string {s:?}"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Tilde => f.write_str("`~`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::ColonDash => f.write_str("`:-`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Tokenizes `text`; `%` starts a comment running to end of line.
/// `first_line` offsets reported line numbers.
pub(crate) fn tokenize(text: &str, first_line: usize) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (first_line, 1usize);
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let bump = |chars: &mut std::iter::Peekable<std::str::Chars>, line: &mut usize, col: &mut usize| {
            let c = chars.next();
            if c == Some('\n') {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars, &mut line, &mut col);
            continue;
        }
        if c == '%' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                bump(&mut chars, &mut line, &mut col);
            }
            continue;
        }
        let tok = if c.is_alphanumeric() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_alphanumeric() || c == '_' {
                    s.push(c);
                    bump(&mut chars, &mut line, &mut col);
                } else {
                    break;
                }
            }
            Tok::Ident(s)
        } else if c == '"' {
            bump(&mut chars, &mut line, &mut col);
            let mut s = String::new();
            loop {
                match bump(&mut chars, &mut line, &mut col) {
                    None => {
                        return Err(SyntaxError {
                            line: tl,
                            col: tc,
                            message: "unterminated string".into(),
                        })
                    }
                    Some('"') => break,
                    Some('\\') => match bump(&mut chars, &mut line, &mut col) {
                        Some('n') => s.push('\n'),
                        Some('t') => s.push('\t'),
                        Some(c @ ('"' | '\\')) => s.push(c),
                        other => {
                            return Err(SyntaxError {
                                line,
                                col,
                                message: format!("invalid escape {other:?}"),
                            })
                        }
                    },
                    Some(c) => s.push(c),
                }
            }
            Tok::Str(s)
        } else {
            bump(&mut chars, &mut line, &mut col);
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                ',' => Tok::Comma,
                '.' => Tok::Dot,
                '&' => Tok::Amp,
                '|' => Tok::Pipe,
                '~' => Tok::Tilde,
                '=' => Tok::Eq,
                ':' => {
                    if chars.peek() == Some(&'-') {
                        bump(&mut chars, &mut line, &mut col);
                        Tok::ColonDash
                    } else {
                        Tok::Colon
                    }
                }
                other => {
                    return Err(SyntaxError {
                        line: tl,
                        col: tc,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
        };
        out.push(Spanned { tok, line: tl, col: tc });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}

pub(crate) struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    pub fn new(text: &str, first_line: usize) -> Result<Self, SyntaxError> {
        Ok(Parser { toks: tokenize(text, first_line)?, pos: 0 })
    }

    pub fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    pub fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    pub fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn error(&self, message: impl Into<String>) -> SyntaxError {
        let s = &self.toks[self.pos];
        SyntaxError { line: s.line, col: s.col, message: message.into() }
    }

    pub fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    pub fn expect(&mut self, want: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == want {
            self.next();
            Ok(())
        } else {
            Err(self.error(format!("expected {want}, found {}", self.peek())))
        }
    }

    pub fn eat(&mut self, want: &Tok) -> bool {
        if self.peek() == want {
            self.next();
            true
        } else {
            false
        }
    }

    pub fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            other => Err(self.error(format!("expected identifier, found {other}"))),
        }
    }

    /// A constant (bare lowercase/numeric identifier or string) or a variable.
    pub fn term(&mut self) -> Result<Term, SyntaxError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                if is_variable_name(&s) {
                    Ok(Term::Var(Var(Sym::new(&s))))
                } else {
                    Ok(Term::Const(Sym::new(&s)))
                }
            }
            Tok::Str(s) => {
                self.next();
                Ok(Term::Const(Sym::new(&s)))
            }
            other => Err(self.error(format!("expected a term, found {other}"))),
        }
    }

    /// A constant symbol, either bare or quoted.
    pub fn constant(&mut self) -> Result<Sym, SyntaxError> {
        match self.term()? {
            Term::Const(c) => Ok(c),
            Term::Var(v) => Err(self.error(format!("expected a constant, found variable {v}"))),
        }
    }

    pub fn atom(&mut self) -> Result<Atom, SyntaxError> {
        let name = self.ident()?;
        if is_variable_name(&name) {
            return Err(self.error(format!("predicate name `{name}` must start lowercase")));
        }
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::Comma) {
                    continue;
                }
                self.expect(Tok::RParen)?;
                break;
            }
        }
        Ok(Atom { predicate: Sym::new(&name), args })
    }
}

pub(crate) fn is_variable_name(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_uppercase() || c == '_')
}

/// Renders a constant so that it lexes back to the same symbol.
pub fn quote_constant(s: &str) -> Cow<'_, str> {
    let mut chars = s.chars();
    let bare = match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {
            chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        }
        _ => false,
    };
    if bare {
        Cow::Borrowed(s)
    } else {
        let mut out = String::with_capacity(s.len() + 2);
        out.push('"');
        for c in s.chars() {
            match c {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('"');
        Cow::Owned(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_round_trips() {
        for s in ["free", "don't", "Free", "#tag", "a b", "x\"y", "1", "caf\u{e9}", ""] {
            let q = quote_constant(s);
            let mut p = Parser::new(&q, 1).unwrap();
            assert_eq!(p.constant().unwrap(), Sym::new(s), "{s:?} rendered as {q}");
            assert!(p.at_eof());
        }
    }

    #[test]
    fn atom_parse_and_positions() {
        let mut p = Parser::new("p(a, X, \"b c\")", 1).unwrap();
        let a = p.atom().unwrap();
        assert_eq!(a.to_string(), "p(a, X, \"b c\")");
        let err = Parser::new("p(a,\n  $)", 3).err().unwrap();
        assert_eq!((err.line, err.col), (4, 3));
    }
}
