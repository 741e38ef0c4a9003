//! Text syntax for rational expressions.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary | <juxtaposed number/ident/paren>)*
//! unary  := ('+' | '-') unary | power
//! power  := atom ('^' ['-'] integer | '^' '(' ['-'] integer ')')?
//! atom   := number | ident | '(' expr ')'
//! ```
//!
//! Numbers may carry a decimal point (`0.25` is read exactly as `1/4`).
//! `x1(x3+1)` is a product when `x1` is a variable; an undeclared identifier
//! or a known function name followed by `(` is rejected as non-rational.

use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use super::{Rational, Scalar, SymError, Var};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    NonRational(String),
    Arithmetic(SymError),
}

/// A parse failure with a 1-based source position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Syntax(msg) => {
                write!(f, "{}:{}: {}", self.line, self.column, msg)
            }
            ParseErrorKind::NonRational(name) => write!(
                f,
                "{}:{}: non-rational expression `{}(...)`; only + - * / ^ over variables and rationals are supported",
                self.line, self.column, name
            ),
            ParseErrorKind::Arithmetic(e) => write!(f, "{}:{}: {}", self.line, self.column, e),
        }
    }
}

impl std::error::Error for ParseError {}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
}

fn lex(src: &str) -> Result<Lexer, (usize, String)> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut int_part = String::new();
            while i < chars.len() && chars[i].is_ascii_digit() {
                int_part.push(chars[i]);
                i += 1;
            }
            let mut frac_part = String::new();
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    frac_part.push(chars[i]);
                    i += 1;
                }
            }
            let digits = format!("{int_part}{frac_part}");
            let n: BigInt = if digits.is_empty() {
                BigInt::zero()
            } else {
                digits.parse().map_err(|_| (start, "bad number".to_string()))?
            };
            let d = num_traits::pow::pow(BigInt::from(10), frac_part.len());
            toks.push((Tok::Num(Rational::new(n, d)), start));
            continue;
        }
        if c.is_ascii_alphabetic() {
            let mut s = String::new();
            while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                s.push(chars[i]);
                i += 1;
            }
            toks.push((Tok::Ident(s), start));
            continue;
        }
        let t = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => return Err((start, format!("unexpected character `{c}`"))),
        };
        toks.push((t, start));
        i += 1;
    }
    toks.push((Tok::End, chars.len()));
    Ok(Lexer { toks })
}

/// Names that are always read as function calls when followed by `(`.
/// Any other declared variable followed by `(` is an implicit product.
const FUNCTION_NAMES: &[&str] = &[
    "sin", "cos", "tan", "exp", "log", "ln", "sqrt", "abs", "sinh", "cosh", "tanh", "atan",
    "asin", "acos", "sign", "min", "max", "pow",
];

struct Parser<'a> {
    toks: &'a [(Tok, usize)],
    pos: usize,
    line: usize,
    col0: usize,
    resolve: &'a dyn Fn(&str) -> Option<Var>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn err_at(&self, offset: usize, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: self.line,
            column: self.col0 + offset,
            kind,
        }
    }

    fn syntax(&self, msg: impl Into<String>) -> ParseError {
        self.err_at(self.offset(), ParseErrorKind::Syntax(msg.into()))
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expr(&mut self) -> Result<Scalar, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Op('-') => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Scalar, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Tok::Op('/') => {
                    self.bump();
                    let at = self.offset();
                    let d = self.unary()?;
                    acc = acc
                        .checked_div(&d)
                        .map_err(|e| self.err_at(at, ParseErrorKind::Arithmetic(e)))?;
                }
                Tok::Num(_) | Tok::Ident(_) | Tok::LParen => {
                    acc = &acc * &self.power()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Scalar, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(-self.unary()?)
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn exponent(&mut self) -> Result<i32, ParseError> {
        let paren = matches!(self.peek(), Tok::LParen);
        if paren {
            self.bump();
        }
        let neg = matches!(self.peek(), Tok::Op('-'));
        if neg {
            self.bump();
        }
        let e = match self.bump() {
            Tok::Num(q) if q.is_integer() => {
                let n: i64 = q
                    .to_integer()
                    .try_into()
                    .map_err(|_| self.syntax("exponent too large"))?;
                i32::try_from(n).map_err(|_| self.syntax("exponent too large"))?
            }
            _ => return Err(self.syntax("expected an integer exponent")),
        };
        if paren {
            if !matches!(self.peek(), Tok::RParen) {
                return Err(self.syntax("expected `)`"));
            }
            self.bump();
        }
        Ok(if neg { -e } else { e })
    }

    fn power(&mut self) -> Result<Scalar, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek(), Tok::Op('^')) {
            self.bump();
            let at = self.offset();
            let e = self.exponent()?;
            return base
                .pow(e)
                .map_err(|err| self.err_at(at, ParseErrorKind::Arithmetic(err)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Scalar, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(q) => Ok(Scalar::from_rational(q)),
            Tok::Ident(name) => {
                let resolved = (self.resolve)(&name);
                if matches!(self.peek(), Tok::LParen)
                    && (resolved.is_none() || FUNCTION_NAMES.contains(&name.as_str()))
                {
                    return Err(self.err_at(at, ParseErrorKind::NonRational(name)));
                }
                match resolved {
                    Some(v) => Ok(Scalar::var(&v)),
                    None => Err(self.err_at(
                        at,
                        ParseErrorKind::Syntax(format!("undeclared identifier `{name}`")),
                    )),
                }
            }
            Tok::LParen => {
                let inner = self.expr()?;
                if !matches!(self.peek(), Tok::RParen) {
                    return Err(self.syntax("expected `)`"));
                }
                self.bump();
                Ok(inner)
            }
            Tok::End => Err(self.err_at(at, ParseErrorKind::Syntax("unexpected end of expression".into()))),
            t => Err(self.err_at(at, ParseErrorKind::Syntax(format!("unexpected token {t:?}")))),
        }
    }
}

/// Parses an expression in which every identifier is a variable.
pub fn parse_scalar(src: &str) -> Result<Scalar, ParseError> {
    parse_scalar_with(src, 1, 1, &|name| Some(Var::new(name)))
}

/// Parses with a caller-supplied identifier resolver and source position of
/// the first character (for error reporting inside larger files).
pub fn parse_scalar_with(
    src: &str,
    line: usize,
    column: usize,
    resolve: &dyn Fn(&str) -> Option<Var>,
) -> Result<Scalar, ParseError> {
    let lexer = lex(src).map_err(|(off, msg)| ParseError {
        line,
        column: column + off,
        kind: ParseErrorKind::Syntax(msg),
    })?;
    let mut p = Parser {
        toks: &lexer.toks,
        pos: 0,
        line,
        col0: column,
        resolve,
    };
    let s = p.expr()?;
    if !matches!(p.peek(), Tok::End) {
        return Err(p.syntax("trailing input"));
    }
    Ok(s)
}

/// Parses a rational literal such as `-3`, `2/5` or `0.125`.
pub fn parse_rational(src: &str) -> Result<Rational, ParseError> {
    let s = parse_scalar_with(src, 1, 1, &|_| None)?;
    s.constant_value().ok_or_else(|| ParseError {
        line: 1,
        column: 1,
        kind: ParseErrorKind::Syntax("expected a rational constant".into()),
    })
}
