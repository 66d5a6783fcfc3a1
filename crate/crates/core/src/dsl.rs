//! Expression language for Weyl polynomials, maps and states.
//!
//! ```text
//! expr    := term (('+'|'-') term)*
//! term    := factor ('*' factor)*
//! factor  := complex | 'W(' vec ')' | 'adj(' expr ')' | 'rho(' map ',' expr ')' | '(' expr ')'
//! vec     := vatom ('+' vatom)*
//! vatom   := '[' INT ':' complex (',' INT ':' complex)* (';' 'excess' '=' FLOAT)? ']'
//!          | 'e(' INT ')' | complex '*' vatom | '(' vec ')'
//! complex := '-'? FLOAT (('+'|'-') FLOAT 'i')? | '-'? FLOAT 'i'
//! map     := 'gn(' INT ')' | 'shift' | 'perm(' INT (',' INT)* ')' | 'u(' matrix ')'
//! matrix  := '[' row (',' row)* ']' ;  row := '[' complex (',' complex)* ']'
//! state   := 'vacuum' | 'trace' | 'qf(' FLOAT | 'inf' ')' | 'pg(' FLOAT ',' FLOAT ')'
//!          | 'mix(' FLOAT '*' state ('+' FLOAT '*' state)* ')' | 'flat(' state ')'
//! ```
//!
//! Complex literals are read greedily, so `1+2i*e(0)` scales `e(0)` by
//! `1+2i`. `perm` lists the images of modes `0..L`, and `u` takes an `L×L`
//! block acting on the same modes.

use std::fmt::{self, Write as _};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{build_g_n, CVector, FiniteUnitary};
use crate::states::StateFunctional;
use crate::weyl::{adjoint, automorphism_image, word_mul, WeylPolynomial};

pub const MAX_INPUT: usize = 64 * 1024;
pub const MAX_DEPTH: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AddOp {
    Plus,
    Minus,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Scalar(Complex64),
    Weyl(VecExpr),
    /// At least two factors.
    Product(Vec<Expr>),
    /// A first term followed by at least one signed term.
    Sum(Box<Expr>, Vec<(AddOp, Expr)>),
    Adjoint(Box<Expr>),
    Apply(MapExpr, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum VecExpr {
    Literal { entries: Vec<(i64, Complex64)>, excess: Option<f64> },
    Basis(i64),
    Scaled(Complex64, Box<VecExpr>),
    /// At least two summands.
    Sum(Vec<VecExpr>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum MapExpr {
    Gn(i64),
    Shift,
    Perm(Vec<i64>),
    U(Vec<Vec<Complex64>>),
}

// ---------------------------------------------------------------- lexer

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Imag(f64),
    Ident(String),
    Sym(char),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    text: String,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, token: &str, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, token: token.to_string(), message: message.into() }
}

fn lex(src: &str) -> Result<Vec<Token>> {
    if src.len() > MAX_INPUT {
        return Err(syntax(1, 1, "", format!("input is {} bytes, limit is {MAX_INPUT}", src.len())));
    }
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() {
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
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
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| syntax(line, col, &text, "malformed number"))?;
            if !v.is_finite() {
                return Err(syntax(line, col, &text, "number out of range"));
            }
            let imag = i < chars.len()
                && chars[i] == 'i'
                && !chars.get(i + 1).is_some_and(|c| c.is_alphanumeric() || *c == '_');
            if imag {
                i += 1;
                Tok::Imag(v)
            } else {
                Tok::Num(v)
            }
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if "()[],:;+-*=".contains(c) {
            i += 1;
            Tok::Sym(c)
        } else {
            return Err(syntax(line, col, &c.to_string(), "unexpected character"));
        };
        let text: String = chars[start..i].iter().collect();
        out.push(Token { tok, text, line, column: col });
        col += i - start;
    }
    out.push(Token { tok: Tok::Eof, text: "<end of input>".into(), line, column: col });
    Ok(out)
}

// ---------------------------------------------------------------- parser

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    depth: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self> {
        Ok(Parser { toks: lex(src)?, pos: 0, depth: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        &self.toks[(self.pos + ahead).min(self.toks.len() - 1)].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: impl Into<String>) -> Error {
        let t = &self.toks[self.pos];
        syntax(t.line, t.column, &t.text, message)
    }

    fn is_sym(&self, c: char) -> bool {
        *self.peek() == Tok::Sym(c)
    }

    fn is_ident(&self, name: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == name)
    }

    fn expect_sym(&mut self, c: char) -> Result<()> {
        if self.is_sym(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn expect_ident(&mut self, name: &str) -> Result<()> {
        if self.is_ident(name) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected `{name}`")))
        }
    }

    fn finish(&mut self) -> Result<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error("unexpected trailing input"))
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err(self.error(format!("nesting deeper than {MAX_DEPTH}")));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    /// Opens `name(`; the identifier is the current token.
    fn open(&mut self, name: &str) -> Result<(usize, usize)> {
        let t = self.bump();
        debug_assert!(matches!(&t.tok, Tok::Ident(s) if s == name));
        self.expect_sym('(')?;
        Ok((t.line, t.column))
    }

    /// Counts the remaining top-level arguments, starting at a `,`.
    fn count_extra_args(&self) -> usize {
        let mut depth = 0usize;
        let mut extra = 0;
        for t in &self.toks[self.pos..] {
            match t.tok {
                Tok::Sym('(') | Tok::Sym('[') => depth += 1,
                Tok::Sym(')') | Tok::Sym(']') if depth == 0 => break,
                Tok::Sym(')') | Tok::Sym(']') => depth -= 1,
                Tok::Sym(',') if depth == 0 => extra += 1,
                Tok::Eof => break,
                _ => {}
            }
        }
        extra
    }

    fn arity(&self, at: (usize, usize), ctor: &str, expected: &str, found: usize) -> Error {
        Error::Arity { line: at.0, column: at.1, constructor: ctor.into(), expected: expected.into(), found }
    }

    /// Closes a constructor that takes exactly `n` arguments.
    fn close(&mut self, at: (usize, usize), ctor: &str, n: usize) -> Result<()> {
        if self.is_sym(',') {
            return Err(self.arity(at, ctor, &n.to_string(), n + self.count_extra_args()));
        }
        self.expect_sym(')')
    }

    /// Separates argument `k` from `k + 1` of an `n`-argument constructor.
    fn comma(&mut self, at: (usize, usize), ctor: &str, n: usize, k: usize) -> Result<()> {
        if self.is_sym(')') {
            return Err(self.arity(at, ctor, &n.to_string(), k));
        }
        self.expect_sym(',')
    }

    /// Rejects `ctor()` with a positional arity error.
    fn no_empty(&self, at: (usize, usize), ctor: &str, expected: &str) -> Result<()> {
        if self.is_sym(')') {
            Err(self.arity(at, ctor, expected, 0))
        } else {
            Ok(())
        }
    }

    fn float(&mut self) -> Result<f64> {
        let sign = if self.is_sym('-') {
            self.bump();
            -1.0
        } else {
            1.0
        };
        match *self.peek() {
            Tok::Num(v) => {
                self.bump();
                Ok(sign * v)
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn int(&mut self) -> Result<i64> {
        let negative = self.is_sym('-');
        if negative {
            self.bump();
        }
        let t = &self.toks[self.pos];
        if !matches!(t.tok, Tok::Num(_)) || !t.text.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.error("expected an integer"));
        }
        let text = if negative { format!("-{}", t.text) } else { t.text.clone() };
        let v = text.parse::<i64>().map_err(|_| self.error("integer out of range"))?;
        self.bump();
        Ok(v)
    }

    fn starts_complex(&self) -> bool {
        match self.peek() {
            Tok::Num(_) | Tok::Imag(_) => true,
            Tok::Sym('-') => matches!(self.peek_at(1), Tok::Num(_) | Tok::Imag(_)),
            _ => false,
        }
    }

    fn complex(&mut self) -> Result<Complex64> {
        let sign = if self.is_sym('-') {
            self.bump();
            -1.0
        } else {
            1.0
        };
        match *self.peek() {
            Tok::Imag(v) => {
                self.bump();
                Ok(Complex64::new(0.0, sign * v))
            }
            Tok::Num(v) => {
                self.bump();
                let re = sign * v;
                let im_sign = match (self.peek(), self.peek_at(1)) {
                    (Tok::Sym('+'), Tok::Imag(_)) => 1.0,
                    (Tok::Sym('-'), Tok::Imag(_)) => -1.0,
                    _ => return Ok(Complex64::new(re, 0.0)),
                };
                self.bump();
                let Tok::Imag(w) = self.bump().tok else { unreachable!() };
                Ok(Complex64::new(re, im_sign * w))
            }
            _ => Err(self.error("expected a number")),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let first = self.term()?;
        let mut rest = Vec::new();
        loop {
            let op = if self.is_sym('+') {
                AddOp::Plus
            } else if self.is_sym('-') {
                AddOp::Minus
            } else {
                break;
            };
            self.bump();
            rest.push((op, self.term()?));
        }
        Ok(if rest.is_empty() { first } else { Expr::Sum(Box::new(first), rest) })
    }

    fn term(&mut self) -> Result<Expr> {
        let mut items = vec![self.factor()?];
        while self.is_sym('*') {
            self.bump();
            items.push(self.factor()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { Expr::Product(items) })
    }

    fn factor(&mut self) -> Result<Expr> {
        self.enter()?;
        let e = self.factor_inner()?;
        self.leave();
        Ok(e)
    }

    fn factor_inner(&mut self) -> Result<Expr> {
        if self.starts_complex() {
            return Ok(Expr::Scalar(self.complex()?));
        }
        if self.is_sym('(') {
            self.bump();
            let e = self.expr()?;
            self.expect_sym(')')?;
            return Ok(e);
        }
        let name = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error("expected a scalar, W(...), adj(...), rho(...) or `(`")),
        };
        match name.as_str() {
            "W" => {
                let at = self.open("W")?;
                self.no_empty(at, "W", "1")?;
                let v = self.vec()?;
                self.close(at, "W", 1)?;
                Ok(Expr::Weyl(v))
            }
            "adj" => {
                let at = self.open("adj")?;
                self.no_empty(at, "adj", "1")?;
                let e = self.expr()?;
                self.close(at, "adj", 1)?;
                Ok(Expr::Adjoint(Box::new(e)))
            }
            "rho" => {
                let at = self.open("rho")?;
                self.no_empty(at, "rho", "2")?;
                let m = self.map()?;
                self.comma(at, "rho", 2, 1)?;
                let e = self.expr()?;
                self.close(at, "rho", 2)?;
                Ok(Expr::Apply(m, Box::new(e)))
            }
            _ => Err(self.error(format!("unknown name `{name}`"))),
        }
    }

    fn vec(&mut self) -> Result<VecExpr> {
        let mut items = vec![self.vatom()?];
        while self.is_sym('+') {
            self.bump();
            items.push(self.vatom()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { VecExpr::Sum(items) })
    }

    fn vatom(&mut self) -> Result<VecExpr> {
        self.enter()?;
        let v = self.vatom_inner()?;
        self.leave();
        Ok(v)
    }

    fn vatom_inner(&mut self) -> Result<VecExpr> {
        if self.starts_complex() {
            let c = self.complex()?;
            self.expect_sym('*')?;
            return Ok(VecExpr::Scaled(c, Box::new(self.vatom()?)));
        }
        if self.is_sym('(') {
            self.bump();
            let v = self.vec()?;
            self.expect_sym(')')?;
            return Ok(v);
        }
        if self.is_sym('[') {
            self.bump();
            let mut entries = Vec::new();
            loop {
                let k = self.int()?;
                self.expect_sym(':')?;
                entries.push((k, self.complex()?));
                if self.is_sym(',') {
                    self.bump();
                } else {
                    break;
                }
            }
            let mut excess = None;
            if self.is_sym(';') {
                self.bump();
                self.expect_ident("excess")?;
                self.expect_sym('=')?;
                excess = Some(self.float()?);
            }
            self.expect_sym(']')?;
            return Ok(VecExpr::Literal { entries, excess });
        }
        if self.is_ident("e") {
            let at = self.open("e")?;
            self.no_empty(at, "e", "1")?;
            let k = self.int()?;
            self.close(at, "e", 1)?;
            return Ok(VecExpr::Basis(k));
        }
        Err(self.error("expected a vector: `[...]`, e(k), c*vec or `(`"))
    }

    fn map(&mut self) -> Result<MapExpr> {
        let name = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error("expected a map: gn(n), shift, perm(...) or u(...)")),
        };
        match name.as_str() {
            "shift" => {
                self.bump();
                Ok(MapExpr::Shift)
            }
            "gn" => {
                let at = self.open("gn")?;
                self.no_empty(at, "gn", "1")?;
                let n = self.int()?;
                self.close(at, "gn", 1)?;
                Ok(MapExpr::Gn(n))
            }
            "perm" => {
                let at = self.open("perm")?;
                self.no_empty(at, "perm", "at least 1")?;
                let mut images = vec![self.int()?];
                while self.is_sym(',') {
                    self.bump();
                    images.push(self.int()?);
                }
                self.expect_sym(')')?;
                Ok(MapExpr::Perm(images))
            }
            "u" => {
                let at = self.open("u")?;
                self.no_empty(at, "u", "1")?;
                let m = self.matrix()?;
                self.close(at, "u", 1)?;
                Ok(MapExpr::U(m))
            }
            _ => Err(self.error(format!("unknown map `{name}`"))),
        }
    }

    fn matrix(&mut self) -> Result<Vec<Vec<Complex64>>> {
        self.expect_sym('[')?;
        let mut rows = Vec::new();
        loop {
            self.expect_sym('[')?;
            let mut row = vec![self.complex()?];
            while self.is_sym(',') {
                self.bump();
                row.push(self.complex()?);
            }
            self.expect_sym(']')?;
            rows.push(row);
            if self.is_sym(',') {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_sym(']')?;
        Ok(rows)
    }

    fn state(&mut self) -> Result<StateFunctional> {
        self.enter()?;
        let s = self.state_inner()?;
        self.leave();
        Ok(s)
    }

    fn state_inner(&mut self) -> Result<StateFunctional> {
        let name = match self.peek() {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.error("expected a state")),
        };
        match name.as_str() {
            "vacuum" => {
                self.bump();
                Ok(StateFunctional::Vacuum)
            }
            "trace" => {
                self.bump();
                Ok(StateFunctional::trace())
            }
            "qf" => {
                let at = self.open("qf")?;
                self.no_empty(at, "qf", "1")?;
                let s2 = if self.is_ident("inf") {
                    self.bump();
                    f64::INFINITY
                } else {
                    self.float()?
                };
                self.close(at, "qf", 1)?;
                StateFunctional::quasi_free(s2)
            }
            "pg" => {
                let at = self.open("pg")?;
                self.no_empty(at, "pg", "2")?;
                let lambda = self.float()?;
                self.comma(at, "pg", 2, 1)?;
                let mu = self.float()?;
                self.close(at, "pg", 2)?;
                StateFunctional::product_gaussian(lambda, mu)
            }
            "mix" => {
                let at = self.open("mix")?;
                self.no_empty(at, "mix", "at least 1")?;
                let mut atoms = Vec::new();
                loop {
                    let w = self.float()?;
                    self.expect_sym('*')?;
                    atoms.push((w, self.state()?));
                    if self.is_sym('+') {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect_sym(')')?;
                StateFunctional::mixture(atoms)
            }
            "flat" => {
                let at = self.open("flat")?;
                self.no_empty(at, "flat", "1")?;
                let inner = self.state()?;
                self.close(at, "flat", 1)?;
                Ok(StateFunctional::flat(inner))
            }
            _ => Err(self.error(format!("unknown state `{name}`"))),
        }
    }
}

pub fn parse_expression(src: &str) -> Result<Expr> {
    let mut p = Parser::new(src)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

pub fn parse_map(src: &str) -> Result<MapExpr> {
    let mut p = Parser::new(src)?;
    let m = p.map()?;
    p.finish()?;
    Ok(m)
}

/// Parses and validates a state; constructor errors are reported as
/// domain errors.
pub fn parse_state(src: &str) -> Result<StateFunctional> {
    let mut p = Parser::new(src)?;
    let s = p.state()?;
    p.finish()?;
    Ok(s)
}

/// Parses and lowers in one step.
pub fn parse_polynomial(src: &str) -> Result<WeylPolynomial> {
    lower_expr(&parse_expression(src)?)
}

// ---------------------------------------------------------------- lowering

pub fn lower_expr(e: &Expr) -> Result<WeylPolynomial> {
    match e {
        Expr::Scalar(c) => Ok(WeylPolynomial::scalar(*c)),
        Expr::Weyl(v) => Ok(WeylPolynomial::generator(lower_vec(v)?)),
        Expr::Product(items) => {
            let mut acc = lower_expr(&items[0])?;
            for item in &items[1..] {
                acc = word_mul(&acc, &lower_expr(item)?)?;
            }
            Ok(acc)
        }
        Expr::Sum(first, rest) => {
            let mut acc = lower_expr(first)?;
            for (op, item) in rest {
                let p = lower_expr(item)?;
                acc = match op {
                    AddOp::Plus => acc + p,
                    AddOp::Minus => acc - p,
                };
            }
            Ok(acc)
        }
        Expr::Adjoint(inner) => Ok(adjoint(&lower_expr(inner)?)),
        Expr::Apply(m, inner) => Ok(automorphism_image(&lower_map(m)?, &lower_expr(inner)?)),
    }
}

pub fn lower_vec(v: &VecExpr) -> Result<CVector> {
    match v {
        VecExpr::Literal { entries, excess } => {
            let x = CVector::from_pairs(entries.iter().copied());
            match excess {
                None => Ok(x),
                Some(r) if r.is_finite() && *r >= 0.0 => Ok(x.with_excess(*r)),
                Some(r) => Err(Error::Domain(format!("excess must be finite and >= 0, got {r}"))),
            }
        }
        VecExpr::Basis(k) => Ok(CVector::basis(*k)),
        VecExpr::Scaled(c, inner) => Ok(lower_vec(inner)?.scale(*c)),
        VecExpr::Sum(items) => {
            let mut acc = lower_vec(&items[0])?;
            for item in &items[1..] {
                acc = acc.add(&lower_vec(item)?)?;
            }
            Ok(acc)
        }
    }
}

pub fn lower_map(m: &MapExpr) -> Result<FiniteUnitary> {
    match m {
        MapExpr::Gn(n) => {
            if !(1..=62).contains(n) {
                return Err(Error::InvalidMap(format!("gn needs 1 <= n <= 62, got {n}")));
            }
            Ok(build_g_n(*n as u32))
        }
        MapExpr::Shift => Ok(FiniteUnitary::shift()),
        MapExpr::Perm(images) => {
            let len = images.len() as i64;
            let mut sorted = images.clone();
            sorted.sort_unstable();
            if sorted != (0..len).collect::<Vec<_>>() {
                return Err(Error::InvalidMap(format!("perm must list a permutation of 0..{}", len - 1)));
            }
            let w = len - 1;
            let table = (-w..=w).map(|k| if k < 0 { k } else { images[k as usize] }).collect();
            FiniteUnitary::permutation(table)
        }
        MapExpr::U(rows) => {
            let n = rows.len();
            if rows.iter().any(|r| r.len() != n) {
                return Err(Error::InvalidMap("u needs a square matrix".into()));
            }
            let block = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
            let modes: Vec<i64> = (0..n as i64).collect();
            FiniteUnitary::embed(&modes, &block)
        }
    }
}

// ---------------------------------------------------------------- printer

struct Bare(Complex64);

impl fmt::Display for Bare {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let Complex64 { re, im } = self.0;
        if im.is_sign_negative() {
            write!(f, "{re}-{}i", -im)
        } else {
            write!(f, "{re}+{im}i")
        }
    }
}

fn print_expr(out: &mut String, e: &Expr, level: u8) {
    let wrap = match e {
        Expr::Sum(..) => level > 0,
        Expr::Product(_) => level > 1,
        _ => false,
    };
    if wrap {
        out.push('(');
    }
    match e {
        Expr::Scalar(c) => {
            let _ = write!(out, "({})", Bare(*c));
        }
        Expr::Weyl(v) => {
            out.push_str("W(");
            print_vec(out, v, false);
            out.push(')');
        }
        Expr::Product(items) => {
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(" * ");
                }
                print_expr(out, item, 2);
            }
        }
        Expr::Sum(first, rest) => {
            print_expr(out, first, 1);
            for (op, item) in rest {
                out.push_str(if *op == AddOp::Plus { " + " } else { " - " });
                print_expr(out, item, 1);
            }
        }
        Expr::Adjoint(inner) => {
            out.push_str("adj(");
            print_expr(out, inner, 0);
            out.push(')');
        }
        Expr::Apply(m, inner) => {
            let _ = write!(out, "rho({m}, ");
            print_expr(out, inner, 0);
            out.push(')');
        }
    }
    if wrap {
        out.push(')');
    }
}

fn print_vec(out: &mut String, v: &VecExpr, atom: bool) {
    match v {
        VecExpr::Literal { entries, excess } => {
            out.push('[');
            for (i, (k, c)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{k}: {}", Bare(*c));
            }
            if let Some(r) = excess {
                let _ = write!(out, "; excess = {r}");
            }
            out.push(']');
        }
        VecExpr::Basis(k) => {
            let _ = write!(out, "e({k})");
        }
        VecExpr::Scaled(c, inner) => {
            let _ = write!(out, "{}*", Bare(*c));
            print_vec(out, inner, true);
        }
        VecExpr::Sum(items) => {
            if atom {
                out.push('(');
            }
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                print_vec(out, item, true);
            }
            if atom {
                out.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        print_expr(&mut s, self, 0);
        f.write_str(&s)
    }
}

impl fmt::Display for VecExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        print_vec(&mut s, self, false);
        f.write_str(&s)
    }
}

impl fmt::Display for MapExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapExpr::Gn(n) => write!(f, "gn({n})"),
            MapExpr::Shift => write!(f, "shift"),
            MapExpr::Perm(images) => {
                let list: Vec<String> = images.iter().map(i64::to_string).collect();
                write!(f, "perm({})", list.join(", "))
            }
            MapExpr::U(rows) => {
                let rows: Vec<String> = rows
                    .iter()
                    .map(|r| format!("[{}]", r.iter().map(|c| Bare(*c).to_string()).collect::<Vec<_>>().join(", ")))
                    .collect();
                write!(f, "u([{}])", rows.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn generator_over_basis_vector() {
        assert_eq!(parse_expression("W(e(0))").unwrap(), Expr::Weyl(VecExpr::Basis(0)));
    }

    #[test]
    fn product_of_generators() {
        let e = parse_expression("W([0: 1+2i]) * adj(W(e(1)))").unwrap();
        let lit = VecExpr::Literal { entries: vec![(0, c(1.0, 2.0))], excess: None };
        assert_eq!(
            e,
            Expr::Product(vec![Expr::Weyl(lit), Expr::Adjoint(Box::new(Expr::Weyl(VecExpr::Basis(1))))])
        );
    }

    #[test]
    fn g2_moves_mode_one_to_three() {
        let p = parse_polynomial("rho(gn(2), W(e(1)))").unwrap();
        assert_eq!(p, WeylPolynomial::generator(CVector::basis(3)));
    }

    #[test]
    fn greedy_complex_scaling() {
        let v = parse_expression("W(1+2i*e(0) + e(1))").unwrap();
        let Expr::Weyl(VecExpr::Sum(items)) = v else { panic!("{v:?}") };
        assert_eq!(items[0], VecExpr::Scaled(c(1.0, 2.0), Box::new(VecExpr::Basis(0))));
        assert_eq!(parse_expression("-3i").unwrap(), Expr::Scalar(c(0.0, -3.0)));
        assert_eq!(parse_expression("2 - 0.5i").unwrap(), Expr::Scalar(c(2.0, -0.5)));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_expression("W(e(0)) + 2 * W(e(1)) - W(e(2))").unwrap();
        let Expr::Sum(_, rest) = &e else { panic!() };
        assert_eq!(rest.len(), 2);
        assert!(matches!(rest[0].1, Expr::Product(_)));
        assert_eq!(rest[1].0, AddOp::Minus);
    }

    #[test]
    fn literal_with_excess_and_negative_modes() {
        let v = lower_vec(&match parse_expression("W([-1: 2, 3: -1-1i; excess = 0.5])").unwrap() {
            Expr::Weyl(v) => v,
            e => panic!("{e:?}"),
        })
        .unwrap();
        assert_eq!(v.coeff(-1), c(2.0, 0.0));
        assert_eq!(v.coeff(3), c(-1.0, -1.0));
        assert_eq!(v.excess(), 0.5);
    }

    #[test]
    fn weyl_relation_through_the_language() {
        // W(e0) W(i e0) = e^{iσ(e0, i e0)} W(e0 + i e0), σ = −1
        let lhs = parse_polynomial("W(e(0)) * W(0+1i*e(0))").unwrap();
        let rhs = parse_polynomial("W([0: 1+1i])").unwrap().scale(Complex64::from_polar(1.0, -1.0));
        assert!(lhs.approx_eq(&rhs, 1e-15));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match parse_expression("W(e(0)) *\n  ?") {
            Err(Error::Syntax { line, column, token, .. }) => {
                assert_eq!((line, column, token.as_str()), (2, 3, "?"));
            }
            other => panic!("{other:?}"),
        }
        match parse_expression("W(e(0)) W") {
            Err(Error::Syntax { column: 9, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_expression(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("foo(1)"), Err(Error::Syntax { .. })));
        assert!(matches!(parse_expression("W(e(99999999999999999999))"), Err(Error::Syntax { .. })));
    }

    #[test]
    fn arity_errors() {
        let check = |src: &str, ctor: &str, found: usize| match parse_expression(src) {
            Err(Error::Arity { constructor, found: f, .. }) => assert_eq!((constructor.as_str(), f), (ctor, found), "{src}"),
            other => panic!("{src}: {other:?}"),
        };
        check("W(e(1, 2))", "e", 2);
        check("W(e())", "e", 0);
        check("rho(gn(2))", "rho", 1);
        check("adj(W(e(0)), W(e(1)), 3)", "adj", 3);
        check("rho(gn(1, 2), W(e(0)))", "gn", 2);
        assert!(matches!(parse_state("pg(1)"), Err(Error::Arity { found: 1, .. })));
        assert!(matches!(parse_state("qf()"), Err(Error::Arity { found: 0, .. })));
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("{}W(e(0)){}", "(".repeat(10_000), ")".repeat(10_000));
        assert!(matches!(parse_expression(&src), Err(Error::Syntax { .. })));
        let src = format!("W({}e(0))", "2*".repeat(5_000));
        assert!(matches!(parse_expression(&src), Err(Error::Syntax { .. })));
    }

    #[test]
    fn oversized_input() {
        let src = "W(e(0))+".repeat(9000);
        assert!(matches!(parse_expression(&src), Err(Error::Syntax { .. })));
    }

    #[test]
    fn maps() {
        assert_eq!(parse_map("perm(1, 0)").unwrap(), MapExpr::Perm(vec![1, 0]));
        let p = lower_map(&MapExpr::Perm(vec![2, 0, 1])).unwrap();
        assert_eq!(p.index_image(0), Some(2));
        assert_eq!(p.index_image(-1), Some(-1));
        assert!(lower_map(&MapExpr::Perm(vec![0, 0])).is_err());
        assert!(lower_map(&MapExpr::Gn(0)).is_err());
        let shifted = parse_polynomial("rho(shift, W(e(4)))").unwrap();
        assert_eq!(shifted, WeylPolynomial::generator(CVector::basis(5)));
        let u = parse_map("u([[0, 1], [1, 0]])").unwrap();
        let swapped = automorphism_image(&lower_map(&u).unwrap(), &parse_polynomial("W(e(0))").unwrap());
        assert_eq!(swapped, WeylPolynomial::generator(CVector::basis(1)));
        assert!(matches!(lower_map(&parse_map("u([[1, 1], [0, 1]])").unwrap()), Err(Error::NotUnitary { .. })));
    }

    #[test]
    fn states() {
        assert_eq!(parse_state("vacuum").unwrap(), StateFunctional::Vacuum);
        assert_eq!(parse_state("qf(inf)").unwrap(), StateFunctional::trace());
        let m = parse_state("mix(0.3*trace + 0.7*qf(2))").unwrap();
        assert_eq!(parse_state(&m.to_string()).unwrap(), m);
        let f = parse_state("flat(pg(1, 2))").unwrap();
        assert_eq!(parse_state(&f.to_string()).unwrap(), f);
        assert!(matches!(parse_state("qf(-1)"), Err(Error::Domain(_))));
        assert!(matches!(parse_state("mix(0.5*vacuum)"), Err(Error::Domain(_))));
    }

    #[test]
    fn printer_examples() {
        for src in [
            "W(e(0)) * (W(e(1)) + (2+0i))",
            "(W(e(0)) - W(e(1))) - W(e(2))",
            "W(2+0i*(e(0) + [1: 0+1i; excess = 0.25]))",
            "rho(u([[0+1i]]), adj(W(e(-2))))",
        ] {
            let e = parse_expression(src).unwrap();
            assert_eq!(parse_expression(&e.to_string()).unwrap(), e, "{src} -> {e}");
        }
    }
}
