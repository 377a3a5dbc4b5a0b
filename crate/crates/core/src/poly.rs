//! Sparse multivariate polynomials with real coefficients.
//!
//! A [`Polynomial`] is kept in canonical form at all times: one term per
//! exponent tuple, no zero coefficients, terms sorted in descending graded
//! lexicographic order. Printing is therefore deterministic and the printed
//! text parses back to the same polynomial.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseError, ParseErrorKind, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: f64,
    pub exps: Vec<u32>,
}

impl Term {
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    terms: Vec<Term>,
}

/// Descending graded lexicographic order: higher total degree first, ties
/// broken by the larger exponent of the earliest variable.
fn grlex_desc(a: &[u32], b: &[u32]) -> Ordering {
    let da: u32 = a.iter().sum();
    let db: u32 = b.iter().sum();
    db.cmp(&da).then_with(|| b.cmp(a))
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: Vec::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, [(c, vec![0; nvars])])
    }

    /// The coordinate function `x_{index+1}`.
    pub fn var(nvars: usize, index: usize) -> Self {
        assert!(index < nvars, "variable index out of range");
        let mut exps = vec![0; nvars];
        exps[index] = 1;
        Self::from_terms(nvars, [(1.0, exps)])
    }

    /// Builds a canonical polynomial, merging duplicate exponents and
    /// dropping exact zeros.
    ///
    /// Panics if an exponent tuple has the wrong length.
    pub fn from_terms<I>(nvars: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (c, e) in terms {
            assert_eq!(e.len(), nvars, "exponent tuple length must equal nvars");
            *acc.entry(e).or_insert(0.0) += c;
        }
        let mut terms: Vec<Term> = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(exps, coeff)| Term { coeff, exps })
            .collect();
        terms.sort_by(|a, b| grlex_desc(&a.exps, &b.exps));
        Self { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.iter().map(Term::degree).max()
    }

    pub fn is_constant(&self) -> bool {
        self.degree().map_or(true, |d| d == 0)
    }

    /// Coefficient of the constant monomial.
    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.degree() == 0)
            .map_or(0.0, |t| t.coeff)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Evaluates at `x` with Neumaier-compensated summation over terms.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.eval_unchecked(x))
    }

    /// Same as [`eval`](Self::eval) without the length check. Callers
    /// guarantee `x.len() == nvars`.
    pub fn eval_unchecked(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut comp = 0.0;
        for t in &self.terms {
            let mut v = t.coeff;
            for (xi, &e) in x.iter().zip(&t.exps) {
                if e > 0 {
                    v *= xi.powi(e as i32);
                }
            }
            let s = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - s) + v;
            } else {
                comp += (v - s) + sum;
            }
            sum = s;
        }
        sum + comp
    }

    /// Exact partial derivative with respect to variable `index`.
    pub fn partial(&self, index: usize) -> Polynomial {
        assert!(index < self.nvars, "variable index out of range");
        let terms = self.terms.iter().filter(|t| t.exps[index] > 0).map(|t| {
            let mut e = t.exps.clone();
            let k = e[index];
            e[index] -= 1;
            (t.coeff * k as f64, e)
        });
        Polynomial::from_terms(self.nvars, terms)
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.partial(i)).collect()
    }

    fn check_ring(&self, other: &Polynomial) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::MixedVariables {
                left: self.nvars,
                right: other.nvars,
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_ring(other)?;
        let terms = self
            .terms
            .iter()
            .chain(&other.terms)
            .map(|t| (t.coeff, t.exps.clone()));
        Ok(Polynomial::from_terms(self.nvars, terms))
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        let terms = self.terms.iter().map(|t| (c * t.coeff, t.exps.clone()));
        Polynomial::from_terms(self.nvars, terms)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_ring(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let e = a.exps.iter().zip(&b.exps).map(|(x, y)| x + y).collect();
                terms.push((a.coeff * b.coeff, e));
            }
        }
        Ok(Polynomial::from_terms(self.nvars, terms))
    }

    /// `self^k` by repeated squaring; `p^0` is the constant 1.
    pub fn pow(&self, mut k: u32) -> Polynomial {
        let mut result = Polynomial::constant(self.nvars, 1.0);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base).expect("same ring");
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base).expect("same ring");
            }
        }
        result
    }

    /// Parses an expression in variables `x1..x{nvars}` (or `x, y, z` when
    /// `nvars <= 3`).
    pub fn parse(src: &str, nvars: usize) -> Result<Polynomial, ParseError> {
        Parser::new(src, nvars)?.parse_all()
    }

    fn var_name(&self, i: usize) -> String {
        if self.nvars <= 3 {
            ["x", "y", "z"][i].to_string()
        } else {
            format!("x{}", i + 1)
        }
    }
}

fn fmt_coeff(c: f64) -> String {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        format!("{}", c as i64)
    } else {
        format!("{c:?}")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, t) in self.terms.iter().enumerate() {
            let neg = t.coeff < 0.0;
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let mag = t.coeff.abs();
            let mut factors = Vec::new();
            if mag != 1.0 || t.degree() == 0 {
                factors.push(fmt_coeff(mag));
            }
            for (i, &e) in t.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(self.var_name(i)),
                    _ => factors.push(format!("{}^{}", self.var_name(i), e)),
                }
            }
            write!(f, "{}", factors.join("*"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num { value: f64, text: String },
    Var(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num { text, .. } => write!(f, "{text:?}"),
            Tok::Var(i) => write!(f, "x{}", i + 1),
            Tok::Plus => write!(f, "'+'"),
            Tok::Minus => write!(f, "'-'"),
            Tok::Star => write!(f, "'*'"),
            Tok::Slash => write!(f, "'/'"),
            Tok::Caret => write!(f, "'^'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
        }
    }
}

fn perr(kind: ParseErrorKind, position: usize) -> ParseError {
    ParseError { kind, position }
}

fn lex(src: &str, nvars: usize) -> Result<Vec<(Tok, usize)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, start)),
            b'-' => out.push((Tok::Minus, start)),
            b'*' => out.push((Tok::Star, start)),
            b'/' => out.push((Tok::Slash, start)),
            b'^' => out.push((Tok::Caret, start)),
            b'(' => out.push((Tok::LParen, start)),
            b')' => out.push((Tok::RParen, start)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                let value: f64 = text
                    .parse()
                    .map_err(|_| perr(ParseErrorKind::InvalidNumber(text.into()), start))?;
                out.push((
                    Tok::Num {
                        value,
                        text: text.into(),
                    },
                    start,
                ));
                continue;
            }
            c if c.is_ascii_alphabetic() => {
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let name = &src[start..i];
                out.push((Tok::Var(resolve_var(name, nvars, start)?), start));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(perr(ParseErrorKind::UnexpectedChar(ch), start));
            }
        }
        i += 1;
    }
    Ok(out)
}

fn resolve_var(name: &str, nvars: usize, pos: usize) -> Result<usize, ParseError> {
    let unknown = || perr(ParseErrorKind::UnknownVariable(name.into()), pos);
    let idx = match name {
        "x" | "y" | "z" if nvars <= 3 => match name {
            "x" => 0,
            "y" => 1,
            _ => 2,
        },
        _ => {
            let digits = name.strip_prefix('x').ok_or_else(unknown)?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(unknown());
            }
            let k: usize = digits.parse().map_err(|_| unknown())?;
            if k == 0 {
                return Err(unknown());
            }
            k - 1
        }
    };
    if idx >= nvars {
        return Err(unknown());
    }
    Ok(idx)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    nvars: usize,
}

impl Parser {
    fn new(src: &str, nvars: usize) -> Result<Self, ParseError> {
        Ok(Self {
            toks: lex(src, nvars)?,
            pos: 0,
            end: src.len(),
            nvars,
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(_, p)| *p)
    }

    fn next(&mut self) -> Option<(Tok, usize)> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn parse_all(mut self) -> Result<Polynomial, ParseError> {
        let p = self.expr()?;
        if let Some((t, at)) = self.next() {
            return Err(perr(ParseErrorKind::UnexpectedToken(t.to_string()), at));
        }
        Ok(p)
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.next();
                    let rhs = self.term()?;
                    acc = acc.add(&rhs).expect("same ring");
                }
                Some(Tok::Minus) => {
                    self.next();
                    let rhs = self.term()?;
                    acc = acc.sub(&rhs).expect("same ring");
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.next();
                    let rhs = self.factor()?;
                    acc = acc.mul(&rhs).expect("same ring");
                }
                Some(Tok::Slash) => {
                    let at = self.here();
                    self.next();
                    let rhs = self.factor()?;
                    let c = rhs.constant_term();
                    if !rhs.is_constant() {
                        return Err(perr(
                            ParseErrorKind::NonPolynomial("division by a non-constant".into()),
                            at,
                        ));
                    }
                    if c == 0.0 {
                        return Err(perr(
                            ParseErrorKind::NonPolynomial("division by zero".into()),
                            at,
                        ));
                    }
                    acc = acc.scale(1.0 / c);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Result<Polynomial, ParseError> {
        let base = match self.next() {
            Some((Tok::Minus, _)) => return Ok(self.factor()?.scale(-1.0)),
            Some((Tok::Plus, _)) => return self.factor(),
            Some((Tok::Num { value, .. }, _)) => Polynomial::constant(self.nvars, value),
            Some((Tok::Var(i), _)) => Polynomial::var(self.nvars, i),
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((Tok::RParen, _)) => inner,
                    Some((t, at)) => {
                        return Err(perr(ParseErrorKind::UnexpectedToken(t.to_string()), at))
                    }
                    None => return Err(perr(ParseErrorKind::UnexpectedEnd, self.end)),
                }
            }
            Some((t, at)) => return Err(perr(ParseErrorKind::UnexpectedToken(t.to_string()), at)),
            None => return Err(perr(ParseErrorKind::UnexpectedEnd, self.end)),
        };
        if self.peek() != Some(&Tok::Caret) {
            return Ok(base);
        }
        self.next();
        match self.next() {
            Some((Tok::Num { text, .. }, at)) => {
                if !text.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(perr(
                        ParseErrorKind::NonPolynomial(format!("non-integer exponent {text}")),
                        at,
                    ));
                }
                let k: u32 = text
                    .parse()
                    .map_err(|_| perr(ParseErrorKind::InvalidNumber(text.clone()), at))?;
                Ok(base.pow(k))
            }
            Some((Tok::Minus, at)) => Err(perr(
                ParseErrorKind::NonPolynomial("negative exponent".into()),
                at,
            )),
            Some((t, at)) => Err(perr(ParseErrorKind::UnexpectedToken(t.to_string()), at)),
            None => Err(perr(ParseErrorKind::UnexpectedEnd, self.end)),
        }
    }
}

/// A polynomial together with its precomputed gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffPoly {
    pub f: Polynomial,
    pub grad: Vec<Polynomial>,
}

impl DiffPoly {
    pub fn new(f: Polynomial) -> Self {
        let grad = f.gradient();
        Self { f, grad }
    }

    pub fn nvars(&self) -> usize {
        self.f.nvars()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.f.eval_unchecked(x)
    }

    pub fn gradient_at(&self, x: &[f64]) -> Vec<f64> {
        self.grad.iter().map(|g| g.eval_unchecked(x)).collect()
    }

    /// `|x| |grad f(x)|`.
    pub fn rabier(&self, x: &[f64]) -> f64 {
        crate::geometry::norm(x) * crate::geometry::norm(&self.gradient_at(x))
    }
}
