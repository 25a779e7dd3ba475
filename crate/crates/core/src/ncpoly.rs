//! Polynomials with complex coefficients in two noncommuting selfadjoint
//! indeterminates `x` (= t₁) and `y` (= t₂).
//!
//! Text form: terms joined by `+`/`-`, each term a `*`-separated product of
//! coefficients (`2`, `1.5e-3`, `3i`, `(1-2i)`), letters `x`/`y`, and
//! parenthesized sub-expressions, each optionally raised to `^k`.
//! Whitespace is ignored. `Display` prints the same grammar.

use alloc::collections::btree_map::Entry;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};
use core::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ONE, ZERO};

/// One of the two generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    /// t₁, evaluated at the Wigner matrix.
    X,
    /// t₂, evaluated at the deterministic matrix.
    Y,
}

impl Letter {
    pub fn symbol(self) -> char {
        match self {
            Letter::X => 'x',
            Letter::Y => 'y',
        }
    }
}

/// A monomial, as the sequence of its letters. The empty word is the unit.
///
/// Words are ordered by length first, then lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn unit() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(t_{i1}⋯t_{il})* = t_{il}⋯t_{i1}`
    pub fn reversed(&self) -> Self {
        let mut v = self.0.clone();
        v.reverse();
        Word(v)
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }
}

impl From<&[Letter]> for Word {
    fn from(s: &[Letter]) -> Self {
        Word(s.to_vec())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

/// Noncommutative polynomial stored as a word → coefficient map.
/// No stored coefficient is zero.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NcPolynomial {
    terms: BTreeMap<Word, Complex64>,
}

impl NcPolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(c, Word::unit())
    }

    pub fn x() -> Self {
        Self::monomial(ONE, Word(alloc::vec![Letter::X]))
    }

    pub fn y() -> Self {
        Self::monomial(ONE, Word(alloc::vec![Letter::Y]))
    }

    pub fn monomial(c: Complex64, word: Word) -> Self {
        let mut p = Self::zero();
        p.add_term(word, c);
        p
    }

    pub fn from_terms<I: IntoIterator<Item = (Word, Complex64)>>(terms: I) -> Self {
        let mut p = Self::zero();
        for (w, c) in terms {
            p.add_term(w, c);
        }
        p
    }

    fn add_term(&mut self, word: Word, c: Complex64) {
        if c == ZERO {
            return;
        }
        match self.terms.entry(word) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == ZERO {
                    o.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Maximum word length; 0 for the zero polynomial.
    pub fn degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }

    /// Total number of letters over all terms.
    pub fn letter_count(&self) -> usize {
        self.terms.keys().map(Word::len).sum()
    }

    pub fn coefficient(&self, word: &Word) -> Complex64 {
        self.terms.get(word).copied().unwrap_or(ZERO)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Word, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, v)| (w.clone(), v * c)))
    }

    /// Reverses every word and conjugates every coefficient.
    pub fn adjoint(&self) -> Self {
        Self::from_terms(self.terms.iter().map(|(w, c)| (w.reversed(), c.conj())))
    }

    /// Exact comparison of the coefficient maps of `p` and `p*`.
    pub fn is_selfadjoint(&self) -> bool {
        self.terms.iter().all(|(w, c)| self.coefficient(&w.reversed()) == c.conj())
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::constant(ONE);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Evaluates at `x = a`, `y = b`; the empty word maps to the identity.
    pub fn evaluate(&self, a: &CMat, b: &CMat) -> Result<CMat> {
        let n = a.nrows();
        if !a.is_square() || !b.is_square() || b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "evaluate needs two square matrices of equal size, got {}x{} and {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        let mut out = CMat::zeros(n, n);
        for (w, c) in &self.terms {
            let mut prod = CMat::identity(n, n);
            for l in w.letters() {
                prod = match l {
                    Letter::X => prod * a,
                    Letter::Y => prod * b,
                };
            }
            out += prod * *c;
        }
        Ok(out)
    }

    /// Evaluates at `x = a`, `y = diag(d)`, exploiting the diagonal factor:
    /// multiplication by `diag(d)` is a row or column scaling.
    pub fn evaluate_diag(&self, a: &CMat, d: &[f64]) -> Result<CMat> {
        let n = a.nrows();
        if !a.is_square() || d.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "evaluate_diag needs a square matrix and a diagonal of equal size, got {}x{} and {}",
                a.nrows(),
                a.ncols(),
                d.len()
            )));
        }
        enum Acc {
            Identity,
            Diagonal(Vec<f64>),
            Dense(CMat),
        }
        let mut out = CMat::zeros(n, n);
        for (w, c) in &self.terms {
            // right to left
            let mut acc = Acc::Identity;
            for l in w.letters().iter().rev() {
                acc = match (l, acc) {
                    (Letter::Y, Acc::Identity) => Acc::Diagonal(d.to_vec()),
                    (Letter::Y, Acc::Diagonal(mut v)) => {
                        v.iter_mut().zip(d).for_each(|(p, q)| *p *= q);
                        Acc::Diagonal(v)
                    }
                    (Letter::Y, Acc::Dense(mut m)) => {
                        for (i, di) in d.iter().enumerate() {
                            m.row_mut(i).scale_mut(*di);
                        }
                        Acc::Dense(m)
                    }
                    (Letter::X, Acc::Identity) => Acc::Dense(a.clone()),
                    (Letter::X, Acc::Diagonal(v)) => {
                        let mut m = a.clone();
                        for (j, vj) in v.iter().enumerate() {
                            m.column_mut(j).scale_mut(*vj);
                        }
                        Acc::Dense(m)
                    }
                    (Letter::X, Acc::Dense(m)) => Acc::Dense(a * m),
                };
            }
            match acc {
                Acc::Identity => {
                    for i in 0..n {
                        out[(i, i)] += *c;
                    }
                }
                Acc::Diagonal(v) => {
                    for (i, vi) in v.iter().enumerate() {
                        out[(i, i)] += *c * *vi;
                    }
                }
                Acc::Dense(m) => out += m * *c,
            }
        }
        Ok(out)
    }
}

impl Add for &NcPolynomial {
    type Output = NcPolynomial;
    fn add(self, rhs: &NcPolynomial) -> NcPolynomial {
        let mut out = self.clone();
        for (w, c) in &rhs.terms {
            out.add_term(w.clone(), *c);
        }
        out
    }
}

impl Sub for &NcPolynomial {
    type Output = NcPolynomial;
    fn sub(self, rhs: &NcPolynomial) -> NcPolynomial {
        self + &(-rhs)
    }
}

impl Neg for &NcPolynomial {
    type Output = NcPolynomial;
    fn neg(self) -> NcPolynomial {
        NcPolynomial::from_terms(self.terms.iter().map(|(w, c)| (w.clone(), -c)))
    }
}

impl Mul for &NcPolynomial {
    type Output = NcPolynomial;
    fn mul(self, rhs: &NcPolynomial) -> NcPolynomial {
        let mut out = NcPolynomial::zero();
        for (w1, c1) in &self.terms {
            for (w2, c2) in &rhs.terms {
                out.add_term(w1.concat(w2), c1 * c2);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for NcPolynomial {
            type Output = NcPolynomial;
            fn $m(self, rhs: NcPolynomial) -> NcPolynomial {
                (&self).$m(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for NcPolynomial {
    type Output = NcPolynomial;
    fn neg(self) -> NcPolynomial {
        -&self
    }
}

fn fmt_real(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{:e}", x)
    } else {
        format!("{}", x)
    }
}

impl fmt::Display for NcPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            // (negative?, magnitude literal or None for unit)
            let (neg, lit): (bool, Option<String>) = if c.im == 0.0 {
                let lit = if c.re.abs() == 1.0 && !w.is_empty() {
                    None
                } else {
                    Some(fmt_real(c.re.abs()))
                };
                (c.re < 0.0, lit)
            } else if c.re == 0.0 {
                (c.im < 0.0, Some(format!("{}i", fmt_real(c.im.abs()))))
            } else {
                let sign = if c.im < 0.0 { '-' } else { '+' };
                (false, Some(format!("({}{}{}i)", fmt_real(c.re), sign, fmt_real(c.im.abs()))))
            };
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            match (lit, w.is_empty()) {
                (Some(l), true) => f.write_str(&l)?,
                (Some(l), false) => write!(f, "{}*{}", l, w)?,
                (None, _) => write!(f, "{}", w)?,
            }
        }
        Ok(())
    }
}

impl FromStr for NcPolynomial {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse(s)
    }
}

/// Parses the expression grammar. Empty (or all-whitespace) input yields the
/// zero polynomial.
pub fn parse(text: &str) -> Result<NcPolynomial> {
    let tokens = lex(text)?;
    if tokens.is_empty() {
        return Ok(NcPolynomial::zero());
    }
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let poly = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(p.error_at(t.pos, "unexpected token"));
    }
    Ok(poly)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Imag,
    X,
    Y,
    Plus,
    Minus,
    Star,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
    text: String,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        let start = i;
        let simple = match ch {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b'x' => Some(Tok::X),
            b'y' => Some(Tok::Y),
            b'i' => Some(Tok::Imag),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token {
                tok,
                pos: start,
                text: (ch as char).to_string(),
            });
            i += 1;
            continue;
        }
        if ch.is_ascii_digit() || ch == b'.' {
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
            let lit = &text[start..i];
            let v: f64 = lit.parse().map_err(|_| Error::Parse {
                position: start,
                message: format!("malformed number '{}'", lit),
            })?;
            out.push(Token {
                tok: Tok::Num(v),
                pos: start,
                text: lit.to_string(),
            });
            continue;
        }
        let c = text[start..].chars().next().unwrap_or('?');
        return Err(Error::Parse {
            position: start,
            message: format!("unexpected character '{}'", c),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn here(&self) -> usize {
        self.peek().map(|t| t.pos).unwrap_or(self.end)
    }

    fn error_at(&self, position: usize, message: &str) -> Error {
        let found = self
            .tokens
            .iter()
            .find(|t| t.pos == position)
            .map(|t| format!(" (found '{}')", t.text))
            .unwrap_or_default();
        Error::Parse {
            position,
            message: format!("{}{}", message, found),
        }
    }

    fn expr(&mut self) -> Result<NcPolynomial> {
        let mut negate = false;
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Minus) => {
                negate = true;
                self.pos += 1;
            }
            Some(Tok::Plus) => self.pos += 1,
            _ => {}
        }
        let first = self.term()?;
        let mut acc = if negate { -first } else { first };
        loop {
            match self.peek().map(|t| &t.tok) {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = &acc + &t;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let t = self.term()?;
                    acc = &acc - &t;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<NcPolynomial> {
        let mut acc = self.power()?;
        while let Some(Tok::Star) = self.peek().map(|t| &t.tok) {
            self.pos += 1;
            let f = self.power()?;
            acc = &acc * &f;
        }
        Ok(acc)
    }

    fn power(&mut self) -> Result<NcPolynomial> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek().map(|t| &t.tok) {
            self.pos += 1;
            let at = self.here();
            match self.next() {
                Some(Token { tok: Tok::Num(v), .. }) if v >= 0.0 && libm::trunc(v) == v && v <= 64.0 => {
                    return Ok(base.pow(v as u32));
                }
                _ => return Err(self.error_at(at, "expected a non-negative integer exponent")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<NcPolynomial> {
        let at = self.here();
        let tok = match self.next() {
            Some(t) => t,
            None => {
                return Err(Error::Parse {
                    position: self.end,
                    message: "unexpected end of input".into(),
                })
            }
        };
        match tok.tok {
            Tok::Num(v) => {
                if let Some(Tok::Imag) = self.peek().map(|t| &t.tok) {
                    self.pos += 1;
                    Ok(NcPolynomial::constant(Complex64::new(0.0, v)))
                } else {
                    Ok(NcPolynomial::constant(Complex64::new(v, 0.0)))
                }
            }
            Tok::Imag => Ok(NcPolynomial::constant(Complex64::new(0.0, 1.0))),
            Tok::X => Ok(NcPolynomial::x()),
            Tok::Y => Ok(NcPolynomial::y()),
            Tok::LParen => {
                let inner = self.expr()?;
                let close = self.here();
                match self.next() {
                    Some(Token { tok: Tok::RParen, .. }) => Ok(inner),
                    _ => Err(self.error_at(close, "expected ')'")),
                }
            }
            _ => Err(self.error_at(at, "expected a coefficient, a letter or '('")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn w(s: &str) -> Word {
        Word(
            s.chars()
                .map(|c| if c == 'x' { Letter::X } else { Letter::Y })
                .collect(),
        )
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parses_anticommutator() {
        let p = parse("x*y + y*x").unwrap();
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coefficient(&w("xy")), ONE);
        assert_eq!(p.coefficient(&w("yx")), ONE);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn parses_powers_and_constants() {
        let p = parse("2*x^2 - 1").unwrap();
        assert_eq!(p.num_terms(), 2);
        assert_eq!(p.coefficient(&w("xx")), c(2.0, 0.0));
        assert_eq!(p.coefficient(&Word::unit()), c(-1.0, 0.0));
    }

    #[test]
    fn parses_complex_coefficients() {
        let p = parse("(0+1i)*x*y + (0-1i)*y*x").unwrap();
        assert_eq!(p.coefficient(&w("xy")), c(0.0, 1.0));
        assert_eq!(p.coefficient(&w("yx")), c(0.0, -1.0));
        assert!(p.is_selfadjoint());
        assert_eq!(p.adjoint(), p);
    }

    #[test]
    fn like_terms_combine_and_cancel() {
        let p = parse("x*y + 2*x*y - 3*x*y + y").unwrap();
        assert_eq!(p, NcPolynomial::y());
        let q = parse("(x+y)^2").unwrap();
        assert_eq!(q.num_terms(), 4);
        assert_eq!(q.coefficient(&w("xy")), ONE);
    }

    #[test]
    fn empty_input_is_zero() {
        assert!(parse("").unwrap().is_zero());
        assert!(parse("   ").unwrap().is_zero());
        assert_eq!(parse("").unwrap().degree(), 0);
    }

    #[test]
    fn syntax_errors_report_position() {
        match parse("x * * y") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{:?}", other),
        }
        match parse("x + z") {
            Err(Error::Parse { position, .. }) => assert_eq!(position, 4),
            other => panic!("{:?}", other),
        }
        assert!(matches!(parse("(x + y"), Err(Error::Parse { position: 6, .. })));
        assert!(matches!(parse("x^-1"), Err(Error::Parse { .. })));
        assert!(matches!(parse("2x"), Err(Error::Parse { position: 1, .. })));
    }

    #[test]
    fn adjoint_examples() {
        let xy = parse("x*y").unwrap();
        assert_eq!(xy.adjoint(), parse("y*x").unwrap());
        let p = NcPolynomial::monomial(c(2.0, 3.0), w("xyx"));
        assert_eq!(p.adjoint(), NcPolynomial::monomial(c(2.0, -3.0), w("xyx")));
        assert!(parse("x*y+y*x").unwrap().is_selfadjoint());
        assert!(!xy.is_selfadjoint());
        assert!(!parse("1i").unwrap().is_selfadjoint());
    }

    #[test]
    fn evaluate_examples() {
        let swap = CMat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let diag = CMat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let sq = parse("x^2").unwrap().evaluate(&swap, &diag).unwrap();
        assert_eq!(sq, CMat::identity(2, 2));
        let anti = parse("x*y+y*x").unwrap().evaluate(&swap, &diag).unwrap();
        assert_eq!(anti, CMat::zeros(2, 2));
        let one = parse("1").unwrap().evaluate(&swap, &diag).unwrap();
        assert_eq!(one, CMat::identity(2, 2));
        let bad = parse("x").unwrap().evaluate(&swap, &CMat::identity(3, 3));
        assert!(matches!(bad, Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn diagonal_evaluation_matches_dense() {
        let a = CMat::from_fn(4, 4, |i, j| c((i + 2 * j) as f64 * 0.1, (i as f64 - j as f64) * 0.2));
        let d = [0.5, -1.0, 2.0, 0.25];
        let dm = CMat::from_diagonal(&nalgebra::DVector::from_iterator(4, d.iter().map(|v| c(*v, 0.0))));
        let p = parse("x*y + y*x + (2-1i)*y*x*x*y - 3*y^2 + x + 7").unwrap();
        let dense = p.evaluate(&a, &dm).unwrap();
        let fast = p.evaluate_diag(&a, &d).unwrap();
        assert!((dense - fast).norm() < 1e-12);
    }

    #[test]
    fn display_examples() {
        assert_eq!(parse("x*y + y*x").unwrap().to_string(), "x*y + y*x");
        assert_eq!(parse("2*x^2 - 1").unwrap().to_string(), "-1 + 2*x*x");
        assert_eq!(parse("-x").unwrap().to_string(), "-x");
        assert_eq!(NcPolynomial::zero().to_string(), "0");
        assert_eq!(
            NcPolynomial::monomial(c(0.5, -2.0), w("yx")).to_string(),
            "(0.5-2i)*y*x"
        );
    }

    fn arb_poly() -> impl Strategy<Value = NcPolynomial> {
        let letter = prop_oneof![Just(Letter::X), Just(Letter::Y)];
        let word = proptest::collection::vec(letter, 0..5).prop_map(Word);
        let coef = (-1e3f64..1e3, -1e3f64..1e3, 0u8..4).prop_map(|(re, im, kind)| match kind {
            0 => c(re, 0.0),
            1 => c(0.0, im),
            2 => c(re * 1e-9, im * 1e12),
            _ => c(re, im),
        });
        proptest::collection::vec((word, coef), 0..6).prop_map(NcPolynomial::from_terms)
    }

    fn arb_herm(n: usize) -> impl Strategy<Value = CMat> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let a = CMat::from_fn(n, n, |i, j| c(v[i * n + j].0, v[i * n + j].1));
            (&a + a.adjoint()) * c(0.5, 0.0)
        })
    }

    proptest! {
        #[test]
        fn adjoint_is_involutive(p in arb_poly()) {
            prop_assert_eq!(p.adjoint().adjoint(), p);
        }

        #[test]
        fn print_parse_round_trip(p in arb_poly()) {
            let text = p.to_string();
            let back = parse(&text).unwrap();
            prop_assert_eq!(back, p, "text was {}", text);
        }

        #[test]
        fn adjoint_evaluates_to_matrix_adjoint(p in arb_poly(), a in arb_herm(3), b in arb_herm(3)) {
            let lhs = p.adjoint().evaluate(&a, &b).unwrap();
            let rhs = p.evaluate(&a, &b).unwrap().adjoint();
            let scale = 1.0 + rhs.norm();
            prop_assert!((lhs - rhs).norm() <= 1e-12 * scale);
        }

        #[test]
        fn symmetrized_polynomials_are_selfadjoint(p in arb_poly()) {
            let s = &p + &p.adjoint();
            prop_assert!(s.is_selfadjoint());
        }
    }

    #[test]
    fn word_order_is_length_then_lex() {
        let mut v = vec![w("yx"), w(""), w("x"), w("xy"), w("y")];
        v.sort();
        assert_eq!(v, vec![w(""), w("x"), w("y"), w("xy"), w("yx")]);
    }
}
