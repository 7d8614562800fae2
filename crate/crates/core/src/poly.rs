//! Sparse multivariate polynomials with exact rational coefficients.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::syntax::{BinOp, Expr, Num};
use crate::{Error, Result, State};

/// Variable exponents, sorted by name, no zero exponents.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Monomial {
        Monomial(Vec::new())
    }

    pub fn var(x: &str) -> Monomial {
        Monomial(alloc::vec![(x.to_string(), 1)])
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn exp(&self, x: &str) -> u32 {
        self.0.iter().find(|(y, _)| y == x).map_or(0, |(_, e)| *e)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(x, e)| (x.as_str(), *e))
    }

    fn mul(&self, other: &Monomial) -> Monomial {
        let mut m: BTreeMap<String, u32> = self.0.iter().cloned().collect();
        for (x, e) in &other.0 {
            *m.entry(x.clone()).or_insert(0) += e;
        }
        Monomial(m.into_iter().collect())
    }

    /// `self / other` when `other` divides `self`.
    fn div(&self, other: &Monomial) -> Option<Monomial> {
        let mut m: BTreeMap<String, u32> = self.0.iter().cloned().collect();
        for (x, e) in &other.0 {
            let have = m.get_mut(x)?;
            if *have < *e {
                return None;
            }
            *have -= e;
        }
        Some(Monomial(m.into_iter().filter(|(_, e)| *e > 0).collect()))
    }

    /// Graded lexicographic order key: higher degree first.
    fn grlex(&self) -> (u32, Vec<(core::cmp::Reverse<String>, u32)>) {
        (self.degree(), self.0.iter().map(|(x, e)| (core::cmp::Reverse(x.clone()), *e)).collect())
    }
}

/// Polynomial as a map from monomials to non-zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly(BTreeMap<Monomial, BigRational>);

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Poly {
    pub fn zero() -> Poly {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn int(n: i64) -> Poly {
        Poly::constant(rat(n))
    }

    pub fn var(x: &str) -> Poly {
        let mut p = Poly::zero();
        p.add_term(Monomial::var(x), BigRational::one());
        p
    }

    pub fn term(c: BigRational, m: Monomial) -> Poly {
        let mut p = Poly::zero();
        p.add_term(m, c);
        p
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.0.get_mut(&m) {
            Some(e) => {
                *e += c;
                if e.is_zero() {
                    self.0.remove(&m);
                }
            }
            None => {
                self.0.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.0.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.0.keys().flat_map(|m| m.0.iter().map(|(x, _)| x.clone())).collect()
    }

    /// Constant value, if the polynomial has no variables.
    pub fn as_constant(&self) -> Option<BigRational> {
        match self.0.len() {
            0 => Some(BigRational::zero()),
            1 => self.0.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        if c.is_zero() {
            return Poly::zero();
        }
        Poly(self.0.iter().map(|(m, v)| (m.clone(), v * c)).collect())
    }

    pub fn pow(&self, n: u32) -> Poly {
        (0..n).fold(Poly::int(1), |acc, _| &acc * self)
    }

    pub fn deriv(&self, x: &str) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            let e = m.exp(x);
            if e == 0 {
                continue;
            }
            let rest: Vec<(String, u32)> = m
                .0
                .iter()
                .filter_map(|(y, k)| {
                    if y == x {
                        (*k > 1).then(|| (y.clone(), k - 1))
                    } else {
                        Some((y.clone(), *k))
                    }
                })
                .collect();
            out.add_term(Monomial(rest), c * rat(e as i64));
        }
        out
    }

    /// Exact value at a rational point; unbound variables are errors.
    pub fn eval_exact(&self, point: &BTreeMap<String, BigRational>) -> Result<BigRational> {
        let mut acc = BigRational::zero();
        for (m, c) in &self.0 {
            let mut t = c.clone();
            for (x, e) in &m.0 {
                let v = point.get(x).ok_or_else(|| Error::Unbound(x.clone()))?;
                t *= num_traits::pow(v.clone(), *e as usize);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_with<F: Fn(&str) -> Option<f64>>(&self, env: F) -> Result<f64> {
        let mut acc = 0.0;
        for (m, c) in &self.0 {
            let mut t = c.to_f64().unwrap_or(f64::NAN);
            for (x, e) in &m.0 {
                let v = env(x).ok_or_else(|| Error::Unbound(x.clone()))?;
                t *= libm::pow(v, *e as f64);
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval(&self, s: &State) -> Result<f64> {
        self.eval_with(|x| s.try_get(x))
    }

    /// Substitute a polynomial for each listed variable.
    pub fn compose(&self, sub: &BTreeMap<String, Poly>) -> Poly {
        let mut out = Poly::zero();
        for (m, c) in &self.0 {
            let mut t = Poly::constant(c.clone());
            for (x, e) in &m.0 {
                let base = sub.get(x).cloned().unwrap_or_else(|| Poly::var(x));
                t = &t * &base.pow(*e);
            }
            out = &out + &t;
        }
        out
    }

    fn leading(&self) -> Option<(&Monomial, &BigRational)> {
        self.0.iter().max_by(|a, b| a.0.grlex().cmp(&b.0.grlex()))
    }

    /// Division by a single divisor in graded lexicographic order.
    /// The remainder is zero exactly when `d` divides `self`.
    pub fn div_rem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        let (lm, lc) = d.leading().ok_or_else(|| Error::DivZero("zero polynomial".into()))?;
        let (lm, lc) = (lm.clone(), lc.clone());
        let mut q = Poly::zero();
        let mut r = Poly::zero();
        let mut p = self.clone();
        while let Some((pm, pc)) = p.leading().map(|(m, c)| (m.clone(), c.clone())) {
            match pm.div(&lm) {
                Some(m) => {
                    let t = Poly::term(&pc / &lc, m);
                    p = &p - &(&t * d);
                    q = &q + &t;
                }
                None => {
                    let t = Poly::term(pc, pm);
                    p = &p - &t;
                    r = &r + &t;
                }
            }
        }
        Ok((q, r))
    }

    /// Polynomial view of an expression; division only by non-zero constants.
    pub fn from_expr(e: &Expr) -> Result<Poly> {
        Ok(match e {
            Expr::Var(x) => Poly::var(x),
            Expr::Const(n) => Poly::constant(n.rational().clone()),
            Expr::Neg(a) => -&Poly::from_expr(a)?,
            Expr::Bin(op, a, b) => {
                let (pa, pb) = (Poly::from_expr(a)?, Poly::from_expr(b)?);
                match op {
                    BinOp::Add => &pa + &pb,
                    BinOp::Sub => &pa - &pb,
                    BinOp::Mul => &pa * &pb,
                    BinOp::Div => match pb.as_constant() {
                        Some(c) if !c.is_zero() => pa.scale(&c.recip()),
                        Some(_) => return Err(Error::DivZero(alloc::format!("{e}"))),
                        None => return Err(Error::Invalid(alloc::format!("`{e}` is not a polynomial"))),
                    },
                }
            }
            Expr::Call(..) => return Err(Error::Invalid(alloc::format!("`{e}` is not a polynomial"))),
        })
    }

    /// Expression with powers written as repeated products.
    pub fn to_expr(&self) -> Expr {
        let mut out: Option<Expr> = None;
        for (m, c) in self.0.iter().rev() {
            let mut factors: Vec<Expr> = Vec::new();
            let neg = c.is_negative();
            let a = c.abs();
            if !a.is_one() || m.0.is_empty() {
                factors.push(Expr::num(Num::new(a)));
            }
            for (x, e) in &m.0 {
                for _ in 0..*e {
                    factors.push(Expr::var(x));
                }
            }
            let mut it = factors.into_iter();
            let first = it.next().expect("non-empty");
            let t = it.fold(first, Expr::mul);
            out = Some(match out {
                None if neg => Expr::Neg(Box::new(t)),
                None => t,
                Some(acc) if neg => Expr::sub(acc, t),
                Some(acc) => Expr::add(acc, t),
            });
        }
        out.unwrap_or_else(|| Expr::int(0))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.0 {
            r.add_term(m.clone(), c.clone());
        }
        r
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        let mut r = self.clone();
        for (m, c) in &o.0 {
            r.add_term(m.clone(), -c.clone());
        }
        r
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut r = Poly::zero();
        for (m1, c1) in &self.0 {
            for (m2, c2) in &o.0 {
                r.add_term(m1.mul(m2), c1 * c2);
            }
        }
        r
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }
}

fn fmt_rat(f: &mut fmt::Formatter<'_>, q: &BigRational) -> fmt::Result {
    if q.is_integer() {
        write!(f, "{}", q.numer())
    } else {
        write!(f, "{}/{}", q.numer(), q.denom())
    }
}

impl fmt::Display for Poly {
    /// Terms in decreasing graded order: `x^2 + 2*x*y - 1/2`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "0");
        }
        let mut terms: Vec<_> = self.0.iter().collect();
        terms.sort_by(|a, b| b.0.grlex().cmp(&a.0.grlex()));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            match (i, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            let a = c.abs();
            let mut first = true;
            if !a.is_one() || m.0.is_empty() {
                fmt_rat(f, &a)?;
                first = false;
            }
            for (x, e) in &m.0 {
                if !first {
                    write!(f, "*")?;
                }
                first = false;
                write!(f, "{x}")?;
                if *e > 1 {
                    write!(f, "^{e}")?;
                }
            }
        }
        Ok(())
    }
}

/// Parses `x^2 + 2*x*y - 1/2`: sums, products, integer powers, rational
/// constants and parentheses. Division is by constants only.
pub fn parse_poly(src: &str) -> Result<Poly> {
    let toks = tokenize(src)?;
    let mut p = PolyParser { toks, pos: 0 };
    let r = p.sum()?;
    if p.pos != p.toks.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(r)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(char),
}

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>> {
    let cs: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = cs[start..i].iter().collect();
            out.push((Tok::Num(s.parse().expect("digits")), start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(cs[start..i].iter().collect()), start));
        } else if "+-*/^()".contains(c) {
            out.push((Tok::Sym(c), i));
            i += 1;
        } else {
            return Err(Error::Syntax { line: 1, col: i + 1, msg: alloc::format!("unexpected `{c}`") });
        }
    }
    Ok(out)
}

struct PolyParser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl PolyParser {
    fn err(&self, msg: &str) -> Error {
        let col = self.toks.get(self.pos).map_or_else(|| self.toks.last().map_or(0, |t| t.1 + 1), |t| t.1);
        Error::Syntax { line: 1, col: col + 1, msg: msg.into() }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.toks.get(self.pos).is_some_and(|t| t.0 == Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Poly> {
        let mut acc = self.product()?;
        loop {
            if self.eat('+') {
                acc = &acc + &self.product()?;
            } else if self.eat('-') {
                acc = &acc - &self.product()?;
            } else {
                return Ok(acc);
            }
        }
    }

    fn product(&mut self) -> Result<Poly> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                acc = &acc * &self.unary()?;
            } else if self.eat('/') {
                let d = self.unary()?;
                match d.as_constant() {
                    Some(c) if !c.is_zero() => acc = acc.scale(&c.recip()),
                    _ => return Err(self.err("division by a non-constant or zero")),
                }
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Poly> {
        if self.eat('-') {
            return Ok(-&self.unary()?);
        }
        let base = self.atom()?;
        if self.eat('^') {
            match self.toks.get(self.pos) {
                Some((Tok::Num(n), _)) => {
                    let e = n.to_u32().ok_or_else(|| self.err("exponent too large"))?;
                    self.pos += 1;
                    return Ok(base.pow(e));
                }
                _ => return Err(self.err("expected a natural exponent")),
            }
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Poly> {
        match self.toks.get(self.pos).cloned() {
            Some((Tok::Num(n), _)) => {
                self.pos += 1;
                Ok(Poly::constant(BigRational::from_integer(n)))
            }
            Some((Tok::Ident(x), _)) => {
                self.pos += 1;
                Ok(Poly::var(&x))
            }
            Some((Tok::Sym('('), _)) => {
                self.pos += 1;
                let p = self.sum()?;
                if !self.eat(')') {
                    return Err(self.err("expected `)`"));
                }
                Ok(p)
            }
            _ => Err(self.err("expected a number, variable or `(`")),
        }
    }
}
