use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::math;
use crate::{Error, Result};

/// Exact rational constant with a cached float value.
#[derive(Clone, Debug)]
pub struct Num {
    q: BigRational,
    f: f64,
}

impl Num {
    pub fn new(q: BigRational) -> Self {
        let f = q.to_f64().unwrap_or(f64::NAN);
        Num { q, f }
    }

    pub fn int(n: i64) -> Self {
        Num::new(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Num::new(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// Exact rational for a finite float.
    pub fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x).map(Num::new)
    }

    pub fn value(&self) -> f64 {
        self.f
    }

    pub fn rational(&self) -> &BigRational {
        &self.q
    }

    pub fn is_zero(&self) -> bool {
        self.q.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.q.is_negative()
    }

    pub fn neg(&self) -> Self {
        Num::new(-self.q.clone())
    }
}

impl PartialEq for Num {
    fn eq(&self, other: &Self) -> bool {
        self.q == other.q
    }
}

impl Eq for Num {}

impl fmt::Display for Num {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.q.is_integer() {
            write!(f, "{}", self.q.numer())
        } else {
            write!(f, "{}/{}", self.q.numer(), self.q.denom())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub(crate) fn prec(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Named unary functions accepted in expressions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Func {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Abs,
}

impl Func {
    pub const ALL: [Func; 6] = [Func::Sqrt, Func::Exp, Func::Ln, Func::Sin, Func::Cos, Func::Abs];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Abs => "abs",
        }
    }

    pub fn lookup(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }

    pub fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sqrt => math::sqrt(x),
            Func::Exp => math::exp(x),
            Func::Ln => math::ln(x),
            Func::Sin => math::sin(x),
            Func::Cos => math::cos(x),
            Func::Abs => x.abs(),
        }
    }
}

/// Arithmetic expression. Division keeps its divisor as the right operand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    Var(String),
    Const(Num),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn var(x: &str) -> Expr {
        Expr::Var(x.to_string())
    }

    pub fn int(n: i64) -> Expr {
        Expr::Const(Num::int(n))
    }

    pub fn num(n: Num) -> Expr {
        Expr::Const(n)
    }

    pub fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::bin(BinOp::Div, a, b)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    pub fn eval_with<F>(&self, env: &F) -> Result<f64>
    where
        F: Fn(&str) -> Result<f64>,
    {
        Ok(match self {
            Expr::Var(x) => env(x)?,
            Expr::Const(n) => n.value(),
            Expr::Neg(a) => -a.eval_with(env)?,
            Expr::Call(f, a) => f.apply(a.eval_with(env)?),
            Expr::Bin(op, a, b) => {
                let x = a.eval_with(env)?;
                let y = b.eval_with(env)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(Error::DivZero(self.to_string()));
                        }
                        x / y
                    }
                }
            }
        })
    }

    pub fn eval(&self, s: &crate::State) -> Result<f64> {
        self.eval_with(&|x: &str| s.get(x))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(x) => {
                out.insert(x.clone());
            }
            Expr::Const(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn mentions(&self, x: &str) -> bool {
        match self {
            Expr::Var(y) => x == y,
            Expr::Const(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.mentions(x),
            Expr::Bin(_, a, b) => a.mentions(x) || b.mentions(x),
        }
    }

    /// Replace every occurrence of `x` by `e`.
    pub fn subst(&self, x: &str, e: &Expr) -> Expr {
        self.map_vars(&|y| if y == x { Some(e.clone()) } else { None })
    }

    pub fn map_vars<F>(&self, f: &F) -> Expr
    where
        F: Fn(&str) -> Option<Expr>,
    {
        match self {
            Expr::Var(y) => f(y).unwrap_or_else(|| self.clone()),
            Expr::Const(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.map_vars(f))),
            Expr::Call(g, a) => Expr::Call(*g, Box::new(a.map_vars(f))),
            Expr::Bin(op, a, b) => Expr::Bin(*op, Box::new(a.map_vars(f)), Box::new(b.map_vars(f))),
        }
    }

    /// Divisor subexpressions, outermost first.
    pub fn divisors(&self) -> Vec<&Expr> {
        let mut out = Vec::new();
        self.walk_divisors(&mut out);
        out
    }

    fn walk_divisors<'a>(&'a self, out: &mut Vec<&'a Expr>) {
        match self {
            Expr::Var(_) | Expr::Const(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.walk_divisors(out),
            Expr::Bin(op, a, b) => {
                if *op == BinOp::Div {
                    out.push(b);
                }
                a.walk_divisors(out);
                b.walk_divisors(out);
            }
        }
    }

    /// Exact value when the expression contains no variables or functions.
    pub fn const_value(&self) -> Option<BigRational> {
        match self {
            Expr::Const(n) => Some(n.rational().clone()),
            Expr::Var(_) | Expr::Call(..) => None,
            Expr::Neg(a) => a.const_value().map(|q| -q),
            Expr::Bin(op, a, b) => {
                let x = a.const_value()?;
                let y = b.const_value()?;
                match op {
                    BinOp::Add => Some(x + y),
                    BinOp::Sub => Some(x - y),
                    BinOp::Mul => Some(x * y),
                    BinOp::Div => {
                        if y.is_zero() {
                            None
                        } else {
                            Some(x / y)
                        }
                    }
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn holds(self, a: f64, b: f64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BExpr {
    True,
    False,
    Cmp(CmpOp, Expr, Expr),
    And(Box<BExpr>, Box<BExpr>),
    Or(Box<BExpr>, Box<BExpr>),
    Not(Box<BExpr>),
}

impl BExpr {
    pub fn cmp(op: CmpOp, a: Expr, b: Expr) -> BExpr {
        BExpr::Cmp(op, a, b)
    }

    pub fn and(a: BExpr, b: BExpr) -> BExpr {
        BExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: BExpr, b: BExpr) -> BExpr {
        BExpr::Or(Box::new(a), Box::new(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: BExpr) -> BExpr {
        BExpr::Not(Box::new(a))
    }

    pub fn eval_with<F>(&self, env: &F) -> Result<bool>
    where
        F: Fn(&str) -> Result<f64>,
    {
        Ok(match self {
            BExpr::True => true,
            BExpr::False => false,
            BExpr::Cmp(op, a, b) => op.holds(a.eval_with(env)?, b.eval_with(env)?),
            BExpr::And(a, b) => a.eval_with(env)? && b.eval_with(env)?,
            BExpr::Or(a, b) => a.eval_with(env)? || b.eval_with(env)?,
            BExpr::Not(a) => !a.eval_with(env)?,
        })
    }

    pub fn eval(&self, s: &crate::State) -> Result<bool> {
        self.eval_with(&|x: &str| s.get(x))
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BExpr::True | BExpr::False => {}
            BExpr::Cmp(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            BExpr::And(a, b) | BExpr::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            BExpr::Not(a) => a.collect_vars(out),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut s = BTreeSet::new();
        self.collect_vars(&mut s);
        s
    }

    pub fn map_exprs<F>(&self, f: &F) -> BExpr
    where
        F: Fn(&Expr) -> Expr,
    {
        match self {
            BExpr::True | BExpr::False => self.clone(),
            BExpr::Cmp(op, a, b) => BExpr::Cmp(*op, f(a), f(b)),
            BExpr::And(a, b) => BExpr::and(a.map_exprs(f), b.map_exprs(f)),
            BExpr::Or(a, b) => BExpr::or(a.map_exprs(f), b.map_exprs(f)),
            BExpr::Not(a) => BExpr::not(a.map_exprs(f)),
        }
    }

    pub fn subst(&self, x: &str, e: &Expr) -> BExpr {
        self.map_exprs(&|a| a.subst(x, e))
    }

    /// Negation normal form: `Not` only disappears, comparisons absorb it.
    pub fn nnf(&self) -> BExpr {
        match self {
            BExpr::True | BExpr::False | BExpr::Cmp(..) => self.clone(),
            BExpr::And(a, b) => BExpr::and(a.nnf(), b.nnf()),
            BExpr::Or(a, b) => BExpr::or(a.nnf(), b.nnf()),
            BExpr::Not(a) => a.negated_nnf(),
        }
    }

    fn negated_nnf(&self) -> BExpr {
        match self {
            BExpr::True => BExpr::False,
            BExpr::False => BExpr::True,
            BExpr::Cmp(op, a, b) => BExpr::Cmp(op.negate(), a.clone(), b.clone()),
            BExpr::And(a, b) => BExpr::or(a.negated_nnf(), b.negated_nnf()),
            BExpr::Or(a, b) => BExpr::and(a.negated_nnf(), b.negated_nnf()),
            BExpr::Not(a) => a.nnf(),
        }
    }

    /// Comparison atoms, left to right.
    pub fn atoms(&self) -> Vec<(CmpOp, &Expr, &Expr)> {
        let mut out = Vec::new();
        self.walk_atoms(&mut out);
        out
    }

    fn walk_atoms<'a>(&'a self, out: &mut Vec<(CmpOp, &'a Expr, &'a Expr)>) {
        match self {
            BExpr::True | BExpr::False => {}
            BExpr::Cmp(op, a, b) => out.push((*op, a, b)),
            BExpr::And(a, b) | BExpr::Or(a, b) => {
                a.walk_atoms(out);
                b.walk_atoms(out);
            }
            BExpr::Not(a) => a.walk_atoms(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::State;

    #[test]
    fn eval_respects_precedence_and_functions() {
        let s = State::from_pairs(&[("x", 2.0), ("y", 3.0)]);
        let e = Expr::add(Expr::var("x"), Expr::mul(Expr::var("y"), Expr::int(4)));
        assert_eq!(e.eval(&s).unwrap(), 14.0);
        let f = Expr::Call(Func::Abs, Box::new(Expr::neg(Expr::var("y"))));
        assert_eq!(f.eval(&s).unwrap(), 3.0);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let s = State::from_pairs(&[("x", 0.0)]);
        let e = Expr::div(Expr::int(1), Expr::var("x"));
        assert!(matches!(e.eval(&s), Err(Error::DivZero(_))));
        assert_eq!(e.divisors(), alloc::vec![&Expr::var("x")]);
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let e = Expr::var("z");
        assert_eq!(e.eval(&State::new()), Err(Error::Unbound("z".into())));
    }

    #[test]
    fn nnf_pushes_negation_into_atoms() {
        let b = BExpr::not(BExpr::and(
            BExpr::cmp(CmpOp::Lt, Expr::var("x"), Expr::int(1)),
            BExpr::not(BExpr::cmp(CmpOp::Eq, Expr::var("y"), Expr::int(0))),
        ));
        let n = b.nnf();
        assert_eq!(
            n,
            BExpr::or(
                BExpr::cmp(CmpOp::Ge, Expr::var("x"), Expr::int(1)),
                BExpr::cmp(CmpOp::Eq, Expr::var("y"), Expr::int(0)),
            )
        );
        let s = State::from_pairs(&[("x", 0.5), ("y", 2.0)]);
        assert_eq!(b.eval(&s).unwrap(), n.eval(&s).unwrap());
    }

    #[test]
    fn rational_constants_stay_exact() {
        let n = Num::ratio(5670, 1519);
        assert_eq!(n.to_string(), "810/217");
        assert!((n.value() - 5670.0 / 1519.0).abs() < 1e-15);
        assert_eq!(Num::ratio(2, 4), Num::ratio(1, 2));
    }
}
