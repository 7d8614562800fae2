//! Symbolic trajectories with numeric evaluation.
//!
//! An ODE solution uses a closed form when every equation is affine in its
//! own variable and independent of the other evolving variables. Otherwise
//! it is integrated with classical RK4 on a fixed grid whose samples are
//! cached; off-grid times take one partial step from the previous node.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use spin::Mutex;

use super::state::State;
use crate::syntax::{BinOp, Expr, Field};
use crate::{math, Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;
const MAX_GRID: usize = 20_000_000;

#[derive(Clone, Debug)]
pub enum Trajectory {
    /// Constant at the given state.
    Const(State),
    Ode(Arc<OdeSol>),
    /// `p(t + d)`.
    Shift(Box<Trajectory>, f64),
    /// Pointwise disjoint union.
    Merge(Box<Trajectory>, Box<Trajectory>),
    /// `p` on `[0, d]`, then `q(t - d)`.
    Glue(Box<Trajectory>, f64, Box<Trajectory>),
    Pwl(Arc<PwlPath>),
}

impl Trajectory {
    pub fn ode(field: Arc<Field>, init: State, step: f64) -> Result<Trajectory> {
        Ok(Trajectory::Ode(Arc::new(OdeSol::new(field, init, step)?)))
    }

    pub fn shift(self, d: f64) -> Trajectory {
        if d == 0.0 {
            return self;
        }
        match self {
            Trajectory::Const(_) => self,
            Trajectory::Shift(p, d0) => Trajectory::Shift(p, d0 + d),
            Trajectory::Merge(p, q) => Trajectory::Merge(Box::new(p.shift(d)), Box::new(q.shift(d))),
            other => Trajectory::Shift(Box::new(other), d),
        }
    }

    pub fn merge(self, other: Trajectory) -> Trajectory {
        Trajectory::Merge(Box::new(self), Box::new(other))
    }

    /// Concatenate `self` on `[0, d]` with `next`, simplifying when `next`
    /// is the same trajectory continued.
    pub fn glue(self, d: f64, next: Trajectory) -> Trajectory {
        match (self, next) {
            (Trajectory::Const(a), Trajectory::Const(b)) if a == b => Trajectory::Const(a),
            (Trajectory::Merge(p1, q1), Trajectory::Merge(p2, q2)) => {
                Trajectory::Merge(Box::new(p1.glue(d, *p2)), Box::new(q1.glue(d, *q2)))
            }
            (p, Trajectory::Shift(q, o)) if same_base(&p, &q, o, d) => p,
            (p, q) => Trajectory::Glue(Box::new(p), d, Box::new(q)),
        }
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(alloc::format!("t = {t}")));
        }
        match self {
            Trajectory::Const(s) => Ok(s.clone()),
            Trajectory::Ode(sol) => sol.eval(t),
            Trajectory::Shift(p, d) => p.eval(t + d),
            Trajectory::Merge(p, q) => p.eval(t)?.merge(&q.eval(t)?),
            Trajectory::Glue(p, d, q) => {
                if t <= *d {
                    p.eval(t)
                } else {
                    q.eval(t - d)
                }
            }
            Trajectory::Pwl(w) => w.eval(t),
        }
    }

    pub fn vars(&self) -> Vec<String> {
        match self {
            Trajectory::Const(s) => s.vars().map(String::from).collect(),
            Trajectory::Ode(o) => o.init.vars().map(String::from).collect(),
            Trajectory::Shift(p, _) | Trajectory::Glue(p, _, _) => p.vars(),
            Trajectory::Merge(p, q) => {
                let mut v = p.vars();
                v.extend(q.vars());
                v.sort();
                v
            }
            Trajectory::Pwl(w) => w.base.vars().map(String::from).collect(),
        }
    }

    /// Swap the operands of every `Merge`.
    pub fn mirror(&self) -> Trajectory {
        match self {
            Trajectory::Merge(p, q) => Trajectory::Merge(Box::new(q.mirror()), Box::new(p.mirror())),
            Trajectory::Shift(p, d) => Trajectory::Shift(Box::new(p.mirror()), *d),
            Trajectory::Glue(p, d, q) => Trajectory::Glue(Box::new(p.mirror()), *d, Box::new(q.mirror())),
            other => other.clone(),
        }
    }

    /// Sampled comparison on `[0, dur]` (a bounded window for infinite `dur`).
    pub fn approx_eq(&self, other: &Trajectory, dur: f64, tol: f64) -> bool {
        if self == other {
            return true;
        }
        let span = if dur.is_finite() { dur } else { 10.0 };
        const N: usize = 16;
        (0..=N).all(|i| {
            let t = span * i as f64 / N as f64;
            match (self.eval(t), other.eval(t)) {
                (Ok(a), Ok(b)) => a.close_to(&b, tol),
                _ => false,
            }
        })
    }
}

fn same_base(p: &Trajectory, q: &Trajectory, o: f64, d: f64) -> bool {
    match p {
        Trajectory::Shift(p0, o0) => **p0 == *q && o == o0 + d,
        _ => *p == *q && o == d,
    }
}

impl PartialEq for Trajectory {
    fn eq(&self, other: &Self) -> bool {
        use Trajectory::*;
        match (self, other) {
            (Const(a), Const(b)) => a == b,
            (Ode(a), Ode(b)) => Arc::ptr_eq(a, b) || **a == **b,
            (Shift(p, d), Shift(q, e)) => d == e && p == q,
            (Merge(a, b), Merge(c, d)) => a == c && b == d,
            (Glue(a, d, b), Glue(c, e, f)) => d == e && a == c && b == f,
            (Pwl(a), Pwl(b)) => Arc::ptr_eq(a, b) || **a == **b,
            _ => false,
        }
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Trajectory::Const(s) => write!(f, "I{s}"),
            Trajectory::Ode(o) => {
                write!(f, "p[")?;
                for (i, (x, e)) in o.field.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}_dot = {e}")?;
                }
                write!(f, "]{}", o.init)
            }
            Trajectory::Shift(p, d) => write!(f, "({p})(.+{d})"),
            Trajectory::Merge(p, q) => write!(f, "({p} ⊎ {q})"),
            Trajectory::Glue(p, d, q) => write!(f, "({p} |{d}| {q})"),
            Trajectory::Pwl(w) => write!(f, "euler[h={}]{}", w.h, w.base),
        }
    }
}

#[derive(Debug)]
enum Solver {
    /// Per equation `a*x + b`.
    Affine(Vec<(f64, f64)>),
    Rk4(Mutex<Vec<Vec<f64>>>),
}

/// Solution of `field` from `init`. Variables outside the field stay fixed.
#[derive(Debug)]
pub struct OdeSol {
    pub field: Arc<Field>,
    pub init: State,
    pub step: f64,
    x0: Vec<f64>,
    solver: Solver,
}

impl PartialEq for OdeSol {
    fn eq(&self, other: &Self) -> bool {
        self.step == other.step && self.init == other.init && self.field == other.field
    }
}

impl OdeSol {
    pub fn new(field: Arc<Field>, init: State, step: f64) -> Result<OdeSol> {
        if !(step > 0.0) {
            return Err(Error::Integrator(alloc::format!("step {step}")));
        }
        let mut x0 = Vec::with_capacity(field.len());
        for (x, _) in field.iter() {
            x0.push(init.get(x)?);
        }
        let solver = match affine_coeffs(&field, &init)? {
            Some(c) => Solver::Affine(c),
            None => Solver::Rk4(Mutex::new(alloc::vec![x0.clone()])),
        };
        Ok(OdeSol { field, init, step, x0, solver })
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.solver, Solver::Affine(_))
    }

    /// Values of the field variables at `t`.
    pub fn values_at(&self, t: f64) -> Result<Vec<f64>> {
        match &self.solver {
            Solver::Affine(c) => Ok(self
                .x0
                .iter()
                .zip(c)
                .map(|(x0, (a, b))| {
                    if *a == 0.0 {
                        x0 + b * t
                    } else {
                        let at = a * t;
                        x0 * math::exp(at) + b * libm::expm1(at) / a
                    }
                })
                .collect()),
            Solver::Rk4(cache) => {
                let h = self.step;
                let n = math::floor(t / h);
                if n > MAX_GRID as f64 {
                    return Err(Error::Integrator(alloc::format!("t = {t} exceeds the integration grid")));
                }
                let n = n as usize;
                let mut grid = cache.lock();
                while grid.len() <= n {
                    let y = grid.last().cloned().unwrap_or_default();
                    let next = self.rk4(&y, h)?;
                    grid.push(next);
                }
                let y = grid[n].clone();
                drop(grid);
                let rest = t - n as f64 * h;
                if rest > 0.0 {
                    self.rk4(&y, rest)
                } else {
                    Ok(y)
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        let ys = self.values_at(t)?;
        let mut s = self.init.clone();
        for ((x, _), y) in self.field.iter().zip(ys) {
            s.set(x, y);
        }
        Ok(s)
    }

    /// Right-hand side at the given field values.
    pub fn deriv(&self, y: &[f64]) -> Result<Vec<f64>> {
        let env = |name: &str| -> Result<f64> {
            match self.field.iter().position(|(x, _)| x == name) {
                Some(i) => Ok(y[i]),
                None => self.init.get(name),
            }
        };
        self.field.iter().map(|(_, e)| e.eval_with(&env)).collect()
    }

    fn rk4(&self, y: &[f64], h: f64) -> Result<Vec<f64>> {
        let axpy = |a: &[f64], k: &[f64], c: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + c * k).collect() };
        let k1 = self.deriv(y)?;
        let k2 = self.deriv(&axpy(y, &k1, h / 2.0))?;
        let k3 = self.deriv(&axpy(y, &k2, h / 2.0))?;
        let k4 = self.deriv(&axpy(y, &k3, h))?;
        let out: Vec<f64> = (0..y.len())
            .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrator("non-finite value".into()));
        }
        Ok(out)
    }
}

/// Coefficients `(a, b)` with `x_dot = a*x + b` when the field is decoupled
/// and affine; `None` otherwise.
fn affine_coeffs(field: &Field, init: &State) -> Result<Option<Vec<(f64, f64)>>> {
    let mut out = Vec::with_capacity(field.len());
    for (x, e) in field.iter() {
        if field.iter().any(|(y, _)| y != x && e.mentions(y)) {
            return Ok(None);
        }
        match affine_in(e, x, init)? {
            Some(ab) => out.push(ab),
            None => return Ok(None),
        }
    }
    Ok(Some(out))
}

fn affine_in(e: &Expr, x: &str, s: &State) -> Result<Option<(f64, f64)>> {
    if !e.mentions(x) {
        return Ok(Some((0.0, e.eval(s)?)));
    }
    Ok(match e {
        Expr::Var(_) => Some((1.0, 0.0)),
        Expr::Neg(a) => affine_in(a, x, s)?.map(|(a, b)| (-a, -b)),
        Expr::Bin(op, l, r) => match op {
            BinOp::Add | BinOp::Sub => {
                let (Some((a1, b1)), Some((a2, b2))) = (affine_in(l, x, s)?, affine_in(r, x, s)?) else {
                    return Ok(None);
                };
                if *op == BinOp::Add {
                    Some((a1 + a2, b1 + b2))
                } else {
                    Some((a1 - a2, b1 - b2))
                }
            }
            BinOp::Mul if !l.mentions(x) => {
                let c = l.eval(s)?;
                affine_in(r, x, s)?.map(|(a, b)| (c * a, c * b))
            }
            BinOp::Mul if !r.mentions(x) => {
                let c = r.eval(s)?;
                affine_in(l, x, s)?.map(|(a, b)| (c * a, c * b))
            }
            BinOp::Div if !r.mentions(x) => {
                let c = r.eval(s)?;
                if c == 0.0 {
                    return Err(Error::DivZero(alloc::format!("{e}")));
                }
                affine_in(l, x, s)?.map(|(a, b)| (a / c, b / c))
            }
            _ => None,
        },
        Expr::Const(_) | Expr::Call(..) => None,
    })
}

/// Piecewise-linear path through equally spaced vertices.
#[derive(Debug, PartialEq)]
pub struct PwlPath {
    pub h: f64,
    pub vars: Vec<String>,
    pub base: State,
    pub vertices: Vec<Vec<f64>>,
}

impl PwlPath {
    pub fn span(&self) -> f64 {
        self.h * (self.vertices.len().saturating_sub(1)) as f64
    }

    pub fn values_at(&self, t: f64) -> Result<Vec<f64>> {
        let n = self.vertices.len();
        if n == 0 {
            return Err(Error::Domain("empty path".into()));
        }
        if t > self.span() * (1.0 + 1e-12) + 1e-12 {
            return Err(Error::Domain(alloc::format!("t = {t} beyond {}", self.span())));
        }
        let k = math::floor(t / self.h) as usize;
        if k + 1 >= n {
            return Ok(self.vertices[n - 1].clone());
        }
        let u = (t - k as f64 * self.h) / self.h;
        Ok(self.vertices[k].iter().zip(&self.vertices[k + 1]).map(|(a, b)| a + u * (b - a)).collect())
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        let ys = self.values_at(t)?;
        let mut s = self.base.clone();
        for (x, y) in self.vars.iter().zip(ys) {
            s.set(x, y);
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_expr;
    use alloc::string::ToString;

    fn field(eqs: &[(&str, &str)]) -> Arc<Field> {
        Arc::new(eqs.iter().map(|(x, e)| (x.to_string(), parse_expr(e).unwrap())).collect())
    }

    #[test]
    fn constant_trajectory_ignores_time() {
        let s = State::from_pairs(&[("x", 3.0)]);
        assert_eq!(Trajectory::Const(s.clone()).eval(7.0).unwrap(), s);
    }

    #[test]
    fn unit_field_is_closed_form() {
        let t = Trajectory::ode(field(&[("x", "1")]), State::from_pairs(&[("x", 0.0)]), DEFAULT_STEP).unwrap();
        assert_eq!(t.eval(2.0).unwrap().get("x").unwrap(), 2.0);
    }

    #[test]
    fn exponential_rk4_matches_closed_form() {
        // x_dot = x * x / x is not affine syntactically, forcing RK4.
        let f = field(&[("x", "x * x / x")]);
        let sol = OdeSol::new(f, State::from_pairs(&[("x", 1.0)]), 1e-3).unwrap();
        assert!(!sol.is_closed_form());
        let v = sol.eval(1.0).unwrap().get("x").unwrap();
        assert!((v - core::f64::consts::E).abs() < 1e-6);
        let g = OdeSol::new(field(&[("x", "x")]), State::from_pairs(&[("x", 1.0)]), 1e-3).unwrap();
        assert!(g.is_closed_form());
        for i in 0..=100 {
            let t = i as f64 / 10.0;
            let a = sol.eval(t).unwrap().get("x").unwrap();
            let b = g.eval(t).unwrap().get("x").unwrap();
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1.0), "t={t}: {a} vs {b}");
        }
    }

    #[test]
    fn initial_condition_is_exact() {
        let f = field(&[("v", "w - 3.732"), ("w", "w * w / 2500")]);
        let s = State::from_pairs(&[("v", -1.5), ("w", 3.7)]);
        assert_eq!(Trajectory::ode(f, s.clone(), 1e-3).unwrap().eval(0.0).unwrap(), s);
    }

    #[test]
    fn shift_merge_and_glue() {
        let p = Trajectory::ode(field(&[("x", "1")]), State::from_pairs(&[("x", 0.0)]), 1e-3).unwrap();
        let q = Trajectory::Const(State::from_pairs(&[("y", 5.0)]));
        let m = p.clone().shift(1.0).merge(q);
        assert_eq!(m.eval(0.5).unwrap(), State::from_pairs(&[("x", 1.5), ("y", 5.0)]));
        assert_eq!(p.clone().glue(1.0, p.clone().shift(1.0)), p);
        let g = p.clone().glue(1.0, Trajectory::Const(State::from_pairs(&[("x", 9.0)])));
        assert_eq!(g.eval(2.0).unwrap().get("x").unwrap(), 9.0);
        assert!(p.eval(-1.0).is_err());
    }

    #[test]
    fn frozen_variables_keep_their_value() {
        let t = Trajectory::ode(field(&[("x", "k")]), State::from_pairs(&[("x", 0.0), ("k", 3.0)]), 1e-3).unwrap();
        let s = t.eval(2.0).unwrap();
        assert_eq!(s.get("k").unwrap(), 3.0);
        assert_eq!(s.get("x").unwrap(), 6.0);
    }
}
