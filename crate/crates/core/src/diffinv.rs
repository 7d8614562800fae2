//! Lie derivatives and checkers for the differential invariant rules.
//!
//! Symbolic checks are exact polynomial identities. Guarded and barrier
//! checks sample a grid and can only refute; they never report a proof.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::assertion::{Assertion, Term};
use crate::poly::Poly;
use crate::runtime::Event;
use crate::syntax::{BExpr, CmpOp, Field};
use crate::{Error, Result, State, Trace};

/// Polynomial right-hand side for each evolving variable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct VectorField(pub BTreeMap<String, Poly>);

impl VectorField {
    pub fn new(pairs: impl IntoIterator<Item = (String, Poly)>) -> VectorField {
        VectorField(pairs.into_iter().collect())
    }

    pub fn from_field(f: &Field) -> Result<VectorField> {
        f.iter().map(|(x, e)| Ok((x.clone(), Poly::from_expr(e)?))).collect::<Result<_>>().map(VectorField)
    }

    pub fn to_field(&self) -> Field {
        self.0.iter().map(|(x, p)| (x.clone(), p.to_expr())).collect()
    }

    pub fn negate(&self) -> VectorField {
        VectorField(self.0.iter().map(|(x, p)| (x.clone(), -p)).collect())
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }
}

/// `L^k_f p`. Variables without an equation in `f` are treated as constants.
pub fn lie(p: &Poly, f: &VectorField, k: usize) -> Poly {
    let mut cur = p.clone();
    for _ in 0..k {
        let mut next = Poly::zero();
        for (x, e) in &f.0 {
            let d = cur.deriv(x);
            if !d.is_zero() {
                next = &next + &(&d * e);
            }
        }
        cur = next;
    }
    cur
}

/// Outcome of a check. Sampled checks stop at `NoCounterexample`.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    ProvedExact,
    NoCounterexample { warning: Option<String> },
    Refuted { point: State, value: f64 },
}

impl Verdict {
    pub fn is_refuted(&self) -> bool {
        matches!(self, Verdict::Refuted { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::ProvedExact => "proved-exact",
            Verdict::NoCounterexample { .. } => "no-counterexample",
            Verdict::Refuted { .. } => "refuted",
        }
    }
}

/// Sampling grid: `points` values per variable, evenly spaced on the
/// variable's range (the default range unless overridden).
#[derive(Clone, Debug, PartialEq)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub ranges: BTreeMap<String, (f64, f64)>,
    /// Barrier check: points with `|q| <= band` count as on the boundary.
    pub band: f64,
    /// Barrier check: required `L q <= -margin` on the boundary.
    pub margin: f64,
    /// Equality tolerance for guarded checks.
    pub tol: f64,
    /// Cap on the number of grid points.
    pub max_points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            lo: -2.0,
            hi: 2.0,
            points: 21,
            ranges: BTreeMap::new(),
            band: 0.05,
            margin: 1e-9,
            tol: 1e-9,
            max_points: 1_000_000,
        }
    }
}

impl GridConfig {
    /// Every grid point over the given variables, in lexicographic order.
    pub fn points_for(&self, vars: &[String]) -> Result<Vec<State>> {
        let n = self.points.max(1);
        let total = libm::pow(n as f64, vars.len() as f64);
        if total > self.max_points as f64 {
            return Err(Error::Budget(alloc::format!("{total} grid points")));
        }
        let axis = |x: &str| -> Vec<f64> {
            let (lo, hi) = self.ranges.get(x).copied().unwrap_or((self.lo, self.hi));
            if n == 1 {
                return alloc::vec![(lo + hi) / 2.0];
            }
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        };
        let mut out = alloc::vec![State::new()];
        for x in vars {
            let ax = axis(x);
            out = out.iter().flat_map(|s| ax.iter().map(move |v| s.with(x, *v))).collect();
        }
        Ok(out)
    }
}

fn grid_vars(polys: &[&Poly], f: &VectorField, b: &BExpr) -> Vec<String> {
    let mut vs: alloc::collections::BTreeSet<String> = f.0.keys().cloned().collect();
    for p in polys {
        vs.extend(p.vars());
    }
    for p in f.0.values() {
        vs.extend(p.vars());
    }
    vs.extend(b.vars());
    vs.into_iter().collect()
}

/// Premise shape of the differential invariant rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvSign {
    /// `L q = 0`, concluding `q = c`.
    Eq,
    /// `L q >= 0`, concluding `q >= c`.
    Ge,
    /// `L q <= 0`, concluding `q <= c`.
    Le,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DiffInvMode {
    /// Domain-independent polynomial check, refuted by a grid witness.
    Exact,
    /// Sampled check of `B -> premise`.
    Guarded(GridConfig),
}

/// Holds everywhere when every monomial has even exponents and the
/// coefficient has the requested sign.
fn sign_definite(p: &Poly, nonneg: bool) -> bool {
    p.terms().all(|(m, c)| m.iter().all(|(_, e)| e % 2 == 0) && if nonneg { !c.is_negative() } else { !c.is_positive() })
}

pub fn check_diffinv(q: &Poly, f: &VectorField, b: &BExpr, sign: InvSign, mode: &DiffInvMode) -> Result<Verdict> {
    let l = lie(q, f, 1);
    let ok = |v: f64, tol: f64| match sign {
        InvSign::Eq => v.abs() <= tol,
        InvSign::Ge => v >= -tol,
        InvSign::Le => v <= tol,
    };
    match mode {
        DiffInvMode::Exact => {
            let proved = match sign {
                InvSign::Eq => l.is_zero(),
                InvSign::Ge => sign_definite(&l, true),
                InvSign::Le => sign_definite(&l, false),
            };
            if proved {
                return Ok(Verdict::ProvedExact);
            }
            let grid = GridConfig::default();
            for s in grid.points_for(&grid_vars(&[q, &l], f, &BExpr::True))? {
                let v = l.eval(&s)?;
                if !ok(v, 0.0) {
                    return Ok(Verdict::Refuted { point: s, value: v });
                }
            }
            Ok(Verdict::NoCounterexample { warning: Some("no witness on the default grid".into()) })
        }
        DiffInvMode::Guarded(grid) => {
            if sign == InvSign::Eq && l.is_zero() {
                return Ok(Verdict::ProvedExact);
            }
            let mut hits = 0usize;
            for s in grid.points_for(&grid_vars(&[q, &l], f, b))? {
                if !b.eval(&s)? {
                    continue;
                }
                hits += 1;
                let v = l.eval(&s)?;
                if !ok(v, grid.tol) {
                    return Ok(Verdict::Refuted { point: s, value: v });
                }
            }
            let warning = (hits == 0).then(|| "no grid point satisfies the domain".into());
            Ok(Verdict::NoCounterexample { warning })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DbxVerdict {
    /// `L q = g q` with this cofactor.
    Exact { g: Poly },
    /// `L q - g q`, or the division remainder in auto mode.
    Failed { remainder: Poly },
}

/// Darboux equality: `L q = g q` for the given cofactor, or for the
/// quotient of `L q` by `q` when `g` is `None`.
pub fn check_dbx(q: &Poly, f: &VectorField, g: Option<&Poly>) -> Result<DbxVerdict> {
    let l = lie(q, f, 1);
    match g {
        Some(g) => {
            let r = &l - &(g * q);
            Ok(if r.is_zero() { DbxVerdict::Exact { g: g.clone() } } else { DbxVerdict::Failed { remainder: r } })
        }
        None => {
            let (quot, rem) = l.div_rem(q)?;
            Ok(if rem.is_zero() { DbxVerdict::Exact { g: quot } } else { DbxVerdict::Failed { remainder: rem } })
        }
    }
}

/// Falsifies `B ∧ q = 0 -> L q < 0` on the grid, reading `q = 0` as
/// `|q| <= band` and `< 0` as `<= -margin`.
pub fn check_barrier(q: &Poly, f: &VectorField, b: &BExpr, grid: &GridConfig) -> Result<Verdict> {
    let l = lie(q, f, 1);
    let mut hits = 0usize;
    for s in grid.points_for(&grid_vars(&[q, &l], f, b))? {
        if q.eval(&s)?.abs() > grid.band || !b.eval(&s)? {
            continue;
        }
        hits += 1;
        let v = l.eval(&s)?;
        if v > -grid.margin {
            return Ok(Verdict::Refuted { point: s, value: v });
        }
    }
    let warning = (hits == 0).then(|| "no grid point lies in the boundary band".into());
    Ok(Verdict::NoCounterexample { warning })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LieSign {
    /// `L* q > 0`
    Pos,
    /// `L* q >= 0`
    NonNeg,
}

fn poly_term(p: &Poly) -> Term {
    Term::from(&p.to_expr())
}

/// The nested Lie chain up to order `n - 1`, as an evaluable assertion.
pub fn lstar_formula(q: &Poly, f: &VectorField, n: usize, sign: LieSign) -> Result<Assertion> {
    if n == 0 {
        return Err(Error::Invalid("the Lie order bound must be at least 1".into()));
    }
    let ls: Vec<Term> = (0..n).map(|i| poly_term(&lie(q, f, i))).collect();
    let zero = |t: &Term| Assertion::cmp(CmpOp::Eq, t.clone(), Term::int(0));
    let mut chain = Vec::new();
    for i in 0..n {
        let op = if i + 1 == n { CmpOp::Gt } else { CmpOp::Ge };
        let concl = Assertion::cmp(op, ls[i].clone(), Term::int(0));
        if i == 0 {
            chain.push(concl);
        } else {
            chain.push(Assertion::imp(Assertion::and_all(ls[..i].iter().map(zero)), concl));
        }
    }
    let strict = Assertion::and_all(chain);
    Ok(match sign {
        LieSign::Pos => strict,
        LieSign::NonNeg => Assertion::or(strict, Assertion::and_all(ls.iter().map(zero))),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrInvConfig {
    /// Samples per wait event, endpoints included.
    pub samples: usize,
    /// Checked prefix of an infinite wait.
    pub horizon: f64,
}

impl Default for TrInvConfig {
    fn default() -> Self {
        TrInvConfig { samples: 200, horizon: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrInvViolation {
    pub event: usize,
    pub time: f64,
    pub state: State,
}

/// Checks `inv` at sampled points of every wait trajectory, both
/// endpoints included. Returns the first violation.
pub fn trinv_check(t: &Trace, inv: &BExpr, cfg: &TrInvConfig) -> Result<Option<TrInvViolation>> {
    let n = cfg.samples.max(2);
    for (k, e) in t.events.iter().enumerate() {
        let Event::Wait { dur, traj, .. } = e else { continue };
        let d = if dur.is_finite() { *dur } else { cfg.horizon };
        for i in 0..n {
            let tau = if i + 1 == n { d } else { d * i as f64 / (n - 1) as f64 };
            let s = traj.eval(tau)?;
            if !inv.eval(&s)? {
                return Ok(Some(TrInvViolation { event: k, time: tau, state: s }));
            }
        }
    }
    Ok(None)
}

/// `L^k_f p` evaluated exactly at a rational point.
pub fn lie_at(p: &Poly, f: &VectorField, k: usize, point: &BTreeMap<String, BigRational>) -> Result<BigRational> {
    let v = lie(p, f, k).eval_exact(point)?;
    Ok(if v.is_zero() { BigRational::zero() } else { v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::{eval, EvalConfig, Truth, Valuation};
    use crate::poly::parse_poly;
    use crate::runtime::{ReadySet, Trajectory};
    use crate::syntax::parse_bexpr;
    use alloc::sync::Arc;

    fn p(s: &str) -> Poly {
        parse_poly(s).unwrap()
    }

    fn vf(pairs: &[(&str, &str)]) -> VectorField {
        VectorField::new(pairs.iter().map(|(x, e)| (String::from(*x), p(e))))
    }

    fn harmonic() -> VectorField {
        vf(&[("x", "y"), ("y", "-x")])
    }

    #[test]
    fn lie_basics() {
        assert_eq!(lie(&p("x^2 + y^2"), &harmonic(), 0), p("x^2 + y^2"));
        assert!(lie(&p("x^2 + y^2"), &harmonic(), 1).is_zero());
        assert_eq!(lie(&p("x"), &vf(&[("x", "x")]), 3), p("x"));
        assert_eq!(lie(&p("x*y"), &harmonic(), 1), p("y^2 - x^2"));
    }

    #[test]
    fn diffinv_verdicts() {
        let t = BExpr::True;
        let ex = DiffInvMode::Exact;
        assert_eq!(check_diffinv(&p("x^2 + y^2"), &harmonic(), &t, InvSign::Eq, &ex).unwrap(), Verdict::ProvedExact);
        match check_diffinv(&p("x"), &vf(&[("x", "1")]), &t, InvSign::Eq, &ex).unwrap() {
            Verdict::Refuted { value, .. } => assert_eq!(value, 1.0),
            v => panic!("{v:?}"),
        }
        let hyper = vf(&[("x", "x"), ("y", "-y")]);
        assert_eq!(check_diffinv(&p("x*y"), &hyper, &t, InvSign::Eq, &ex).unwrap(), Verdict::ProvedExact);
        assert_eq!(check_diffinv(&p("x"), &vf(&[("x", "y^2")]), &t, InvSign::Ge, &ex).unwrap(), Verdict::ProvedExact);
        assert!(check_diffinv(&p("x"), &vf(&[("x", "y^2")]), &t, InvSign::Le, &ex).unwrap().is_refuted());
    }

    #[test]
    fn guarded_diffinv_respects_domain() {
        let f = vf(&[("x", "x")]);
        let g = DiffInvMode::Guarded(GridConfig::default());
        let pos = parse_bexpr("x >= 0").unwrap();
        assert!(matches!(
            check_diffinv(&p("x"), &f, &pos, InvSign::Ge, &g).unwrap(),
            Verdict::NoCounterexample { warning: None }
        ));
        assert!(check_diffinv(&p("x"), &f, &BExpr::True, InvSign::Ge, &g).unwrap().is_refuted());
    }

    #[test]
    fn darboux() {
        assert_eq!(check_dbx(&p("x"), &vf(&[("x", "x^2")]), None).unwrap(), DbxVerdict::Exact { g: p("x") });
        let f = vf(&[("x", "x"), ("y", "y")]);
        assert_eq!(check_dbx(&p("x + y"), &f, None).unwrap(), DbxVerdict::Exact { g: p("1") });
        assert_eq!(check_dbx(&p("x + y"), &f, Some(&p("1"))).unwrap(), DbxVerdict::Exact { g: p("1") });
        assert_eq!(check_dbx(&p("x"), &vf(&[("x", "1")]), None).unwrap(), DbxVerdict::Failed { remainder: p("1") });
    }

    #[test]
    fn barrier() {
        let t = BExpr::True;
        let g = GridConfig::default();
        assert_eq!(
            check_barrier(&p("x - 1"), &vf(&[("x", "-x")]), &t, &g).unwrap(),
            Verdict::NoCounterexample { warning: None }
        );
        match check_barrier(&p("x"), &vf(&[("x", "x")]), &t, &g).unwrap() {
            Verdict::Refuted { point, value } => {
                assert!(point.get("x").unwrap().abs() <= g.band);
                assert!(value > -g.margin);
            }
            v => panic!("{v:?}"),
        }
        let far = GridConfig { ranges: [("x".into(), (5.0, 6.0))].into_iter().collect(), ..g };
        match check_barrier(&p("x"), &vf(&[("x", "-1")]), &t, &far).unwrap() {
            Verdict::NoCounterexample { warning } => assert!(warning.is_some()),
            v => panic!("{v:?}"),
        }
    }

    fn at(a: &Assertion, pairs: &[(&str, f64)]) -> Truth {
        eval(a, &State::from_pairs(pairs), &Trace::new(), &Valuation::new(), &EvalConfig::default()).unwrap()
    }

    #[test]
    fn lstar_chain() {
        let f = vf(&[("x", "-1")]);
        let one = lstar_formula(&p("x"), &f, 1, LieSign::Pos).unwrap();
        assert_eq!(one, crate::assertion::parse_assertion("x > 0").unwrap());
        let two = lstar_formula(&p("x"), &f, 2, LieSign::Pos).unwrap();
        assert_eq!(at(&two, &[("x", 1.0)]), Truth::True);
        assert_eq!(at(&two, &[("x", 0.0)]), Truth::False);
        let circ = lstar_formula(&p("x^2 + y^2 - 1"), &harmonic(), 2, LieSign::NonNeg).unwrap();
        for th in [0.0, 0.7, 2.0, 4.0] {
            let (x, y) = (libm::cos(th), libm::sin(th));
            assert_ne!(at(&circ, &[("x", x), ("y", y)]), Truth::Unknown);
        }
        let exact = lstar_formula(&p("x^2 + y^2"), &harmonic(), 2, LieSign::NonNeg).unwrap();
        assert_eq!(at(&exact, &[("x", 0.0), ("y", 0.0)]), Truth::True);
        assert_eq!(at(&exact, &[("x", 1.0), ("y", 0.0)]), Truth::True);
        assert!(lstar_formula(&p("x"), &f, 0, LieSign::Pos).is_err());
    }

    #[test]
    fn trinv_endpoints() {
        let c = Trajectory::Const(State::from_pairs(&[("x", 0.0)]));
        let t = Trace::from_events(alloc::vec![Event::wait(1.0, c, ReadySet::new())]);
        assert!(trinv_check(&t, &parse_bexpr("x = 0").unwrap(), &TrInvConfig::default()).unwrap().is_none());

        let field = Arc::new(alloc::vec![("x".into(), crate::syntax::parse_expr("1").unwrap())]);
        let traj = Trajectory::ode(field, State::from_pairs(&[("x", 0.0)]), 1e-3).unwrap();
        let t = Trace::from_events(alloc::vec![Event::wait(2.0, traj, ReadySet::new())]);
        let cfg = TrInvConfig::default();
        assert!(trinv_check(&t, &parse_bexpr("x <= 2").unwrap(), &cfg).unwrap().is_none());
        let v = trinv_check(&t, &parse_bexpr("x < 2").unwrap(), &cfg).unwrap().unwrap();
        assert_eq!(v.time, 2.0);
    }

    #[test]
    fn field_conversion() {
        let f = alloc::vec![("x".into(), crate::syntax::parse_expr("y").unwrap()), ("y".into(), crate::syntax::parse_expr("-x").unwrap())];
        let v = VectorField::from_field(&f).unwrap();
        assert_eq!(v, harmonic());
        assert_eq!(VectorField::from_field(&v.to_field()).unwrap(), v);
        assert_eq!(v.negate(), vf(&[("x", "-y"), ("y", "x")]));
    }
}
