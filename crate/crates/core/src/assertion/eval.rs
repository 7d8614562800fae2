//! Three-valued evaluation of assertions against a state and a trace.
//!
//! Quantifiers over reals and times are decided on finite domains: a
//! declared domain from [`EvalConfig`] is exact, everything else is
//! sampled. Trace quantifiers range over the contiguous segments of the
//! ground trace terms in their body and of `h`; trajectory quantifiers over
//! the trajectories recorded in those traces.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use crate::runtime::{detect_boundary, Event, SimConfig, State, Trace, Trajectory};
use crate::sync::sync_check_tol;
use crate::syntax::BinOp;
use crate::{math, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    pub fn from_bool(b: bool) -> Truth {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    pub fn is_true(self) -> bool {
        self == Truth::True
    }

    pub fn is_false(self) -> bool {
        self == Truth::False
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    pub fn and(self, o: Truth) -> Truth {
        match (self, o) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Unknown,
        }
    }

    pub fn or(self, o: Truth) -> Truth {
        self.not().and(o.not()).not()
    }

    pub fn imp(self, o: Truth) -> Truth {
        self.not().or(o)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Real(f64),
    Trace(Trace),
    Traj(Trajectory),
}

pub type Valuation = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    /// Domain for unbounded real quantifiers (exact when given).
    pub values: Option<Vec<f64>>,
    /// Domain for positive time quantifiers (exact when given).
    pub times: Option<Vec<f64>>,
    /// Sample count for intervals.
    pub samples: usize,
    /// Sampled range for unbounded reals when `values` is absent.
    pub real_range: Option<(f64, f64)>,
    /// Upper end for sampled positive times.
    pub horizon: f64,
    /// A sampled quantifier without counterexample (or witness) is Unknown.
    pub strict: bool,
    pub sim: SimConfig,
    pub tol: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            values: None,
            times: None,
            samples: 64,
            real_range: None,
            horizon: 10.0,
            strict: false,
            sim: SimConfig::default(),
            tol: 1e-9,
        }
    }
}

/// Evaluate `a` at state `s` and trace `h` under the logical valuation `nu`.
pub fn eval(a: &Assertion, s: &State, h: &Trace, nu: &Valuation, cfg: &EvalConfig) -> Result<Truth> {
    Env { s: s.clone(), h: h.clone(), nu: nu.clone(), cfg }.holds(a)
}

/// Evaluate a term to a number.
pub fn eval_term(t: &Term, s: &State, h: &Trace, nu: &Valuation, cfg: &EvalConfig) -> Result<f64> {
    Env { s: s.clone(), h: h.clone(), nu: nu.clone(), cfg }.term(t)
}

/// Evaluate a trace expression.
pub fn eval_trace(t: &TraceExpr, s: &State, h: &Trace, nu: &Valuation, cfg: &EvalConfig) -> Result<Trace> {
    Env { s: s.clone(), h: h.clone(), nu: nu.clone(), cfg }.trace(t)
}

#[derive(Clone)]
struct Env<'a> {
    s: State,
    h: Trace,
    nu: Valuation,
    cfg: &'a EvalConfig,
}

/// Numeric failures inside an atom make the atom undecided.
fn soft(r: Result<Truth>) -> Result<Truth> {
    match r {
        Err(Error::DivZero(_) | Error::Domain(_) | Error::Integrator(_)) => Ok(Truth::Unknown),
        r => r,
    }
}

/// Closed traces absorb whatever follows.
fn cat(a: Trace, b: &Trace) -> Trace {
    if a.is_closed() {
        return a;
    }
    a.concat(b).unwrap_or(a)
}

impl Env<'_> {
    fn holds(&self, a: &Assertion) -> Result<Truth> {
        Ok(match a {
            Assertion::True => Truth::True,
            Assertion::False => Truth::False,
            Assertion::Cmp(op, x, y) => soft((|| Ok(Truth::from_bool(op.holds(self.term(x)?, self.term(y)?))))())?,
            Assertion::TrEq(x, y) => {
                soft((|| Ok(Truth::from_bool(self.trace(x)?.approx_eq(&self.trace(y)?, self.cfg.tol))))())?
            }
            Assertion::Sync(x, cs, y, z) => soft((|| {
                let (tx, ty, tz) = (self.trace(x)?, self.trace(y)?, self.trace(z)?);
                Ok(Truth::from_bool(sync_check_tol(&tx, cs, &ty, &tz, self.cfg.tol)))
            })())?,
            Assertion::Not(x) => self.holds(x)?.not(),
            Assertion::And(x, y) => {
                let l = self.holds(x)?;
                if l.is_false() {
                    return Ok(l);
                }
                l.and(self.holds(y)?)
            }
            Assertion::Or(x, y) => {
                let l = self.holds(x)?;
                if l.is_true() {
                    return Ok(l);
                }
                l.or(self.holds(y)?)
            }
            Assertion::Imp(x, y) => {
                let l = self.holds(x)?;
                if l.is_false() {
                    return Ok(Truth::True);
                }
                l.imp(self.holds(y)?)
            }
            Assertion::Forall(b, body) => self.quant(b, body, true)?,
            Assertion::Exists(b, body) => self.quant(b, body, false)?,
            Assertion::Subst(body, sub) => {
                let mut env = self.clone();
                for (x, t) in &sub.vars {
                    env.s.set(x, self.term(t)?);
                }
                if let Some(g) = &sub.gamma {
                    env.h = self.trace(g)?;
                }
                for x in sub.vars.keys() {
                    env.nu.remove(x);
                }
                env.holds(body)?
            }
        })
    }

    fn quant(&self, b: &Binder, body: &Assertion, all: bool) -> Result<Truth> {
        let Some((dom, exact)) = self.domain(b, body)? else { return Ok(Truth::Unknown) };
        let mut unknown = false;
        let mut env = self.clone();
        for v in dom {
            env.nu.insert(b.var.clone(), v);
            match env.holds(body)? {
                Truth::True if !all => return Ok(Truth::True),
                Truth::False if all => return Ok(Truth::False),
                Truth::Unknown => unknown = true,
                _ => {}
            }
        }
        Ok(if unknown || (!exact && self.cfg.strict) {
            Truth::Unknown
        } else {
            Truth::from_bool(all)
        })
    }

    /// Candidate values for a binder and whether they are exhaustive.
    fn domain(&self, b: &Binder, body: &Assertion) -> Result<Option<(Vec<Value>, bool)>> {
        let reals = |(v, e): (Vec<f64>, bool)| Some((v.into_iter().map(Value::Real).collect(), e));
        Ok(match b.sort {
            Sort::Real | Sort::Time => self.real_domain(b, body)?.and_then(reals),
            Sort::Trace => {
                let traces = self.trace_domain(body);
                Some((traces.into_iter().map(Value::Trace).collect(), false))
            }
            Sort::Traj => {
                let mut out: Vec<Trajectory> = alloc::vec![Trajectory::Const(self.s.clone())];
                for t in self.trace_domain(body) {
                    for e in t.events {
                        if let Event::Wait { traj, .. } = e {
                            if !out.contains(&traj) {
                                out.push(traj);
                            }
                        }
                    }
                }
                Some((out.into_iter().map(Value::Traj).collect(), false))
            }
        })
    }

    fn real_domain(&self, b: &Binder, body: &Assertion) -> Result<Option<(Vec<f64>, bool)>> {
        let cfg = self.cfg;
        let n = cfg.samples;
        let (mut pts, exact, lo, hi, lo_open, hi_open) = match &b.range {
            Range::Interval { lo, hi, lo_open, hi_open } => {
                let (l, u) = (self.term(lo)?, self.term(hi)?);
                if u < l || (u == l && (*lo_open || *hi_open)) {
                    return Ok(Some((Vec::new(), true)));
                }
                let span = if u.is_finite() { u - l } else { cfg.horizon };
                let mut v: Vec<f64> = (0..n).map(|i| l + math::quasi(i) * span).collect();
                if !lo_open {
                    v.push(l);
                }
                if !hi_open && u.is_finite() {
                    v.push(u);
                }
                (v, false, l, u, *lo_open, *hi_open)
            }
            Range::Positive => match &cfg.times {
                Some(ts) => (ts.clone(), true, 0.0, f64::INFINITY, true, true),
                None => {
                    let mut v: Vec<f64> = (0..n).map(|i| (1.0 - math::quasi(i)) * cfg.horizon).collect();
                    v.push(cfg.horizon);
                    (v, false, 0.0, f64::INFINITY, true, true)
                }
            },
            Range::Any if b.sort == Sort::Time => match &cfg.times {
                Some(ts) => {
                    let mut v = ts.clone();
                    v.push(0.0);
                    (v, true, 0.0, f64::INFINITY, false, true)
                }
                None => {
                    let mut v: Vec<f64> = (0..n).map(|i| math::quasi(i) * cfg.horizon).collect();
                    v.push(0.0);
                    v.push(cfg.horizon);
                    (v, false, 0.0, f64::INFINITY, false, true)
                }
            },
            Range::Any => match (&cfg.values, cfg.real_range) {
                (Some(vs), _) => (vs.clone(), true, f64::NEG_INFINITY, f64::INFINITY, true, true),
                (None, Some((l, u))) => {
                    let mut v: Vec<f64> = (0..n).map(|i| l + math::quasi(i) * (u - l)).collect();
                    v.push(l);
                    v.push(u);
                    (v, false, l, u, false, false)
                }
                (None, None) => return Ok(None),
            },
        };
        if let Some(hint) = &b.hint {
            let mut s = self.s.clone();
            for (x, t) in &hint.init {
                s.set(x, self.term(t)?);
            }
            let sim = SimConfig { horizon: cfg.horizon.max(cfg.sim.horizon), ..cfg.sim };
            if let Ok((_, Some(t))) = detect_boundary(&hint.field, &hint.domain, &s, &sim) {
                pts.push(t);
            }
        }
        if cfg.times.is_none() && (b.sort == Sort::Time || b.range == Range::Positive) {
            for t in self.trace_bases(body) {
                pts.extend(t.events.iter().map(Event::duration).filter(|d| *d > 0.0 && d.is_finite()));
            }
        }
        let inside = |v: &f64| {
            (if lo_open { *v > lo } else { *v >= lo }) && (if hi_open { *v < hi } else { *v <= hi })
        };
        pts.retain(|v| v.is_finite() && inside(v));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        Ok(Some((pts, exact)))
    }

    /// `h` and every trace term in `body` that evaluates here.
    fn trace_bases(&self, body: &Assertion) -> Vec<Trace> {
        let mut terms = Vec::new();
        collect_traces(body, &mut terms);
        let mut bases = alloc::vec![self.h.clone()];
        bases.extend(terms.iter().filter_map(|t| self.trace(t).ok()));
        bases
    }

    /// Contiguous segments of the trace bases.
    fn trace_domain(&self, body: &Assertion) -> Vec<Trace> {
        let mut out: Vec<Trace> = Vec::new();
        for base in self.trace_bases(body) {
            let n = base.events.len();
            for i in 0..=n {
                for j in i..=n {
                    let seg = Trace { events: base.events[i..j].to_vec(), delta: base.delta && j == n };
                    if !out.iter().any(|t| t.approx_eq(&seg, 0.0)) {
                        out.push(seg);
                    }
                }
            }
        }
        out
    }

    fn lookup(&self, x: &str) -> Result<f64> {
        match self.nu.get(x) {
            Some(Value::Real(v)) => Ok(*v),
            Some(_) => Err(Error::Invalid(alloc::format!("`{x}` is not a real"))),
            None => self.s.get(x),
        }
    }

    fn term(&self, t: &Term) -> Result<f64> {
        Ok(match t {
            Term::Var(x) => self.lookup(x)?,
            Term::Const(n) => n.value(),
            Term::Inf => f64::INFINITY,
            Term::Neg(a) => -self.term(a)?,
            Term::Call(f, a) => f.apply(self.term(a)?),
            Term::Bin(op, a, b) => {
                let (x, y) = (self.term(a)?, self.term(b)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(Error::DivZero(alloc::format!("{x} / 0")));
                        }
                        x / y
                    }
                }
            }
            Term::At(p, at, x) => self.traj(p)?.eval(self.term(at)?)?.get(x)?,
        })
    }

    fn overridden(&self, m: &Overrides) -> Result<State> {
        let mut s = self.s.clone();
        for (x, t) in m {
            s.set(x, self.term(t)?);
        }
        Ok(s)
    }

    fn traj(&self, p: &TrajTerm) -> Result<Trajectory> {
        Ok(match p {
            TrajTerm::Id(m) => Trajectory::Const(self.overridden(m)?),
            TrajTerm::Ode(f, m) => Trajectory::ode(f.clone(), self.overridden(m)?, self.cfg.sim.step)?,
            TrajTerm::Shift(p, d) => self.traj(p)?.shift(self.term(d)?),
            TrajTerm::Merge(p, q) => self.traj(p)?.merge(self.traj(q)?),
            TrajTerm::Lit(t) => t.clone(),
            TrajTerm::Var(x) => match self.nu.get(x) {
                Some(Value::Traj(t)) => t.clone(),
                Some(_) => return Err(Error::Invalid(alloc::format!("`{x}` is not a trajectory"))),
                None => return Err(Error::Unbound(x.clone())),
            },
        })
    }

    fn trace(&self, t: &TraceExpr) -> Result<Trace> {
        Ok(match t {
            TraceExpr::Empty => Trace::new(),
            TraceExpr::Gamma => self.h.clone(),
            TraceExpr::Var(x) => match self.nu.get(x) {
                Some(Value::Trace(t)) => t.clone(),
                Some(_) => return Err(Error::Invalid(alloc::format!("`{x}` is not a trace"))),
                None => return Err(Error::Unbound(x.clone())),
            },
            TraceExpr::Concat(a, b) => cat(self.trace(a)?, &self.trace(b)?),
            TraceExpr::Event(e) => Trace::from_events(alloc::vec![self.event(e)?]),
        })
    }

    fn event(&self, e: &EventTerm) -> Result<Event> {
        Ok(match e {
            EventTerm::Comm(cd, v) => Event::Comm { cd: cd.clone(), value: self.term(v)? },
            EventTerm::Wait(d, p, rdy) => {
                let d = self.term(d)?;
                if !(d > 0.0) {
                    return Err(Error::Domain(alloc::format!("wait of duration {d}")));
                }
                Event::wait(d, self.traj(p)?, rdy.clone())
            }
        })
    }
}

fn collect_traces(a: &Assertion, out: &mut Vec<TraceExpr>) {
    match a {
        Assertion::True | Assertion::False | Assertion::Cmp(..) => {}
        Assertion::TrEq(x, y) => {
            out.push(x.clone());
            out.push(y.clone());
        }
        Assertion::Sync(x, _, y, z) => out.extend([x.clone(), y.clone(), z.clone()]),
        Assertion::Not(x) | Assertion::Forall(_, x) | Assertion::Exists(_, x) => collect_traces(x, out),
        Assertion::And(x, y) | Assertion::Or(x, y) | Assertion::Imp(x, y) => {
            collect_traces(x, out);
            collect_traces(y, out);
        }
        Assertion::Subst(x, s) => {
            collect_traces(x, out);
            if let Some(g) = &s.gamma {
                out.push(g.clone());
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::parse_assertion;
    use crate::syntax::Dir;

    fn ev(src: &str, s: &State, h: &Trace) -> Truth {
        let cfg = EvalConfig { values: Some(alloc::vec![-1.0, 0.0, 2.0]), ..EvalConfig::default() };
        eval(&parse_assertion(src).unwrap(), s, h, &Valuation::new(), &cfg).unwrap()
    }

    #[test]
    fn kleene_tables() {
        use Truth::*;
        assert_eq!(Unknown.and(False), False);
        assert_eq!(Unknown.or(True), True);
        assert_eq!(Unknown.imp(True), True);
        assert_eq!(False.imp(Unknown), True);
        assert_eq!(Unknown.not(), Unknown);
    }

    #[test]
    fn atoms_and_connectives() {
        let s = State::from_pairs(&[("x", 1.0)]);
        assert_eq!(ev("x > 0 && x < 2", &s, &Trace::new()), Truth::True);
        assert_eq!(ev("x > 1 || !(x = 1)", &s, &Trace::new()), Truth::False);
        assert_eq!(ev("x / 0 > 1", &s, &Trace::new()), Truth::Unknown);
    }

    #[test]
    fn trace_equality() {
        let s = State::from_pairs(&[("x", 3.0)]);
        let h = Trace::from_events(alloc::vec![Event::comm("ch", Dir::Out, 3.0)]);
        assert_eq!(ev("gamma == <ch!, x>", &s, &h), Truth::True);
        assert_eq!(ev("gamma == <ch?, x>", &s, &h), Truth::False);
        assert_eq!(ev("gamma == eps", &s, &Trace::new()), Truth::True);
    }

    #[test]
    fn declared_domain_is_exact() {
        let s = State::new();
        assert_eq!(ev("forall v. v * v >= 0", &s, &Trace::new()), Truth::True);
        assert_eq!(ev("exists v. v > 1", &s, &Trace::new()), Truth::True);
        assert_eq!(ev("forall v. v > -1", &s, &Trace::new()), Truth::False);
    }

    #[test]
    fn unbounded_real_without_domain_is_unknown() {
        let a = parse_assertion("forall v. v > 0").unwrap();
        let r = eval(&a, &State::new(), &Trace::new(), &Valuation::new(), &EvalConfig::default()).unwrap();
        assert_eq!(r, Truth::Unknown);
    }

    #[test]
    fn interval_quantifier_samples() {
        let s = State::from_pairs(&[("x", 2.0)]);
        assert_eq!(ev("forall t in [0, x). t < 2", &s, &Trace::new()), Truth::True);
        assert_eq!(ev("forall t in [0, x]. t < 2", &s, &Trace::new()), Truth::False);
    }

    #[test]
    fn trace_quantifier_finds_prefix() {
        let h = Trace::from_events(alloc::vec![Event::comm("a", Dir::Out, 1.0), Event::comm("b", Dir::Out, 2.0)]);
        assert_eq!(ev("exists t: trace. gamma == t ^ <b!, 2>", &State::new(), &h), Truth::True);
        assert_eq!(ev("exists t: trace. gamma == t ^ <a!, 1>", &State::new(), &h), Truth::False);
    }

    #[test]
    fn pending_substitution_matches_expansion() {
        let s = State::from_pairs(&[("x", 1.0), ("y", 4.0)]);
        let a = parse_assertion("x > 3 && gamma == <ch!, x>").unwrap();
        let sub = Subst::var("x", Term::var("y"))
            .with_gamma(TraceExpr::Gamma.concat(TraceExpr::comm(crate::syntax::CommDir::output("ch"), Term::var("y"))));
        let delayed = a.clone().with_subst(sub);
        let cfg = EvalConfig::default();
        let r1 = eval(&delayed, &s, &Trace::new(), &Valuation::new(), &cfg).unwrap();
        let r2 = eval(&delayed.expand(), &s, &Trace::new(), &Valuation::new(), &cfg).unwrap();
        assert_eq!(r1, Truth::True);
        assert_eq!(r1, r2);
    }

    #[test]
    fn closed_trace_absorbs() {
        let inf = Trace::from_events(alloc::vec![Event::wait(
            f64::INFINITY,
            Trajectory::Const(State::new()),
            Default::default()
        )]);
        assert_eq!(ev("gamma ^ <ch!, 1> == gamma", &State::new(), &inf), Truth::True);
    }
}
