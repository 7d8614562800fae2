//! Eager, capture-avoiding substitution.
//!
//! Substituting a program variable `x` also updates every trajectory term
//! that implicitly reads the current state (`I`, ODE solutions): `x`
//! becomes an explicit override there. Renaming a logical variable only
//! touches explicit occurrences.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;

use super::ast::*;

#[derive(Clone, Debug, Default)]
struct Sigma {
    vars: BTreeMap<String, Term>,
    tvars: BTreeMap<String, TraceExpr>,
    pvars: BTreeMap<String, TrajTerm>,
    gamma: Option<TraceExpr>,
    /// Program-variable substitution (as opposed to a logical rename).
    implicit: bool,
}

impl Sigma {
    fn from_subst(s: &Subst) -> Sigma {
        Sigma { vars: s.vars.clone(), gamma: s.gamma.clone(), implicit: true, ..Sigma::default() }
    }

    fn rename(sort: Sort, from: &str, to: &str) -> Sigma {
        let mut s = Sigma::default();
        match sort {
            Sort::Real | Sort::Time => {
                s.vars.insert(from.into(), Term::Var(to.into()));
            }
            Sort::Trace => {
                s.tvars.insert(from.into(), TraceExpr::Var(to.into()));
            }
            Sort::Traj => {
                s.pvars.insert(from.into(), TrajTerm::Var(to.into()));
            }
        }
        s
    }

    fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.tvars.is_empty() && self.pvars.is_empty() && self.gamma.is_none()
    }

    fn replacement_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.vars.values().for_each(|t| t.names(&mut out));
        self.tvars.values().for_each(|t| t.names(&mut out));
        self.pvars.values().for_each(|t| t.names(&mut out));
        if let Some(g) = &self.gamma {
            g.names(&mut out);
        }
        out
    }

    fn binds(&self, x: &str) -> bool {
        self.vars.contains_key(x) || self.tvars.contains_key(x) || self.pvars.contains_key(x)
    }

    fn without(&self, x: &str) -> Sigma {
        let mut s = self.clone();
        s.vars.remove(x);
        s.tvars.remove(x);
        s.pvars.remove(x);
        s
    }
}

fn fresh(base: &str, avoid: &BTreeSet<String>) -> String {
    (1..)
        .map(|n| alloc::format!("{base}_{n}"))
        .find(|c| !avoid.contains(c))
        .expect("unbounded supply")
}

impl Term {
    fn apply(&self, s: &Sigma) -> Term {
        match self {
            Term::Var(x) => s.vars.get(x).cloned().unwrap_or_else(|| self.clone()),
            Term::Const(_) | Term::Inf => self.clone(),
            Term::Neg(a) => Term::Neg(alloc::boxed::Box::new(a.apply(s))),
            Term::Bin(op, a, b) => Term::bin(*op, a.apply(s), b.apply(s)),
            Term::Call(f, a) => Term::Call(*f, alloc::boxed::Box::new(a.apply(s))),
            Term::At(p, t, x) => Term::at(p.apply(s), t.apply(s), x),
        }
    }

    /// `self[e/x]`
    pub fn subst_var(&self, x: &str, e: &Term) -> Term {
        self.apply(&Sigma::from_subst(&Subst::var(x, e.clone())))
    }

    /// Simultaneous substitution of program variables.
    pub fn subst(&self, sub: &Subst) -> Term {
        self.apply(&Sigma::from_subst(sub))
    }
}

fn apply_overrides(m: &Overrides, s: &Sigma) -> Overrides {
    let mut out: Overrides = m.iter().map(|(k, t)| (k.clone(), t.apply(s))).collect();
    if s.implicit {
        for (x, e) in &s.vars {
            out.entry(x.clone()).or_insert_with(|| e.clone());
        }
    }
    out
}

impl TrajTerm {
    fn apply(&self, s: &Sigma) -> TrajTerm {
        match self {
            TrajTerm::Id(m) => TrajTerm::Id(apply_overrides(m, s)),
            TrajTerm::Ode(f, m) => TrajTerm::Ode(f.clone(), apply_overrides(m, s)),
            TrajTerm::Shift(p, d) => p.apply(s).shift(d.apply(s)),
            TrajTerm::Merge(p, q) => {
                TrajTerm::Merge(alloc::boxed::Box::new(p.apply(s)), alloc::boxed::Box::new(q.apply(s)))
            }
            TrajTerm::Var(x) => s.pvars.get(x).cloned().unwrap_or_else(|| self.clone()),
            TrajTerm::Lit(_) => self.clone(),
        }
    }
}

impl EventTerm {
    fn apply(&self, s: &Sigma) -> EventTerm {
        match self {
            EventTerm::Comm(cd, v) => EventTerm::Comm(cd.clone(), v.apply(s)),
            EventTerm::Wait(d, p, r) => EventTerm::Wait(d.apply(s), p.apply(s), r.clone()),
        }
    }
}

impl TraceExpr {
    fn apply(&self, s: &Sigma) -> TraceExpr {
        match self {
            TraceExpr::Empty => TraceExpr::Empty,
            TraceExpr::Gamma => s.gamma.clone().unwrap_or(TraceExpr::Gamma),
            TraceExpr::Var(x) => s.tvars.get(x).cloned().unwrap_or_else(|| self.clone()),
            TraceExpr::Event(e) => TraceExpr::event(e.apply(s)),
            TraceExpr::Concat(a, b) => a.apply(s).concat(b.apply(s)),
        }
    }

    /// Replace γ by `t`.
    pub fn subst_gamma(&self, t: &TraceExpr) -> TraceExpr {
        self.apply(&Sigma { gamma: Some(t.clone()), ..Sigma::default() })
    }
}

fn apply_range(r: &Range, s: &Sigma) -> Range {
    match r {
        Range::Interval { lo, hi, lo_open, hi_open } => {
            Range::Interval { lo: lo.apply(s), hi: hi.apply(s), lo_open: *lo_open, hi_open: *hi_open }
        }
        r => r.clone(),
    }
}

impl Assertion {
    fn apply(&self, s: &Sigma) -> Assertion {
        if s.is_empty() {
            return self.clone();
        }
        let rc = |a: &Arc<Assertion>| Arc::new(a.apply(s));
        match self {
            Assertion::True | Assertion::False => self.clone(),
            Assertion::Cmp(op, a, b) => Assertion::Cmp(*op, a.apply(s), b.apply(s)),
            Assertion::TrEq(a, b) => Assertion::TrEq(a.apply(s), b.apply(s)),
            Assertion::Sync(a, cs, b, c) => Assertion::Sync(a.apply(s), cs.clone(), b.apply(s), c.apply(s)),
            Assertion::Not(a) => Assertion::Not(rc(a)),
            Assertion::And(a, b) => Assertion::And(rc(a), rc(b)),
            Assertion::Or(a, b) => Assertion::Or(rc(a), rc(b)),
            Assertion::Imp(a, b) => Assertion::Imp(rc(a), rc(b)),
            Assertion::Forall(bd, body) => {
                let (bd, body) = apply_binder(bd, body, s);
                Assertion::Forall(bd, body)
            }
            Assertion::Exists(bd, body) => {
                let (bd, body) = apply_binder(bd, body, s);
                Assertion::Exists(bd, body)
            }
            Assertion::Subst(..) => self.expand().apply(s),
        }
    }

    /// Push every pending substitution into the formula.
    pub fn expand(&self) -> Assertion {
        let rc = |a: &Arc<Assertion>| Arc::new(a.expand());
        match self {
            Assertion::Subst(a, sub) => a.expand().apply(&Sigma::from_subst(sub)),
            Assertion::Not(a) => Assertion::Not(rc(a)),
            Assertion::And(a, b) => Assertion::And(rc(a), rc(b)),
            Assertion::Or(a, b) => Assertion::Or(rc(a), rc(b)),
            Assertion::Imp(a, b) => Assertion::Imp(rc(a), rc(b)),
            Assertion::Forall(bd, a) => Assertion::Forall(bd.clone(), rc(a)),
            Assertion::Exists(bd, a) => Assertion::Exists(bd.clone(), rc(a)),
            other => other.clone(),
        }
    }

    /// `self[e/x]` for a program variable `x`.
    pub fn subst_var(&self, x: &str, e: &Term) -> Assertion {
        self.apply(&Sigma::from_subst(&Subst::var(x, e.clone())))
    }

    /// Simultaneous substitution.
    pub fn subst(&self, sub: &Subst) -> Assertion {
        self.apply(&Sigma::from_subst(sub))
    }

    /// `self[t/γ]`
    pub fn subst_gamma(&self, t: &TraceExpr) -> Assertion {
        self.apply(&Sigma { gamma: Some(t.clone()), ..Sigma::default() })
    }

    /// Rename a logical variable of the given sort.
    pub fn rename_logical(&self, sort: Sort, from: &str, to: &str) -> Assertion {
        self.apply(&Sigma::rename(sort, from, to))
    }
}

fn apply_binder(bd: &Binder, body: &Arc<Assertion>, s: &Sigma) -> (Binder, Arc<Assertion>) {
    let mut nb = bd.clone();
    nb.range = apply_range(&bd.range, s);
    if let Some(h) = &bd.hint {
        nb.hint = Some(ExitHint { field: h.field.clone(), domain: h.domain.clone(), init: apply_overrides(&h.init, s) });
    }
    let repl = s.replacement_names();
    // Trajectories read program variables implicitly, past the binder.
    let program_hit = s.implicit && s.vars.contains_key(&bd.var) && reads_state(body);
    let mut body = body.clone();
    if repl.contains(&bd.var) || program_hit {
        let mut avoid = BTreeSet::new();
        body.names(&mut avoid);
        avoid.extend(repl);
        avoid.extend(s.vars.keys().cloned());
        avoid.extend(s.tvars.keys().cloned());
        avoid.extend(s.pvars.keys().cloned());
        let v = fresh(&bd.var, &avoid);
        body = Arc::new(body.rename_logical(bd.sort, &bd.var, &v));
        nb.var = v;
    }
    let inner = if !program_hit && s.binds(&bd.var) { s.without(&bd.var) } else { s.clone() };
    (nb, Arc::new(body.apply(&inner)))
}

fn term_reads_state(t: &Term) -> bool {
    match t {
        Term::Var(_) | Term::Const(_) | Term::Inf => false,
        Term::Neg(a) | Term::Call(_, a) => term_reads_state(a),
        Term::Bin(_, a, b) => term_reads_state(a) || term_reads_state(b),
        Term::At(p, t, _) => traj_reads_state(p) || term_reads_state(t),
    }
}

fn traj_reads_state(p: &TrajTerm) -> bool {
    match p {
        TrajTerm::Id(_) | TrajTerm::Ode(..) => true,
        TrajTerm::Shift(p, d) => traj_reads_state(p) || term_reads_state(d),
        TrajTerm::Merge(p, q) => traj_reads_state(p) || traj_reads_state(q),
        TrajTerm::Var(_) | TrajTerm::Lit(_) => false,
    }
}

fn trace_reads_state(t: &TraceExpr) -> bool {
    match t {
        TraceExpr::Empty | TraceExpr::Gamma | TraceExpr::Var(_) => false,
        TraceExpr::Concat(a, b) => trace_reads_state(a) || trace_reads_state(b),
        TraceExpr::Event(e) => match &**e {
            EventTerm::Comm(_, v) => term_reads_state(v),
            EventTerm::Wait(d, p, _) => term_reads_state(d) || traj_reads_state(p),
        },
    }
}

fn reads_state(a: &Assertion) -> bool {
    match a {
        Assertion::True | Assertion::False => false,
        Assertion::Cmp(_, x, y) => term_reads_state(x) || term_reads_state(y),
        Assertion::TrEq(x, y) => trace_reads_state(x) || trace_reads_state(y),
        Assertion::Sync(x, _, y, z) => trace_reads_state(x) || trace_reads_state(y) || trace_reads_state(z),
        Assertion::Not(x) => reads_state(x),
        Assertion::And(x, y) | Assertion::Or(x, y) | Assertion::Imp(x, y) => reads_state(x) || reads_state(y),
        Assertion::Forall(b, x) | Assertion::Exists(b, x) => b.hint.is_some() || reads_state(x),
        Assertion::Subst(..) => true,
    }
}
