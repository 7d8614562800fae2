use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;

use crate::runtime::ReadySet;
use crate::syntax::{BExpr, BinOp, ChanSet, CmpOp, CommDir, Expr, Field, Func, Num};

/// Real- or time-valued term. Names resolve to a logical variable when the
/// valuation binds them, else to a program variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(String),
    Const(Num),
    Inf,
    Neg(Box<Term>),
    Bin(BinOp, Box<Term>, Box<Term>),
    Call(Func, Box<Term>),
    /// Component `x` of trajectory `p` at time `t`.
    At(Box<TrajTerm>, Box<Term>, String),
}

/// Components of the current state that a trajectory term overrides.
pub type Overrides = BTreeMap<String, Term>;

#[derive(Clone, Debug, PartialEq)]
pub enum TrajTerm {
    /// Constant at the current state, with some components overridden.
    Id(Overrides),
    /// Solution of the field from the (overridden) current state.
    Ode(Arc<Field>, Overrides),
    Shift(Box<TrajTerm>, Box<Term>),
    Merge(Box<TrajTerm>, Box<TrajTerm>),
    Var(String),
    /// A concrete trajectory, independent of the current state.
    Lit(crate::runtime::Trajectory),
}

#[derive(Clone, Debug, PartialEq)]
pub enum EventTerm {
    Comm(CommDir, Term),
    Wait(Term, TrajTerm, ReadySet),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TraceExpr {
    Empty,
    Event(Box<EventTerm>),
    Gamma,
    Var(String),
    Concat(Box<TraceExpr>, Box<TraceExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Sort {
    Real,
    Time,
    Trace,
    Traj,
}

impl Sort {
    pub fn name(self) -> &'static str {
        match self {
            Sort::Real => "real",
            Sort::Time => "time",
            Sort::Trace => "trace",
            Sort::Traj => "traj",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Range {
    Any,
    /// `> 0`
    Positive,
    Interval { lo: Term, hi: Term, lo_open: bool, hi_open: bool },
}

/// Extra sample point for a time quantifier: the exit time of an ODE from
/// its domain, starting at the (overridden) current state.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitHint {
    pub field: Arc<Field>,
    pub domain: BExpr,
    pub init: Overrides,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Binder {
    pub var: String,
    pub sort: Sort,
    pub range: Range,
    pub hint: Option<ExitHint>,
}

impl Binder {
    pub fn new(var: &str, sort: Sort, range: Range) -> Binder {
        Binder { var: var.into(), sort, range, hint: None }
    }

    pub fn real(var: &str) -> Binder {
        Binder::new(var, Sort::Real, Range::Any)
    }

    pub fn positive(var: &str) -> Binder {
        Binder::new(var, Sort::Time, Range::Positive)
    }

    pub fn trace(var: &str) -> Binder {
        Binder::new(var, Sort::Trace, Range::Any)
    }

    pub fn traj(var: &str) -> Binder {
        Binder::new(var, Sort::Traj, Range::Any)
    }
}

/// Simultaneous substitution for program variables and γ.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Subst {
    pub vars: BTreeMap<String, Term>,
    pub gamma: Option<TraceExpr>,
}

impl Subst {
    pub fn var(x: &str, e: Term) -> Subst {
        let mut vars = BTreeMap::new();
        vars.insert(x.into(), e);
        Subst { vars, gamma: None }
    }

    pub fn gamma(t: TraceExpr) -> Subst {
        Subst { vars: BTreeMap::new(), gamma: Some(t) }
    }

    pub fn with_var(mut self, x: &str, e: Term) -> Subst {
        self.vars.insert(x.into(), e);
        self
    }

    pub fn with_gamma(mut self, t: TraceExpr) -> Subst {
        self.gamma = Some(t);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty() && self.gamma.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Assertion {
    True,
    False,
    Cmp(CmpOp, Term, Term),
    TrEq(TraceExpr, TraceExpr),
    Not(Arc<Assertion>),
    And(Arc<Assertion>, Arc<Assertion>),
    Or(Arc<Assertion>, Arc<Assertion>),
    Imp(Arc<Assertion>, Arc<Assertion>),
    Forall(Binder, Arc<Assertion>),
    Exists(Binder, Arc<Assertion>),
    /// `t1 ||cs t2 ⇓ t`
    Sync(TraceExpr, ChanSet, TraceExpr, TraceExpr),
    /// Pending substitution, applied at evaluation time.
    Subst(Arc<Assertion>, Arc<Subst>),
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(x.into())
    }

    pub fn int(n: i64) -> Term {
        Term::Const(Num::int(n))
    }

    pub fn num(v: f64) -> Term {
        Term::Const(Num::from_f64(v).expect("finite constant"))
    }

    pub fn bin(op: BinOp, a: Term, b: Term) -> Term {
        Term::Bin(op, Box::new(a), Box::new(b))
    }

    pub fn at(p: TrajTerm, t: Term, x: &str) -> Term {
        Term::At(Box::new(p), Box::new(t), x.into())
    }

    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Const(_) | Term::Inf => {}
            Term::Neg(a) | Term::Call(_, a) => a.names(out),
            Term::Bin(_, a, b) => {
                a.names(out);
                b.names(out);
            }
            Term::At(p, t, _) => {
                p.names(out);
                t.names(out);
            }
        }
    }
}

impl From<&Expr> for Term {
    fn from(e: &Expr) -> Term {
        match e {
            Expr::Var(x) => Term::Var(x.clone()),
            Expr::Const(n) => Term::Const(n.clone()),
            Expr::Neg(a) => Term::Neg(Box::new(a.as_ref().into())),
            Expr::Bin(op, a, b) => Term::bin(*op, a.as_ref().into(), b.as_ref().into()),
            Expr::Call(f, a) => Term::Call(*f, Box::new(a.as_ref().into())),
        }
    }
}

impl From<Expr> for Term {
    fn from(e: Expr) -> Term {
        (&e).into()
    }
}

impl TrajTerm {
    pub fn id() -> TrajTerm {
        TrajTerm::Id(Overrides::new())
    }

    pub fn ode(field: Arc<Field>) -> TrajTerm {
        TrajTerm::Ode(field, Overrides::new())
    }

    pub fn shift(self, d: Term) -> TrajTerm {
        TrajTerm::Shift(Box::new(self), Box::new(d))
    }

    /// Names appearing in override terms and trajectory variables.
    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            TrajTerm::Id(m) | TrajTerm::Ode(_, m) => m.values().for_each(|t| t.names(out)),
            TrajTerm::Shift(p, d) => {
                p.names(out);
                d.names(out);
            }
            TrajTerm::Merge(p, q) => {
                p.names(out);
                q.names(out);
            }
            TrajTerm::Var(x) => {
                out.insert(x.clone());
            }
            TrajTerm::Lit(_) => {}
        }
    }
}

impl EventTerm {
    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            EventTerm::Comm(_, v) => v.names(out),
            EventTerm::Wait(d, p, _) => {
                d.names(out);
                p.names(out);
            }
        }
    }
}

impl TraceExpr {
    pub fn event(e: EventTerm) -> TraceExpr {
        TraceExpr::Event(Box::new(e))
    }

    pub fn comm(cd: CommDir, v: Term) -> TraceExpr {
        TraceExpr::event(EventTerm::Comm(cd, v))
    }

    pub fn wait(d: Term, p: TrajTerm, rdy: ReadySet) -> TraceExpr {
        TraceExpr::event(EventTerm::Wait(d, p, rdy))
    }

    pub fn var(x: &str) -> TraceExpr {
        TraceExpr::Var(x.into())
    }

    pub fn concat(self, other: TraceExpr) -> TraceExpr {
        TraceExpr::Concat(Box::new(self), Box::new(other))
    }

    /// `t1 ^ t2 ^ ...`, or `eps` for no parts.
    pub fn concat_all(parts: impl IntoIterator<Item = TraceExpr>) -> TraceExpr {
        let mut v: alloc::vec::Vec<_> = parts.into_iter().collect();
        let Some(mut acc) = v.pop() else { return TraceExpr::Empty };
        while let Some(t) = v.pop() {
            acc = t.concat(acc);
        }
        acc
    }

    pub fn has_gamma(&self) -> bool {
        match self {
            TraceExpr::Gamma => true,
            TraceExpr::Concat(a, b) => a.has_gamma() || b.has_gamma(),
            _ => false,
        }
    }

    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            TraceExpr::Empty | TraceExpr::Gamma => {}
            TraceExpr::Event(e) => e.names(out),
            TraceExpr::Var(x) => {
                out.insert(x.clone());
            }
            TraceExpr::Concat(a, b) => {
                a.names(out);
                b.names(out);
            }
        }
    }
}

impl Assertion {
    pub fn cmp(op: CmpOp, a: Term, b: Term) -> Assertion {
        Assertion::Cmp(op, a, b)
    }

    pub fn treq(a: TraceExpr, b: TraceExpr) -> Assertion {
        Assertion::TrEq(a, b)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Assertion) -> Assertion {
        Assertion::Not(Arc::new(a))
    }

    pub fn and(a: Assertion, b: Assertion) -> Assertion {
        match (a, b) {
            (Assertion::True, b) => b,
            (a, Assertion::True) => a,
            (a, b) => Assertion::And(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn or(a: Assertion, b: Assertion) -> Assertion {
        match (a, b) {
            (Assertion::False, b) => b,
            (a, Assertion::False) => a,
            (a, b) => Assertion::Or(Arc::new(a), Arc::new(b)),
        }
    }

    pub fn imp(a: Assertion, b: Assertion) -> Assertion {
        Assertion::Imp(Arc::new(a), Arc::new(b))
    }

    pub fn and_all(parts: impl IntoIterator<Item = Assertion>) -> Assertion {
        let mut v: alloc::vec::Vec<_> = parts.into_iter().collect();
        let Some(mut acc) = v.pop() else { return Assertion::True };
        while let Some(a) = v.pop() {
            acc = Assertion::and(a, acc);
        }
        acc
    }

    pub fn or_all(parts: impl IntoIterator<Item = Assertion>) -> Assertion {
        let mut v: alloc::vec::Vec<_> = parts.into_iter().collect();
        let Some(mut acc) = v.pop() else { return Assertion::False };
        while let Some(a) = v.pop() {
            acc = Assertion::or(a, acc);
        }
        acc
    }

    pub fn forall(b: Binder, body: Assertion) -> Assertion {
        Assertion::Forall(b, Arc::new(body))
    }

    pub fn exists(b: Binder, body: Assertion) -> Assertion {
        Assertion::Exists(b, Arc::new(body))
    }

    /// Delayed substitution; an empty substitution returns `self`.
    pub fn with_subst(self, s: Subst) -> Assertion {
        if s.is_empty() {
            return self;
        }
        Assertion::Subst(Arc::new(self), Arc::new(s))
    }

    pub fn shared_subst(a: &Arc<Assertion>, s: Subst) -> Assertion {
        if s.is_empty() {
            return (**a).clone();
        }
        Assertion::Subst(a.clone(), Arc::new(s))
    }

    pub fn from_bexpr(b: &BExpr) -> Assertion {
        match b {
            BExpr::True => Assertion::True,
            BExpr::False => Assertion::False,
            BExpr::Cmp(op, x, y) => Assertion::Cmp(*op, x.into(), y.into()),
            BExpr::And(x, y) => Assertion::and(Assertion::from_bexpr(x), Assertion::from_bexpr(y)),
            BExpr::Or(x, y) => Assertion::or(Assertion::from_bexpr(x), Assertion::from_bexpr(y)),
            BExpr::Not(x) => Assertion::not(Assertion::from_bexpr(x)),
        }
    }

    /// Every name occurring anywhere, bound or free.
    pub fn names(&self, out: &mut BTreeSet<String>) {
        match self {
            Assertion::True | Assertion::False => {}
            Assertion::Cmp(_, a, b) => {
                a.names(out);
                b.names(out);
            }
            Assertion::TrEq(a, b) => {
                a.names(out);
                b.names(out);
            }
            Assertion::Not(a) => a.names(out),
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Imp(a, b) => {
                a.names(out);
                b.names(out);
            }
            Assertion::Forall(bd, a) | Assertion::Exists(bd, a) => {
                out.insert(bd.var.clone());
                if let Range::Interval { lo, hi, .. } = &bd.range {
                    lo.names(out);
                    hi.names(out);
                }
                a.names(out);
            }
            Assertion::Sync(a, _, b, c) => {
                a.names(out);
                b.names(out);
                c.names(out);
            }
            Assertion::Subst(a, s) => {
                a.names(out);
                for (x, t) in &s.vars {
                    out.insert(x.clone());
                    t.names(out);
                }
                if let Some(g) = &s.gamma {
                    g.names(out);
                }
            }
        }
    }

    /// Free names (program variables and unbound logical variables).
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.free_into(&mut BTreeSet::new(), &mut out);
        out
    }

    fn free_into(&self, bound: &mut BTreeSet<String>, out: &mut BTreeSet<String>) {
        let mut add = |names: BTreeSet<String>, bound: &BTreeSet<String>| {
            out.extend(names.into_iter().filter(|n| !bound.contains(n)));
        };
        match self {
            Assertion::True | Assertion::False => {}
            Assertion::Cmp(_, a, b) => {
                let mut n = BTreeSet::new();
                a.names(&mut n);
                b.names(&mut n);
                add(n, bound);
            }
            Assertion::TrEq(a, b) => {
                let mut n = BTreeSet::new();
                a.names(&mut n);
                b.names(&mut n);
                add(n, bound);
            }
            Assertion::Sync(a, _, b, c) => {
                let mut n = BTreeSet::new();
                a.names(&mut n);
                b.names(&mut n);
                c.names(&mut n);
                add(n, bound);
            }
            Assertion::Not(a) => a.free_into(bound, out),
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Imp(a, b) => {
                a.free_into(bound, out);
                b.free_into(bound, out);
            }
            Assertion::Forall(bd, a) | Assertion::Exists(bd, a) => {
                if let Range::Interval { lo, hi, .. } = &bd.range {
                    let mut n = BTreeSet::new();
                    lo.names(&mut n);
                    hi.names(&mut n);
                    add(n, bound);
                }
                let fresh = bound.insert(bd.var.clone());
                a.free_into(bound, out);
                if fresh {
                    bound.remove(&bd.var);
                }
            }
            Assertion::Subst(..) => self.expand().free_into(bound, out),
        }
    }

    pub fn mentions_gamma(&self) -> bool {
        match self {
            Assertion::True | Assertion::False | Assertion::Cmp(..) => false,
            Assertion::TrEq(a, b) => a.has_gamma() || b.has_gamma(),
            Assertion::Sync(a, _, b, c) => a.has_gamma() || b.has_gamma() || c.has_gamma(),
            Assertion::Not(a) | Assertion::Forall(_, a) | Assertion::Exists(_, a) => a.mentions_gamma(),
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Imp(a, b) => {
                a.mentions_gamma() || b.mentions_gamma()
            }
            Assertion::Subst(a, s) => {
                if s.gamma.is_some() {
                    s.gamma.as_ref().is_some_and(TraceExpr::has_gamma)
                } else {
                    a.mentions_gamma()
                }
            }
        }
    }

    /// Number of nodes, counting shared subterms once per occurrence.
    pub fn size(&self) -> usize {
        match self {
            Assertion::Not(a) | Assertion::Forall(_, a) | Assertion::Exists(_, a) | Assertion::Subst(a, _) => {
                1 + a.size()
            }
            Assertion::And(a, b) | Assertion::Or(a, b) | Assertion::Imp(a, b) => 1 + a.size() + b.size(),
            _ => 1,
        }
    }
}
