//! Abbreviations used when writing case-study specifications.

use alloc::collections::BTreeSet;
use alloc::string::String;

use super::ast::*;
use crate::runtime::ReadySet;
use crate::syntax::{BExpr, CommDir, Dir};

fn fresh(base: &str, avoid: &BTreeSet<String>) -> String {
    if !avoid.contains(base) {
        return base.into();
    }
    (1..).map(|n| alloc::format!("{base}_{n}")).find(|c| !avoid.contains(c)).expect("unbounded supply")
}

/// `γ = ε`
pub fn emp() -> Assertion {
    Assertion::treq(TraceExpr::Gamma, TraceExpr::Empty)
}

fn comm_or_wait(x0: &Overrides, cd: CommDir, v: Term, rdy: ReadySet) -> Assertion {
    let id = TrajTerm::Id(x0.clone());
    let mut avoid = BTreeSet::new();
    v.names(&mut avoid);
    id.names(&mut avoid);
    let d = fresh("d", &avoid);
    let ev = TraceExpr::comm(cd, v);
    Assertion::or_all([
        Assertion::treq(TraceExpr::Gamma, ev.clone()),
        Assertion::exists(
            Binder::positive(&d),
            Assertion::treq(TraceExpr::Gamma, TraceExpr::wait(Term::var(&d), id.clone(), rdy.clone()).concat(ev)),
        ),
        Assertion::treq(TraceExpr::Gamma, TraceExpr::wait(Term::Inf, id, rdy)),
    ])
}

/// Immediate input, input after a finite wait, or waiting forever.
pub fn in_(x0: &Overrides, ch: &str, v: Term, rdy: Option<ReadySet>) -> Assertion {
    let cd = CommDir::input(ch);
    let rdy = rdy.unwrap_or_else(|| [cd.clone()].into_iter().collect());
    comm_or_wait(x0, cd, v, rdy)
}

/// Immediate output, output after a finite wait, or waiting forever.
pub fn out(x0: &Overrides, ch: &str, v: Term, rdy: Option<ReadySet>) -> Assertion {
    let cd = CommDir::output(ch);
    let rdy = rdy.unwrap_or_else(|| [cd.clone()].into_iter().collect());
    comm_or_wait(x0, cd, v, rdy)
}

/// `γ = ⟨d, p, rdy⟩ ⌢ ⟨ch!, v⟩`
pub fn trout(d: Term, p: TrajTerm, ch: &str, v: Term, rdy: ReadySet) -> Assertion {
    let tr = TraceExpr::wait(d, p, rdy).concat(TraceExpr::comm(CommDir::output(ch), v));
    Assertion::treq(TraceExpr::Gamma, tr)
}

/// `γ = ⟨ch, v⟩`
pub fn io(ch: &str, v: Term) -> Assertion {
    Assertion::treq(TraceExpr::Gamma, TraceExpr::comm(CommDir::new(ch, Dir::Sync), v))
}

/// `γ = ⟨d, p, rdy⟩`
pub fn traj_atom(d: Term, p: TrajTerm, rdy: ReadySet) -> Assertion {
    Assertion::treq(TraceExpr::Gamma, TraceExpr::wait(d, p, rdy))
}

/// `P @ Q`: γ splits into a part satisfying `P` followed by one satisfying `Q`.
pub fn chop(p: Assertion, q: Assertion) -> Assertion {
    let mut avoid = BTreeSet::new();
    p.names(&mut avoid);
    q.names(&mut avoid);
    let t1 = fresh("tr1", &avoid);
    avoid.insert(t1.clone());
    let t2 = fresh("tr2", &avoid);
    let (v1, v2) = (TraceExpr::var(&t1), TraceExpr::var(&t2));
    let body = Assertion::and_all([
        p.with_subst(Subst::gamma(v1.clone())),
        q.with_subst(Subst::gamma(v2.clone())),
        Assertion::treq(v1.concat(v2), TraceExpr::Gamma),
    ]);
    Assertion::exists(Binder::trace(&t1), Assertion::exists(Binder::trace(&t2), body))
}

/// `∃p. γ = ⟨d, p, rdy⟩ ∧ ∀τ ∈ [0, d]. Inv[p(τ)/x]`
pub fn trinv(d: Term, inv: &BExpr, rdy: ReadySet) -> Assertion {
    let inv = Assertion::from_bexpr(inv);
    let mut avoid = inv.free_names();
    d.names(&mut avoid);
    let p = fresh("p", &avoid);
    avoid.insert(p.clone());
    let tau = fresh("tau", &avoid);
    let mut sub = Subst::default();
    for x in inv.free_names() {
        sub.vars.insert(x.clone(), Term::at(TrajTerm::Var(p.clone()), Term::var(&tau), &x));
    }
    let along = Assertion::forall(
        Binder::new(&tau, Sort::Time, Range::Interval { lo: Term::int(0), hi: d.clone(), lo_open: false, hi_open: false }),
        inv.subst(&sub),
    );
    Assertion::exists(
        Binder::traj(&p),
        Assertion::and(Assertion::treq(TraceExpr::Gamma, TraceExpr::wait(d, TrajTerm::Var(p.clone()), rdy)), along),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::{eval, parse_assertion, EvalConfig, Truth, Valuation};
    use crate::runtime::{Event, Trajectory};
    use crate::syntax::parse_bexpr;
    use crate::{State, Trace};

    fn check(a: &Assertion, h: &Trace) -> Truth {
        eval(a, &State::from_pairs(&[("x", 0.0)]), h, &Valuation::new(), &EvalConfig::default()).unwrap()
    }

    #[test]
    fn emp_and_io_shapes() {
        assert_eq!(emp(), parse_assertion("gamma == eps").unwrap());
        assert_eq!(io("ch", Term::var("v")), parse_assertion("gamma == <ch, v>").unwrap());
    }

    #[test]
    fn input_first_disjunct() {
        let h = Trace::from_events(alloc::vec![Event::comm("ch", Dir::In, 3.0)]);
        assert_eq!(check(&in_(&Overrides::new(), "ch", Term::int(3), None), &h), Truth::True);
        assert_eq!(check(&in_(&Overrides::new(), "ch", Term::int(4), None), &h), Truth::False);
    }

    #[test]
    fn output_after_wait_finds_duration() {
        let rdy: ReadySet = [CommDir::output("ch")].into_iter().collect();
        let h = Trace::from_events(alloc::vec![
            Event::wait(0.37, Trajectory::Const(State::from_pairs(&[("x", 0.0)])), rdy),
            Event::comm("ch", Dir::Out, 1.0),
        ]);
        assert_eq!(check(&out(&Overrides::new(), "ch", Term::int(1), None), &h), Truth::True);
    }

    #[test]
    fn chop_splits_uniquely() {
        let p = parse_assertion("gamma == <ch!, 1>").unwrap();
        let q = parse_assertion("gamma == <ch?, 2>").unwrap();
        let h = Trace::from_events(alloc::vec![Event::comm("ch", Dir::Out, 1.0), Event::comm("ch", Dir::In, 2.0)]);
        assert_eq!(check(&chop(p.clone(), q.clone()), &h), Truth::True);
        assert_eq!(check(&chop(q, p), &h), Truth::False);
        assert_eq!(parse_assertion("gamma == <ch!, 1> @ gamma == <ch?, 2>").map(|a| check(&a, &h)), Ok(Truth::True));
    }

    #[test]
    fn trinv_checks_the_whole_trajectory() {
        let field = alloc::sync::Arc::new(alloc::vec![("x".into(), crate::syntax::parse_expr("-1").unwrap())]);
        let traj = Trajectory::ode(field, State::from_pairs(&[("x", 0.0)]), 1e-3).unwrap();
        let h = Trace::from_events(alloc::vec![Event::wait(2.0, traj, ReadySet::new())]);
        let a = trinv(Term::int(2), &parse_bexpr("x <= 0").unwrap(), ReadySet::new());
        assert_eq!(check(&a, &h), Truth::True);
        let b = trinv(Term::int(2), &parse_bexpr("x >= -1").unwrap(), ReadySet::new());
        assert_eq!(check(&b, &h), Truth::False);
    }
}
