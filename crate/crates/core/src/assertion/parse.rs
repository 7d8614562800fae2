//! Concrete syntax for assertions.
//!
//! ```text
//! assn   := chop [ "->" assn ]
//! chop   := or [ "@" chop ]
//! or     := and [ "||" or ]
//! and    := not [ "&&" and ]
//! not    := "!" not | quant | atom
//! quant  := ("forall" | "exists") x [":" sort] [ ">" "0" | "in" ("["|"(") term "," term ("]"|")") ] "." assn
//! atom   := "true" | "false" | "emp" | "sync" "(" trace "," "{" chs "}" "," trace "," trace ")"
//!         | trace "==" trace | term cmp term | "(" assn ")"
//! trace  := tatom [ "^" trace ]
//! tatom  := "gamma" | "eps" | x | "(" trace ")"
//!         | "<" ch "!" "," term ">" | "<" ch "?" "," term ">" | "<" ch "," term ">"
//!         | "<" term "," traj "," "{" rdy "}" ">"
//! traj   := "I" [ "[" x ":=" term, ... "]" ] | "ode" "{" x_dot "=" expr, ... "}" [ "[" ... "]" ]
//!         | "shift" "(" traj "," term ")" | "merge" "(" traj "," traj ")" | x | "(" traj ")"
//! term   := arithmetic over x | number | "inf" | f "(" term ")" | "val" "(" traj "," term "," x ")"
//! ```
//!
//! Real comparisons use `=`; `==` is trace equality.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use super::ast::*;
use super::builders;
use crate::runtime::ReadySet;
use crate::syntax::{cmp_op, parse_expr_at, BinOp, ChanSet, CommDir, Cursor, Dir, Field, Func, Num, Tok};
use crate::{Error, Result};

pub const KEYWORDS: &[&str] = &[
    "forall", "exists", "true", "false", "emp", "gamma", "eps", "inf", "sync", "val", "I", "ode", "shift", "merge",
    "in",
];

pub fn parse_assertion(src: &str) -> Result<Assertion> {
    let mut c = Cursor::new(src)?;
    let a = assn(&mut c)?;
    c.expect_eof()?;
    Ok(a)
}

pub fn parse_term(src: &str) -> Result<Term> {
    let mut c = Cursor::new(src)?;
    let t = term(&mut c)?;
    c.expect_eof()?;
    Ok(t)
}

pub fn parse_trace(src: &str) -> Result<TraceExpr> {
    let mut c = Cursor::new(src)?;
    let t = trace(&mut c)?;
    c.expect_eof()?;
    Ok(t)
}

/// Run `f`; on failure rewind and report how far it got.
fn attempt<T>(c: &mut Cursor, f: impl FnOnce(&mut Cursor) -> Result<T>) -> core::result::Result<T, (usize, Error)> {
    let start = c.pos;
    match f(c) {
        Ok(v) => Ok(v),
        Err(e) => {
            let reached = c.pos;
            c.pos = start;
            Err((reached, e))
        }
    }
}

fn name(c: &mut Cursor) -> Result<String> {
    match c.peek() {
        Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => Err(c.error("unexpected keyword")),
        _ => c.ident(),
    }
}

fn assn(c: &mut Cursor) -> Result<Assertion> {
    let a = chop(c)?;
    if c.eat_sym("->") {
        return Ok(Assertion::imp(a, assn(c)?));
    }
    Ok(a)
}

fn chop(c: &mut Cursor) -> Result<Assertion> {
    let a = or(c)?;
    if c.eat_sym("@") {
        return Ok(builders::chop(a, chop(c)?));
    }
    Ok(a)
}

fn or(c: &mut Cursor) -> Result<Assertion> {
    let a = and(c)?;
    if c.eat_sym("||") {
        return Ok(Assertion::Or(Arc::new(a), Arc::new(or(c)?)));
    }
    Ok(a)
}

fn and(c: &mut Cursor) -> Result<Assertion> {
    let a = not(c)?;
    if c.eat_sym("&&") {
        return Ok(Assertion::And(Arc::new(a), Arc::new(and(c)?)));
    }
    Ok(a)
}

fn not(c: &mut Cursor) -> Result<Assertion> {
    if c.eat_sym("!") {
        return Ok(Assertion::not(not(c)?));
    }
    if c.is_kw("forall") || c.is_kw("exists") {
        let all = c.eat_kw("forall");
        if !all {
            c.bump();
        }
        let b = binder(c)?;
        c.expect_sym(".")?;
        let body = assn(c)?;
        return Ok(if all { Assertion::forall(b, body) } else { Assertion::exists(b, body) });
    }
    atom(c)
}

fn sort(c: &mut Cursor) -> Result<Sort> {
    let s = c.ident()?;
    Ok(match s.as_str() {
        "real" => Sort::Real,
        "time" => Sort::Time,
        "trace" => Sort::Trace,
        "traj" => Sort::Traj,
        _ => return Err(c.error("expected a sort")),
    })
}

fn binder(c: &mut Cursor) -> Result<Binder> {
    let var = name(c)?;
    let declared = if c.eat_sym(":") { Some(sort(c)?) } else { None };
    if c.eat_sym(">") {
        match c.bump() {
            Tok::Num(q) if q == num_rational::BigRational::from_integer(0.into()) => {}
            _ => return Err(c.error("only `> 0` is supported as a binder bound")),
        }
        return Ok(Binder::new(&var, declared.unwrap_or(Sort::Time), Range::Positive));
    }
    if c.eat_kw("in") {
        let lo_open = if c.eat_sym("(") {
            true
        } else {
            c.expect_sym("[")?;
            false
        };
        let lo = term(c)?;
        c.expect_sym(",")?;
        let hi = term(c)?;
        let hi_open = if c.eat_sym(")") {
            true
        } else {
            c.expect_sym("]")?;
            false
        };
        let range = Range::Interval { lo, hi, lo_open, hi_open };
        return Ok(Binder::new(&var, declared.unwrap_or(Sort::Real), range));
    }
    Ok(Binder::new(&var, declared.unwrap_or(Sort::Real), Range::Any))
}

fn atom(c: &mut Cursor) -> Result<Assertion> {
    if c.eat_kw("true") {
        return Ok(Assertion::True);
    }
    if c.eat_kw("false") {
        return Ok(Assertion::False);
    }
    if c.eat_kw("emp") {
        return Ok(builders::emp());
    }
    if c.eat_kw("sync") {
        c.expect_sym("(")?;
        let t1 = trace(c)?;
        c.expect_sym(",")?;
        c.expect_sym("{")?;
        let mut cs = ChanSet::new();
        if !c.is_sym("}") {
            loop {
                cs.insert(name(c)?);
                if !c.eat_sym(",") {
                    break;
                }
            }
        }
        c.expect_sym("}")?;
        c.expect_sym(",")?;
        let t2 = trace(c)?;
        c.expect_sym(",")?;
        let t = trace(c)?;
        c.expect_sym(")")?;
        return Ok(Assertion::Sync(t1, cs, t2, t));
    }
    let tr = attempt(c, |c| {
        let a = trace(c)?;
        c.expect_sym("==")?;
        Ok(Assertion::TrEq(a, trace(c)?))
    });
    let e1 = match tr {
        Ok(a) => return Ok(a),
        Err(e) => e,
    };
    let cmp = attempt(c, |c| {
        let a = term(c)?;
        let op = cmp_op(c).ok_or_else(|| c.error("expected comparison"))?;
        Ok(Assertion::Cmp(op, a, term(c)?))
    });
    let e2 = match cmp {
        Ok(a) => return Ok(a),
        Err(e) => e,
    };
    if c.is_sym("(") {
        let grouped = attempt(c, |c| {
            c.bump();
            let a = assn(c)?;
            c.expect_sym(")")?;
            Ok(a)
        });
        match grouped {
            Ok(a) => return Ok(a),
            Err(e3) => return Err(furthest(c, [e1, e2, e3])),
        }
    }
    Err(furthest(c, [e1, e2]))
}

fn furthest<const N: usize>(c: &mut Cursor, errs: [(usize, Error); N]) -> Error {
    let (pos, e) = errs.into_iter().max_by_key(|(p, _)| *p).expect("non-empty");
    c.pos = pos;
    e
}

pub(crate) fn trace(c: &mut Cursor) -> Result<TraceExpr> {
    let a = trace_atom(c)?;
    if c.eat_sym("^") {
        return Ok(a.concat(trace(c)?));
    }
    Ok(a)
}

fn trace_atom(c: &mut Cursor) -> Result<TraceExpr> {
    if c.eat_kw("gamma") {
        return Ok(TraceExpr::Gamma);
    }
    if c.eat_kw("eps") {
        return Ok(TraceExpr::Empty);
    }
    if c.eat_sym("(") {
        let t = trace(c)?;
        c.expect_sym(")")?;
        return Ok(t);
    }
    if c.eat_sym("<") {
        let e = event(c)?;
        c.expect_sym(">")?;
        return Ok(TraceExpr::event(e));
    }
    Ok(TraceExpr::Var(name(c)?))
}

fn event(c: &mut Cursor) -> Result<EventTerm> {
    if let (Tok::Ident(_), Tok::Sym(s)) = (c.peek().clone(), c.peek_at(1).clone()) {
        if s == "!" || s == "?" {
            let ch = name(c)?;
            let dir = if c.eat_sym("!") {
                Dir::Out
            } else {
                c.bump();
                Dir::In
            };
            c.expect_sym(",")?;
            return Ok(EventTerm::Comm(CommDir::new(&ch, dir), term(c)?));
        }
    }
    let wait = attempt(c, |c| {
        let d = term(c)?;
        c.expect_sym(",")?;
        let p = traj(c)?;
        c.expect_sym(",")?;
        Ok(EventTerm::Wait(d, p, ready(c)?))
    });
    match wait {
        Ok(e) => Ok(e),
        Err(e1) => {
            let sync = attempt(c, |c| {
                let ch = name(c)?;
                c.expect_sym(",")?;
                Ok(EventTerm::Comm(CommDir::new(&ch, Dir::Sync), term(c)?))
            });
            sync.map_err(|e2| furthest(c, [e1, e2]))
        }
    }
}

fn ready(c: &mut Cursor) -> Result<ReadySet> {
    c.expect_sym("{")?;
    let mut r = ReadySet::new();
    if !c.is_sym("}") {
        loop {
            let ch = name(c)?;
            let dir = if c.eat_sym("!") {
                Dir::Out
            } else {
                c.expect_sym("?")?;
                Dir::In
            };
            r.insert(CommDir::new(&ch, dir));
            if !c.eat_sym(",") {
                break;
            }
        }
    }
    c.expect_sym("}")?;
    Ok(r)
}

fn overrides(c: &mut Cursor) -> Result<Overrides> {
    let mut m = Overrides::new();
    if c.eat_sym("[") {
        if !c.is_sym("]") {
            loop {
                let x = name(c)?;
                c.expect_sym(":=")?;
                m.insert(x, term(c)?);
                if !c.eat_sym(",") {
                    break;
                }
            }
        }
        c.expect_sym("]")?;
    }
    Ok(m)
}

pub(crate) fn traj(c: &mut Cursor) -> Result<TrajTerm> {
    if c.eat_kw("I") {
        return Ok(TrajTerm::Id(overrides(c)?));
    }
    if c.eat_kw("ode") {
        c.expect_sym("{")?;
        let mut field: Field = Vec::new();
        loop {
            let id = c.ident()?;
            let Some(x) = id.strip_suffix("_dot").filter(|x| !x.is_empty()) else {
                return Err(c.error("expected `<var>_dot`"));
            };
            c.expect_sym("=")?;
            field.push((String::from(x), parse_expr_at(c)?));
            if !c.eat_sym(",") {
                break;
            }
        }
        c.expect_sym("}")?;
        return Ok(TrajTerm::Ode(Arc::new(field), overrides(c)?));
    }
    if c.eat_kw("shift") {
        c.expect_sym("(")?;
        let p = traj(c)?;
        c.expect_sym(",")?;
        let d = term(c)?;
        c.expect_sym(")")?;
        return Ok(p.shift(d));
    }
    if c.eat_kw("merge") {
        c.expect_sym("(")?;
        let p = traj(c)?;
        c.expect_sym(",")?;
        let q = traj(c)?;
        c.expect_sym(")")?;
        return Ok(TrajTerm::Merge(Box::new(p), Box::new(q)));
    }
    if c.eat_sym("(") {
        let p = traj(c)?;
        c.expect_sym(")")?;
        return Ok(p);
    }
    Ok(TrajTerm::Var(name(c)?))
}

pub(crate) fn term(c: &mut Cursor) -> Result<Term> {
    let mut e = product(c)?;
    loop {
        let op = if c.eat_sym("+") {
            BinOp::Add
        } else if c.eat_sym("-") {
            BinOp::Sub
        } else {
            return Ok(e);
        };
        e = Term::bin(op, e, product(c)?);
    }
}

fn product(c: &mut Cursor) -> Result<Term> {
    let mut e = unary(c)?;
    loop {
        let op = if c.eat_sym("*") {
            BinOp::Mul
        } else if c.eat_sym("/") {
            BinOp::Div
        } else {
            return Ok(e);
        };
        e = Term::bin(op, e, unary(c)?);
    }
}

fn unary(c: &mut Cursor) -> Result<Term> {
    if c.eat_sym("-") {
        if let Tok::Num(q) = c.peek().clone() {
            c.bump();
            return Ok(Term::Const(Num::new(-q)));
        }
        return Ok(Term::Neg(Box::new(unary(c)?)));
    }
    term_atom(c)
}

fn term_atom(c: &mut Cursor) -> Result<Term> {
    match c.peek().clone() {
        Tok::Num(q) => {
            c.bump();
            Ok(Term::Const(Num::new(q)))
        }
        Tok::Sym("(") => {
            c.bump();
            let e = term(c)?;
            c.expect_sym(")")?;
            Ok(e)
        }
        Tok::Ident(s) if s == "inf" => {
            c.bump();
            Ok(Term::Inf)
        }
        Tok::Ident(s) if s == "val" => {
            c.bump();
            c.expect_sym("(")?;
            let p = traj(c)?;
            c.expect_sym(",")?;
            let t = term(c)?;
            c.expect_sym(",")?;
            let x = name(c)?;
            c.expect_sym(")")?;
            Ok(Term::at(p, t, &x))
        }
        Tok::Ident(s) => {
            if let Some(f) = Func::lookup(&s) {
                c.bump();
                c.expect_sym("(")?;
                let e = term(c)?;
                c.expect_sym(")")?;
                return Ok(Term::Call(f, Box::new(e)));
            }
            Ok(Term::Var(name(c)?))
        }
        _ => Err(c.error("expected term")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::CmpOp;

    #[test]
    fn precedence_of_connectives() {
        let a = parse_assertion("x > 0 && y > 0 || z > 0 -> w > 0").unwrap();
        let Assertion::Imp(l, _) = &a else { panic!("{a:?}") };
        assert!(matches!(**l, Assertion::Or(..)));
    }

    #[test]
    fn quantifier_bodies_extend_right() {
        let a = parse_assertion("forall d > 0. x > d && y > 0").unwrap();
        let Assertion::Forall(b, body) = &a else { panic!() };
        assert_eq!((b.sort, &b.range), (Sort::Time, &Range::Positive));
        assert!(matches!(**body, Assertion::And(..)));
    }

    #[test]
    fn events_and_trajectories() {
        let a = parse_assertion("gamma == <ch?, 3> ^ <2, ode{x_dot = 1}[x := 0], {ch!}> ^ <c, v> ^ t").unwrap();
        let Assertion::TrEq(TraceExpr::Gamma, rhs) = a else { panic!() };
        let TraceExpr::Concat(first, rest) = rhs else { panic!() };
        assert!(matches!(*first, TraceExpr::Event(ref e) if matches!(**e, EventTerm::Comm(ref cd, _) if cd.dir == Dir::In)));
        let TraceExpr::Concat(w, rest) = *rest else { panic!() };
        assert!(matches!(*w, TraceExpr::Event(ref e) if matches!(**e, EventTerm::Wait(_, TrajTerm::Ode(..), _))));
        let TraceExpr::Concat(s, t) = *rest else { panic!() };
        assert!(matches!(*s, TraceExpr::Event(ref e) if matches!(**e, EventTerm::Comm(ref cd, _) if cd.dir == Dir::Sync)));
        assert_eq!(*t, TraceExpr::var("t"));
    }

    #[test]
    fn comparisons_versus_traces() {
        assert!(matches!(parse_assertion("x < 3").unwrap(), Assertion::Cmp(CmpOp::Lt, ..)));
        assert!(matches!(parse_assertion("(x + 1) * 2 >= 3").unwrap(), Assertion::Cmp(CmpOp::Ge, ..)));
        assert!(matches!(parse_assertion("(x > 1)").unwrap(), Assertion::Cmp(CmpOp::Gt, ..)));
        assert!(matches!(parse_assertion("t == u").unwrap(), Assertion::TrEq(..)));
        assert!(matches!(parse_assertion("val(I, 0, x) = inf").unwrap(), Assertion::Cmp(CmpOp::Eq, _, Term::Inf)));
    }

    #[test]
    fn interval_binders() {
        let a = parse_assertion("forall t: time in [0, d). x >= 0").unwrap();
        let Assertion::Forall(b, _) = a else { panic!() };
        assert_eq!(b.sort, Sort::Time);
        assert!(matches!(b.range, Range::Interval { lo_open: false, hi_open: true, .. }));
    }

    #[test]
    fn sync_atom() {
        let a = parse_assertion("sync(t1, {ch}, t2, gamma)").unwrap();
        assert!(matches!(a, Assertion::Sync(_, ref cs, _, TraceExpr::Gamma) if cs.contains("ch")));
    }

    #[test]
    fn errors_point_at_the_problem() {
        let e = parse_assertion("x > ").unwrap_err();
        assert!(matches!(e, Error::Syntax { col: 5, .. }), "{e:?}");
        assert!(parse_assertion("forall gamma. true").is_err());
    }
}
