//! Infix printing (re-parsable) and S-expression output.

use alloc::string::{String, ToString};
use core::fmt::{self, Write};

use super::ast::*;
use crate::runtime::ReadySet;
use crate::syntax::{BinOp, CmpOp, Dir, Num};

const ATOM: u8 = 3;

fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
        Term::Bin(..) => 2,
        _ => ATOM,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::Const(n) => write!(f, "{n}"),
            Term::Inf => write!(f, "inf"),
            Term::Call(g, a) => write!(f, "{}({a})", g.name()),
            Term::At(p, t, x) => write!(f, "val({p}, {t}, {x})"),
            Term::Neg(a) => match **a {
                Term::Var(_) | Term::Call(..) | Term::Neg(_) | Term::At(..) | Term::Inf => write!(f, "-{a}"),
                _ => write!(f, "-({a})"),
            },
            Term::Bin(op, a, b) => {
                let p = term_prec(self);
                if term_prec(a) < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if term_prec(b) <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

fn write_overrides(f: &mut fmt::Formatter<'_>, m: &Overrides) -> fmt::Result {
    if m.is_empty() {
        return Ok(());
    }
    write!(f, "[")?;
    for (i, (x, t)) in m.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x} := {t}")?;
    }
    write!(f, "]")
}

impl fmt::Display for TrajTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrajTerm::Id(m) => {
                write!(f, "I")?;
                write_overrides(f, m)
            }
            TrajTerm::Ode(field, m) => {
                write!(f, "ode{{")?;
                for (i, (x, e)) in field.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{x}_dot = {e}")?;
                }
                write!(f, "}}")?;
                write_overrides(f, m)
            }
            TrajTerm::Shift(p, d) => write!(f, "shift({p}, {d})"),
            TrajTerm::Merge(p, q) => write!(f, "merge({p}, {q})"),
            TrajTerm::Var(x) => write!(f, "{x}"),
            TrajTerm::Lit(t) => write!(f, "lit({t})"),
        }
    }
}

fn write_ready(f: &mut fmt::Formatter<'_>, r: &ReadySet) -> fmt::Result {
    write!(f, "{{")?;
    for (i, cd) in r.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{cd}")?;
    }
    write!(f, "}}")
}

impl fmt::Display for EventTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventTerm::Comm(cd, v) => write!(f, "<{cd}, {v}>"),
            EventTerm::Wait(d, p, r) => {
                write!(f, "<{d}, {p}, ")?;
                write_ready(f, r)?;
                write!(f, ">")
            }
        }
    }
}

impl fmt::Display for TraceExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TraceExpr::Empty => write!(f, "eps"),
            TraceExpr::Gamma => write!(f, "gamma"),
            TraceExpr::Var(x) => write!(f, "{x}"),
            TraceExpr::Event(e) => write!(f, "{e}"),
            TraceExpr::Concat(a, b) => {
                if matches!(**a, TraceExpr::Concat(..)) {
                    write!(f, "({a}) ^ {b}")
                } else {
                    write!(f, "{a} ^ {b}")
                }
            }
        }
    }
}

impl fmt::Display for Binder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.var)?;
        let default = match self.range {
            Range::Positive => Sort::Time,
            _ => Sort::Real,
        };
        if self.sort != default {
            write!(f, ": {}", self.sort.name())?;
        }
        match &self.range {
            Range::Any => Ok(()),
            Range::Positive => write!(f, " > 0"),
            Range::Interval { lo, hi, lo_open, hi_open } => {
                let (l, r) = (if *lo_open { "(" } else { "[" }, if *hi_open { ")" } else { "]" });
                write!(f, " in {l}{lo}, {hi}{r}")
            }
        }
    }
}

fn prec(a: &Assertion) -> u8 {
    match a {
        Assertion::Imp(..) | Assertion::Forall(..) | Assertion::Exists(..) => 0,
        Assertion::Or(..) => 1,
        Assertion::And(..) => 2,
        _ => ATOM,
    }
}

fn side(f: &mut fmt::Formatter<'_>, a: &Assertion, min: u8) -> fmt::Result {
    if prec(a) < min {
        write!(f, "(")?;
        write_assn(f, a)?;
        write!(f, ")")
    } else {
        write_assn(f, a)
    }
}

fn write_assn(f: &mut fmt::Formatter<'_>, a: &Assertion) -> fmt::Result {
    match a {
        Assertion::True => write!(f, "true"),
        Assertion::False => write!(f, "false"),
        Assertion::Cmp(op, x, y) => write!(f, "{x} {} {y}", op.symbol()),
        Assertion::TrEq(x, y) => write!(f, "{x} == {y}"),
        Assertion::Sync(x, cs, y, z) => {
            write!(f, "sync({x}, {{")?;
            for (i, ch) in cs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{ch}")?;
            }
            write!(f, "}}, {y}, {z})")
        }
        Assertion::Not(x) => {
            write!(f, "!")?;
            match **x {
                Assertion::True | Assertion::False | Assertion::Not(_) => write_assn(f, x),
                _ => {
                    write!(f, "(")?;
                    write_assn(f, x)?;
                    write!(f, ")")
                }
            }
        }
        Assertion::And(x, y) => {
            side(f, x, 3)?;
            write!(f, " && ")?;
            side(f, y, 2)
        }
        Assertion::Or(x, y) => {
            side(f, x, 2)?;
            write!(f, " || ")?;
            side(f, y, 1)
        }
        Assertion::Imp(x, y) => {
            side(f, x, 1)?;
            write!(f, " -> ")?;
            side(f, y, 0)
        }
        Assertion::Forall(b, x) => {
            write!(f, "forall {b}. ")?;
            write_assn(f, x)
        }
        Assertion::Exists(b, x) => {
            write!(f, "exists {b}. ")?;
            write_assn(f, x)
        }
        Assertion::Subst(..) => write_assn(f, &a.expand()),
    }
}

impl fmt::Display for Assertion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_assn(f, self)
    }
}

fn num_sexpr(n: &Num, out: &mut String) {
    let q = n.rational();
    let (neg, abs) = if n.is_negative() { (true, -q.clone()) } else { (false, q.clone()) };
    let body = if abs.is_integer() {
        abs.numer().to_string()
    } else {
        alloc::format!("(/ {} {})", abs.numer(), abs.denom())
    };
    if neg {
        let _ = write!(out, "(- {body})");
    } else {
        out.push_str(&body);
    }
}

fn term_sexpr(t: &Term, out: &mut String) {
    match t {
        Term::Var(x) => out.push_str(x),
        Term::Const(n) => num_sexpr(n, out),
        Term::Inf => out.push_str("inf"),
        Term::Neg(a) => {
            out.push_str("(- ");
            term_sexpr(a, out);
            out.push(')');
        }
        Term::Bin(op, a, b) => {
            let _ = write!(out, "({} ", op.symbol());
            term_sexpr(a, out);
            out.push(' ');
            term_sexpr(b, out);
            out.push(')');
        }
        Term::Call(g, a) => {
            let _ = write!(out, "({} ", g.name());
            term_sexpr(a, out);
            out.push(')');
        }
        Term::At(p, at, x) => {
            out.push_str("(val ");
            traj_sexpr(p, out);
            out.push(' ');
            term_sexpr(at, out);
            let _ = write!(out, " {x})");
        }
    }
}

fn overrides_sexpr(m: &Overrides, out: &mut String) {
    out.push('(');
    for (i, (x, t)) in m.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "({x} ");
        term_sexpr(t, out);
        out.push(')');
    }
    out.push(')');
}

fn traj_sexpr(p: &TrajTerm, out: &mut String) {
    match p {
        TrajTerm::Id(m) => {
            out.push_str("(id ");
            overrides_sexpr(m, out);
            out.push(')');
        }
        TrajTerm::Ode(field, m) => {
            out.push_str("(ode (");
            for (i, (x, e)) in field.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "({x} ");
                term_sexpr(&Term::from(e), out);
                out.push(')');
            }
            out.push_str(") ");
            overrides_sexpr(m, out);
            out.push(')');
        }
        TrajTerm::Shift(q, d) => {
            out.push_str("(shift ");
            traj_sexpr(q, out);
            out.push(' ');
            term_sexpr(d, out);
            out.push(')');
        }
        TrajTerm::Merge(a, b) => {
            out.push_str("(merge ");
            traj_sexpr(a, out);
            out.push(' ');
            traj_sexpr(b, out);
            out.push(')');
        }
        TrajTerm::Var(x) => out.push_str(x),
        TrajTerm::Lit(t) => {
            let _ = write!(out, "(lit \"{t}\")");
        }
    }
}

fn trace_sexpr(t: &TraceExpr, out: &mut String) {
    match t {
        TraceExpr::Empty => out.push_str("eps"),
        TraceExpr::Gamma => out.push_str("gamma"),
        TraceExpr::Var(x) => out.push_str(x),
        TraceExpr::Concat(a, b) => {
            out.push_str("(cat ");
            trace_sexpr(a, out);
            out.push(' ');
            trace_sexpr(b, out);
            out.push(')');
        }
        TraceExpr::Event(e) => match &**e {
            EventTerm::Comm(cd, v) => {
                let tag = match cd.dir {
                    Dir::In => "in",
                    Dir::Out => "out",
                    Dir::Sync => "io",
                };
                let _ = write!(out, "({tag} {} ", cd.ch);
                term_sexpr(v, out);
                out.push(')');
            }
            EventTerm::Wait(d, p, r) => {
                out.push_str("(wait ");
                term_sexpr(d, out);
                out.push(' ');
                traj_sexpr(p, out);
                out.push_str(" (rdy");
                for cd in r {
                    let _ = write!(out, " {cd}");
                }
                out.push_str("))");
            }
        },
    }
}

fn sort_sexpr(s: Sort) -> &'static str {
    match s {
        Sort::Real => "Real",
        Sort::Time => "Time",
        Sort::Trace => "Trace",
        Sort::Traj => "Traj",
    }
}

fn cmp_sexpr(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "=",
        CmpOp::Ne => "distinct",
        CmpOp::Lt => "<",
        CmpOp::Le => "<=",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

fn range_guard(b: &Binder, out: &mut String) -> bool {
    match &b.range {
        Range::Any => false,
        Range::Positive => {
            let _ = write!(out, "(> {} 0)", b.var);
            true
        }
        Range::Interval { lo, hi, lo_open, hi_open } => {
            let _ = write!(out, "(and ({} ", if *lo_open { "<" } else { "<=" });
            term_sexpr(lo, out);
            let _ = write!(out, " {}) ({} {} ", b.var, if *hi_open { "<" } else { "<=" }, b.var);
            term_sexpr(hi, out);
            out.push_str("))");
            true
        }
    }
}

fn assn_sexpr(a: &Assertion, out: &mut String) {
    let bin = |tag: &str, x: &Assertion, y: &Assertion, out: &mut String| {
        let _ = write!(out, "({tag} ");
        assn_sexpr(x, out);
        out.push(' ');
        assn_sexpr(y, out);
        out.push(')');
    };
    match a {
        Assertion::True => out.push_str("true"),
        Assertion::False => out.push_str("false"),
        Assertion::Cmp(op, x, y) => {
            let _ = write!(out, "({} ", cmp_sexpr(*op));
            term_sexpr(x, out);
            out.push(' ');
            term_sexpr(y, out);
            out.push(')');
        }
        Assertion::TrEq(x, y) => {
            out.push_str("(= ");
            trace_sexpr(x, out);
            out.push(' ');
            trace_sexpr(y, out);
            out.push(')');
        }
        Assertion::Sync(x, cs, y, z) => {
            out.push_str("(sync ");
            trace_sexpr(x, out);
            out.push_str(" (chans");
            for ch in cs {
                let _ = write!(out, " {ch}");
            }
            out.push_str(") ");
            trace_sexpr(y, out);
            out.push(' ');
            trace_sexpr(z, out);
            out.push(')');
        }
        Assertion::Not(x) => {
            out.push_str("(not ");
            assn_sexpr(x, out);
            out.push(')');
        }
        Assertion::And(x, y) => bin("and", x, y, out),
        Assertion::Or(x, y) => bin("or", x, y, out),
        Assertion::Imp(x, y) => bin("=>", x, y, out),
        Assertion::Forall(b, x) | Assertion::Exists(b, x) => {
            let all = matches!(a, Assertion::Forall(..));
            let _ = write!(out, "({} (({} {})) ", if all { "forall" } else { "exists" }, b.var, sort_sexpr(b.sort));
            let mut guard = String::new();
            if range_guard(b, &mut guard) {
                let _ = write!(out, "({} {guard} ", if all { "=>" } else { "and" });
                assn_sexpr(x, out);
                out.push(')');
            } else {
                assn_sexpr(x, out);
            }
            out.push(')');
        }
        Assertion::Subst(..) => assn_sexpr(&a.expand(), out),
    }
}

/// Solver-neutral S-expression; pending substitutions are expanded.
pub fn to_sexpr(a: &Assertion) -> String {
    let mut out = String::new();
    assn_sexpr(a, &mut out);
    out
}

pub fn term_to_sexpr(t: &Term) -> String {
    let mut out = String::new();
    term_sexpr(t, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::parse_assertion;

    fn round_trip(src: &str) {
        let a = parse_assertion(src).unwrap();
        let printed = a.to_string();
        assert_eq!(parse_assertion(&printed).unwrap(), a, "{src} printed as {printed}");
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "x > 0 && y > 0 || z > 0 -> w > 0",
            "(x > 0 -> y > 0) -> z > 0",
            "(x > 0 || y > 0) && z > 0",
            "!(x > 0) && !!true",
            "(forall d > 0. x > d) && y = -3",
            "exists v. gamma == <ch?, v> ^ <2, I[x := v], {ch!, dh?}>",
            "gamma == (<a, 1> ^ <b!, 2>) ^ t",
            "forall t: time in [0, 3/2). val(ode{x_dot = -x}[x := 1], t, x) <= 1",
            "forall p: traj. exists h: trace. h == <inf, shift(merge(p, I), 1), {}>",
            "sync(t1, {a, b}, t2, gamma) || x - (y - z) * -(w) != 1",
        ] {
            round_trip(src);
        }
    }

    #[test]
    fn sexpr_forms() {
        assert_eq!(to_sexpr(&parse_assertion("x > 0 -> x >= 0").unwrap()), "(=> (> x 0) (>= x 0))");
        assert_eq!(
            to_sexpr(&parse_assertion("forall d > 0. gamma == <d, I, {ch!}> ^ <ch!, -1/2>").unwrap()),
            "(forall ((d Time)) (=> (> d 0) (= gamma (cat (wait d (id ()) (rdy ch!)) (out ch (- (/ 1 2)))))))"
        );
    }
}
