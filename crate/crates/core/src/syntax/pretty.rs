use alloc::string::{String, ToString};
use core::fmt;

use super::expr::{BExpr, Expr};
use super::process::{Branch, Comm, Ode, Process};

pub fn pretty(p: &Process) -> String {
    p.to_string()
}

const ATOM: u8 = 3;

fn expr_prec(e: &Expr) -> u8 {
    match e {
        Expr::Bin(op, ..) => op.prec(),
        _ => ATOM,
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(x) => write!(f, "{x}"),
            Expr::Const(n) => write!(f, "{n}"),
            Expr::Call(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Neg(a) => match **a {
                Expr::Var(_) | Expr::Call(..) | Expr::Neg(_) => write!(f, "-{a}"),
                _ => write!(f, "-({a})"),
            },
            Expr::Bin(op, a, b) => {
                let p = op.prec();
                if expr_prec(a) < p {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if expr_prec(b) <= p {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
        }
    }
}

fn bexpr_prec(b: &BExpr) -> u8 {
    match b {
        BExpr::Or(..) => 0,
        BExpr::And(..) => 1,
        _ => 2,
    }
}

fn bexpr_side(f: &mut fmt::Formatter<'_>, b: &BExpr, min: u8) -> fmt::Result {
    if bexpr_prec(b) < min {
        write!(f, "({b})")
    } else {
        write!(f, "{b}")
    }
}

impl fmt::Display for BExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BExpr::True => write!(f, "true"),
            BExpr::False => write!(f, "false"),
            BExpr::Cmp(op, a, b) => write!(f, "{a} {} {b}", op.symbol()),
            BExpr::Or(a, b) => {
                bexpr_side(f, a, 1)?;
                write!(f, " || ")?;
                bexpr_side(f, b, 0)
            }
            BExpr::And(a, b) => {
                bexpr_side(f, a, 2)?;
                write!(f, " && ")?;
                bexpr_side(f, b, 1)
            }
            BExpr::Not(a) => {
                write!(f, "!")?;
                match **a {
                    BExpr::Not(_) | BExpr::True | BExpr::False => write!(f, "{a}"),
                    _ => write!(f, "({a})"),
                }
            }
        }
    }
}

impl fmt::Display for Ode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        for (i, (x, e)) in self.field.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}_dot = {e}")?;
        }
        write!(f, " & {}>", self.domain)
    }
}

impl fmt::Display for Comm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Comm::In(ch, x) => write!(f, "{ch}?{x}"),
            Comm::Out(ch, e) => write!(f, "{ch}!{e}"),
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} --> {}", self.comm, self.body)
    }
}

fn proc_prec(p: &Process) -> u8 {
    match p {
        Process::Par(..) => 0,
        Process::IChoice(..) => 1,
        Process::Seq(..) => 2,
        _ => ATOM,
    }
}

fn proc_side(f: &mut fmt::Formatter<'_>, p: &Process, min: u8) -> fmt::Result {
    if proc_prec(p) < min {
        write!(f, "({p})")
    } else {
        write!(f, "{p}")
    }
}

impl fmt::Display for Process {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Process::Skip => write!(f, "skip"),
            Process::Assign(x, e) => write!(f, "{x} := {e}"),
            Process::Input(ch, x) => write!(f, "{ch}?{x}"),
            Process::Output(ch, e) => write!(f, "{ch}!{e}"),
            Process::Wait(e) => write!(f, "wait {e}"),
            Process::Seq(a, b) => {
                proc_side(f, a, ATOM)?;
                write!(f, "; ")?;
                proc_side(f, b, 2)
            }
            Process::IChoice(a, b) => {
                proc_side(f, a, 2)?;
                write!(f, " ++ ")?;
                proc_side(f, b, 1)
            }
            Process::Par(a, cs, b) => {
                proc_side(f, a, 1)?;
                write!(f, " ||[")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, "]|| ")?;
                proc_side(f, b, 0)
            }
            Process::Rep(a) => write!(f, "({a})*"),
            Process::Cond(b, p, q) => write!(f, "if {b} then {p} else {q} endif"),
            Process::Ode(o) => write!(f, "{o}"),
            Process::Interrupt(o, bs) => {
                write!(f, "{o} |> [](")?;
                for (i, b) in bs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{b}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_process;

    #[test]
    fn skip_and_par_print_plainly() {
        assert_eq!(pretty(&Process::Skip), "skip");
        assert_eq!(pretty(&Process::par(Process::Skip, &["ch"], Process::Skip)), "skip ||[ch]|| skip");
    }

    #[test]
    fn left_nested_sequence_keeps_parens() {
        let p = Process::seq(Process::seq(Process::Skip, Process::Skip), Process::Skip);
        let s = pretty(&p);
        assert_eq!(s, "(skip; skip); skip");
        assert_eq!(parse_process(&s).unwrap(), p);
    }

    #[test]
    fn expression_parens_follow_associativity() {
        let e = Expr::sub(Expr::var("a"), Expr::sub(Expr::var("b"), Expr::var("c")));
        assert_eq!(e.to_string(), "a - (b - c)");
        let e = Expr::mul(Expr::add(Expr::var("a"), Expr::int(1)), Expr::neg(Expr::int(2)));
        assert_eq!(e.to_string(), "(a + 1) * -(2)");
    }

    #[test]
    fn interrupt_round_trips() {
        let src = "<x_dot = 1 & x < 2> |> [](a?y --> skip, b!x + 1 --> z := 3/4)";
        let p = parse_process(src).unwrap();
        assert_eq!(pretty(&p), src);
    }
}
