use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::expr::{BExpr, BinOp, CmpOp, Expr, Func, Num};
use super::lexer::{Cursor, Tok};
use super::process::{Branch, ChanSet, Comm, Field, Ode, Process};
use crate::Result;

pub const KEYWORDS: &[&str] = &["skip", "if", "then", "else", "endif", "wait", "true", "false"];

pub fn parse_process(src: &str) -> Result<Process> {
    let mut c = Cursor::new(src)?;
    let p = proc_par(&mut c)?;
    c.expect_eof()?;
    Ok(p)
}

pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut c = Cursor::new(src)?;
    let e = expr(&mut c)?;
    c.expect_eof()?;
    Ok(e)
}

pub fn parse_bexpr(src: &str) -> Result<BExpr> {
    let mut c = Cursor::new(src)?;
    let b = bexpr(&mut c)?;
    c.expect_eof()?;
    Ok(b)
}

fn proc_par(c: &mut Cursor) -> Result<Process> {
    let left = proc_choice(c)?;
    if c.eat_sym("||[") {
        let mut cs = ChanSet::new();
        if !c.is_sym("]||") {
            loop {
                cs.insert(c.ident()?);
                if !c.eat_sym(",") {
                    break;
                }
            }
        }
        c.expect_sym("]||")?;
        let right = proc_par(c)?;
        return Ok(Process::Par(Box::new(left), cs, Box::new(right)));
    }
    Ok(left)
}

fn proc_choice(c: &mut Cursor) -> Result<Process> {
    let left = proc_seq(c)?;
    if c.eat_sym("++") {
        return Ok(Process::ichoice(left, proc_choice(c)?));
    }
    Ok(left)
}

fn proc_seq(c: &mut Cursor) -> Result<Process> {
    let left = proc_atom(c)?;
    if c.eat_sym(";") {
        return Ok(Process::seq(left, proc_seq(c)?));
    }
    Ok(left)
}

fn proc_atom(c: &mut Cursor) -> Result<Process> {
    if c.eat_kw("skip") {
        return Ok(Process::Skip);
    }
    if c.eat_kw("wait") {
        return Ok(Process::Wait(expr(c)?));
    }
    if c.eat_kw("if") {
        let b = bexpr(c)?;
        c.expect_kw("then")?;
        let p = proc_par(c)?;
        c.expect_kw("else")?;
        let q = proc_par(c)?;
        c.expect_kw("endif")?;
        return Ok(Process::cond(b, p, q));
    }
    if c.eat_sym("(") {
        let p = proc_par(c)?;
        c.expect_sym(")")?;
        if c.eat_sym("*") {
            return Ok(Process::rep(p));
        }
        return Ok(p);
    }
    if c.eat_sym("<") {
        let ode = ode_body(c)?;
        if c.eat_sym("|>") {
            c.expect_sym("[](")?;
            let mut branches = Vec::new();
            loop {
                branches.push(branch(c)?);
                if !c.eat_sym(",") {
                    break;
                }
            }
            c.expect_sym(")")?;
            return Ok(Process::Interrupt(ode, branches));
        }
        return Ok(Process::Ode(ode));
    }
    let name = plain_ident(c)?;
    if c.eat_sym(":=") {
        return Ok(Process::Assign(name, expr(c)?));
    }
    if c.eat_sym("?") {
        return Ok(Process::Input(name, plain_ident(c)?));
    }
    if c.eat_sym("!") {
        return Ok(Process::Output(name, expr(c)?));
    }
    Err(c.error("expected `:=`, `?` or `!`"))
}

fn plain_ident(c: &mut Cursor) -> Result<String> {
    match c.peek() {
        Tok::Ident(s) if KEYWORDS.contains(&s.as_str()) => Err(c.error("unexpected keyword")),
        _ => c.ident(),
    }
}

fn ode_body(c: &mut Cursor) -> Result<Ode> {
    let mut field: Field = Vec::new();
    loop {
        let id = c.ident()?;
        let Some(x) = id.strip_suffix("_dot").filter(|x| !x.is_empty()) else {
            return Err(c.error("expected `<var>_dot` in ODE"));
        };
        if field.iter().any(|(y, _)| y == x) {
            return Err(c.error("duplicate ODE variable"));
        }
        c.expect_sym("=")?;
        field.push((String::from(x), expr(c)?));
        if !c.eat_sym(",") {
            break;
        }
    }
    c.expect_sym("&")?;
    let domain = bexpr(c)?;
    c.expect_sym(">")?;
    Ok(Ode::new(field, domain))
}

fn branch(c: &mut Cursor) -> Result<Branch> {
    let ch = plain_ident(c)?;
    let comm = if c.eat_sym("?") {
        Comm::In(ch, plain_ident(c)?)
    } else if c.eat_sym("!") {
        Comm::Out(ch, expr(c)?)
    } else {
        return Err(c.error("expected `?` or `!` in interrupt branch"));
    };
    c.expect_sym("-->")?;
    Ok(Branch { comm, body: proc_par(c)? })
}

pub fn expr(c: &mut Cursor) -> Result<Expr> {
    let mut e = term(c)?;
    loop {
        let op = if c.eat_sym("+") {
            BinOp::Add
        } else if c.eat_sym("-") {
            BinOp::Sub
        } else {
            return Ok(e);
        };
        e = Expr::bin(op, e, term(c)?);
    }
}

fn term(c: &mut Cursor) -> Result<Expr> {
    let mut e = unary(c)?;
    loop {
        let op = if c.eat_sym("*") {
            BinOp::Mul
        } else if c.eat_sym("/") {
            BinOp::Div
        } else {
            return Ok(e);
        };
        e = Expr::bin(op, e, unary(c)?);
    }
}

fn unary(c: &mut Cursor) -> Result<Expr> {
    if c.eat_sym("-") {
        if let Tok::Num(q) = c.peek().clone() {
            c.bump();
            return Ok(Expr::Const(Num::new(-q)));
        }
        return Ok(Expr::neg(unary(c)?));
    }
    expr_atom(c)
}

fn expr_atom(c: &mut Cursor) -> Result<Expr> {
    match c.peek().clone() {
        Tok::Num(q) => {
            c.bump();
            Ok(Expr::Const(Num::new(q)))
        }
        Tok::Sym("(") => {
            c.bump();
            let e = expr(c)?;
            c.expect_sym(")")?;
            Ok(e)
        }
        Tok::Ident(s) => {
            if let Some(f) = Func::lookup(&s) {
                c.bump();
                c.expect_sym("(")?;
                let e = expr(c)?;
                c.expect_sym(")")?;
                return Ok(Expr::Call(f, Box::new(e)));
            }
            Ok(Expr::Var(plain_ident(c)?))
        }
        _ => Err(c.error("expected expression")),
    }
}

pub fn bexpr(c: &mut Cursor) -> Result<BExpr> {
    let a = band(c)?;
    if c.eat_sym("||") {
        return Ok(BExpr::or(a, bexpr(c)?));
    }
    Ok(a)
}

fn band(c: &mut Cursor) -> Result<BExpr> {
    let a = bnot(c)?;
    if c.eat_sym("&&") {
        return Ok(BExpr::and(a, band(c)?));
    }
    Ok(a)
}

fn bnot(c: &mut Cursor) -> Result<BExpr> {
    if c.eat_sym("!") {
        return Ok(BExpr::not(bnot(c)?));
    }
    batom(c)
}

pub fn cmp_op(c: &mut Cursor) -> Option<CmpOp> {
    let op = match c.peek() {
        Tok::Sym("=") => CmpOp::Eq,
        Tok::Sym("!=") => CmpOp::Ne,
        Tok::Sym("<") => CmpOp::Lt,
        Tok::Sym("<=") => CmpOp::Le,
        Tok::Sym(">") => CmpOp::Gt,
        Tok::Sym(">=") => CmpOp::Ge,
        _ => return None,
    };
    c.bump();
    Some(op)
}

fn batom(c: &mut Cursor) -> Result<BExpr> {
    if c.eat_kw("true") {
        return Ok(BExpr::True);
    }
    if c.eat_kw("false") {
        return Ok(BExpr::False);
    }
    let start = c.pos;
    let cmp = (|| -> Result<BExpr> {
        let a = expr(c)?;
        let op = cmp_op(c).ok_or_else(|| c.error("expected comparison"))?;
        let b = expr(c)?;
        Ok(BExpr::Cmp(op, a, b))
    })();
    match cmp {
        Ok(b) => Ok(b),
        Err(e) => {
            let failed_at = c.pos;
            c.pos = start;
            if c.eat_sym("(") {
                let b = bexpr(c)?;
                c.expect_sym(")")?;
                return Ok(b);
            }
            c.pos = failed_at;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Error;

    #[test]
    fn skip_and_sequence() {
        assert_eq!(parse_process("skip").unwrap(), Process::Skip);
        assert_eq!(
            parse_process("x := x + 1; ch!x").unwrap(),
            Process::seq(
                Process::assign("x", Expr::add(Expr::var("x"), Expr::int(1))),
                Process::output("ch", Expr::var("x"))
            )
        );
    }

    #[test]
    fn lander_plant_interrupt() {
        let p = parse_process(
            "<v_dot = w - 3.732, w_dot = w*w/2500, t_dot = 1 & true> |> [](chv!v --> chw!w; chc?w; t := 0)",
        )
        .unwrap();
        let Process::Interrupt(ode, bs) = p else { panic!("not an interrupt") };
        let names: Vec<&str> = ode.vars().collect();
        assert_eq!(names, ["v", "w", "t"]);
        assert_eq!(ode.domain, BExpr::True);
        assert_eq!(bs.len(), 1);
        assert_eq!(bs[0].comm, Comm::Out("chv".into(), Expr::var("v")));
        assert_eq!(ode.field[0].1, Expr::sub(Expr::var("w"), Expr::num(Num::ratio(3732, 1000))));
    }

    #[test]
    fn sequence_binds_tighter_than_choice_and_par() {
        let p = parse_process("a := 1; b := 2 ++ c := 3 ||[]|| d := 4").unwrap();
        let Process::Par(l, cs, _) = p else { panic!() };
        assert!(cs.is_empty());
        assert!(matches!(*l, Process::IChoice(ref x, _) if matches!(**x, Process::Seq(..))));
    }

    #[test]
    fn grouped_boolean_and_arithmetic_parens() {
        let b = parse_bexpr("(x + 1) > 2 && (y < 1 || !(z = 0))").unwrap();
        let BExpr::And(l, r) = b else { panic!() };
        assert!(matches!(*l, BExpr::Cmp(CmpOp::Gt, ..)));
        assert!(matches!(*r, BExpr::Or(..)));
    }

    #[test]
    fn repetition_and_conditional() {
        let p = parse_process("(x := x + 1)*; if x >= 2 then skip else wait 1 endif").unwrap();
        let Process::Seq(a, b) = p else { panic!() };
        assert!(matches!(*a, Process::Rep(_)));
        assert!(matches!(*b, Process::Cond(..)));
    }

    #[test]
    fn negative_literal_folds() {
        assert_eq!(parse_expr("-3/5").unwrap(), Expr::num(Num::ratio(-3, 5)));
        assert_eq!(parse_expr("-(3)").unwrap(), Expr::neg(Expr::int(3)));
        assert_eq!(parse_expr("3 / 5").unwrap(), Expr::div(Expr::int(3), Expr::int(5)));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_process("x := ;").unwrap_err();
        assert!(matches!(e, Error::Syntax { line: 1, col: 6, .. }));
        assert!(parse_process("<x = 1 & true>").is_err());
        assert!(parse_process("<x_dot = 1, x_dot = 2 & true>").is_err());
        assert!(parse_process("skip := 1").is_err());
    }
}
