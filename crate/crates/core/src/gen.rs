//! Seeded random generators for programs, traces, polynomials and
//! postconditions, used by the property tests.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_bigint::BigInt;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::assertion::{parse_assertion, Assertion};
use crate::poly::Poly;
use crate::runtime::{Event, ReadySet, State, Trace, Trajectory};
use crate::syntax::{BExpr, Branch, ChanSet, CmpOp, Comm, CommDir, Dir, Expr, Ode, Process};

#[derive(Clone, Debug)]
pub struct ProgConfig {
    pub depth: usize,
    pub vars: Vec<String>,
    /// Channels used in both directions.
    pub chans: Vec<String>,
    pub out_chans: Vec<String>,
    pub in_chans: Vec<String>,
    pub odes: bool,
    pub comms: bool,
    pub waits: bool,
    /// Most `*` nodes per program.
    pub max_reps: usize,
}

impl ProgConfig {
    /// Discrete programs over `x`, `y` with external channels `a`, `b`.
    pub fn discrete() -> Self {
        ProgConfig {
            depth: 5,
            vars: alloc::vec!["x".into(), "y".into()],
            chans: alloc::vec!["a".into(), "b".into()],
            out_chans: Vec::new(),
            in_chans: Vec::new(),
            odes: false,
            comms: true,
            waits: true,
            max_reps: 1,
        }
    }

    /// Discrete and affine-ODE programs.
    pub fn hybrid() -> Self {
        ProgConfig { odes: true, max_reps: 2, ..ProgConfig::discrete() }
    }
}

fn pick<'a, R: Rng>(rng: &mut R, xs: &'a [String]) -> &'a str {
    xs.choose(rng).map(String::as_str).unwrap_or("x")
}

pub fn gen_expr<R: Rng>(rng: &mut R, vars: &[String]) -> Expr {
    let x = Expr::var(pick(rng, vars));
    match rng.gen_range(0..5) {
        0 => Expr::int(rng.gen_range(0..3)),
        1 => x,
        2 => Expr::add(x, Expr::int(1)),
        3 => Expr::sub(x, Expr::int(1)),
        _ => Expr::add(x, Expr::var(pick(rng, vars))),
    }
}

pub fn gen_bexpr<R: Rng>(rng: &mut R, vars: &[String]) -> BExpr {
    let ops = [CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne];
    let atom = |rng: &mut R| {
        let op = *ops.choose(rng).unwrap();
        BExpr::cmp(op, Expr::var(pick(rng, vars)), Expr::int(rng.gen_range(0..3)))
    };
    match rng.gen_range(0..4) {
        0 => BExpr::and(atom(rng), atom(rng)),
        1 => BExpr::or(atom(rng), atom(rng)),
        _ => atom(rng),
    }
}

/// An ODE that leaves its domain in bounded time from any start.
pub fn gen_ode<R: Rng>(rng: &mut R, vars: &[String]) -> Ode {
    let x = pick(rng, vars).to_string();
    let k = rng.gen_range(1..4);
    let (rate, domain) = if rng.gen_bool(0.5) {
        (Expr::int(rng.gen_range(1..3)), BExpr::cmp(CmpOp::Lt, Expr::var(&x), Expr::int(k)))
    } else {
        (Expr::int(-1), BExpr::cmp(CmpOp::Gt, Expr::var(&x), Expr::int(-k)))
    };
    let mut field = alloc::vec![(x.clone(), rate)];
    let others: Vec<&String> = vars.iter().filter(|y| **y != x).collect();
    if let Some(y) = others.choose(rng) {
        if rng.gen_bool(0.4) {
            // y follows x linearly
            field.push(((*y).clone(), Expr::var(&x)));
        }
    }
    Ode::new(field, domain)
}

struct ProgGen<'a, R> {
    rng: &'a mut R,
    cfg: &'a ProgConfig,
    reps: usize,
}

impl<R: Rng> ProgGen<'_, R> {
    fn comm(&mut self) -> Comm {
        let c = self.cfg;
        let (nb, no, ni) = (c.chans.len(), c.out_chans.len(), c.in_chans.len());
        let k = self.rng.gen_range(0..(nb + no + ni).max(1));
        let (ch, input) = if k < nb {
            (c.chans[k].clone(), self.rng.gen_bool(0.5))
        } else if k < nb + no {
            (c.out_chans[k - nb].clone(), false)
        } else if k < nb + no + ni {
            (c.in_chans[k - nb - no].clone(), true)
        } else {
            (String::from("a"), false)
        };
        if input {
            Comm::In(ch, pick(self.rng, &c.vars).to_string())
        } else {
            Comm::Out(ch, gen_expr(self.rng, &c.vars))
        }
    }

    fn leaf(&mut self) -> Process {
        let vars = &self.cfg.vars;
        loop {
            match self.rng.gen_range(0..6) {
                0 => return Process::Skip,
                1 | 2 => return Process::assign(pick(self.rng, vars), gen_expr(self.rng, vars)),
                3 if self.cfg.comms => {
                    return match self.comm() {
                        Comm::In(ch, x) => Process::Input(ch, x),
                        Comm::Out(ch, e) => Process::Output(ch, e),
                    }
                }
                4 if self.cfg.waits => return Process::Wait(Expr::int(self.rng.gen_range(1..3))),
                5 if self.cfg.odes => return Process::Ode(gen_ode(self.rng, vars)),
                _ => {}
            }
        }
    }

    fn process(&mut self, depth: usize) -> Process {
        if depth == 0 || self.rng.gen_bool(0.3) {
            return self.leaf();
        }
        let d = depth - 1;
        loop {
            match self.rng.gen_range(0..6) {
                0 | 1 => return Process::seq(self.process(d), self.process(d)),
                2 => return Process::ichoice(self.process(d), self.process(d)),
                3 => {
                    let b = gen_bexpr(self.rng, &self.cfg.vars);
                    return Process::cond(b, self.process(d), self.process(d));
                }
                4 if self.reps < self.cfg.max_reps => {
                    self.reps += 1;
                    return Process::rep(self.process(d.min(2)));
                }
                5 if self.cfg.odes && self.cfg.comms => {
                    let ode = gen_ode(self.rng, &self.cfg.vars);
                    let n = self.rng.gen_range(1..3);
                    let branches = (0..n).map(|_| Branch { comm: self.comm(), body: self.leaf() }).collect();
                    return Process::Interrupt(ode, branches);
                }
                _ => {}
            }
        }
    }
}

/// A random sequential program.
pub fn gen_process<R: Rng>(rng: &mut R, cfg: &ProgConfig) -> Process {
    ProgGen { rng, cfg, reps: 0 }.process(cfg.depth)
}

/// Two sequential components over disjoint variables. A random subset of
/// the channels is synchronized, left to right; the others stay external
/// and are split between the sides.
pub fn gen_parallel<R: Rng>(rng: &mut R, cfg: &ProgConfig) -> Process {
    let mid = cfg.vars.len().div_ceil(2);
    let mut shared = Vec::new();
    let (mut lc, mut rc) = (Vec::new(), Vec::new());
    for (i, ch) in cfg.chans.iter().enumerate() {
        if rng.gen_bool(0.6) {
            shared.push(ch.clone());
        } else if i % 2 == 0 {
            lc.push(ch.clone());
        } else {
            rc.push(ch.clone());
        }
    }
    let depth = cfg.depth.saturating_sub(1);
    let left = ProgConfig {
        vars: cfg.vars[..mid].to_vec(),
        chans: lc,
        out_chans: shared.clone(),
        in_chans: Vec::new(),
        depth,
        ..cfg.clone()
    };
    let right =
        ProgConfig { vars: cfg.vars[mid..].to_vec(), chans: rc, out_chans: Vec::new(), in_chans: shared.clone(), depth, ..cfg.clone() };
    let a = gen_process(rng, &left);
    let b = gen_process(rng, &right);
    let cs: Vec<&str> = shared.iter().map(String::as_str).collect();
    Process::par(a, &cs, b)
}

/// Variables with values drawn from `{0, 1, 2}`.
pub fn gen_state<R: Rng>(rng: &mut R, vars: &[String]) -> State {
    let mut s = State::new();
    for x in vars {
        s.set(x, rng.gen_range(0..3) as f64);
    }
    s
}

/// Postconditions over `vars` mixing state atoms with simple trace shapes.
pub fn gen_postcondition<R: Rng>(rng: &mut R, vars: &[String], chans: &[String]) -> Assertion {
    let ops = ["<", "<=", ">", ">=", "=", "!="];
    let atom = |rng: &mut R| -> String {
        match rng.gen_range(0..6) {
            0 => String::from("gamma == eps"),
            1 => {
                let ch = pick(rng, chans);
                let d = ["?", "!"].choose(rng).unwrap();
                format!("(exists v. gamma == <{ch}{d}, v>)")
            }
            2 => format!("{} {} {}", pick(rng, vars), ops.choose(rng).unwrap(), pick(rng, vars)),
            _ => format!("{} {} {}", pick(rng, vars), ops.choose(rng).unwrap(), rng.gen_range(0..4)),
        }
    };
    let src = match rng.gen_range(0..4) {
        0 => atom(rng),
        1 => format!("{} && {}", atom(rng), atom(rng)),
        2 => format!("{} || {}", atom(rng), atom(rng)),
        _ => format!("{} -> {}", atom(rng), atom(rng)),
    };
    parse_assertion(&src).expect("generated postcondition parses")
}

fn small_rational<R: Rng>(rng: &mut R) -> BigRational {
    let n = rng.gen_range(-5i64..=5);
    let d = [1i64, 1, 2, 3].choose(rng).copied().unwrap();
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Up to `terms` monomials of total degree at most `degree`.
pub fn gen_poly<R: Rng>(rng: &mut R, vars: &[&str], degree: u32, terms: usize) -> Poly {
    let mut p = Poly::zero();
    for _ in 0..rng.gen_range(1..=terms) {
        let mut m = Poly::int(1);
        let deg = rng.gen_range(0..=degree);
        for _ in 0..deg {
            m = &m * &Poly::var(vars.choose(rng).copied().unwrap_or("x"));
        }
        p = &p + &m.scale(&small_rational(rng));
    }
    p
}

/// A single random monomial with a random coefficient.
pub fn gen_term<R: Rng>(rng: &mut R, vars: &[&str], degree: u32) -> Poly {
    let mut m = Poly::int(1);
    for _ in 0..rng.gen_range(0..=degree) {
        m = &m * &Poly::var(vars.choose(rng).copied().unwrap_or("x"));
    }
    m.scale(&small_rational(rng))
}

#[derive(Clone, Debug)]
pub struct TracePair {
    pub left: Trace,
    pub right: Trace,
    pub cs: ChanSet,
}

/// Two traces that mostly synchronize over `cs = {c, d}`: shared waits
/// of equal length, matched shared communications and some local events.
pub fn gen_trace_pair<R: Rng>(rng: &mut R, len: usize) -> TracePair {
    let cs: ChanSet = ["c", "d"].iter().map(|c| String::from(*c)).collect();
    let field_l = Arc::new(alloc::vec![(String::from("u"), Expr::int(1))]);
    let field_r = Arc::new(alloc::vec![(String::from("w"), Expr::int(-1))]);
    let (mut l, mut r) = (Trace::new(), Trace::new());
    let (mut u, mut w) = (0.0, 0.0);
    for _ in 0..len {
        match rng.gen_range(0..5) {
            0 | 1 => {
                let d = rng.gen_range(1..5) as f64 / 2.0;
                let ch = ["c", "d"].choose(rng).unwrap();
                let side = rng.gen_bool(0.5);
                let (rl, rr): (ReadySet, ReadySet) = if rng.gen_bool(0.3) {
                    (ReadySet::new(), ReadySet::new())
                } else if side {
                    ([CommDir::output(ch)].into_iter().collect(), ReadySet::new())
                } else {
                    (ReadySet::new(), [CommDir::input(ch)].into_iter().collect())
                };
                let pl = Trajectory::ode(field_l.clone(), State::from_pairs(&[("u", u)]), 1e-3).expect("affine");
                let pr = Trajectory::ode(field_r.clone(), State::from_pairs(&[("w", w)]), 1e-3).expect("affine");
                l.events.push(Event::wait(d, pl, rl));
                r.events.push(Event::wait(d, pr, rr));
                u += d;
                w -= d;
            }
            2 | 3 => {
                let ch = ["c", "d"].choose(rng).unwrap();
                let v = rng.gen_range(0..3) as f64;
                l.events.push(Event::comm(ch, Dir::Out, v));
                r.events.push(Event::comm(ch, Dir::In, v));
            }
            _ => {
                let v = rng.gen_range(0..3) as f64;
                if rng.gen_bool(0.5) {
                    l.events.push(Event::comm("e", Dir::Out, v));
                } else {
                    r.events.push(Event::comm("f", Dir::In, v));
                }
            }
        }
    }
    TracePair { left: l, right: r, cs }
}

/// Split finite waits at random interior points. The result reduces to
/// `t`.
pub fn split_waits<R: Rng>(rng: &mut R, t: &Trace, prob: f64) -> Trace {
    let mut out = Trace { events: Vec::new(), delta: t.delta };
    for e in &t.events {
        match e {
            Event::Wait { dur, traj, rdy } if dur.is_finite() && rng.gen_bool(prob) => {
                let k = rng.gen_range(2..4);
                let mut cuts: Vec<f64> = (1..k).map(|i| dur * i as f64 / k as f64).collect();
                cuts.push(*dur);
                let mut at = 0.0;
                for c in cuts {
                    out.events.push(Event::wait(c - at, traj.clone().shift(at), rdy.clone()));
                    at = c;
                }
            }
            _ => out.events.push(e.clone()),
        }
    }
    out
}

/// A random history over channels unrelated to any program.
pub fn gen_history<R: Rng>(rng: &mut R, len: usize) -> Trace {
    let mut t = Trace::new();
    for _ in 0..len {
        if rng.gen_bool(0.5) {
            let d = rng.gen_range(1..4) as f64;
            let s = State::from_pairs(&[("h", rng.gen_range(0..3) as f64)]);
            t.events.push(Event::wait(d, Trajectory::Const(s), ReadySet::new()));
        } else {
            t.events.push(Event::comm("hist", Dir::Out, rng.gen_range(0..3) as f64));
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{check_wellformed, parse_process, pretty};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn programs_are_wellformed_and_print_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let p = if rng.gen_bool(0.3) {
                gen_parallel(&mut rng, &ProgConfig::hybrid())
            } else {
                gen_process(&mut rng, &ProgConfig::hybrid())
            };
            assert!(check_wellformed(&p).is_empty(), "{} {:?}", pretty(&p), check_wellformed(&p));
            let q = parse_process(&pretty(&p)).unwrap();
            assert_eq!(q, p, "{}\n{:?}\n{:?}", pretty(&p), q, p);
        }
    }

    #[test]
    fn split_waits_reduce_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let tp = gen_trace_pair(&mut rng, 6);
            let s = split_waits(&mut rng, &tp.left, 0.7);
            assert!(crate::exec_small::is_reduction_of(&s, &tp.left, 1e-9));
        }
    }

    #[test]
    fn polys_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let p = gen_poly(&mut rng, &["x", "y", "z"], 4, 4);
            assert!(p.degree() <= 4 && p.num_terms() <= 4);
            assert!(gen_term(&mut rng, &["x", "y"], 3).num_terms() <= 1);
        }
    }

    #[test]
    fn postconditions_parse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vars = ["x".to_string(), "y".to_string()];
        let chans = ["a".to_string()];
        for _ in 0..50 {
            gen_postcondition(&mut rng, &vars, &chans);
        }
    }
}
