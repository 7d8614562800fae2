//! Weakest liberal preconditions, enumerated strongest postconditions,
//! Hoare-triple checking and verification-condition output.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::assertion::{
    eval, to_sexpr, Assertion, Binder, EvalConfig, ExitHint, Overrides, Range, Sort, Subst, Term, TraceExpr, TrajTerm,
    Truth, Valuation,
};
use crate::exec_big::{big_step, enumerate_runs, EnumBudget, ExecConfig};
use crate::oracle::{RandomConfig, RandomOracle};
use crate::runtime::{Event, ReadySet};
use crate::syntax::{ChanSet, CmpOp, Comm, CommDir, Ode, Process};
use crate::{Error, Result, State, Trace};

/// Loop invariants keyed by the pre-order index of each `Rep` node.
pub type Annotations = BTreeMap<usize, Assertion>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WpOptions {
    /// Unrolling depth for loops without an invariant; `None` makes a
    /// missing invariant an error.
    pub unroll: Option<usize>,
}

impl Default for WpOptions {
    fn default() -> Self {
        WpOptions { unroll: Some(8) }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Vc {
    pub name: String,
    pub formula: Assertion,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WpResult {
    pub pre: Assertion,
    pub side: Vec<Vc>,
}

pub fn wp(p: &Process, q: &Assertion) -> Result<Assertion> {
    Ok(wp_with(p, q, &Annotations::new(), &WpOptions::default())?.pre)
}

/// Precondition plus the side conditions produced by annotated loops.
pub fn wp_with(p: &Process, q: &Assertion, ann: &Annotations, opts: &WpOptions) -> Result<WpResult> {
    if p.is_parallel() {
        return Err(Error::Invalid("wp needs a sequential process".into()));
    }
    let mut avoid = BTreeSet::new();
    q.names(&mut avoid);
    for a in ann.values() {
        a.names(&mut avoid);
    }
    avoid.extend(p.vars());
    for cd in p.comm_dirs() {
        avoid.insert(cd.ch.clone());
    }
    let mut g = Gen { avoid, counter: 0, ann, opts, loops: 0, side: Vec::new() };
    let qa = Arc::new(q.clone());
    let pre = g.wp(p, &qa, &qa)?;
    // Unrolling repeats nested annotated loops; keep their names distinct.
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut side = g.side;
    for vc in &mut side {
        let n = seen.entry(vc.name.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            vc.name = alloc::format!("{}_{}", vc.name, *n - 1);
        }
    }
    Ok(WpResult { pre: (*pre).clone(), side })
}

struct Gen<'a> {
    avoid: BTreeSet<String>,
    counter: usize,
    ann: &'a Annotations,
    opts: &'a WpOptions,
    loops: usize,
    side: Vec<Vc>,
}

type A = Arc<Assertion>;

fn ext(events: impl IntoIterator<Item = TraceExpr>) -> TraceExpr {
    TraceExpr::concat_all(core::iter::once(TraceExpr::Gamma).chain(events))
}

fn ready(cd: CommDir) -> ReadySet {
    core::iter::once(cd).collect()
}

fn at_time(field_vars: &[String], p: &TrajTerm, t: Term) -> Subst {
    let mut s = Subst::default();
    for x in field_vars {
        s.vars.insert(x.clone(), Term::at(p.clone(), t.clone(), x));
    }
    s
}

impl Gen<'_> {
    fn fresh(&mut self, base: &str) -> String {
        loop {
            self.counter += 1;
            let c = alloc::format!("{base}{}", self.counter);
            if self.avoid.insert(c.clone()) {
                return c;
            }
        }
    }

    fn wp(&mut self, p: &Process, q: &A, a: &A) -> Result<A> {
        Ok(Arc::new(match p {
            Process::Skip => return Ok(q.clone()),
            Process::Assign(x, e) => Assertion::shared_subst(q, Subst::var(x, e.into())),
            Process::Output(ch, e) => {
                let cd = CommDir::output(ch);
                let ev = TraceExpr::comm(cd.clone(), e.into());
                let d = self.fresh("d");
                let now = Assertion::shared_subst(q, Subst::gamma(ext([ev.clone()])));
                let later = Assertion::forall(
                    Binder::positive(&d),
                    Assertion::shared_subst(
                        q,
                        Subst::gamma(ext([TraceExpr::wait(Term::var(&d), TrajTerm::id(), ready(cd.clone())), ev])),
                    ),
                );
                let never =
                    Assertion::shared_subst(a, Subst::gamma(ext([TraceExpr::wait(Term::Inf, TrajTerm::id(), ready(cd))])));
                Assertion::and_all([now, later, never])
            }
            Process::Input(ch, x) => {
                let cd = CommDir::input(ch);
                let v = self.fresh("v");
                let d = self.fresh("d");
                let ev = TraceExpr::comm(cd.clone(), Term::var(&v));
                let now = Assertion::forall(
                    Binder::real(&v),
                    Assertion::shared_subst(q, Subst::var(x, Term::var(&v)).with_gamma(ext([ev.clone()]))),
                );
                let later = Assertion::forall(
                    Binder::positive(&d),
                    Assertion::forall(
                        Binder::real(&v),
                        Assertion::shared_subst(
                            q,
                            Subst::var(x, Term::var(&v)).with_gamma(ext([
                                TraceExpr::wait(Term::var(&d), TrajTerm::id(), ready(cd.clone())),
                                ev,
                            ])),
                        ),
                    ),
                );
                let never =
                    Assertion::shared_subst(a, Subst::gamma(ext([TraceExpr::wait(Term::Inf, TrajTerm::id(), ready(cd))])));
                Assertion::and_all([now, later, never])
            }
            Process::Wait(e) => {
                let d: Term = e.into();
                let pos = Assertion::cmp(CmpOp::Gt, d.clone(), Term::int(0));
                let waited =
                    Assertion::shared_subst(q, Subst::gamma(ext([TraceExpr::wait(d, TrajTerm::id(), ReadySet::new())])));
                Assertion::and(
                    Assertion::imp(pos.clone(), waited),
                    Assertion::imp(Assertion::not(pos), (**q).clone()),
                )
            }
            Process::IChoice(l, r) => {
                let w1 = self.wp(l, q, a)?;
                let w2 = self.wp(r, q, a)?;
                Assertion::and((*w1).clone(), (*w2).clone())
            }
            Process::Seq(l, r) => {
                // Loops are numbered in pre-order, so the left side goes first.
                let idx = self.loops;
                let base = self.side.len();
                self.loops = idx + count_loops(l);
                let w2 = self.wp(r, q, a)?;
                let after = self.loops;
                self.loops = idx;
                let side_r = self.side.split_off(base);
                let w1 = self.wp(l, &w2, a)?;
                self.loops = after;
                self.side.extend(side_r);
                return Ok(w1);
            }
            Process::Cond(b, l, r) => {
                let c = Assertion::from_bexpr(b);
                let w1 = self.wp(l, q, a)?;
                let w2 = self.wp(r, q, a)?;
                Assertion::and(
                    Assertion::imp(c.clone(), (*w1).clone()),
                    Assertion::imp(Assertion::not(c), (*w2).clone()),
                )
            }
            Process::Rep(body) => {
                let idx = self.loops;
                self.loops += 1;
                if let Some(inv) = self.ann.get(&idx) {
                    let inv = Arc::new(inv.clone());
                    let pres = core::mem::take(&mut self.side);
                    let w = self.wp(body, &inv, a)?;
                    let inner = core::mem::replace(&mut self.side, pres);
                    self.side.push(Vc {
                        name: alloc::format!("loop{idx}_preserved"),
                        formula: Assertion::imp((*inv).clone(), (*w).clone()),
                    });
                    self.side.push(Vc {
                        name: alloc::format!("loop{idx}_post"),
                        formula: Assertion::imp((*inv).clone(), (**q).clone()),
                    });
                    self.side.extend(inner);
                    return Ok(inv);
                }
                let k = self.opts.unroll.ok_or_else(|| Error::Invalid(alloc::format!("loop {idx} needs an invariant")))?;
                let start = self.loops;
                let mut parts = alloc::vec![q.clone()];
                let mut w = q.clone();
                for _ in 0..k {
                    self.loops = start;
                    w = self.wp(body, &w, a)?;
                    parts.push(w.clone());
                }
                if k == 0 {
                    self.loops = start + count_loops(body);
                }
                Assertion::and_all(parts.into_iter().map(|x| (*x).clone()))
            }
            Process::Ode(ode) => self.wp_ode(ode, ReadySet::new(), q, a, Vec::new())?,
            Process::Interrupt(ode, branches) => {
                let rdy: ReadySet = branches.iter().map(|b| b.comm.comm_dir()).collect();
                let mut fire = Vec::new();
                for br in branches {
                    let w = self.wp(&br.body, q, a)?;
                    fire.push((br.comm.clone(), w));
                }
                self.wp_ode(ode, rdy, q, a, fire)?
            }
            Process::Par(..) => return Err(Error::Invalid("wp needs a sequential process".into())),
        }))
    }

    fn wp_ode(&mut self, ode: &Ode, rdy: ReadySet, q: &A, a: &A, fire: Vec<(Comm, A)>) -> Result<Assertion> {
        let xs: Vec<String> = ode.vars().map(String::from).collect();
        let traj = TrajTerm::ode(ode.field.clone());
        let hint = ExitHint { field: ode.field.clone(), domain: ode.domain.clone(), init: Overrides::new() };
        let dom = Assertion::from_bexpr(&ode.domain);
        let d = self.fresh("d");
        let t = self.fresh("t");
        let at_d = at_time(&xs, &traj, Term::var(&d));
        let hinted = |b: Binder| Binder { hint: Some(hint.clone()), ..b };
        let inside_before_d = Assertion::forall(
            hinted(Binder::new(
                &t,
                Sort::Time,
                Range::Interval { lo: Term::int(0), hi: Term::var(&d), lo_open: false, hi_open: true },
            )),
            dom.subst(&at_time(&xs, &traj, Term::var(&t))),
        );
        let wait_d = TraceExpr::wait(Term::var(&d), traj.clone(), rdy.clone());
        let mut parts = Vec::new();

        for (comm, w) in fire {
            match comm {
                Comm::Out(ch, e) => {
                    let cd = CommDir::output(&ch);
                    let e: Term = (&e).into();
                    parts.push(Assertion::shared_subst(&w, Subst::gamma(ext([TraceExpr::comm(cd.clone(), e.clone())]))));
                    let mut s = at_d.clone();
                    s.gamma = Some(ext([wait_d.clone(), TraceExpr::comm(cd, e.subst(&at_d))]));
                    parts.push(Assertion::forall(
                        hinted(Binder::positive(&d)),
                        Assertion::imp(inside_before_d.clone(), Assertion::shared_subst(&w, s)),
                    ));
                }
                Comm::In(ch, y) => {
                    let cd = CommDir::input(&ch);
                    let v = self.fresh("v");
                    let ev = TraceExpr::comm(cd, Term::var(&v));
                    parts.push(Assertion::forall(
                        Binder::real(&v),
                        Assertion::shared_subst(&w, Subst::var(&y, Term::var(&v)).with_gamma(ext([ev.clone()]))),
                    ));
                    let mut s = at_d.clone();
                    s.vars.insert(y.clone(), Term::var(&v));
                    s.gamma = Some(ext([wait_d.clone(), ev]));
                    parts.push(Assertion::forall(
                        hinted(Binder::positive(&d)),
                        Assertion::imp(
                            inside_before_d.clone(),
                            Assertion::forall(Binder::real(&v), Assertion::shared_subst(&w, s)),
                        ),
                    ));
                }
            }
        }

        // Leaving the domain: at once, after a positive duration, or never.
        parts.push(Assertion::imp(Assertion::not(dom.clone()), (**q).clone()));
        let mut s = at_d.clone();
        s.gamma = Some(ext([wait_d]));
        parts.push(Assertion::forall(
            hinted(Binder::positive(&d)),
            Assertion::imp(
                Assertion::and(inside_before_d, Assertion::not(dom.subst(&at_d))),
                Assertion::shared_subst(q, s),
            ),
        ));
        let always = Assertion::forall(hinted(Binder::positive(&d)), dom.subst(&at_d));
        parts.push(Assertion::imp(
            Assertion::and(dom, always),
            Assertion::shared_subst(a, Subst::gamma(ext([TraceExpr::wait(Term::Inf, traj, rdy)]))),
        ));
        Ok(Assertion::and_all(parts))
    }
}

fn count_loops(p: &Process) -> usize {
    match p {
        Process::Rep(b) => 1 + count_loops(b),
        Process::IChoice(l, r) | Process::Seq(l, r) | Process::Cond(_, l, r) | Process::Par(l, _, r) => {
            count_loops(l) + count_loops(r)
        }
        Process::Interrupt(_, bs) => bs.iter().map(|b| count_loops(&b.body)).sum(),
        _ => 0,
    }
}

fn check_disjoint(c1: &Process, c2: &Process, p1: &Assertion, p2: &Assertion) -> Result<()> {
    let (v1, v2) = (c1.vars(), c2.vars());
    if let Some(x) = v1.intersection(&v2).next() {
        return Err(Error::Overlap(x.clone()));
    }
    for x in p1.free_names() {
        if v2.contains(&x) {
            return Err(Error::Invalid(alloc::format!("left postcondition mentions `{x}` of the right component")));
        }
    }
    for x in p2.free_names() {
        if v1.contains(&x) {
            return Err(Error::Invalid(alloc::format!("right postcondition mentions `{x}` of the left component")));
        }
    }
    Ok(())
}

/// `∃tr1 tr2. P1[tr1/γ] ∧ P2[tr2/γ] ∧ sync(tr1, cs, tr2, γ)`
pub fn sp_parallel(c1: &Process, c2: &Process, cs: &ChanSet, p1: &Assertion, p2: &Assertion) -> Result<Assertion> {
    check_disjoint(c1, c2, p1, p2)?;
    let mut avoid = BTreeSet::new();
    p1.names(&mut avoid);
    p2.names(&mut avoid);
    let pick = |base: &str, avoid: &mut BTreeSet<String>| {
        let name = if avoid.contains(base) {
            (1..).map(|n| alloc::format!("{base}_{n}")).find(|c| !avoid.contains(c)).expect("unbounded supply")
        } else {
            base.to_string()
        };
        avoid.insert(name.clone());
        name
    };
    let t1 = pick("tr1", &mut avoid);
    let t2 = pick("tr2", &mut avoid);
    let (v1, v2) = (TraceExpr::var(&t1), TraceExpr::var(&t2));
    let body = Assertion::and_all([
        p1.clone().with_subst(Subst::gamma(v1.clone())),
        p2.clone().with_subst(Subst::gamma(v2.clone())),
        Assertion::Sync(v1, cs.clone(), v2, TraceExpr::Gamma),
    ]);
    Ok(Assertion::exists(Binder::trace(&t1), Assertion::exists(Binder::trace(&t2), body)))
}

/// Concrete trace as a term; trajectories become literals.
pub fn trace_to_expr(tr: &Trace) -> TraceExpr {
    let num = |v: f64| if v.is_infinite() { Term::Inf } else { Term::num(v) };
    let parts = tr.events.iter().map(|e| match e {
        Event::Comm { cd, value } => TraceExpr::comm(cd.clone(), num(*value)),
        Event::Wait { dur, traj, rdy } => TraceExpr::wait(num(*dur), TrajTerm::Lit(traj.clone()), rdy.clone()),
    });
    TraceExpr::concat_all(parts)
}

/// Disjunction over every enumerated run from the given initial states:
/// the final values of the process variables and the exact trace.
pub fn enumerated_sp(p: &Process, init: &[State], budget: &EnumBudget, cfg: &ExecConfig) -> Result<Assertion> {
    let mut runs = Vec::new();
    for s in init {
        for r in enumerate_runs(p, s, budget, cfg)? {
            if r.trace.delta {
                continue;
            }
            let mut parts: Vec<Assertion> = r
                .state
                .iter()
                .map(|(x, v)| Assertion::cmp(CmpOp::Eq, Term::var(x), Term::num(v)))
                .collect();
            parts.push(Assertion::treq(TraceExpr::Gamma, trace_to_expr(&r.trace)));
            runs.push(Assertion::and_all(parts));
        }
    }
    Ok(Assertion::or_all(runs))
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckMode {
    /// Random runs per initial state.
    Test { trials: usize, seed: u64, oracle: RandomConfig },
    /// Every run within a finite budget.
    Exact { budget: EnumBudget },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub init: State,
    pub state: State,
    pub trace: Trace,
    pub verdict: Truth,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripleReport {
    /// Initial states satisfying the precondition.
    pub states: usize,
    pub runs: usize,
    pub counterexamples: Vec<Counterexample>,
    /// Runs where the postcondition evaluated to `Unknown`.
    pub undecided: usize,
}

impl TripleReport {
    pub fn valid(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn absorb(&mut self, other: TripleReport) {
        self.states += other.states;
        self.runs += other.runs;
        self.counterexamples.extend(other.counterexamples);
        self.undecided += other.undecided;
    }
}

/// Checks `{pre} p {post}` from each candidate state with an empty history.
/// States where `pre` is not definitely true are skipped.
pub fn check_triple(
    pre: &Assertion,
    p: &Process,
    post: &Assertion,
    states: &[State],
    mode: &CheckMode,
    exec: &ExecConfig,
    ecfg: &EvalConfig,
) -> Result<TripleReport> {
    let mut rep = TripleReport::default();
    for s in states {
        rep.absorb(check_triple_at(pre, p, post, s, mode, exec, ecfg)?);
    }
    Ok(rep)
}

/// [`check_triple`] for a single initial state.
pub fn check_triple_at(
    pre: &Assertion,
    p: &Process,
    post: &Assertion,
    s: &State,
    mode: &CheckMode,
    exec: &ExecConfig,
    ecfg: &EvalConfig,
) -> Result<TripleReport> {
    let nu = Valuation::new();
    let mut rep = TripleReport::default();
    if !eval(pre, s, &Trace::new(), &nu, ecfg)?.is_true() {
        return Ok(rep);
    }
    rep.states = 1;
    let runs = match mode {
        CheckMode::Exact { budget } => enumerate_runs(p, s, budget, exec)?,
        CheckMode::Test { trials, seed, oracle } => {
            let mut out = Vec::with_capacity(*trials);
            for i in 0..*trials {
                let mut o = RandomOracle::with_config(seed.wrapping_add(i as u64), oracle.clone());
                out.push(big_step(p, s, &mut o, exec)?);
            }
            out
        }
    };
    for r in runs {
        rep.runs += 1;
        match eval(post, &r.state, &r.trace, &nu, ecfg)? {
            Truth::True => {}
            Truth::Unknown => rep.undecided += 1,
            Truth::False => rep.counterexamples.push(Counterexample {
                init: s.clone(),
                state: r.state,
                trace: r.trace,
                verdict: Truth::False,
            }),
        }
    }
    Ok(rep)
}

/// One `(vc name (decls) formula)` form per condition. Free names are
/// declared `Real`; `gamma` is declared `Trace` when it occurs.
pub fn emit_vc(vcs: &[Vc]) -> String {
    let mut out = String::new();
    for vc in vcs {
        let f = vc.formula.expand();
        let mut decls: Vec<String> = f.free_names().into_iter().map(|x| alloc::format!("({x} Real)")).collect();
        if f.mentions_gamma() {
            decls.push("(gamma Trace)".into());
        }
        let _ = writeln!(out, "(vc {} ({}) {})", vc.name, decls.join(" "), to_sexpr(&f));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assertion::parse_assertion;
    use crate::oracle::Delay;
    use crate::syntax::parse_process;
    use crate::Dir;

    fn ecfg() -> EvalConfig {
        EvalConfig { values: Some(alloc::vec![0.0, 1.0, 2.0]), times: Some(alloc::vec![1.0]), ..EvalConfig::default() }
    }

    fn budget() -> EnumBudget {
        EnumBudget { delays: alloc::vec![Delay::Now, Delay::After(1.0), Delay::Never], ..EnumBudget::default() }
    }

    fn holds(a: &Assertion, s: &State) -> Truth {
        eval(a, s, &Trace::new(), &Valuation::new(), &ecfg()).unwrap()
    }

    fn all_runs(p: &Process, q: &Assertion, s: &State) -> bool {
        enumerate_runs(p, s, &budget(), &ExecConfig::default())
            .unwrap()
            .iter()
            .all(|r| eval(q, &r.state, &r.trace, &Valuation::new(), &ecfg()).unwrap().is_true())
    }

    #[test]
    fn assign_and_skip() {
        let q = parse_assertion("x = 1").unwrap();
        let p = parse_process("x := x + 1").unwrap();
        assert_eq!(wp(&p, &q).unwrap().expand(), parse_assertion("x + 1 = 1").unwrap());
        assert_eq!(wp(&Process::Skip, &q).unwrap(), q);
    }

    #[test]
    fn output_cannot_leave_gamma_empty() {
        let p = parse_process("ch!1").unwrap();
        let pre = wp(&p, &parse_assertion("gamma == eps").unwrap()).unwrap();
        assert_eq!(holds(&pre, &State::new()), Truth::False);
    }

    #[test]
    fn output_postcondition_over_all_rules() {
        let p = parse_process("ch!1").unwrap();
        let q = parse_assertion(
            "gamma == <ch!, 1> || (exists d > 0. gamma == <d, I, {ch!}> ^ <ch!, 1>) || gamma == <inf, I, {ch!}>",
        )
        .unwrap();
        assert_eq!(holds(&wp(&p, &q).unwrap(), &State::new()), Truth::True);
    }

    #[test]
    fn agrees_with_enumeration() {
        let cases = [
            ("x := 1; ch!x", "x = 1"),
            ("ch?x; (x := x + 1)*", "x >= 1"),
            ("ch?x; (x := x + 1)*", "x <= 2 || gamma == <inf, I, {ch?}>"),
            ("(x := 0 ++ x := 2); if x > 1 then c!x else skip endif", "x != 1"),
            ("wait x; x := 2", "x = 2"),
            ("c?y; d!(y + 1)", "exists v. gamma == <c?, v> ^ <d!, v + 1>"),
        ];
        for (src, post) in cases {
            let p = parse_process(src).unwrap();
            let q = parse_assertion(post).unwrap();
            let pre = wp_with(&p, &q, &Annotations::new(), &WpOptions { unroll: Some(3) }).unwrap().pre;
            for x in [0.0, 1.0, 2.0] {
                let s = State::from_pairs(&[("x", x), ("y", 0.0)]);
                let expected = all_runs(&p, &q, &s);
                assert_eq!(holds(&pre, &s), Truth::from_bool(expected), "{src} / {post} at x={x}");
            }
        }
    }

    #[test]
    fn annotated_loop_yields_side_conditions() {
        let p = parse_process("x := 0; (x := x + 1)*").unwrap();
        let q = parse_assertion("x >= 0").unwrap();
        let mut ann = Annotations::new();
        ann.insert(0, parse_assertion("x >= 0").unwrap());
        let r = wp_with(&p, &q, &ann, &WpOptions { unroll: None }).unwrap();
        assert_eq!(r.pre.expand(), parse_assertion("0 >= 0").unwrap());
        let names: Vec<_> = r.side.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["loop0_preserved", "loop0_post"]);
        let missing = wp_with(&p, &q, &Annotations::new(), &WpOptions { unroll: None });
        assert!(missing.is_err());
    }

    #[test]
    fn loop_numbering_is_preorder() {
        let p = parse_process("(x := x + 1)*; (y := y + 1)*").unwrap();
        let mut ann = Annotations::new();
        ann.insert(1, parse_assertion("y >= 0").unwrap());
        let r = wp_with(&p, &parse_assertion("y >= 0").unwrap(), &ann, &WpOptions::default()).unwrap();
        assert!(r.side.iter().all(|v| v.name.starts_with("loop1")));
    }

    #[test]
    fn ode_wp_tracks_exit() {
        let p = parse_process("<x_dot = 1 & x < 2>").unwrap();
        let q = parse_assertion("x >= 2 - 1/1000").unwrap();
        let pre = wp(&p, &q).unwrap();
        assert_eq!(holds(&pre, &State::from_pairs(&[("x", 0.0)])), Truth::True);
        let q2 = parse_assertion("x <= 1").unwrap();
        assert_eq!(holds(&wp(&p, &q2).unwrap(), &State::from_pairs(&[("x", 0.0)])), Truth::False);
    }

    #[test]
    fn par_is_rejected() {
        let p = parse_process("ch!1 ||[ch]|| ch?x").unwrap();
        assert!(wp(&p, &Assertion::True).is_err());
    }

    #[test]
    fn sp_of_handshake() {
        let c1 = parse_process("ch!3").unwrap();
        let c2 = parse_process("ch?x").unwrap();
        let init1 = [State::new()];
        let init2 = [State::from_pairs(&[("x", 0.0)])];
        let b = EnumBudget { values: alloc::vec![3.0, 4.0], ..EnumBudget::default() };
        let sp1 = enumerated_sp(&c1, &init1, &b, &ExecConfig::default()).unwrap();
        let sp2 = enumerated_sp(&c2, &init2, &b, &ExecConfig::default()).unwrap();
        let cs: ChanSet = ["ch".to_string()].into_iter().collect();
        let sp = sp_parallel(&c1, &c2, &cs, &sp1, &sp2).unwrap();
        let good = Trace::from_events(alloc::vec![Event::comm("ch", Dir::Sync, 3.0)]);
        let x3 = State::from_pairs(&[("x", 3.0)]);
        let x4 = State::from_pairs(&[("x", 4.0)]);
        let cfg = EvalConfig::default();
        assert_eq!(eval(&sp, &x3, &good, &Valuation::new(), &cfg).unwrap(), Truth::True);
        assert_eq!(eval(&sp, &x4, &good, &Valuation::new(), &cfg).unwrap(), Truth::False);
        assert_eq!(eval(&sp, &x3, &Trace::new(), &Valuation::new(), &cfg).unwrap(), Truth::False);
    }

    #[test]
    fn sp_of_skips_is_empty() {
        let e = parse_assertion("gamma == eps").unwrap();
        let sp = sp_parallel(&Process::Skip, &Process::Skip, &ChanSet::new(), &e, &e).unwrap();
        let cfg = EvalConfig::default();
        let s = State::new();
        assert_eq!(eval(&sp, &s, &Trace::new(), &Valuation::new(), &cfg).unwrap(), Truth::True);
        let one = Trace::from_events(alloc::vec![Event::comm("c", Dir::Out, 1.0)]);
        assert_eq!(eval(&sp, &s, &one, &Valuation::new(), &cfg).unwrap(), Truth::False);
    }

    #[test]
    fn sp_rejects_shared_variables() {
        let c1 = parse_process("x := 1").unwrap();
        let c2 = parse_process("x := 2").unwrap();
        assert!(sp_parallel(&c1, &c2, &ChanSet::new(), &Assertion::True, &Assertion::True).is_err());
    }

    #[test]
    fn triples() {
        let ex = ExecConfig::default();
        let exact = CheckMode::Exact { budget: budget() };
        let p = parse_process("x := x + 1").unwrap();
        let s0 = [State::from_pairs(&[("x", 0.0)])];
        let r = check_triple(
            &parse_assertion("x = 0").unwrap(),
            &p,
            &parse_assertion("x = 1 && gamma == eps").unwrap(),
            &s0,
            &exact,
            &ex,
            &ecfg(),
        )
        .unwrap();
        assert!(r.valid() && r.runs == 1);

        let lp = parse_process("(x := x + 1)*").unwrap();
        let r = check_triple(&Assertion::True, &lp, &parse_assertion("x >= 0").unwrap(), &s0, &exact, &ex, &ecfg())
            .unwrap();
        assert!(r.valid());
        assert_eq!(r.runs, 4);

        let r = check_triple(&Assertion::True, &lp, &parse_assertion("x <= 2").unwrap(), &s0, &exact, &ex, &ecfg())
            .unwrap();
        assert_eq!(r.counterexamples.len(), 1);

        let test = CheckMode::Test { trials: 20, seed: 7, oracle: RandomConfig::default() };
        let q = parse_assertion(
            "gamma == <ch!, 1> || (exists d > 0. gamma == <d, I, {ch!}> ^ <ch!, 1>) || gamma == <inf, I, {ch!}>",
        )
        .unwrap();
        let cfg = EvalConfig { times: None, ..ecfg() };
        let r = check_triple(&Assertion::True, &parse_process("ch!1").unwrap(), &q, &[State::new()], &test, &ex, &cfg)
            .unwrap();
        assert!(r.valid(), "{r:?}");
        assert_eq!(r.runs, 20);
    }

    #[test]
    fn emission_is_deterministic() {
        let vcs = [
            Vc { name: "a".into(), formula: parse_assertion("x > 0 -> x >= 0").unwrap() },
            Vc { name: "b".into(), formula: parse_assertion("gamma == eps").unwrap() },
        ];
        let text = emit_vc(&vcs);
        assert_eq!(text, emit_vc(&vcs));
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "(vc a ((x Real)) (=> (> x 0) (>= x 0)))");
        assert!(lines[1].starts_with("(vc b ((gamma Trace))"));
    }
}
