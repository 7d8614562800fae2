//! Synchronization of two component traces over a channel set.
//!
//! Head-event cases, left head against right head:
//!
//! - external comm vs external comm: either goes first
//! - external comm vs anything else: the external one goes first
//! - shared comm vs shared comm: complementary directions and equal values
//!   give a synchronized event, otherwise deadlock
//! - shared comm vs wait or end of trace: deadlock
//! - wait vs end of trace: the wait goes on alone
//! - wait vs wait: incompatible ready sets deadlock; equal durations merge;
//!   otherwise the shorter goes first and the longer keeps a shifted rest
//!
//! The ready set of a merged wait is the union of both sides.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::exec_small::is_reduction_of;
use crate::runtime::{compat, Event, ReadySet, Trace};
use crate::syntax::Dir;
use crate::{Error, Result};

pub type ChanSet = BTreeSet<String>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyncConfig {
    /// Absolute tolerance on durations and values.
    pub tol: f64,
    /// Maximum number of result traces.
    pub cap: usize,
    /// Let two infinite waits synchronize.
    pub inf_inf: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        SyncConfig { tol: 1e-9, cap: 10_000, inf_inf: true }
    }
}

#[derive(Clone)]
struct Cur<'a> {
    head: Option<Event>,
    rest: &'a [Event],
    delta: bool,
}

impl<'a> Cur<'a> {
    fn new(t: &'a Trace) -> Self {
        Cur { head: None, rest: &t.events, delta: t.delta }
    }

    fn peek(&self) -> Option<&Event> {
        self.head.as_ref().or_else(|| self.rest.first())
    }

    fn advance(&self) -> Cur<'a> {
        match self.head {
            Some(_) => Cur { head: None, rest: self.rest, delta: self.delta },
            None => Cur { head: None, rest: &self.rest[1..], delta: self.delta },
        }
    }

    fn replace(&self, e: Event) -> Cur<'a> {
        let rest = if self.head.is_some() { self.rest } else { &self.rest[1..] };
        Cur { head: Some(e), rest, delta: self.delta }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    External,
    Shared,
    Wait,
}

fn kind(e: &Event, cs: &ChanSet) -> Kind {
    match e {
        Event::Comm { cd, .. } if cd.dir != Dir::Sync && cs.contains(&cd.ch) => Kind::Shared,
        Event::Comm { .. } => Kind::External,
        Event::Wait { .. } => Kind::Wait,
    }
}

/// One step of the rules: what can be emitted next and how both sides move.
enum Step<'a> {
    Done,
    Deadlock,
    /// Alternative moves, in order.
    Moves(Vec<(Event, Cur<'a>, Cur<'a>)>),
}

fn step<'a>(l: &Cur<'a>, r: &Cur<'a>, cs: &ChanSet, cfg: &SyncConfig) -> Step<'a> {
    let (a, b) = (l.peek(), r.peek());
    match (a, b) {
        (None, None) => {
            if l.delta || r.delta {
                Step::Deadlock
            } else {
                Step::Done
            }
        }
        (Some(_), None) => one_sided(l, r, cs, false),
        (None, Some(_)) => one_sided(r, l, cs, true),
        (Some(x), Some(y)) => {
            let (kx, ky) = (kind(x, cs), kind(y, cs));
            match (kx, ky) {
                (Kind::External, Kind::External) => Step::Moves(alloc::vec![
                    (x.clone(), l.advance(), r.clone()),
                    (y.clone(), l.clone(), r.advance()),
                ]),
                (Kind::External, _) => Step::Moves(alloc::vec![(x.clone(), l.advance(), r.clone())]),
                (_, Kind::External) => Step::Moves(alloc::vec![(y.clone(), l.clone(), r.advance())]),
                (Kind::Shared, Kind::Shared) => {
                    let (Event::Comm { cd: c1, value: v1 }, Event::Comm { cd: c2, value: v2 }) = (x, y) else {
                        unreachable!()
                    };
                    if c1.ch == c2.ch && c1.dir == c2.dir.dual() && (v1 - v2).abs() <= cfg.tol {
                        let v = if c1.dir == Dir::Out { *v1 } else { *v2 };
                        Step::Moves(alloc::vec![(Event::comm(&c1.ch, Dir::Sync, v), l.advance(), r.advance())])
                    } else {
                        Step::Deadlock
                    }
                }
                (Kind::Shared, Kind::Wait) | (Kind::Wait, Kind::Shared) => Step::Deadlock,
                (Kind::Wait, Kind::Wait) => wait_pair(l, r, x, y, cfg),
            }
        }
    }
}

/// `l` has a head, `r` is exhausted.
fn one_sided<'a>(l: &Cur<'a>, r: &Cur<'a>, cs: &ChanSet, swapped: bool) -> Step<'a> {
    if r.delta {
        return Step::Deadlock;
    }
    let x = l.peek().expect("head");
    match kind(x, cs) {
        Kind::Shared => Step::Deadlock,
        _ => {
            let (nl, nr) = if swapped { (r.clone(), l.advance()) } else { (l.advance(), r.clone()) };
            Step::Moves(alloc::vec![(x.clone(), nl, nr)])
        }
    }
}

fn wait_pair<'a>(l: &Cur<'a>, r: &Cur<'a>, x: &Event, y: &Event, cfg: &SyncConfig) -> Step<'a> {
    let (Event::Wait { dur: d1, traj: p1, rdy: r1 }, Event::Wait { dur: d2, traj: p2, rdy: r2 }) = (x, y) else {
        unreachable!()
    };
    if !compat(r1, r2) {
        return Step::Deadlock;
    }
    let rdy: ReadySet = r1.union(r2).cloned().collect();
    let both_inf = d1.is_infinite() && d2.is_infinite();
    if both_inf && !cfg.inf_inf {
        return Step::Deadlock;
    }
    if both_inf || (d1 - d2).abs() <= cfg.tol {
        let d = d1.min(*d2);
        let e = Event::wait(d, p1.clone().merge(p2.clone()), rdy);
        return Step::Moves(alloc::vec![(e, l.advance(), r.advance())]);
    }
    if d1 > d2 {
        let e = Event::wait(*d2, p1.clone().merge(p2.clone()), rdy);
        let rest = Event::wait(d1 - d2, p1.clone().shift(*d2), r1.clone());
        Step::Moves(alloc::vec![(e, l.replace(rest), r.advance())])
    } else {
        let e = Event::wait(*d1, p1.clone().merge(p2.clone()), rdy);
        let rest = Event::wait(d2 - d1, p2.clone().shift(*d1), r2.clone());
        Step::Moves(alloc::vec![(e, l.advance(), r.replace(rest))])
    }
}

/// All traces `tr` with `t1 ||cs t2 ⇓ tr`, depth-first, left moves first.
pub fn sync_traces(t1: &Trace, cs: &ChanSet, t2: &Trace) -> Result<Vec<Trace>> {
    sync_traces_with(t1, cs, t2, &SyncConfig::default())
}

pub fn sync_traces_with(t1: &Trace, cs: &ChanSet, t2: &Trace, cfg: &SyncConfig) -> Result<Vec<Trace>> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    go(Cur::new(t1), Cur::new(t2), cs, cfg, &mut prefix, &mut out)?;
    if out.is_empty() {
        return Err(Error::Invalid("synchronization produced no trace".into()));
    }
    Ok(out)
}

fn go(l: Cur, r: Cur, cs: &ChanSet, cfg: &SyncConfig, prefix: &mut Vec<Event>, out: &mut Vec<Trace>) -> Result<()> {
    if out.len() >= cfg.cap {
        return Err(Error::Budget(alloc::format!("more than {} synchronized traces", cfg.cap)));
    }
    match step(&l, &r, cs, cfg) {
        Step::Done => out.push(Trace::from_events(prefix.clone())),
        Step::Deadlock => out.push(Trace::deadlock(prefix.clone())),
        Step::Moves(moves) => {
            for (e, nl, nr) in moves {
                let closes = e.is_infinite_wait();
                prefix.push(e);
                if closes {
                    out.push(Trace::from_events(prefix.clone()));
                } else {
                    go(nl, nr, cs, cfg, prefix, out)?;
                }
                prefix.pop();
            }
        }
    }
    Ok(())
}

/// Whether `tr` is derivable from `t1 ||cs t2`, checked event by event.
pub fn sync_check(t1: &Trace, cs: &ChanSet, t2: &Trace, tr: &Trace) -> bool {
    check(Cur::new(t1), Cur::new(t2), cs, &SyncConfig::default(), &tr.events, tr.delta, 1e-9)
}

pub fn sync_check_tol(t1: &Trace, cs: &ChanSet, t2: &Trace, tr: &Trace, tol: f64) -> bool {
    check(Cur::new(t1), Cur::new(t2), cs, &SyncConfig::default(), &tr.events, tr.delta, tol)
}

fn check(l: Cur, r: Cur, cs: &ChanSet, cfg: &SyncConfig, want: &[Event], delta: bool, tol: f64) -> bool {
    match step(&l, &r, cs, cfg) {
        Step::Done => want.is_empty() && !delta,
        Step::Deadlock => want.is_empty() && delta,
        Step::Moves(moves) => moves.into_iter().any(|(e, nl, nr)| {
            let Some((w, rest)) = want.split_first() else { return false };
            if !e.approx_eq(w, tol) {
                return false;
            }
            if e.is_infinite_wait() {
                return rest.is_empty() && !delta;
            }
            check(nl, nr, cs, cfg, rest, delta, tol)
        }),
    }
}

#[derive(Clone, Debug, Default)]
pub struct ReduceSyncReport {
    pub checked: usize,
    pub violations: Vec<String>,
}

/// For every `tr` in `t1 ||cs t2` some `tr'` in `t1' ||cs t2'` is a reduction of it.
pub fn check_reduce_sync(t1: &Trace, t1r: &Trace, t2: &Trace, t2r: &Trace, cs: &ChanSet) -> Result<ReduceSyncReport> {
    const TOL: f64 = 1e-9;
    if !is_reduction_of(t1, t1r, TOL) || !is_reduction_of(t2, t2r, TOL) {
        return Err(Error::Invalid("reduced traces are not reductions of the originals".into()));
    }
    let full = sync_traces(t1, cs, t2)?;
    let reduced = sync_traces(t1r, cs, t2r)?;
    let mut rep = ReduceSyncReport::default();
    for tr in &full {
        rep.checked += 1;
        if !reduced.iter().any(|trr| is_reduction_of(tr, trr, 1e-7)) {
            rep.violations.push(alloc::format!("{tr} has no reduced counterpart"));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::{State, Trajectory};
    use crate::syntax::CommDir;

    fn cs(chs: &[&str]) -> ChanSet {
        chs.iter().map(|c| String::from(*c)).collect()
    }

    fn rdy(items: &[(&str, Dir)]) -> ReadySet {
        items.iter().map(|(c, d)| CommDir::new(c, *d)).collect()
    }

    fn konst(x: &str, v: f64) -> Trajectory {
        Trajectory::Const(State::from_pairs(&[(x, v)]))
    }

    #[test]
    fn golden_synchronization() {
        let tr1 = Trace::from_events(alloc::vec![
            Event::wait(1.0, konst("a", 0.0), ReadySet::new()),
            Event::comm("ch", Dir::Out, 3.0),
        ]);
        let tr2 = Trace::from_events(alloc::vec![
            Event::wait(1.0, konst("b", 0.0), rdy(&[("ch", Dir::Out)])),
            Event::comm("ch", Dir::Out, 3.0),
        ]);
        let tr3 = Trace::from_events(alloc::vec![
            Event::wait(1.0, konst("x", 0.0), rdy(&[("ch", Dir::In)])),
            Event::comm("ch", Dir::In, 3.0),
        ]);
        let got = sync_traces(&tr1, &cs(&["ch"]), &tr3).unwrap();
        let want = Trace::from_events(alloc::vec![
            Event::wait(1.0, konst("a", 0.0).merge(konst("x", 0.0)), rdy(&[("ch", Dir::In)])),
            Event::comm("ch", Dir::Sync, 3.0),
        ]);
        assert_eq!(got, alloc::vec![want.clone()]);
        assert!(sync_check(&tr1, &cs(&["ch"]), &tr3, &want));
        let mut wrong = want.clone();
        wrong.events[1] = Event::comm("ch", Dir::Sync, 4.0);
        assert!(!sync_check(&tr1, &cs(&["ch"]), &tr3, &wrong));

        let got = sync_traces(&tr2, &cs(&["ch"]), &tr3).unwrap();
        assert_eq!(got, alloc::vec![Trace::deadlock(alloc::vec![])]);
    }

    #[test]
    fn empty_traces_synchronize_to_empty() {
        assert_eq!(sync_traces(&Trace::new(), &cs(&["a"]), &Trace::new()).unwrap(), alloc::vec![Trace::new()]);
    }

    #[test]
    fn shared_comm_against_empty_deadlocks() {
        let t = Trace::from_events(alloc::vec![Event::comm("ch", Dir::Out, 1.0)]);
        let got = sync_traces(&t, &cs(&["ch"]), &Trace::new()).unwrap();
        assert_eq!(got, alloc::vec![Trace::deadlock(alloc::vec![])]);
        assert!(sync_check(&t, &cs(&["ch"]), &Trace::new(), &Trace::deadlock(alloc::vec![])));
        assert!(!sync_check(&t, &cs(&["ch"]), &Trace::new(), &Trace::new()));
    }

    #[test]
    fn unequal_waits_split_the_longer() {
        use crate::syntax::parse_expr;
        use alloc::sync::Arc;
        let f = Arc::new(alloc::vec![(String::from("x"), parse_expr("1").unwrap())]);
        let p = Trajectory::ode(f, State::from_pairs(&[("x", 0.0)]), 1e-3).unwrap();
        let t1 = Trace::from_events(alloc::vec![Event::wait(3.0, p.clone(), ReadySet::new())]);
        let t2 = Trace::from_events(alloc::vec![Event::wait(1.0, konst("y", 0.0), rdy(&[("c", Dir::Out)]))]);
        let got = sync_traces(&t1, &cs(&["c"]), &t2).unwrap();
        assert_eq!(got.len(), 1);
        let ev = &got[0].events;
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0], Event::wait(1.0, p.clone().merge(konst("y", 0.0)), rdy(&[("c", Dir::Out)])));
        assert_eq!(ev[1], Event::wait(2.0, Trajectory::Shift(alloc::boxed::Box::new(p), 1.0), ReadySet::new()));
    }

    #[test]
    fn external_events_interleave() {
        let a = Trace::from_events(alloc::vec![Event::comm("a", Dir::Out, 1.0), Event::comm("b", Dir::Out, 2.0)]);
        let b = Trace::from_events(alloc::vec![Event::comm("c", Dir::In, 3.0)]);
        let got = sync_traces(&a, &ChanSet::new(), &b).unwrap();
        assert_eq!(got.len(), 3);
        let mirrored = sync_traces(&b, &ChanSet::new(), &a).unwrap();
        for t in &got {
            assert!(mirrored.contains(&t.mirror()));
        }
    }

    #[test]
    fn infinite_waits_merge() {
        let inf = |x: &str| Trace::from_events(alloc::vec![Event::wait(f64::INFINITY, konst(x, 0.0), ReadySet::new())]);
        let got = sync_traces(&inf("a"), &ChanSet::new(), &inf("b")).unwrap();
        assert_eq!(got.len(), 1);
        assert!(got[0].events[0].is_infinite_wait());
        let off = SyncConfig { inf_inf: false, ..SyncConfig::default() };
        let got = sync_traces_with(&inf("a"), &ChanSet::new(), &inf("b"), &off).unwrap();
        assert!(got[0].delta);
    }

    #[test]
    fn cap_is_enforced() {
        let many = |c: &str| Trace::from_events((0..12).map(|i| Event::comm(c, Dir::Out, i as f64)).collect());
        let cfg = SyncConfig { cap: 100, ..SyncConfig::default() };
        assert!(matches!(sync_traces_with(&many("a"), &ChanSet::new(), &many("b"), &cfg), Err(Error::Budget(_))));
    }
}
