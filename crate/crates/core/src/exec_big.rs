//! Big-step executor. Nondeterminism is resolved by an [`Oracle`].
//!
//! A run stops as soon as its trace is closed by an infinite wait or a
//! deadlock; the state at that point is the final state. A parallel
//! composition runs both components from their own part of the state and
//! synchronizes the two traces.

use alloc::string::String;
use alloc::vec::Vec;

use crate::oracle::{Delay, IntChoice, Oracle};
use crate::runtime::{Event, ReadySet, SimConfig, State, Trace, Trajectory};
use crate::sync::{sync_traces_with, SyncConfig};
use crate::syntax::{Comm, CommDir, Dir, Process};
use crate::{Error, Result};

pub use crate::runtime::detect_boundary;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExecConfig {
    pub sim: SimConfig,
    pub rep_bound: usize,
    pub sync: SyncConfig,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig { sim: SimConfig::default(), rep_bound: 32, sync: SyncConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BigStepResult {
    pub state: State,
    pub trace: Trace,
}

pub fn big_step(p: &Process, s: &State, o: &mut dyn Oracle, cfg: &ExecConfig) -> Result<BigStepResult> {
    big_step_from(p, s, &Trace::new(), o, cfg)
}

/// Run after an existing history; the result trace is `history ⌢ new`.
pub fn big_step_from(
    p: &Process,
    s: &State,
    history: &Trace,
    o: &mut dyn Oracle,
    cfg: &ExecConfig,
) -> Result<BigStepResult> {
    let mut run = Trace::new();
    let state = exec(p, "", s.clone(), o, cfg, &mut run)?;
    Ok(BigStepResult { state, trace: history.concat(&run)? })
}

/// Like [`big_step`], but every parallel composition returns all of its
/// synchronization candidates instead of asking the oracle.
pub fn big_step_all(p: &Process, s: &State, o: &mut dyn Oracle, cfg: &ExecConfig) -> Result<Vec<BigStepResult>> {
    exec_all(p, "", s, o, cfg)
}

fn exec_all(p: &Process, path: &str, s: &State, o: &mut dyn Oracle, cfg: &ExecConfig) -> Result<Vec<BigStepResult>> {
    match p {
        Process::Par(a, cs, b) => {
            let (sa, sb) = split_state(s, a);
            let la = exec_all(a, &child(path, 0), &sa, o, cfg)?;
            let lb = exec_all(b, &child(path, 1), &sb, o, cfg)?;
            let mut out = Vec::new();
            for ra in &la {
                for rb in &lb {
                    let state = ra.state.merge(&rb.state)?;
                    for trace in sync_traces_with(&ra.trace, cs, &rb.trace, &cfg.sync)? {
                        out.push(BigStepResult { state: state.clone(), trace });
                    }
                }
            }
            Ok(out)
        }
        _ => Ok(alloc::vec![big_step_at(p, path, s, o, cfg)?]),
    }
}

fn big_step_at(p: &Process, path: &str, s: &State, o: &mut dyn Oracle, cfg: &ExecConfig) -> Result<BigStepResult> {
    let mut trace = Trace::new();
    let state = exec(p, path, s.clone(), o, cfg, &mut trace)?;
    Ok(BigStepResult { state, trace })
}

pub fn child(path: &str, i: u8) -> String {
    let mut c = String::from(path);
    c.push(if i == 0 { '0' } else { '1' });
    c
}

/// Left component gets the variables it mentions, the right one the rest.
pub fn split_state(s: &State, left: &Process) -> (State, State) {
    let lv = left.vars();
    let mut a = State::new();
    let mut b = State::new();
    for (x, v) in s.iter() {
        if lv.contains(x) {
            a.set(x, v);
        } else {
            b.set(x, v);
        }
    }
    (a, b)
}

pub(crate) fn interrupt_rdy(branches: &[crate::syntax::Branch]) -> ReadySet {
    branches.iter().map(|b| b.comm.comm_dir()).collect()
}

fn exec(p: &Process, path: &str, s: State, o: &mut dyn Oracle, cfg: &ExecConfig, tr: &mut Trace) -> Result<State> {
    if tr.is_closed() {
        return Ok(s);
    }
    match p {
        Process::Skip => Ok(s),
        Process::Assign(x, e) => {
            let v = e.eval(&s)?;
            Ok(s.with(x, v))
        }
        Process::Output(ch, e) => {
            let cd = CommDir::output(ch);
            match o.choose_comm_delay(path, &cd)? {
                Delay::Now => {}
                Delay::After(d) => tr.push(blocked(d, &s, &cd)?)?,
                Delay::Never => {
                    tr.push(blocked(f64::INFINITY, &s, &cd)?)?;
                    return Ok(s);
                }
            }
            let v = e.eval(&s)?;
            tr.push(Event::comm(ch, Dir::Out, v))?;
            Ok(s)
        }
        Process::Input(ch, x) => {
            let cd = CommDir::input(ch);
            match o.choose_comm_delay(path, &cd)? {
                Delay::Now => {}
                Delay::After(d) => tr.push(blocked(d, &s, &cd)?)?,
                Delay::Never => {
                    tr.push(blocked(f64::INFINITY, &s, &cd)?)?;
                    return Ok(s);
                }
            }
            let v = o.choose_input_value(path, ch)?;
            tr.push(Event::comm(ch, Dir::In, v))?;
            Ok(s.with(x, v))
        }
        Process::Wait(e) => {
            let d = e.eval(&s)?;
            if d > 0.0 {
                tr.push(Event::wait(d, Trajectory::Const(s.clone()), ReadySet::new()))?;
            }
            Ok(s)
        }
        Process::IChoice(a, b) => {
            if o.choose_branch(path)? {
                exec(a, path, s, o, cfg, tr)
            } else {
                exec(b, path, s, o, cfg, tr)
            }
        }
        Process::Seq(a, b) => {
            let s = exec(a, path, s, o, cfg, tr)?;
            exec(b, path, s, o, cfg, tr)
        }
        Process::Rep(body) => {
            let n = o.choose_rep_count(path, cfg.rep_bound)?;
            let mut s = s;
            for _ in 0..n {
                if tr.is_closed() {
                    break;
                }
                s = exec(body, path, s, o, cfg, tr)?;
            }
            Ok(s)
        }
        Process::Cond(b, p1, p2) => {
            if b.eval(&s)? {
                exec(p1, path, s, o, cfg, tr)
            } else {
                exec(p2, path, s, o, cfg, tr)
            }
        }
        Process::Ode(ode) => {
            let (traj, bd) = detect_boundary(&ode.field, &ode.domain, &s, &cfg.sim)?;
            match bd {
                Some(d) if d == 0.0 => Ok(s),
                Some(d) => {
                    let s1 = traj.eval(d)?;
                    tr.push(Event::wait(d, traj, ReadySet::new()))?;
                    Ok(s1)
                }
                None => {
                    tr.push(Event::wait(f64::INFINITY, traj, ReadySet::new()))?;
                    Ok(s)
                }
            }
        }
        Process::Interrupt(ode, branches) => {
            let (traj, bd) = detect_boundary(&ode.field, &ode.domain, &s, &cfg.sim)?;
            let rdy = interrupt_rdy(branches);
            match o.choose_interrupt(path, branches.len(), bd)? {
                IntChoice::Fire { branch, at } => {
                    let br = branches
                        .get(branch)
                        .ok_or_else(|| Error::Oracle(alloc::format!("branch {branch} of {}", branches.len())))?;
                    if at < 0.0 || bd.is_some_and(|d| at > d + cfg.sim.boundary_tol) {
                        return Err(Error::Oracle(alloc::format!("interrupt at {at} outside the domain")));
                    }
                    let mut s1 = s;
                    if at > 0.0 {
                        s1 = traj.eval(at)?;
                        tr.push(Event::wait(at, traj, rdy))?;
                    }
                    match &br.comm {
                        Comm::Out(ch, e) => {
                            let v = e.eval(&s1)?;
                            tr.push(Event::comm(ch, Dir::Out, v))?;
                        }
                        Comm::In(ch, y) => {
                            let v = o.choose_input_value(path, ch)?;
                            tr.push(Event::comm(ch, Dir::In, v))?;
                            s1.set(y, v);
                        }
                    }
                    exec(&br.body, path, s1, o, cfg, tr)
                }
                IntChoice::Boundary => match bd {
                    Some(d) if d == 0.0 => Ok(s),
                    Some(d) => {
                        let s1 = traj.eval(d)?;
                        tr.push(Event::wait(d, traj, rdy))?;
                        Ok(s1)
                    }
                    None => Err(Error::Oracle("no boundary to run to".into())),
                },
                IntChoice::Never => {
                    if bd.is_some() {
                        return Err(Error::Oracle("interrupt cannot evolve forever inside a bounded domain".into()));
                    }
                    tr.push(Event::wait(f64::INFINITY, traj, rdy))?;
                    Ok(s)
                }
            }
        }
        Process::Par(a, cs, b) => {
            let (sa, sb) = split_state(&s, a);
            let ra = big_step_at(a, &child(path, 0), &sa, o, cfg)?;
            let rb = big_step_at(b, &child(path, 1), &sb, o, cfg)?;
            let cands = sync_traces_with(&ra.trace, cs, &rb.trace, &cfg.sync)?;
            let i = o.choose_sync(path, cands.len())?;
            let picked = cands.into_iter().nth(i).expect("index checked by oracle");
            *tr = tr.concat(&picked)?;
            ra.state.merge(&rb.state)
        }
    }
}

fn blocked(d: f64, s: &State, cd: &CommDir) -> Result<Event> {
    if !(d > 0.0) {
        return Err(Error::Oracle(alloc::format!("delay {d} must be positive")));
    }
    let rdy: ReadySet = core::iter::once(cd.clone()).collect();
    Ok(Event::wait(d, Trajectory::Const(s.clone()), rdy))
}

/// Finite choice sets for exhaustive enumeration.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumBudget {
    pub values: Vec<f64>,
    pub delays: Vec<Delay>,
    pub rep_bound: usize,
    pub max_runs: usize,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget { values: alloc::vec![0.0, 1.0, 2.0], delays: alloc::vec![Delay::Now], rep_bound: 3, max_runs: 100_000 }
    }
}

/// Replays a prefix of option indices and takes option 0 afterwards.
struct EnumOracle<'a> {
    budget: &'a EnumBudget,
    prefix: Vec<usize>,
    taken: Vec<(usize, usize)>,
}

impl EnumOracle<'_> {
    fn pick(&mut self, count: usize) -> Result<usize> {
        if count == 0 {
            return Err(Error::Oracle("empty choice set".into()));
        }
        let k = self.taken.len();
        let i = self.prefix.get(k).copied().unwrap_or(0);
        self.taken.push((i, count));
        Ok(i)
    }
}

impl Oracle for EnumOracle<'_> {
    fn choose_branch(&mut self, _: &str) -> Result<bool> {
        Ok(self.pick(2)? == 0)
    }
    fn choose_rep_count(&mut self, _: &str, max: usize) -> Result<usize> {
        self.pick(max.min(self.budget.rep_bound) + 1)
    }
    fn choose_input_value(&mut self, _: &str, _: &str) -> Result<f64> {
        let i = self.pick(self.budget.values.len())?;
        Ok(self.budget.values[i])
    }
    fn choose_comm_delay(&mut self, _: &str, _: &CommDir) -> Result<Delay> {
        let i = self.pick(self.budget.delays.len())?;
        Ok(self.budget.delays[i])
    }
    fn choose_interrupt(&mut self, _: &str, n: usize, boundary: Option<f64>) -> Result<IntChoice> {
        // Fire each branch at each listed finite delay inside the domain
        // (or at 0), then run to the boundary or forever.
        let mut opts = Vec::new();
        let mut times: Vec<f64> = alloc::vec![0.0];
        for d in &self.budget.delays {
            if let Delay::After(t) = d {
                if boundary.is_none_or(|b| *t <= b) {
                    times.push(*t);
                }
            }
        }
        for at in times {
            if at == 0.0 && boundary != Some(0.0) && !self.budget.delays.contains(&Delay::Now) {
                continue;
            }
            for branch in 0..n {
                opts.push(IntChoice::Fire { branch, at });
            }
        }
        opts.push(if boundary.is_some() { IntChoice::Boundary } else { IntChoice::Never });
        let i = self.pick(opts.len())?;
        Ok(opts[i])
    }
    fn choose_sync(&mut self, _: &str, n: usize) -> Result<usize> {
        self.pick(n)
    }
    fn choose_step(&mut self, _: &str, max: f64) -> Result<f64> {
        Ok(max)
    }
    fn choose_move(&mut self, _: &str, n: usize) -> Result<usize> {
        self.pick(n)
    }
}

/// Every big-step run within the budget, in depth-first choice order.
pub fn enumerate_runs(p: &Process, s: &State, budget: &EnumBudget, cfg: &ExecConfig) -> Result<Vec<BigStepResult>> {
    let cfg = ExecConfig { rep_bound: budget.rep_bound, ..*cfg };
    let mut out = Vec::new();
    let mut prefix: Vec<usize> = Vec::new();
    loop {
        if out.len() >= budget.max_runs {
            return Err(Error::Budget(alloc::format!("more than {} runs", budget.max_runs)));
        }
        let mut o = EnumOracle { budget, prefix: prefix.clone(), taken: Vec::new() };
        out.push(big_step(p, s, &mut o, &cfg)?);
        let mut taken = o.taken;
        loop {
            match taken.pop() {
                None => return Ok(out),
                Some((i, n)) if i + 1 < n => {
                    prefix = taken.iter().map(|(i, _)| *i).collect();
                    prefix.push(i + 1);
                    break;
                }
                Some(_) => {}
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{Choice, RandomOracle, Recorder, ReplayOracle};
    use crate::syntax::parse_process;

    fn run(src: &str, s: &State, seed: u64) -> BigStepResult {
        let p = parse_process(src).unwrap();
        big_step(&p, s, &mut RandomOracle::new(seed), &ExecConfig::default()).unwrap()
    }

    #[test]
    fn skip_and_assign() {
        let s = State::from_pairs(&[("x", 2.0)]);
        assert_eq!(run("skip", &s, 0), BigStepResult { state: s.clone(), trace: Trace::new() });
        assert_eq!(run("x := x + 1", &s, 0).state, State::from_pairs(&[("x", 3.0)]));
    }

    #[test]
    fn ode_runs_to_boundary() {
        let r = run("<x_dot = 1 & x < 2>", &State::from_pairs(&[("x", 0.0)]), 0);
        assert!((r.state.get("x").unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(r.trace.len(), 1);
        let Event::Wait { dur, rdy, .. } = &r.trace.events[0] else { panic!() };
        assert!((dur - 2.0).abs() < 1e-9);
        assert!(rdy.is_empty());
    }

    #[test]
    fn replay_is_deterministic() {
        let p = parse_process("(c!x ++ d?x; x := x + 1)*; <x_dot = 1 & x < 5> |> [](e!x --> skip)").unwrap();
        let s = State::from_pairs(&[("x", 0.0)]);
        let cfg = ExecConfig { rep_bound: 4, ..ExecConfig::default() };
        for seed in 0..20 {
            let mut rec = Recorder::new(RandomOracle::new(seed));
            let a = big_step(&p, &s, &mut rec, &cfg).unwrap();
            let b = big_step(&p, &s, &mut ReplayOracle::new(rec.log), &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn parallel_synchronizes() {
        let p = parse_process("c!3 ||[c]|| c?y").unwrap();
        let s = State::from_pairs(&[("y", 0.0)]);
        let mut log = crate::oracle::ChoiceLog::new();
        log.insert("0".into(), alloc::vec![Choice::Delay(Delay::Now)]);
        log.insert("1".into(), alloc::vec![Choice::Delay(Delay::Now), Choice::Value(3.0)]);
        log.insert("".into(), alloc::vec![Choice::Sync(0)]);
        let r = big_step(&p, &s, &mut ReplayOracle::new(log), &ExecConfig::default()).unwrap();
        assert_eq!(r.trace, Trace::from_events(alloc::vec![Event::comm("c", Dir::Sync, 3.0)]));
        assert_eq!(r.state.get("y").unwrap(), 3.0);
    }

    #[test]
    fn enumeration_counts() {
        let cfg = ExecConfig::default();
        let b = EnumBudget { values: alloc::vec![0.0, 1.0], ..EnumBudget::default() };
        let s = State::from_pairs(&[("x", 0.0)]);
        assert_eq!(enumerate_runs(&Process::Skip, &s, &b, &cfg).unwrap().len(), 1);
        let runs = enumerate_runs(&parse_process("ch?x").unwrap(), &s, &b, &cfg).unwrap();
        let traces: Vec<_> = runs.iter().map(|r| r.trace.clone()).collect();
        assert_eq!(
            traces,
            [
                Trace::from_events(alloc::vec![Event::comm("ch", Dir::In, 0.0)]),
                Trace::from_events(alloc::vec![Event::comm("ch", Dir::In, 1.0)])
            ]
        );
        let runs = enumerate_runs(&parse_process("(x := x + 1)*").unwrap(), &s, &b, &cfg).unwrap();
        let xs: Vec<f64> = runs.iter().map(|r| r.state.get("x").unwrap()).collect();
        assert_eq!(xs, [0.0, 1.0, 2.0, 3.0]);
    }
}
