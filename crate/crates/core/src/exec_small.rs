//! Small-step executor.
//!
//! A configuration is a tree of parallel compositions whose leaves are
//! sequential programs, each with its own local state and a continuation
//! stack. A step is either a silent step of one leaf, a communication
//! (external, or a matched pair across a parallel node), or a delay that
//! every leaf takes together.
//!
//! Communication on a channel that some enclosing parallel node
//! synchronizes is either *passive* (offered immediately and held until a
//! partner appears) or *planned* (the oracle fixes the waiting time up
//! front, as in the big-step executor). External channels are always
//! planned. Runs record the choices they make in big-step vocabulary, so a
//! small-step run can be replayed by [`crate::exec_big::big_step_all`].

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::exec_big::{big_step, big_step_all, child, interrupt_rdy, split_state, ExecConfig};
use crate::oracle::{Choice, ChoiceLog, Delay, IntChoice, Oracle, RandomOracle, Recorder, ReplayOracle};
use crate::runtime::{compat, detect_boundary, Event, ReadySet, State, Trace, Trajectory};
use crate::syntax::{Branch, ChanSet, Comm, CommDir, Dir, Process};
use crate::{Error, Result};

/// Oracle path used for scheduling questions (step sizes, move order).
pub const SCHED: &str = "~";
const SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Policy {
    Passive,
    Planned,
}

#[derive(Clone, Debug)]
pub struct SmallOptions {
    pub policy: Policy,
    /// Ask the oracle for the length of each delay step instead of taking
    /// the longest one allowed.
    pub split_steps: bool,
    /// When set, moves are chosen to reproduce this trace's communications.
    pub target: Option<Trace>,
    pub max_steps: usize,
}

impl Default for SmallOptions {
    fn default() -> Self {
        SmallOptions { policy: Policy::Passive, split_steps: true, target: None, max_steps: 1_000_000 }
    }
}

impl SmallOptions {
    /// Fully planned, full steps, moves guided by `target`.
    pub fn replay(target: Option<Trace>) -> Self {
        SmallOptions { policy: Policy::Planned, split_steps: false, target, ..SmallOptions::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Running,
    Terminated,
    Deadlock,
    /// Closed by an infinite wait.
    Blocked,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Plan {
    Passive,
    Now,
    After(f64),
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum IPlan {
    /// A plain ODE.
    Plain,
    Passive,
    Fire(usize, f64),
    Boundary,
    Never,
}

#[derive(Clone, Debug)]
enum Active {
    Idle,
    Done,
    Comm { comm: Comm, plan: Plan, waited: f64 },
    Delay { dur: f64, elapsed: f64 },
    Evolve { traj: Trajectory, boundary: Option<f64>, elapsed: f64, branches: Vec<Branch>, plan: IPlan },
}

#[derive(Clone, Debug)]
enum Cont {
    Run(Process),
    Loop(Process, usize),
}

#[derive(Clone, Debug)]
struct Leaf {
    path: String,
    state: State,
    active: Active,
    stack: Vec<Cont>,
    resolved: Vec<Choice>,
    /// Paths of the enclosing parallel nodes.
    scopes: Vec<String>,
}

#[derive(Clone, Debug)]
enum Shape {
    Leaf(usize),
    Par(Box<Shape>, Box<Shape>),
}

#[derive(Clone, Debug)]
enum Move {
    Ext { leaf: usize, branch: Option<usize>, comm: Comm },
    Pair { out: (usize, Option<usize>), inp: (usize, Option<usize>), ch: String, var: String, value: f64 },
}

/// A small-step configuration together with the trace emitted so far.
#[derive(Clone, Debug)]
pub struct Machine {
    leaves: Vec<Leaf>,
    shape: Shape,
    cs: BTreeMap<String, ChanSet>,
    pub trace: Trace,
    pub status: Status,
    opts: SmallOptions,
    cfg: ExecConfig,
    target: Vec<(CommDir, f64)>,
    tpos: usize,
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub struct SmallRun {
    pub trace: Trace,
    pub state: State,
    pub status: Status,
    /// The run's choices in big-step vocabulary, by component path.
    pub resolved: ChoiceLog,
    pub steps: usize,
}

fn build(
    p: &Process,
    path: &str,
    s: State,
    scopes: &[String],
    leaves: &mut Vec<Leaf>,
    cs: &mut BTreeMap<String, ChanSet>,
) -> Shape {
    match p {
        Process::Par(a, c, b) => {
            cs.insert(path.into(), c.clone());
            let (sa, sb) = split_state(&s, a);
            let mut sc = scopes.to_vec();
            sc.push(path.into());
            let l = build(a, &child(path, 0), sa, &sc, leaves, cs);
            let r = build(b, &child(path, 1), sb, &sc, leaves, cs);
            Shape::Par(Box::new(l), Box::new(r))
        }
        _ => {
            leaves.push(Leaf {
                path: path.into(),
                state: s,
                active: Active::Idle,
                stack: alloc::vec![Cont::Run(p.clone())],
                resolved: Vec::new(),
                scopes: scopes.to_vec(),
            });
            Shape::Leaf(leaves.len() - 1)
        }
    }
}

fn is_internal(cs: &BTreeMap<String, ChanSet>, scopes: &[String], ch: &str) -> bool {
    scopes.iter().any(|q| cs.get(q).is_some_and(|c| c.contains(ch)))
}

/// The parallel node where two leaves meet.
fn meet<'a>(p1: &'a str, p2: &str) -> &'a str {
    let k = p1.bytes().zip(p2.bytes()).take_while(|(a, b)| a == b).count();
    &p1[..k]
}

fn snap(x: f64, target: f64) -> f64 {
    if (x - target).abs() <= SNAP * (1.0 + target.abs()) {
        target
    } else {
        x
    }
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

impl Machine {
    pub fn new(p: &Process, s: &State, opts: SmallOptions, cfg: &ExecConfig) -> Machine {
        let mut leaves = Vec::new();
        let mut cs = BTreeMap::new();
        let shape = build(p, "", s.clone(), &[], &mut leaves, &mut cs);
        let target = opts
            .target
            .as_ref()
            .map(|t| t.comm_events().map(|(cd, v)| (cd.clone(), v)).collect())
            .unwrap_or_default();
        Machine {
            leaves,
            shape,
            cs,
            trace: Trace::new(),
            status: Status::Running,
            opts,
            cfg: *cfg,
            target,
            tpos: 0,
            steps: 0,
        }
    }

    /// Joint state of all leaves.
    pub fn state(&self) -> Result<State> {
        let mut s = State::new();
        for l in &self.leaves {
            s = s.merge(&l.state)?;
        }
        Ok(s)
    }

    pub fn resolved(&self) -> ChoiceLog {
        self.leaves
            .iter()
            .filter(|l| !l.resolved.is_empty())
            .map(|l| (l.path.clone(), l.resolved.clone()))
            .collect()
    }

    /// One step. Returns the emitted event, or `None` for a silent step or
    /// when the run has already stopped.
    pub fn step(&mut self, o: &mut dyn Oracle) -> Result<Option<Event>> {
        if self.status != Status::Running {
            return Ok(None);
        }
        self.steps += 1;
        if self.steps > self.opts.max_steps {
            return Err(Error::Budget(alloc::format!("more than {} small steps", self.opts.max_steps)));
        }
        let mut changed = false;
        for i in 0..self.leaves.len() {
            changed |= self.settle(i, o)?;
        }
        if changed {
            return Ok(None);
        }
        if self.leaves.iter().all(|l| matches!(l.active, Active::Done)) {
            self.status = Status::Terminated;
            return Ok(None);
        }

        let moves = self.moves(o);
        if !moves.is_empty() {
            let k = self.pick_move(&moves, o)?;
            let ev = self.apply(moves[k].clone(), o)?;
            if !self.target.is_empty() {
                self.tpos += 1;
            }
            self.trace.push(ev.clone())?;
            return Ok(Some(ev));
        }

        if self.exit_all() {
            return Ok(None);
        }

        let (ok, rdy) = self.ready(&self.shape);
        let d = self.leaves.iter().map(allowance).fold(f64::INFINITY, f64::min);
        if !ok || d <= 0.0 {
            self.trace.delta = true;
            self.status = Status::Deadlock;
            return Ok(None);
        }
        let traj = self.traj(&self.shape).unwrap_or_else(|| Trajectory::Const(State::new()));
        if d.is_infinite() {
            for l in &mut self.leaves {
                match &l.active {
                    Active::Comm { plan: Plan::Passive, .. } => l.resolved.push(Choice::Delay(Delay::Never)),
                    Active::Evolve { plan: IPlan::Passive, .. } => l.resolved.push(Choice::Interrupt(IntChoice::Never)),
                    _ => {}
                }
            }
            let ev = Event::wait(f64::INFINITY, traj, rdy);
            self.trace.push(ev.clone())?;
            self.status = Status::Blocked;
            return Ok(Some(ev));
        }
        let mut step = d;
        if self.opts.split_steps {
            let c = o.choose_step(SCHED, d)?;
            if c > 0.0 && c < d {
                step = c;
            }
        }
        for l in &mut self.leaves {
            advance(l, step)?;
        }
        let ev = Event::wait(step, traj, rdy);
        self.trace.push(ev.clone())?;
        Ok(Some(ev))
    }

    /// Run silent steps of leaf `i` until it blocks or ends.
    fn settle(&mut self, i: usize, o: &mut dyn Oracle) -> Result<bool> {
        let mut changed = false;
        while matches!(self.leaves[i].active, Active::Idle) {
            changed = true;
            match self.leaves[i].stack.pop() {
                None => self.leaves[i].active = Active::Done,
                Some(Cont::Loop(body, n)) => {
                    if n > 0 {
                        let l = &mut self.leaves[i];
                        l.stack.push(Cont::Loop(body.clone(), n - 1));
                        l.stack.push(Cont::Run(body));
                    }
                }
                Some(Cont::Run(p)) => self.start(i, p, o)?,
            }
        }
        Ok(changed)
    }

    fn start(&mut self, i: usize, p: Process, o: &mut dyn Oracle) -> Result<()> {
        let policy = self.opts.policy;
        let bound = self.cfg.rep_bound;
        let sim = self.cfg.sim;
        let cs = &self.cs;
        let l = &mut self.leaves[i];
        match p {
            Process::Skip => {}
            Process::Assign(x, e) => {
                let v = e.eval(&l.state)?;
                l.state.set(&x, v);
            }
            Process::Seq(a, b) => {
                l.stack.push(Cont::Run(*b));
                l.stack.push(Cont::Run(*a));
            }
            Process::IChoice(a, b) => {
                let c = o.choose_branch(&l.path)?;
                l.resolved.push(Choice::Branch(c));
                l.stack.push(Cont::Run(if c { *a } else { *b }));
            }
            Process::Cond(b, p1, p2) => {
                let c = b.eval(&l.state)?;
                l.stack.push(Cont::Run(if c { *p1 } else { *p2 }));
            }
            Process::Rep(body) => {
                let n = o.choose_rep_count(&l.path, bound)?;
                l.resolved.push(Choice::RepCount(n));
                l.stack.push(Cont::Loop(*body, n));
            }
            Process::Wait(e) => {
                let d = e.eval(&l.state)?;
                if d > 0.0 {
                    l.active = Active::Delay { dur: d, elapsed: 0.0 };
                }
            }
            Process::Output(ch, e) => {
                let comm = Comm::Out(ch, e);
                let plan = comm_plan(l, &comm, policy, cs, o)?;
                l.active = Active::Comm { comm, plan, waited: 0.0 };
            }
            Process::Input(ch, x) => {
                let comm = Comm::In(ch, x);
                let plan = comm_plan(l, &comm, policy, cs, o)?;
                l.active = Active::Comm { comm, plan, waited: 0.0 };
            }
            Process::Ode(ode) => {
                let (traj, bd) = detect_boundary(&ode.field, &ode.domain, &l.state, &sim)?;
                if bd != Some(0.0) {
                    l.active =
                        Active::Evolve { traj, boundary: bd, elapsed: 0.0, branches: Vec::new(), plan: IPlan::Plain };
                }
            }
            Process::Interrupt(ode, branches) => {
                let (traj, bd) = detect_boundary(&ode.field, &ode.domain, &l.state, &sim)?;
                let passive = policy == Policy::Passive
                    && branches.iter().any(|b| is_internal(cs, &l.scopes, b.comm.channel()));
                let plan = if passive {
                    IPlan::Passive
                } else {
                    let c = o.choose_interrupt(&l.path, branches.len(), bd)?;
                    l.resolved.push(Choice::Interrupt(c));
                    match c {
                        IntChoice::Fire { branch, at } => {
                            if branch >= branches.len() {
                                return Err(Error::Oracle(alloc::format!("branch {branch} of {}", branches.len())));
                            }
                            if at < 0.0 || bd.is_some_and(|d| at > d + sim.boundary_tol) {
                                return Err(Error::Oracle(alloc::format!("interrupt at {at} outside the domain")));
                            }
                            IPlan::Fire(branch, bd.map_or(at, |d| at.min(d)))
                        }
                        IntChoice::Boundary if bd.is_none() => {
                            return Err(Error::Oracle("no boundary to run to".into()))
                        }
                        IntChoice::Boundary => IPlan::Boundary,
                        IntChoice::Never if bd.is_some() => {
                            return Err(Error::Oracle(
                                "interrupt cannot evolve forever inside a bounded domain".into(),
                            ))
                        }
                        IntChoice::Never => IPlan::Never,
                    }
                };
                if !(plan == IPlan::Boundary && bd == Some(0.0)) {
                    l.active = Active::Evolve { traj, boundary: bd, elapsed: 0.0, branches, plan };
                }
            }
            Process::Par(..) => {
                return Err(Error::Invalid("parallel composition inside a sequential context".into()));
            }
        }
        Ok(())
    }

    fn offers(&self, i: usize) -> Vec<(Option<usize>, Comm)> {
        let l = &self.leaves[i];
        match &l.active {
            Active::Comm { comm, plan, waited } => {
                let ready = match plan {
                    Plan::Passive | Plan::Now => true,
                    Plan::After(d) => waited >= d,
                    Plan::Never => false,
                };
                if ready {
                    alloc::vec![(None, comm.clone())]
                } else {
                    Vec::new()
                }
            }
            Active::Evolve { branches, plan, elapsed, .. } => match plan {
                IPlan::Passive => branches
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| is_internal(&self.cs, &l.scopes, b.comm.channel()))
                    .map(|(k, b)| (Some(k), b.comm.clone()))
                    .collect(),
                IPlan::Fire(k, at) if elapsed >= at => alloc::vec![(Some(*k), branches[*k].comm.clone())],
                _ => Vec::new(),
            },
            _ => Vec::new(),
        }
    }

    fn moves(&self, o: &dyn Oracle) -> Vec<Move> {
        let offers: Vec<_> = (0..self.leaves.len()).map(|i| self.offers(i)).collect();
        let mut out = Vec::new();
        for (i, os) in offers.iter().enumerate() {
            let l = &self.leaves[i];
            for (branch, comm) in os {
                if !is_internal(&self.cs, &l.scopes, comm.channel()) {
                    out.push(Move::Ext { leaf: i, branch: *branch, comm: comm.clone() });
                    continue;
                }
                let Comm::Out(ch, e) = comm else { continue };
                let Ok(value) = e.eval(&l.state) else { continue };
                for (j, js) in offers.iter().enumerate() {
                    if j == i {
                        continue;
                    }
                    let lj = &self.leaves[j];
                    let q = meet(&l.path, &lj.path);
                    if !self.cs.get(q).is_some_and(|c| c.contains(ch)) {
                        continue;
                    }
                    for (bj, cj) in js {
                        let Comm::In(chj, var) = cj else { continue };
                        if chj != ch {
                            continue;
                        }
                        if self.opts.policy == Policy::Planned {
                            if let Some(v) = o.peek_value(&lj.path) {
                                if !close(v, value) {
                                    continue;
                                }
                            }
                        }
                        out.push(Move::Pair {
                            out: (i, *branch),
                            inp: (j, *bj),
                            ch: ch.clone(),
                            var: var.clone(),
                            value,
                        });
                    }
                }
            }
        }
        out
    }

    fn pick_move(&self, moves: &[Move], o: &mut dyn Oracle) -> Result<usize> {
        if self.opts.target.is_some() {
            if let Some((cd, v)) = self.target.get(self.tpos) {
                for (k, m) in moves.iter().enumerate() {
                    let hit = match m {
                        Move::Ext { leaf, comm, .. } => {
                            let l = &self.leaves[*leaf];
                            comm.comm_dir() == *cd
                                && match comm {
                                    Comm::Out(_, e) => e.eval(&l.state).is_ok_and(|w| close(w, *v)),
                                    Comm::In(..) => o.peek_value(&l.path).is_none_or(|w| close(w, *v)),
                                }
                        }
                        Move::Pair { ch, value, .. } => cd.ch == *ch && cd.dir == Dir::Sync && close(*value, *v),
                    };
                    if hit {
                        return Ok(k);
                    }
                }
            }
            return Ok(0);
        }
        if moves.len() == 1 {
            return Ok(0);
        }
        o.choose_move(SCHED, moves.len())
    }

    fn apply(&mut self, m: Move, o: &mut dyn Oracle) -> Result<Event> {
        match m {
            Move::Ext { leaf, branch, comm } => match comm {
                Comm::Out(ch, e) => {
                    let v = e.eval(&self.leaves[leaf].state)?;
                    self.finish(leaf, branch, None);
                    Ok(Event::comm(&ch, Dir::Out, v))
                }
                Comm::In(ch, x) => {
                    let v = o.choose_input_value(&self.leaves[leaf].path, &ch)?;
                    self.leaves[leaf].state.set(&x, v);
                    self.finish(leaf, branch, Some(v));
                    Ok(Event::comm(&ch, Dir::In, v))
                }
            },
            Move::Pair { out, inp, ch, var, value } => {
                if self.opts.policy == Policy::Planned {
                    o.choose_input_value(&self.leaves[inp.0].path, &ch)?;
                }
                self.leaves[inp.0].state.set(&var, value);
                self.finish(out.0, out.1, None);
                self.finish(inp.0, inp.1, Some(value));
                Ok(Event::comm(&ch, Dir::Sync, value))
            }
        }
    }

    fn finish(&mut self, i: usize, branch: Option<usize>, input: Option<f64>) {
        let l = &mut self.leaves[i];
        match core::mem::replace(&mut l.active, Active::Idle) {
            Active::Comm { plan, waited, .. } => {
                if plan == Plan::Passive {
                    let d = if waited == 0.0 { Delay::Now } else { Delay::After(waited) };
                    l.resolved.push(Choice::Delay(d));
                }
                if let Some(v) = input {
                    l.resolved.push(Choice::Value(v));
                }
            }
            Active::Evolve { plan, elapsed, mut branches, .. } => {
                let k = branch.expect("interrupt moves name a branch");
                if plan == IPlan::Passive {
                    l.resolved.push(Choice::Interrupt(IntChoice::Fire { branch: k, at: elapsed }));
                }
                if let Some(v) = input {
                    l.resolved.push(Choice::Value(v));
                }
                l.stack.push(Cont::Run(branches.swap_remove(k).body));
            }
            other => l.active = other,
        }
    }

    /// Leave every evolution that sits on its boundary.
    fn exit_all(&mut self) -> bool {
        let mut any = false;
        for l in &mut self.leaves {
            if let Active::Evolve { boundary: Some(b), elapsed, plan, .. } = &l.active {
                if elapsed >= b && matches!(plan, IPlan::Plain | IPlan::Passive | IPlan::Boundary) {
                    if *plan == IPlan::Passive {
                        l.resolved.push(Choice::Interrupt(IntChoice::Boundary));
                    }
                    l.active = Active::Idle;
                    any = true;
                }
            }
        }
        any
    }

    /// Union of ready sets, and whether they are compatible at every node.
    fn ready(&self, sh: &Shape) -> (bool, ReadySet) {
        match sh {
            Shape::Leaf(i) => (true, leaf_rdy(&self.leaves[*i])),
            Shape::Par(a, b) => {
                let (oa, ra) = self.ready(a);
                let (ob, rb) = self.ready(b);
                let ok = oa && ob && compat(&ra, &rb);
                (ok, ra.union(&rb).cloned().collect())
            }
        }
    }

    fn traj(&self, sh: &Shape) -> Option<Trajectory> {
        match sh {
            Shape::Leaf(i) => {
                let l = &self.leaves[*i];
                match &l.active {
                    Active::Done | Active::Idle => None,
                    Active::Evolve { traj, elapsed, .. } => Some(traj.clone().shift(*elapsed)),
                    _ => Some(Trajectory::Const(l.state.clone())),
                }
            }
            Shape::Par(a, b) => match (self.traj(a), self.traj(b)) {
                (Some(p), Some(q)) => Some(p.merge(q)),
                (p, q) => p.or(q),
            },
        }
    }
}

fn comm_plan(
    l: &mut Leaf,
    comm: &Comm,
    policy: Policy,
    cs: &BTreeMap<String, ChanSet>,
    o: &mut dyn Oracle,
) -> Result<Plan> {
    if policy == Policy::Passive && is_internal(cs, &l.scopes, comm.channel()) {
        return Ok(Plan::Passive);
    }
    let d = o.choose_comm_delay(&l.path, &comm.comm_dir())?;
    l.resolved.push(Choice::Delay(d));
    Ok(match d {
        Delay::Now => Plan::Now,
        Delay::After(t) if t > 0.0 => Plan::After(t),
        Delay::After(t) => return Err(Error::Oracle(alloc::format!("delay {t} must be positive"))),
        Delay::Never => Plan::Never,
    })
}

fn leaf_rdy(l: &Leaf) -> ReadySet {
    match &l.active {
        Active::Comm { comm, .. } => core::iter::once(comm.comm_dir()).collect(),
        Active::Evolve { branches, .. } => interrupt_rdy(branches),
        _ => ReadySet::new(),
    }
}

/// Longest delay the leaf allows.
fn allowance(l: &Leaf) -> f64 {
    match &l.active {
        Active::Done => f64::INFINITY,
        Active::Idle => 0.0,
        Active::Comm { plan, waited, .. } => match plan {
            Plan::Passive | Plan::Never => f64::INFINITY,
            Plan::Now => 0.0,
            Plan::After(d) => (d - waited).max(0.0),
        },
        Active::Delay { dur, elapsed } => dur - elapsed,
        Active::Evolve { boundary, elapsed, plan, .. } => match plan {
            IPlan::Fire(_, at) => (at - elapsed).max(0.0),
            IPlan::Never => f64::INFINITY,
            _ => boundary.map_or(f64::INFINITY, |b| (b - elapsed).max(0.0)),
        },
    }
}

fn advance(l: &mut Leaf, step: f64) -> Result<()> {
    match &mut l.active {
        Active::Comm { plan, waited, .. } => {
            *waited += step;
            if let Plan::After(d) = plan {
                *waited = snap(*waited, *d);
            }
        }
        Active::Delay { dur, elapsed } => {
            *elapsed += step;
            if *elapsed >= *dur - SNAP * (1.0 + *dur) {
                l.active = Active::Idle;
            }
        }
        Active::Evolve { traj, boundary, elapsed, plan, .. } => {
            *elapsed += step;
            if let Some(b) = boundary {
                *elapsed = snap(*elapsed, *b);
            }
            if let IPlan::Fire(_, at) = plan {
                *elapsed = snap(*elapsed, *at);
            }
            l.state = traj.eval(*elapsed)?;
        }
        Active::Done | Active::Idle => {}
    }
    Ok(())
}

/// One small step of `m`.
pub fn small_step(m: &mut Machine, o: &mut dyn Oracle) -> Result<Option<Event>> {
    m.step(o)
}

/// Step until the run terminates, deadlocks or blocks forever.
pub fn run_star(p: &Process, s: &State, o: &mut dyn Oracle, opts: SmallOptions, cfg: &ExecConfig) -> Result<SmallRun> {
    let mut m = Machine::new(p, s, opts, cfg);
    while m.status == Status::Running {
        m.step(o)?;
    }
    Ok(SmallRun { state: m.state()?, resolved: m.resolved(), status: m.status, steps: m.steps, trace: m.trace })
}

fn joinable(e1: &Event, e2: &Event) -> bool {
    match (e1, e2) {
        (Event::Wait { dur: d1, traj: p1, rdy: r1 }, Event::Wait { traj: p2, rdy: r2, .. }) => {
            r1 == r2
                && d1.is_finite()
                && match (p1.eval(*d1), p2.eval(0.0)) {
                    (Ok(a), Ok(b)) => a.close_to(&b, 1e-9),
                    _ => false,
                }
        }
        _ => false,
    }
}

/// Merge adjacent waits with equal ready sets whose trajectories meet.
pub fn reduce_trace(t: &Trace) -> Trace {
    let mut out: Vec<Event> = Vec::new();
    for e in &t.events {
        if let Some(last) = out.last_mut() {
            if joinable(last, e) {
                let (Event::Wait { dur: d1, traj: p1, rdy }, Event::Wait { dur: d2, traj: p2, .. }) = (&*last, e) else {
                    unreachable!()
                };
                *last = Event::wait(d1 + d2, p1.clone().glue(*d1, p2.clone()), rdy.clone());
                continue;
            }
        }
        out.push(e.clone());
    }
    Trace { events: out, delta: t.delta }
}

/// Whether `r` is obtained from `t` by merging runs of adjacent waits.
pub fn is_reduction_of(t: &Trace, r: &Trace, tol: f64) -> bool {
    if t.delta != r.delta {
        return false;
    }
    let mut i = 0;
    for e in &r.events {
        match e {
            Event::Comm { .. } => {
                if !t.events.get(i).is_some_and(|f| f.approx_eq(e, tol)) {
                    return false;
                }
                i += 1;
            }
            Event::Wait { dur, traj, rdy } => {
                let mut acc = 0.0;
                loop {
                    let Some(Event::Wait { dur: d1, traj: p1, rdy: r1 }) = t.events.get(i) else {
                        return false;
                    };
                    if r1 != rdy || !p1.approx_eq(&traj.clone().shift(acc), *d1, tol) {
                        return false;
                    }
                    i += 1;
                    if d1.is_infinite() {
                        if dur.is_infinite() {
                            break;
                        }
                        return false;
                    }
                    acc += d1;
                    if dur.is_finite() {
                        let slack = tol * (1.0 + dur);
                        // a piece shorter than the slack still belongs to this wait
                        let more = matches!(t.events.get(i), Some(Event::Wait { dur: d2, rdy: r2, .. })
                            if r2 == rdy && acc + d2 <= dur + slack);
                        if (acc - dur).abs() <= slack && !more {
                            break;
                        }
                        if acc > dur + slack {
                            return false;
                        }
                    }
                }
            }
        }
    }
    i == t.events.len()
}

#[derive(Clone, Debug, Default)]
pub struct EquivReport {
    pub runs: usize,
    pub failures: Vec<String>,
}

impl EquivReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn states_agree(closed: bool, a: &State, b: &State, tol: f64) -> bool {
    closed || a.close_to(b, tol)
}

/// Check both directions of the big-step/small-step correspondence on one
/// seed. A random small-step run must be matched (up to reduction) by some
/// big-step run with the same resolved choices, and a random big-step run
/// must be reproduced by a planned small-step run.
pub fn check_equivalence(p: &Process, s: &State, seed: u64, cfg: &ExecConfig) -> EquivReport {
    const TOL: f64 = 1e-6;
    let mut rep = EquivReport::default();

    rep.runs += 1;
    match run_star(p, s, &mut RandomOracle::new(seed), SmallOptions::default(), cfg) {
        Err(e) => rep.failures.push(alloc::format!("small-step run failed: {e}")),
        Ok(small) => match big_step_all(p, s, &mut ReplayOracle::with_fallback(small.resolved.clone()), cfg) {
            Err(e) => rep.failures.push(alloc::format!("big-step replay failed: {e}")),
            Ok(cands) => {
                let closed = small.trace.is_closed();
                if !cands.iter().any(|c| {
                    is_reduction_of(&small.trace, &c.trace, TOL) && states_agree(closed, &small.state, &c.state, TOL)
                }) {
                    rep.failures.push(alloc::format!(
                        "small-step trace {} has no big-step counterpart among {} candidates",
                        small.trace,
                        cands.len()
                    ));
                }
            }
        },
    }

    rep.runs += 1;
    let mut rec = Recorder::new(RandomOracle::new(seed ^ 0x9e37_79b9_7f4a_7c15));
    match big_step(p, s, &mut rec, cfg) {
        Err(e) => rep.failures.push(alloc::format!("big-step run failed: {e}")),
        Ok(big) => {
            let opts = SmallOptions::replay(Some(big.trace.clone()));
            match run_star(p, s, &mut ReplayOracle::new(rec.log), opts, cfg) {
                Err(e) => rep.failures.push(alloc::format!("small-step replay failed: {e}")),
                Ok(small) => {
                    let closed = big.trace.is_closed();
                    if !reduce_trace(&small.trace).approx_eq(&reduce_trace(&big.trace), TOL)
                        || !states_agree(closed, &small.state, &big.state, TOL)
                    {
                        rep.failures.push(alloc::format!(
                            "big-step trace {} replayed as {}",
                            big.trace,
                            small.trace
                        ));
                    }
                }
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_process;

    fn replay(pairs: &[(&str, Vec<Choice>)]) -> ReplayOracle {
        ReplayOracle::new(pairs.iter().map(|(k, v)| (String::from(*k), v.clone())).collect())
    }

    #[test]
    fn output_now_emits_and_terminates() {
        let p = parse_process("ch!x").unwrap();
        let s = State::from_pairs(&[("x", 3.0)]);
        let mut o = replay(&[("", alloc::vec![Choice::Delay(Delay::Now)])]);
        let r = run_star(&p, &s, &mut o, SmallOptions::default(), &ExecConfig::default()).unwrap();
        assert_eq!(r.trace, Trace::from_events(alloc::vec![Event::comm("ch", Dir::Out, 3.0)]));
        assert_eq!(r.status, Status::Terminated);
    }

    #[test]
    fn ode_delay_step_keeps_evolving() {
        let p = parse_process("<x_dot = 1 & x < 2>").unwrap();
        let s = State::from_pairs(&[("x", 0.0)]);
        let mut o = replay(&[(SCHED, alloc::vec![Choice::Step(1.0), Choice::Step(1.0)])]);
        let mut m = Machine::new(&p, &s, SmallOptions::default(), &ExecConfig::default());
        let mut ev = None;
        while ev.is_none() {
            ev = m.step(&mut o).unwrap();
        }
        let Some(Event::Wait { dur, rdy, .. }) = ev else { panic!() };
        assert_eq!(dur, 1.0);
        assert!(rdy.is_empty());
        assert!((m.state().unwrap().get("x").unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(m.status, Status::Running);
    }

    #[test]
    fn split_ode_reduces_to_one_wait() {
        let p = parse_process("<x_dot = 1 & x < 2>").unwrap();
        let s = State::from_pairs(&[("x", 0.0)]);
        let mut o = replay(&[(SCHED, alloc::vec![Choice::Step(0.5), Choice::Step(1.5)])]);
        let r = run_star(&p, &s, &mut o, SmallOptions::default(), &ExecConfig::default()).unwrap();
        assert_eq!(r.trace.len(), 2);
        let red = reduce_trace(&r.trace);
        assert_eq!(red.len(), 1);
        let big = big_step(&p, &s, &mut RandomOracle::new(0), &ExecConfig::default()).unwrap();
        assert!(red.approx_eq(&big.trace, 1e-9));
        assert!(is_reduction_of(&r.trace, &big.trace, 1e-9));
        assert!(!is_reduction_of(&big.trace, &r.trace, 1e-9));
    }

    #[test]
    fn pieces_below_tolerance_are_consumed() {
        let traj = || Trajectory::Const(State::from_pairs(&[("x", 1.0)]));
        let whole = Trace::from_events(alloc::vec![Event::wait(1.0, traj(), ReadySet::new()), Event::comm("c", Dir::Out, 1.0)]);
        let split = Trace::from_events(alloc::vec![
            Event::wait(1.0 - 1e-7, traj(), ReadySet::new()),
            Event::wait(1e-7, traj(), ReadySet::new()),
            Event::comm("c", Dir::Out, 1.0),
        ]);
        assert!(is_reduction_of(&split, &whole, 1e-6));
    }

    #[test]
    fn passive_pair_synchronizes() {
        let p = parse_process("wait 1; c!3 ||[c]|| c?y").unwrap();
        let s = State::from_pairs(&[("y", 0.0)]);
        let r = run_star(&p, &s, &mut RandomOracle::new(3), SmallOptions::default(), &ExecConfig::default()).unwrap();
        assert_eq!(r.status, Status::Terminated);
        let red = reduce_trace(&r.trace);
        assert_eq!(red.len(), 2);
        assert!(red.events[1].approx_eq(&Event::comm("c", Dir::Sync, 3.0), 0.0));
        assert_eq!(r.state.get("y").unwrap(), 3.0);
        assert_eq!(r.resolved["1"], alloc::vec![Choice::Delay(Delay::After(1.0)), Choice::Value(3.0)]);
    }

    #[test]
    fn incompatible_waits_deadlock() {
        let p = parse_process("c!1 ||[]|| c?x").unwrap();
        let s = State::from_pairs(&[("x", 0.0)]);
        let mut o = replay(&[
            ("0", alloc::vec![Choice::Delay(Delay::After(1.0))]),
            ("1", alloc::vec![Choice::Delay(Delay::After(2.0))]),
        ]);
        let r = run_star(&p, &s, &mut o, SmallOptions::replay(None), &ExecConfig::default()).unwrap();
        assert_eq!(r.status, Status::Deadlock);
        assert!(r.trace.events.is_empty() && r.trace.delta);
    }

    #[test]
    fn equivalence_on_examples() {
        let cfg = ExecConfig { rep_bound: 3, ..ExecConfig::default() };
        let s = State::from_pairs(&[("x", 0.0), ("y", 0.0), ("z", 1.0)]);
        for src in [
            "x := 1; (wait 1 ++ ch!x); <x_dot = 1 & x < 3>",
            "(c!x; x := x + 1)*; d?x",
            "<x_dot = 1 & x < 2> |> [](c?x --> skip, d!x --> x := 0)",
            "(c!x; wait 1)* ||[c]|| (c?y; y := y + 1)*",
            "<x_dot = 1 & x < 3> |> [](c!x --> skip) ||[c]|| wait 1; c?y",
            "wait 2; a!x ||[]|| (wait 1; wait 1; b?y)",
        ] {
            let p = parse_process(src).unwrap();
            for seed in 0..25 {
                let rep = check_equivalence(&p, &s, seed, &cfg);
                assert!(rep.ok(), "{src} seed {seed}: {:?}", rep.failures);
            }
        }
    }
}
