//! Two reference models: a lunar lander controller and a two-module
//! priority scheduler. Both are simulated with the small-step executor
//! under maximal progress and checked against their safety properties.
//!
//! Simulation validates, it does not prove. Reports state what was
//! checked and how many points were looked at.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diffinv::{trinv_check, TrInvConfig, TrInvViolation};
use crate::exec_big::ExecConfig;
use crate::exec_small::{Machine, Policy, SmallOptions, Status};
use crate::oracle::{RandomConfig, RandomOracle, RepPolicy};
use crate::runtime::{Event, SimConfig, State, Trace};
use crate::syntax::{parse_bexpr, parse_process, BExpr, Dir, Process};
use crate::Result;

// ---------------------------------------------------------------------------
// Lunar lander

pub const LANDER_PERIOD: f64 = 0.128;
pub const LANDER_W0: f64 = 5670.0 / 1519.0;
pub const LANDER_V0: f64 = -1.5;
/// Open safety band for `v`.
pub const LANDER_BAND: (f64, f64) = (-1.55, -1.45);

/// Control law applied by the controller.
pub fn lander_control(v: f64, w: f64) -> f64 {
    -(w - 3.732) * 0.01 + 3.732 - (v + 1.5) * 0.6
}

pub fn lander_plant() -> Process {
    parse_process("(<v_dot = w - 3.732, w_dot = w * w / 2500, t_dot = 1 & true> |> [](chv!v --> chw!w; chc?w; t := 0))*")
        .expect("plant parses")
}

pub fn lander_ctrl(period: f64) -> Process {
    parse_process(&format!(
        "(wait {period}; chv?cv; chw?cw; chc!(-(cw - 3.732) * 0.01 + 3.732 - (cv + 1.5) * 0.6))*"
    ))
    .expect("controller parses")
}

pub fn lander_model() -> Process {
    lander_model_with(LANDER_PERIOD)
}

pub fn lander_model_with(period: f64) -> Process {
    Process::par(lander_plant(), &["chv", "chw", "chc"], lander_ctrl(period))
}

pub fn lander_init() -> State {
    State::from_pairs(&[("v", LANDER_V0), ("w", LANDER_W0), ("t", 0.0)])
}

#[derive(Clone, Debug)]
pub struct LanderConfig {
    pub period: f64,
    pub sim: SimConfig,
    pub init: State,
    /// Checked with [`trinv_check`] on the whole trace.
    pub inv: BExpr,
    /// Samples per wait; 0 samples on the integrator grid.
    pub samples: usize,
}

impl Default for LanderConfig {
    fn default() -> Self {
        LanderConfig {
            period: LANDER_PERIOD,
            sim: SimConfig::default(),
            init: lander_init(),
            inv: parse_bexpr("v > -1.55 && v < -1.45").expect("band parses"),
            samples: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SafetyViolation {
    pub time: f64,
    pub v: f64,
}

#[derive(Clone, Debug)]
pub struct LanderReport {
    pub rounds: usize,
    /// `(t, v, w)` at every sample.
    pub series: Vec<(f64, f64, f64)>,
    pub violations: Vec<SafetyViolation>,
    /// Every round is a wait of one period followed by chv, chw, chc.
    pub shape_ok: bool,
    pub inv_violation: Option<TrInvViolation>,
    /// Global time of `inv_violation`.
    pub inv_time: Option<f64>,
    pub trace: Trace,
    pub v_range: (f64, f64),
}

impl LanderReport {
    pub fn safe(&self) -> bool {
        self.violations.is_empty() && self.inv_violation.is_none()
    }
}

fn in_band(v: f64) -> bool {
    (v - LANDER_BAND.0) * (v - LANDER_BAND.1) < 0.0
}

fn lander_shape(t: &Trace, rounds: usize, period: f64) -> bool {
    let ev = &t.events;
    if ev.len() != 4 * rounds {
        return false;
    }
    ev.chunks(4).all(|c| {
        let wait_ok = matches!(&c[0], Event::Wait { dur, .. } if (dur - period).abs() <= 1e-9 * (1.0 + period));
        let comm_ok = c[1..].iter().zip(["chv", "chw", "chc"]).all(|(e, ch)| {
            matches!(e, Event::Comm { cd, .. } if cd.ch == ch && cd.dir == Dir::Sync)
        });
        wait_ok && comm_ok
    })
}

/// Simulates `rounds` control periods of plant ‖ ctrl.
pub fn lander_check(rounds: usize, cfg: &LanderConfig) -> Result<LanderReport> {
    if rounds == 0 {
        return Err(crate::Error::Invalid("at least one round".into()));
    }
    let p = lander_model_with(cfg.period);
    let ecfg = ExecConfig { sim: cfg.sim, rep_bound: rounds + 1, ..ExecConfig::default() };
    let opts = SmallOptions { policy: Policy::Passive, split_steps: false, ..SmallOptions::default() };
    let mut m = Machine::new(&p, &cfg.init, opts, &ecfg);
    let mut o = RandomOracle::with_config(0, RandomConfig { rep: RepPolicy::Max, ..RandomConfig::default() });

    let mut series = Vec::new();
    let mut violations = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut now = 0.0;
    let mut done = 0;
    while done < rounds && m.status == Status::Running {
        match m.step(&mut o)? {
            Some(Event::Wait { dur, traj, .. }) => {
                let n = if cfg.samples > 0 {
                    cfg.samples.max(2) - 1
                } else {
                    libm::ceil(dur / cfg.sim.step).max(1.0) as usize
                };
                for i in 0..=n {
                    let tau = if i == n { dur } else { dur * i as f64 / n as f64 };
                    let s = traj.eval(tau)?;
                    let (v, w) = (s.get("v")?, s.get("w")?);
                    lo = lo.min(v);
                    hi = hi.max(v);
                    series.push((now + tau, v, w));
                    if !in_band(v) {
                        violations.push(SafetyViolation { time: now + tau, v });
                    }
                }
                now += dur;
            }
            Some(Event::Comm { cd, .. }) if cd.ch == "chc" => done += 1,
            _ => {}
        }
    }
    let trace = m.trace.clone();
    let inv_violation = trinv_check(&trace, &cfg.inv, &TrInvConfig::default())?;
    let inv_time = inv_violation.as_ref().map(|iv| {
        trace.events[..iv.event].iter().map(|e| e.duration()).sum::<f64>() + iv.time
    });
    Ok(LanderReport {
        rounds: done,
        series,
        violations,
        shape_ok: lander_shape(&trace, done, cfg.period) && done == rounds,
        inv_violation,
        inv_time,
        trace,
        v_range: (lo, hi),
    })
}

// ---------------------------------------------------------------------------
// Scheduler

pub const WAIT: f64 = 0.0;
pub const READY: f64 = 1.0;
pub const RUN: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModuleParams {
    pub period: f64,
    pub cost: f64,
    pub prior: f64,
}

pub fn default_modules() -> Vec<ModuleParams> {
    alloc::vec![
        ModuleParams { period: 1.0, cost: 0.35, prior: 2.0 },
        ModuleParams { period: 1.7, cost: 0.6, prior: 1.0 },
    ]
}

/// Module `i` (1-based). Variables and channels carry the index.
pub fn module_process(i: usize, m: &ModuleParams) -> Process {
    let ModuleParams { period, cost, prior } = *m;
    let src = format!(
        "(if state{i} = 0 then \
            <T{i}_dot = 1 & T{i} < {period}>; T{i} := 0; ent{i} := 0; state{i} := 1 \
          else if state{i} = 1 then \
            req_ch{i}!{prior}; \
            <T{i}_dot = 1 & T{i} < {period}> |> [](run_ch{i}?x{i} --> state{i} := 2); \
            if state{i} = 1 then \
              <z{i}_dot = 0 & true> |> [](run_ch{i}?x{i} --> state{i} := 2, exit_ch{i}!0 --> state{i} := 0) \
            else skip endif \
          else \
            (if ent{i} = 0 then C{i} := 0; ent{i} := 1 else skip endif); \
            <T{i}_dot = 1, C{i}_dot = 1 & T{i} < {period} && C{i} < {cost}> |> [](pr_ch{i}?x{i} --> state{i} := 1); \
            if state{i} = 2 then \
              <z{i}_dot = 0 & true> |> [](pr_ch{i}?x{i} --> state{i} := 0, free_ch{i}!0 --> state{i} := 0) \
            else skip endif \
          endif endif)*"
    );
    parse_process(&src).expect("module parses")
}

/// Sends `ch{ri}!0` for the current value of `ri`.
fn send_to_ri(ch: &str, n: usize, otherwise: &str) -> String {
    let mut s = String::from(otherwise);
    for j in (1..=n).rev() {
        s = format!("if ri = {j} then {ch}{j}!0 else {s} endif");
    }
    s
}

/// The waiting list is kept as flags `inl{j}` with priorities `lp{j}`.
/// `max` breaks ties towards the lower index.
pub fn scheduler_process(n: usize) -> Process {
    let mut branches = Vec::new();
    for i in 1..=n {
        let preempt = send_to_ri("pr_ch", n, "skip");
        branches.push(format!(
            "req_ch{i}?p --> if rp >= p then inl{i} := 1; lp{i} := p \
             else ({preempt}); run_ch{i}!0; ri := {i}; rp := p endif"
        ));
        let mut pick = String::from("ri := -1; rp := -1");
        for j in 1..=n {
            pick.push_str(&format!(
                "; if inl{j} = 1 && (ri = -1 || lp{j} > rp) then ri := {j}; rp := lp{j} else skip endif"
            ));
        }
        let mut del = String::from("skip");
        for j in 1..=n {
            del.push_str(&format!("; if ri = {j} then inl{j} := 0 else skip endif"));
        }
        let run = send_to_ri("run_ch", n, "skip");
        branches.push(format!("free_ch{i}?g --> {pick}; {del}; {run}"));
        branches.push(format!("exit_ch{i}?g --> inl{i} := 0"));
    }
    let src = format!("(<sz_dot = 0 & true> |> []({}))*", branches.join(", "));
    parse_process(&src).expect("scheduler parses")
}

fn module_channels(i: usize) -> [String; 5] {
    ["req_ch", "run_ch", "pr_ch", "free_ch", "exit_ch"].map(|c| format!("{c}{i}"))
}

/// `(scheduler ‖A1 module1) ‖A2 module2 …`.
pub fn scheduler_model(modules: &[ModuleParams]) -> Result<Process> {
    if modules.is_empty() {
        return Err(crate::Error::Invalid("no modules".into()));
    }
    for m in modules {
        if !(m.period > 0.0 && m.cost > 0.0) {
            return Err(crate::Error::Invalid(format!("period and cost must be positive: {m:?}")));
        }
    }
    let mut p = scheduler_process(modules.len());
    for (k, m) in modules.iter().enumerate() {
        let chs = module_channels(k + 1);
        let cs: Vec<&str> = chs.iter().map(String::as_str).collect();
        p = Process::par(p, &cs, module_process(k + 1, m));
    }
    Ok(p)
}

/// All modules in WAIT, empty list, nothing running. `phase[i]` is the
/// initial `T` of module `i+1`.
pub fn scheduler_init(n: usize, phase: &[f64]) -> State {
    let mut s = State::from_pairs(&[("ri", -1.0), ("rp", -1.0), ("p", 0.0), ("g", 0.0), ("sz", 0.0)]);
    for i in 1..=n {
        for (x, v) in [
            ("state", WAIT),
            ("ent", 0.0),
            ("T", phase.get(i - 1).copied().unwrap_or(0.0)),
            ("C", 0.0),
            ("x", 0.0),
            ("z", 0.0),
            ("inl", 0.0),
            ("lp", 0.0),
        ] {
            s.set(&format!("{x}{i}"), v);
        }
    }
    s
}

#[derive(Clone, Debug)]
pub struct SchedulerConfig {
    pub modules: Vec<ModuleParams>,
    pub sim: SimConfig,
    /// Draw each module's initial `T` from `[0, period)` per seed.
    pub random_phase: bool,
    pub tol: f64,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig { modules: default_modules(), sim: SimConfig::default(), random_phase: true, tol: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedProperty {
    DoubleRun,
    Priority,
    RunningIndex,
    Bounds,
    Deadlock,
}

impl SchedProperty {
    pub fn label(self) -> &'static str {
        match self {
            SchedProperty::DoubleRun => "double-run",
            SchedProperty::Priority => "priority",
            SchedProperty::RunningIndex => "running-index",
            SchedProperty::Bounds => "bounds",
            SchedProperty::Deadlock => "deadlock",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SchedViolation {
    pub property: SchedProperty,
    pub time: f64,
    pub state: State,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct SchedRun {
    pub seed: u64,
    /// Scheduler loop iterations performed.
    pub rounds: usize,
    pub time: f64,
    /// Points at which the properties were evaluated.
    pub checks: usize,
    pub violations: Vec<SchedViolation>,
    /// Full trace, kept for dumping violations.
    pub trace: Trace,
}

#[derive(Clone, Debug, Default)]
pub struct SchedulerReport {
    pub runs: Vec<SchedRun>,
}

impl SchedulerReport {
    pub fn violations(&self) -> usize {
        self.runs.iter().map(|r| r.violations.len()).sum()
    }

    pub fn count(&self, p: SchedProperty) -> usize {
        self.runs.iter().flat_map(|r| &r.violations).filter(|v| v.property == p).count()
    }

    pub fn ok(&self) -> bool {
        self.violations() == 0
    }
}

fn check_sched_state(s: &State, ms: &[ModuleParams], tol: f64, time: f64, out: &mut Vec<SchedViolation>) -> Result<()> {
    let mut bad = |property, detail: String| {
        out.push(SchedViolation { property, time, state: s.clone(), detail });
    };
    let n = ms.len();
    let st: Vec<f64> = (1..=n).map(|i| s.get(&format!("state{i}"))).collect::<Result<_>>()?;
    let running: Vec<usize> = (0..n).filter(|&k| st[k] == RUN).collect();
    if running.len() > 1 {
        bad(SchedProperty::DoubleRun, format!("modules {:?} both RUN", running.iter().map(|k| k + 1).collect::<Vec<_>>()));
    }
    for &r in &running {
        for k in 0..n {
            if st[k] == READY && ms[k].prior > ms[r].prior {
                bad(SchedProperty::Priority, format!("module {} RUN below READY module {}", r + 1, k + 1));
            }
        }
    }
    let ri = s.get("ri")?;
    let want = match running.as_slice() {
        [] => -1.0,
        [r] => (r + 1) as f64,
        _ => ri,
    };
    if ri != want {
        bad(SchedProperty::RunningIndex, format!("ri = {ri}, running module {want}"));
    }
    for (k, m) in ms.iter().enumerate() {
        let t = s.get(&format!("T{}", k + 1))?;
        let c = s.get(&format!("C{}", k + 1))?;
        if t > m.period + tol || c > m.cost + tol {
            bad(SchedProperty::Bounds, format!("module {}: T = {t}, C = {c}", k + 1));
        }
    }
    Ok(())
}

fn is_sched_channel(ch: &str) -> bool {
    ["req_ch", "free_ch", "exit_ch"].iter().any(|p| ch.starts_with(p))
}

/// One seeded run of at least `rounds` scheduler iterations.
pub fn scheduler_run(rounds: usize, seed: u64, cfg: &SchedulerConfig) -> Result<SchedRun> {
    let ms = &cfg.modules;
    let p = scheduler_model(ms)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phase: Vec<f64> =
        ms.iter().map(|m| if cfg.random_phase { m.period * rng.gen::<f64>() } else { 0.0 }).collect();
    let init = scheduler_init(ms.len(), &phase);
    let ecfg = ExecConfig { sim: cfg.sim, rep_bound: usize::MAX / 2, ..ExecConfig::default() };
    let opts = SmallOptions { policy: Policy::Passive, split_steps: false, ..SmallOptions::default() };
    let mut m = Machine::new(&p, &init, opts, &ecfg);
    let mut o = RandomOracle::with_config(seed, RandomConfig { rep: RepPolicy::Max, ..RandomConfig::default() });

    let mut violations = Vec::new();
    let mut checks = 0;
    let mut now = 0.0;
    let mut done = 0;
    while done < rounds {
        let before = m.state()?;
        match m.step(&mut o)? {
            Some(Event::Wait { dur, traj, .. }) => {
                checks += 2;
                check_sched_state(&before, ms, cfg.tol, now, &mut violations)?;
                if dur.is_finite() {
                    check_sched_state(&traj.eval(dur)?, ms, cfg.tol, now + dur, &mut violations)?;
                    now += dur;
                } else {
                    break;
                }
            }
            Some(Event::Comm { cd, .. }) if is_sched_channel(&cd.ch) => done += 1,
            _ => {}
        }
        if m.status != Status::Running {
            break;
        }
    }
    if done < rounds {
        violations.push(SchedViolation {
            property: SchedProperty::Deadlock,
            time: now,
            state: m.state()?,
            detail: format!("stopped after {done} rounds ({:?})", m.status),
        });
    }
    Ok(SchedRun { seed, rounds: done, time: now, checks, violations, trace: m.trace })
}

pub fn scheduler_check(rounds: usize, seeds: &[u64], cfg: &SchedulerConfig) -> Result<SchedulerReport> {
    let runs = seeds.iter().map(|&s| scheduler_run(rounds, s, cfg)).collect::<Result<_>>()?;
    Ok(SchedulerReport { runs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_law_fixed_point() {
        assert!((lander_control(-1.5, 3.732) - 3.732).abs() < 1e-12);
    }

    #[test]
    fn lander_one_round() {
        let r = lander_check(1, &LanderConfig::default()).unwrap();
        assert!(r.safe(), "{:?}", r.violations);
        assert!(r.shape_ok);
        assert_eq!(r.trace.events.len(), 4);
        let Event::Comm { value, .. } = &r.trace.events[1] else { panic!() };
        assert!((value - r.series.last().unwrap().1).abs() < 1e-12);
    }

    #[test]
    fn lander_forty_rounds() {
        let r = lander_check(40, &LanderConfig::default()).unwrap();
        assert!(r.safe());
        assert!(r.shape_ok);
        assert!((r.series.last().unwrap().0 - 40.0 * LANDER_PERIOD).abs() < 1e-9);
        assert!(r.v_range.0 > -1.55 && r.v_range.1 < -1.45);
    }

    #[test]
    fn lander_bad_start() {
        let mut cfg = LanderConfig::default();
        cfg.init.set("v", -1.6);
        let r = lander_check(1, &cfg).unwrap();
        assert_eq!(r.violations[0].time, 0.0);
        assert_eq!(r.inv_time, Some(0.0));
    }

    #[test]
    fn module_requests_first_when_ready() {
        let ms = default_modules();
        let p = module_process(1, &ms[0]);
        let mut s = scheduler_init(1, &[]);
        s.set("state1", READY);
        let mut m = Machine::new(&p, &s, SmallOptions { split_steps: false, ..SmallOptions::default() }, &ExecConfig::default());
        let mut o = RandomOracle::with_config(1, RandomConfig { rep: RepPolicy::Max, ..RandomConfig::default() });
        let ev = loop {
            if let Some(e) = m.step(&mut o).unwrap() {
                break e;
            }
        };
        match ev {
            Event::Comm { cd, value } => {
                assert_eq!(cd.ch, "req_ch1");
                assert_eq!(value, 2.0);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn scheduler_default_seeds() {
        let r = scheduler_check(20, &(0..4).collect::<Vec<_>>(), &SchedulerConfig::default()).unwrap();
        for run in &r.runs {
            assert!(run.violations.is_empty(), "seed {}: {:?}", run.seed, run.violations);
            assert!(run.rounds >= 20);
        }
    }

    #[test]
    fn preemption_happens() {
        // module 2 starts running alone, module 1 arrives later and preempts.
        let cfg = SchedulerConfig { random_phase: false, ..SchedulerConfig::default() };
        let ms = &cfg.modules;
        let p = scheduler_model(ms).unwrap();
        let init = scheduler_init(2, &[0.0, 1.5]);
        let ecfg = ExecConfig { rep_bound: 1 << 20, ..ExecConfig::default() };
        let mut m = Machine::new(&p, &init, SmallOptions { split_steps: false, ..SmallOptions::default() }, &ecfg);
        let mut o = RandomOracle::with_config(0, RandomConfig { rep: RepPolicy::Max, ..RandomConfig::default() });
        while m.trace.comm_events().filter(|(cd, _)| cd.ch == "pr_ch2").count() == 0 {
            m.step(&mut o).unwrap();
            assert!(m.steps < 10_000);
        }
        let s = loop {
            let s = m.state().unwrap();
            if let Some(Event::Wait { .. }) = m.step(&mut o).unwrap() {
                break s;
            }
        };
        assert_eq!(s.get("state1").unwrap(), RUN);
        assert_eq!(s.get("state2").unwrap(), READY);
        assert_eq!(s.get("ri").unwrap(), 1.0);
    }

    #[test]
    fn equal_priorities_and_single_module() {
        let mut cfg = SchedulerConfig::default();
        cfg.modules[1].prior = 2.0;
        let r = scheduler_check(20, &[0, 1, 2], &cfg).unwrap();
        assert_eq!(r.count(SchedProperty::DoubleRun), 0);
        assert!(r.ok(), "{:?}", r.runs.iter().map(|x| &x.violations).collect::<Vec<_>>());
        cfg.modules.truncate(1);
        let r = scheduler_check(20, &[0, 1], &cfg).unwrap();
        assert!(r.ok());
    }
}
