//! Euler approximation, distances between states and traces, shrunken
//! neighbourhoods, and the comparison between the continuous precondition
//! of an ODE (CP) and its discrete counterpart (DP).

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::assertion::{eval, Assertion, EvalConfig, Truth, Valuation};
use crate::math;
use crate::runtime::{detect_boundary, Event, OdeSol, PwlPath, ReadySet, SimConfig, Trajectory};
use crate::syntax::{BExpr, Field};
use crate::{Error, Result, State, Trace};

/// Euler polygon `x_{i+1} = x_i + h e(x_i)`, linear between vertices.
#[derive(Clone, Debug, PartialEq)]
pub struct EulerTraj {
    path: Arc<PwlPath>,
}

impl EulerTraj {
    pub fn h(&self) -> f64 {
        self.path.h
    }

    pub fn vars(&self) -> &[String] {
        &self.path.vars
    }

    /// Field-variable values at each vertex.
    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.path.vertices
    }

    pub fn vertex(&self, i: usize) -> State {
        let mut s = self.path.base.clone();
        for (x, v) in self.path.vars.iter().zip(&self.path.vertices[i]) {
            s.set(x, *v);
        }
        s
    }

    /// Time covered by the vertices, at least the requested end time.
    pub fn span(&self) -> f64 {
        self.path.span()
    }

    pub fn eval(&self, t: f64) -> Result<State> {
        self.path.eval(t)
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory::Pwl(self.path.clone())
    }
}

/// `ceil(t_end / h)` Euler steps from `x0`.
pub fn euler_traj(field: &Field, x0: &State, h: f64, t_end: f64) -> Result<EulerTraj> {
    if !(h > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Invalid(alloc::format!("step {h} and end time {t_end}")));
    }
    let steps = math::ceil(t_end / h - 1e-9).max(0.0) as usize;
    let vars: Vec<String> = field.iter().map(|(x, _)| x.clone()).collect();
    let mut cur: Vec<f64> = vars.iter().map(|x| x0.get(x)).collect::<Result<_>>()?;
    let mut vertices = Vec::with_capacity(steps + 1);
    vertices.push(cur.clone());
    for _ in 0..steps {
        let env = |name: &str| match vars.iter().position(|x| x == name) {
            Some(i) => Ok(cur[i]),
            None => x0.get(name),
        };
        let d: Vec<f64> = field.iter().map(|(_, e)| e.eval_with(&env)).collect::<Result<_>>()?;
        let next: Vec<f64> = cur.iter().zip(&d).map(|(x, dx)| x + h * dx).collect();
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Integrator("Euler iterate is not finite".into()));
        }
        vertices.push(next.clone());
        cur = next;
    }
    Ok(EulerTraj { path: Arc::new(PwlPath { h, vars, base: x0.clone(), vertices }) })
}

/// `(h / 2) · M2 · (e^{L T} − 1) / L`
pub fn global_error_bound(l: f64, t: f64, h: f64, m2: f64) -> f64 {
    h / 2.0 * m2 * libm::expm1(l * t) / l
}

/// Largest sampled per-variable gap between two trajectories on `[0, t]`.
pub fn sup_gap(p: &Trajectory, q: &Trajectory, t: f64, samples: usize) -> Result<f64> {
    let n = samples.max(1);
    let mut m: f64 = 0.0;
    for i in 0..=n {
        let tau = t * i as f64 / n as f64;
        m = m.max(p.eval(tau)?.max_gap(&q.eval(tau)?));
    }
    Ok(m)
}

/// Distance `< eps` between states, events or traces.
pub trait WithinDistance {
    fn within(&self, other: &Self, eps: f64) -> bool;
}

/// Interior samples used for trajectory gaps.
const GAP_SAMPLES: usize = 64;
/// Comparison window when both waits are infinite.
const INF_WINDOW: f64 = 10.0;

impl WithinDistance for State {
    fn within(&self, other: &State, eps: f64) -> bool {
        self.max_gap(other) < eps
    }
}

impl WithinDistance for Event {
    fn within(&self, other: &Event, eps: f64) -> bool {
        match (self, other) {
            (Event::Comm { cd: c1, value: v1 }, Event::Comm { cd: c2, value: v2 }) => {
                c1 == c2 && (v1 - v2).abs() < eps
            }
            (Event::Wait { dur: d1, traj: p1, rdy: r1 }, Event::Wait { dur: d2, traj: p2, rdy: r2 }) => {
                if r1 != r2 {
                    return false;
                }
                let span = match (d1.is_finite(), d2.is_finite()) {
                    (true, true) if (d1 - d2).abs() < eps => d1.min(*d2),
                    (false, false) => INF_WINDOW,
                    _ => return false,
                };
                (1..GAP_SAMPLES).all(|i| {
                    let t = span * i as f64 / GAP_SAMPLES as f64;
                    match (p1.eval(t), p2.eval(t)) {
                        (Ok(a), Ok(b)) => a.max_gap(&b) < eps,
                        _ => false,
                    }
                })
            }
            _ => false,
        }
    }
}

impl WithinDistance for Trace {
    fn within(&self, other: &Trace, eps: f64) -> bool {
        self.delta == other.delta
            && self.events.len() == other.events.len()
            && self.events.iter().zip(&other.events).all(|(a, b)| a.within(b, eps))
    }
}

pub fn within_distance<T: WithinDistance>(a: &T, b: &T, eps: f64) -> bool {
    a.within(b, eps)
}

/// Perturbations tried when checking membership in a shrunken set:
/// every axis extreme plus `interior` Halton points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbConfig {
    pub interior: usize,
    /// Vertices of the resampled path for a perturbed trajectory.
    pub traj_samples: usize,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig { interior: 128, traj_samples: 64 }
    }
}

/// Scale keeping perturbations strictly inside the open ball.
const INSIDE: f64 = 1.0 - 1e-9;

fn primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Offsets in `(-1, 1)^dim`: the `2 dim` axis extremes, then Halton points.
fn offsets(dim: usize, cfg: &PerturbConfig) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for k in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut v = alloc::vec![0.0; dim];
            v[k] = sgn * INSIDE;
            out.push(v);
        }
    }
    let ps = primes(dim);
    for i in 1..=cfg.interior as u64 {
        out.push(ps.iter().map(|b| (2.0 * radical_inverse(i, *b) - 1.0) * INSIDE).collect());
    }
    out
}

fn shift_state(s: &State, off: &[f64], eps: f64) -> State {
    let mut out = s.clone();
    for ((x, v), o) in s.iter().zip(off) {
        out.set(x, v + eps * o);
    }
    out
}

/// `s ∈ U_{-eps}(b)`, checked on the sampled perturbations.
pub fn in_neg_eps_state(b: &BExpr, s: &State, eps: f64, cfg: &PerturbConfig) -> Result<bool> {
    if !b.eval(s)? {
        return Ok(false);
    }
    for off in offsets(s.len(), cfg) {
        if !b.eval(&shift_state(s, &off, eps))? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Resampled copy of `p` on `[0, d]`, shifted by `eps · off`, held
/// constant past `span`.
fn shift_traj(p: &Trajectory, span: f64, d: f64, off: &[f64], eps: f64, n: usize) -> Result<Trajectory> {
    let base = p.eval(0.0)?;
    let vars: Vec<String> = base.vars().map(String::from).collect();
    let h = if d > 0.0 { d / n as f64 } else { 1.0 };
    let mut vertices = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let t = (h * i as f64).min(span);
        let s = p.eval(t)?;
        vertices.push(vars.iter().zip(off).map(|(x, o)| s.get(x).map(|v| v + eps * o)).collect::<Result<_>>()?);
    }
    Ok(Trajectory::Pwl(Arc::new(PwlPath { h, vars, base, vertices })))
}

fn perturb_trace(tr: &Trace, off: &[f64], eps: f64, cfg: &PerturbConfig) -> Result<Trace> {
    let mut k = 0;
    let mut take = |n: usize| {
        let s = &off[k..k + n];
        k += n;
        s
    };
    let mut out = Vec::with_capacity(tr.events.len());
    for e in &tr.events {
        out.push(match e {
            Event::Comm { cd, value } => Event::Comm { cd: cd.clone(), value: value + eps * take(1)[0] },
            Event::Wait { dur, traj, rdy } if dur.is_finite() => {
                let nv = traj.eval(0.0)?.len();
                let o = take(1 + nv);
                let d = (dur + eps * o[0]).max(f64::MIN_POSITIVE);
                Event::Wait { dur: d, traj: shift_traj(traj, *dur, d, &o[1..], eps, cfg.traj_samples)?, rdy: rdy.clone() }
            }
            other => other.clone(),
        });
    }
    Ok(Trace { events: out, delta: tr.delta })
}

fn trace_dim(tr: &Trace) -> Result<usize> {
    let mut n = 0;
    for e in &tr.events {
        n += match e {
            Event::Comm { .. } => 1,
            Event::Wait { dur, traj, .. } if dur.is_finite() => 1 + traj.eval(0.0)?.len(),
            _ => 0,
        };
    }
    Ok(n)
}

/// `(s, tr) ∈ U_{-eps}(q)` on the sampled perturbations. `False` as soon as
/// one perturbation fails; `Unknown` if none fails but some are undecided.
pub fn in_neg_eps(
    q: &Assertion,
    s: &State,
    tr: &Trace,
    eps: f64,
    cfg: &PerturbConfig,
    ecfg: &EvalConfig,
) -> Result<Truth> {
    let nu = Valuation::new();
    let mut acc = eval(q, s, tr, &nu, ecfg)?;
    if acc.is_false() {
        return Ok(acc);
    }
    let ns = s.len();
    for off in offsets(ns + trace_dim(tr)?, cfg) {
        let s1 = shift_state(s, &off[..ns], eps);
        let t1 = perturb_trace(tr, &off[ns..], eps, cfg)?;
        acc = acc.and(eval(q, &s1, &t1, &nu, ecfg)?);
        if acc.is_false() {
            return Ok(acc);
        }
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpDpConfig {
    pub sim: SimConfig,
    /// DP looks for an exit on `[0, horizon]`.
    pub horizon: f64,
    pub perturb: PerturbConfig,
    /// Cheaper perturbation set for the domain scan.
    pub scan: PerturbConfig,
    pub eval: EvalConfig,
    pub gap_samples: usize,
}

impl Default for CpDpConfig {
    fn default() -> Self {
        CpDpConfig {
            sim: SimConfig { horizon: 50.0, ..SimConfig::default() },
            horizon: 50.0,
            perturb: PerturbConfig::default(),
            scan: PerturbConfig { interior: 8, traj_samples: 0 },
            eval: EvalConfig::default(),
            gap_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpDpCell {
    pub h: f64,
    pub eps: f64,
    pub cp: Truth,
    pub dp: Truth,
    /// Exit time of the Euler path from the shrunken domain.
    pub exit: Option<f64>,
    /// Sampled gap between the exact and Euler paths up to the exit.
    pub max_gap: f64,
}

impl CpDpCell {
    pub fn agrees(&self) -> bool {
        self.cp == self.dp
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CpDpReport {
    pub cp: Truth,
    /// Exact exit time, if the solution leaves the domain.
    pub exit: Option<f64>,
    pub cells: Vec<CpDpCell>,
}

impl CpDpReport {
    /// Agreement on every cell with `h <= h_max`.
    pub fn agrees_below(&self, h_max: f64) -> bool {
        self.cells.iter().filter(|c| c.h <= h_max).all(CpDpCell::agrees)
    }

    /// For each `eps`, the largest `h` from which every smaller ladder step
    /// agrees with CP.
    pub fn frontier(&self) -> Vec<(f64, Option<f64>)> {
        let mut eps: Vec<f64> = self.cells.iter().map(|c| c.eps).collect();
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        eps.into_iter()
            .map(|e| {
                let mut cells: Vec<&CpDpCell> = self.cells.iter().filter(|c| c.eps == e).collect();
                cells.sort_by(|a, b| a.h.total_cmp(&b.h));
                let mut best = None;
                for c in cells {
                    if !c.agrees() {
                        break;
                    }
                    best = Some(c.h);
                }
                (e, best)
            })
            .collect()
    }
}

/// CP evaluated on the closed-form solution.
pub fn cp_verdict(field: &Arc<Field>, b: &BExpr, q: &Assertion, x0: &State, cfg: &CpDpConfig) -> Result<(Truth, Option<f64>)> {
    let sol = OdeSol::new(field.clone(), x0.clone(), cfg.sim.step)?;
    if !sol.is_closed_form() {
        return Err(Error::Invalid("no closed-form solution for this field".into()));
    }
    let (traj, bd) = detect_boundary(field, b, x0, &cfg.sim)?;
    match bd {
        None => Ok((Truth::True, None)),
        Some(d) if d == 0.0 => Ok((Truth::True, Some(0.0))),
        Some(d) => {
            let s = traj.eval(d)?;
            let tr = Trace::from_events(alloc::vec![Event::wait(d, traj, ReadySet::new())]);
            Ok((eval(q, &s, &tr, &Valuation::new(), &cfg.eval)?, Some(d)))
        }
    }
}

/// First time the Euler path leaves `U_{-eps}(b)`, bisected to `h / 1024`.
fn dp_exit(path: &EulerTraj, b: &BExpr, eps: f64, cfg: &CpDpConfig) -> Result<Option<f64>> {
    let inside = |t: f64| -> Result<bool> { in_neg_eps_state(b, &path.eval(t)?, eps, &cfg.scan) };
    if !inside(0.0)? {
        return Ok(Some(0.0));
    }
    let h = path.h();
    let n = path.vertices().len();
    for i in 1..n {
        let t = h * i as f64;
        if !inside(t)? {
            let (mut lo, mut hi) = (t - h, t);
            while hi - lo > h / 1024.0 {
                let mid = 0.5 * (lo + hi);
                if inside(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(Some(hi));
        }
    }
    Ok(None)
}

/// DP at a single `(eps, h)` cell.
pub fn dp_cell(field: &Field, b: &BExpr, q: &Assertion, x0: &State, eps: f64, h: f64, cfg: &CpDpConfig) -> Result<(Truth, Option<f64>, EulerTraj)> {
    let path = euler_traj(field, x0, h, cfg.horizon)?;
    let Some(t) = dp_exit(&path, b, eps, cfg)? else {
        return Ok((Truth::True, None, path));
    };
    if t == 0.0 {
        return Ok((Truth::True, Some(0.0), path));
    }
    let s = path.eval(t)?;
    let tr = Trace::from_events(alloc::vec![Event::wait(t, path.trajectory(), ReadySet::new())]);
    Ok((in_neg_eps(q, &s, &tr, eps, &cfg.perturb, &cfg.eval)?, Some(t), path))
}

/// CP once, DP on every ladder cell.
pub fn cp_dp_experiment(
    field: &Arc<Field>,
    b: &BExpr,
    q: &Assertion,
    x0: &State,
    eps_ladder: &[f64],
    h_ladder: &[f64],
    cfg: &CpDpConfig,
) -> Result<CpDpReport> {
    let (cp, exit) = cp_verdict(field, b, q, x0, cfg)?;
    let exact = Trajectory::ode(field.clone(), x0.clone(), cfg.sim.step)?;
    let mut cells = Vec::new();
    for &eps in eps_ladder {
        for &h in h_ladder {
            let (dp, t, path) = dp_cell(field, b, q, x0, eps, h, cfg)?;
            let upto = t.or(exit).unwrap_or(cfg.horizon).min(path.span());
            let max_gap = sup_gap(&exact, &path.trajectory(), upto, cfg.gap_samples)?;
            cells.push(CpDpCell { h, eps, cp, dp, exit: t, max_gap });
        }
    }
    Ok(CpDpReport { cp, exit, cells })
}
