//! Command-line front end.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hcsp_core::assertion::{parse_assertion, Assertion, EvalConfig, Truth};
use hcsp_core::casestudies::{
    lander_check, scheduler_check, LanderConfig, SchedulerConfig, SchedulerReport,
};
use hcsp_core::diffinv::{
    check_barrier, check_dbx, check_diffinv, lie, DbxVerdict, DiffInvMode, GridConfig, InvSign, Verdict,
    VectorField,
};
use hcsp_core::discretize::{cp_dp_experiment, euler_traj, CpDpConfig};
use hcsp_core::exec_big::{big_step, EnumBudget, ExecConfig};
use hcsp_core::exec_small::{run_star, SmallOptions};
use hcsp_core::oracle::{Delay, RandomConfig, RandomOracle};
use hcsp_core::poly::parse_poly;
use hcsp_core::runtime::{OdeSol, SimConfig};
use hcsp_core::sync::{sync_traces_with, SyncConfig};
use hcsp_core::syntax::{check_wellformed, parse_bexpr, parse_expr, Field};
use hcsp_core::vcgen::{check_triple_at, emit_vc, wp_with, Annotations, CheckMode, TripleReport, WpOptions};
use hcsp_core::{parse_process, pretty, BExpr, Process, State};
use serde_json::{json, Value};

use crate::json::{state_from_json, state_to_json, trace_from_json, trace_to_json};
use crate::workers::par_map;

#[derive(Parser, Debug)]
#[command(name = "hcsp", version, about = "Hybrid CSP toolkit: semantics, assertions, invariants, discretization")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Random trials per initial state.
    #[arg(long, global = true, default_value_t = 100)]
    pub trials: usize,
    /// Bound on repetition counts.
    #[arg(long = "rep-bound", global = true, default_value_t = 32)]
    pub rep_bound: usize,
    /// Integrator step.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub step: f64,
    /// Numeric tolerance.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Boundary search horizon.
    #[arg(long, global = true, default_value_t = 100.0)]
    pub horizon: f64,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a process file and pretty-print it.
    Parse { file: PathBuf },
    /// Execute a process once.
    Run {
        file: PathBuf,
        /// Initial state, e.g. `x=0,y=1`.
        #[arg(long, default_value = "")]
        init: String,
        /// Use the small-step executor with maximal progress.
        #[arg(long)]
        small: bool,
    },
    /// Synchronize two traces given as JSON files.
    Sync {
        left: PathBuf,
        right: PathBuf,
        /// Shared channels, comma separated.
        #[arg(long, default_value = "")]
        chans: String,
    },
    /// Weakest liberal precondition.
    Wp {
        file: PathBuf,
        #[arg(long)]
        post: String,
        /// Unrolling depth for loops without an invariant.
        #[arg(long, default_value_t = 8)]
        unroll: usize,
        /// Loop invariant `INDEX:ASSERTION` (loops numbered in pre-order).
        #[arg(long = "inv")]
        invs: Vec<String>,
        /// Print verification conditions as s-expressions.
        #[arg(long)]
        emit: bool,
    },
    /// Check a Hoare triple described by a JSON file.
    Check {
        spec: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Test)]
        mode: Mode,
    },
    /// Lie derivatives of a polynomial.
    Lie {
        #[arg(long)]
        field: String,
        #[arg(long)]
        poly: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
    /// Differential invariant check for `p = 0`, `p >= 0` or `p <= 0`.
    Diffinv {
        #[arg(long)]
        field: String,
        #[arg(long)]
        poly: String,
        #[arg(long, value_enum, default_value_t = Sign::Eq)]
        sign: Sign,
        #[arg(long, default_value = "true")]
        domain: String,
        /// Only accept exact proofs.
        #[arg(long)]
        exact: bool,
    },
    /// Darboux check `L p = g p`.
    Dbx {
        #[arg(long)]
        field: String,
        #[arg(long)]
        poly: String,
        /// Cofactor; found by division when absent.
        #[arg(long)]
        g: Option<String>,
    },
    /// Barrier certificate check on a grid.
    Barrier {
        #[arg(long)]
        field: String,
        #[arg(long)]
        poly: String,
        #[arg(long, default_value = "true")]
        domain: String,
    },
    /// Euler discretization against the exact flow.
    Euler {
        #[arg(long)]
        field: String,
        #[arg(long)]
        init: String,
        #[arg(long = "until", default_value_t = 1.0)]
        until: f64,
        #[arg(long)]
        h: f64,
    },
    /// Continuous versus discretized verdicts over an (eps, h) ladder.
    Cpdp {
        #[arg(long)]
        field: String,
        #[arg(long)]
        domain: String,
        #[arg(long)]
        post: String,
        #[arg(long)]
        init: String,
        #[arg(long, default_value = "0.1,0.01")]
        eps: String,
        #[arg(long, default_value = "0.1,0.01,0.001")]
        hs: String,
    },
    /// Reference models.
    Case {
        #[command(subcommand)]
        which: Case,
    },
}

#[derive(Subcommand, Debug)]
pub enum Case {
    Lander {
        #[arg(long, default_value_t = 40)]
        rounds: usize,
        /// Initial `v`.
        #[arg(long, allow_hyphen_values = true)]
        v0: Option<f64>,
        /// Invariant checked along the trace.
        #[arg(long)]
        inv: Option<String>,
    },
    Scheduler {
        #[arg(long, default_value_t = 20)]
        rounds: usize,
        /// Seeds, comma separated; defaults to `--seed`.
        #[arg(long)]
        seeds: Option<String>,
        /// Priorities, comma separated.
        #[arg(long)]
        priors: Option<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Test,
    Exact,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sign {
    Eq,
    Ge,
    Le,
}

/// What a command produced.
pub struct Outcome {
    pub text: String,
    /// A property was violated or refuted.
    pub violation: bool,
}

/// Bad input: a missing file, a parse error, an unknown option value.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn read(path: &Path) -> Result<String> {
    if path == Path::new("-") {
        let mut s = String::new();
        std::io::Read::read_to_string(&mut std::io::stdin(), &mut s)?;
        return Ok(s);
    }
    fs::read_to_string(path).map_err(|e| Usage(format!("{}: {e}", path.display())).into())
}

fn parse_file(path: &Path) -> Result<Process> {
    let src = read(path)?;
    let p = parse_process(&src).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
    let bad = check_wellformed(&p);
    if !bad.is_empty() {
        return usage(format!("{}: {}", path.display(), bad.join("; ")));
    }
    Ok(p)
}

/// `x=1, y=-2`.
pub fn parse_state(src: &str) -> Result<State> {
    let mut s = State::new();
    for part in src.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((x, e)) = part.split_once('=') else { return usage(format!("expected var=value, got {part:?}")) };
        let v = parse_expr(e.trim()).map_err(|e| Usage(e.to_string()))?.eval(&State::new());
        s.set(x.trim(), v.map_err(|e| Usage(e.to_string()))?);
    }
    Ok(s)
}

/// `x=y, y=-x` or `x_dot=y, ...`.
pub fn parse_field(src: &str) -> Result<Field> {
    let mut f = Field::new();
    for part in src.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((x, e)) = part.split_once('=') else { return usage(format!("expected var=expr, got {part:?}")) };
        let x = x.trim();
        let x = x.strip_suffix("_dot").unwrap_or(x);
        f.push((x.to_string(), parse_expr(e.trim()).map_err(|e| Usage(e.to_string()))?));
    }
    if f.is_empty() {
        return usage("empty vector field");
    }
    Ok(f)
}

fn parse_list(src: &str) -> Result<Vec<f64>> {
    src.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<f64>().map_err(|e| Usage(format!("{p:?}: {e}")).into()))
        .collect()
}

fn assertion(src: &str) -> Result<Assertion> {
    parse_assertion(src).map_err(|e| Usage(format!("{src:?}: {e}")).into())
}

fn bexpr(src: &str) -> Result<BExpr> {
    parse_bexpr(src).map_err(|e| Usage(format!("{src:?}: {e}")).into())
}

fn vector_field(src: &str) -> Result<VectorField> {
    VectorField::from_field(&parse_field(src)?).map_err(|e| Usage(e.to_string()).into())
}

fn poly(src: &str) -> Result<hcsp_core::poly::Poly> {
    parse_poly(src).map_err(|e| Usage(format!("{src:?}: {e}")).into())
}

fn sim(g: &Global) -> SimConfig {
    SimConfig { step: g.step, horizon: g.horizon, ..SimConfig::default() }
}

fn exec_cfg(g: &Global) -> ExecConfig {
    let mut c = ExecConfig { sim: sim(g), rep_bound: g.rep_bound, ..ExecConfig::default() };
    c.sync.tol = g.tol;
    c
}

fn no_csv(g: &Global, cmd: &str) -> Result<()> {
    if g.format == Format::Csv {
        return usage(format!("csv output is not available for `{cmd}`"));
    }
    Ok(())
}

fn pretty_json(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn csv_rows(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn truth(t: Truth) -> &'static str {
    match t {
        Truth::True => "true",
        Truth::False => "false",
        Truth::Unknown => "unknown",
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let ok = |text: String| Ok(Outcome { text, violation: false });
    match &cli.cmd {
        Command::Parse { file } => {
            no_csv(g, "parse")?;
            let p = parse_file(file)?;
            match g.format {
                Format::Json => ok(pretty_json(&json!({ "process": pretty(&p), "size": p.size() }))),
                _ => ok(format!("{}\n", pretty(&p))),
            }
        }
        Command::Run { file, init, small } => {
            no_csv(g, "run")?;
            let p = parse_file(file)?;
            let s = parse_state(init)?;
            let cfg = exec_cfg(g);
            let mut o = RandomOracle::new(g.seed);
            let (trace, state, status) = if *small {
                let r = run_star(&p, &s, &mut o, SmallOptions { split_steps: false, ..SmallOptions::default() }, &cfg)?;
                (r.trace, r.state, format!("{:?}", r.status).to_lowercase())
            } else {
                let r = big_step(&p, &s, &mut o, &cfg)?;
                (r.trace, r.state, String::from("terminated"))
            };
            match g.format {
                Format::Json => ok(pretty_json(&json!({
                    "trace": trace_to_json(&trace),
                    "state": state_to_json(&state),
                    "status": status,
                }))),
                _ => ok(format!("trace: {trace}\nstate: {state}\nstatus: {status}\n")),
            }
        }
        Command::Sync { left, right, chans } => {
            no_csv(g, "sync")?;
            let load = |p: &Path| -> Result<_> {
                let v: Value = serde_json::from_str(&read(p)?).map_err(|e| Usage(format!("{}: {e}", p.display())))?;
                // accept the output of `run --format json` as well as a bare trace
                let v = v.get("trace").unwrap_or(&v);
                trace_from_json(v).map_err(|e| Usage(format!("{}: {e}", p.display())).into())
            };
            let (t1, t2) = (load(left)?, load(right)?);
            let cs = chans.split(',').map(str::trim).filter(|c| !c.is_empty()).map(String::from).collect();
            let cfg = SyncConfig { tol: g.tol, ..SyncConfig::default() };
            let res = sync_traces_with(&t1, &cs, &t2, &cfg)?;
            match g.format {
                Format::Json => ok(pretty_json(&Value::Array(res.iter().map(trace_to_json).collect()))),
                _ => ok(res.iter().map(|t| format!("{t}\n")).collect()),
            }
        }
        Command::Wp { file, post, unroll, invs, emit } => {
            no_csv(g, "wp")?;
            let p = parse_file(file)?;
            let q = assertion(post)?;
            let mut ann = Annotations::new();
            for spec in invs {
                let Some((i, a)) = spec.split_once(':') else { return usage(format!("--inv takes INDEX:ASSERTION, got {spec:?}")) };
                let i: usize = i.trim().parse().map_err(|_| Usage(format!("bad loop index in {spec:?}")))?;
                ann.insert(i, assertion(a)?);
            }
            let r = wp_with(&p, &q, &ann, &WpOptions { unroll: Some(*unroll) })?;
            if *emit {
                let mut vcs = vec![hcsp_core::vcgen::Vc { name: "pre".into(), formula: r.pre.clone() }];
                vcs.extend(r.side.iter().cloned());
                return ok(emit_vc(&vcs));
            }
            match g.format {
                Format::Json => ok(pretty_json(&json!({
                    "pre": r.pre.expand().to_string(),
                    "side": r.side.iter().map(|v| json!({"name": v.name, "formula": v.formula.expand().to_string()})).collect::<Vec<_>>(),
                }))),
                _ => {
                    let mut s = format!("{}\n", r.pre.expand());
                    for v in &r.side {
                        s.push_str(&format!("{}: {}\n", v.name, v.formula.expand()));
                    }
                    ok(s)
                }
            }
        }
        Command::Check { spec, mode } => {
            no_csv(g, "check")?;
            check(g, spec, *mode)
        }
        Command::Lie { field, poly: p, order } => {
            no_csv(g, "lie")?;
            let f = vector_field(field)?;
            let p = poly(p)?;
            let ls: Vec<_> = (0..=*order).map(|k| lie(&p, &f, k)).collect();
            match g.format {
                Format::Json => ok(pretty_json(&json!(ls.iter().map(|l| l.to_string()).collect::<Vec<_>>()))),
                _ => ok(ls.iter().enumerate().map(|(k, l)| format!("L^{k} = {l}\n")).collect()),
            }
        }
        Command::Diffinv { field, poly: p, sign, domain, exact } => {
            no_csv(g, "diffinv")?;
            let f = vector_field(field)?;
            let sign = match sign {
                Sign::Eq => InvSign::Eq,
                Sign::Ge => InvSign::Ge,
                Sign::Le => InvSign::Le,
            };
            let mode = if *exact { DiffInvMode::Exact } else { DiffInvMode::Guarded(grid(g)) };
            let v = check_diffinv(&poly(p)?, &f, &bexpr(domain)?, sign, &mode)?;
            verdict_outcome(g, &v)
        }
        Command::Dbx { field, poly: p, g: cof } => {
            no_csv(g, "dbx")?;
            let f = vector_field(field)?;
            let cof = cof.as_deref().map(poly).transpose()?;
            let v = check_dbx(&poly(p)?, &f, cof.as_ref())?;
            let (label, detail, bad) = match &v {
                DbxVerdict::Exact { g } => ("exact", format!("g = {g}"), false),
                DbxVerdict::Failed { remainder } => ("failed", format!("remainder = {remainder}"), true),
            };
            let text = match g.format {
                Format::Json => pretty_json(&json!({ "verdict": label, "detail": detail })),
                _ => format!("{label}: {detail}\n"),
            };
            Ok(Outcome { text, violation: bad })
        }
        Command::Barrier { field, poly: p, domain } => {
            no_csv(g, "barrier")?;
            let f = vector_field(field)?;
            let v = check_barrier(&poly(p)?, &f, &bexpr(domain)?, &grid(g))?;
            verdict_outcome(g, &v)
        }
        Command::Euler { field, init, until, h } => euler(g, field, init, *until, *h),
        Command::Cpdp { field, domain, post, init, eps, hs } => {
            let f = Arc::new(parse_field(field)?);
            let cfg = CpDpConfig { sim: sim(g), ..CpDpConfig::default() };
            let rep = cp_dp_experiment(
                &f,
                &bexpr(domain)?,
                &assertion(post)?,
                &parse_state(init)?,
                &parse_list(eps)?,
                &parse_list(hs)?,
                &cfg,
            )?;
            let bad = rep.cells.iter().any(|c| !c.agrees());
            let text = match g.format {
                Format::Csv => csv_rows(
                    &["eps", "h", "cp", "dp", "exit", "max_gap", "agrees"],
                    rep.cells.iter().map(|c| {
                        vec![
                            c.eps.to_string(),
                            c.h.to_string(),
                            truth(c.cp).into(),
                            truth(c.dp).into(),
                            c.exit.map(|x| x.to_string()).unwrap_or_default(),
                            c.max_gap.to_string(),
                            c.agrees().to_string(),
                        ]
                    }),
                )?,
                Format::Json => pretty_json(&json!({
                    "cp": truth(rep.cp),
                    "exit": rep.exit,
                    "cells": rep.cells.iter().map(|c| json!({
                        "eps": c.eps, "h": c.h, "cp": truth(c.cp), "dp": truth(c.dp),
                        "exit": c.exit, "max_gap": c.max_gap, "agrees": c.agrees(),
                    })).collect::<Vec<_>>(),
                })),
                Format::Text => {
                    let mut s = format!("CP = {} (exit {:?})\n", truth(rep.cp), rep.exit);
                    for c in &rep.cells {
                        s.push_str(&format!(
                            "eps={:<8} h={:<8} DP={:<7} gap={:.3e} {}\n",
                            c.eps,
                            c.h,
                            truth(c.dp),
                            c.max_gap,
                            if c.agrees() { "agree" } else { "DISAGREE" }
                        ));
                    }
                    s
                }
            };
            Ok(Outcome { text, violation: bad })
        }
        Command::Case { which: Case::Lander { rounds, v0, inv } } => lander(g, *rounds, *v0, inv.as_deref()),
        Command::Case { which: Case::Scheduler { rounds, seeds, priors } } => {
            scheduler(g, *rounds, seeds.as_deref(), priors.as_deref())
        }
    }
}

fn grid(g: &Global) -> GridConfig {
    GridConfig { tol: g.tol, ..GridConfig::default() }
}

fn verdict_outcome(g: &Global, v: &Verdict) -> Result<Outcome> {
    let detail = match v {
        Verdict::ProvedExact => String::new(),
        Verdict::NoCounterexample { warning } => warning.clone().unwrap_or_default(),
        Verdict::Refuted { point, value } => format!("at {point}: {value}"),
    };
    let text = match g.format {
        Format::Json => pretty_json(&json!({ "verdict": v.label(), "detail": detail })),
        _ if detail.is_empty() => format!("{}\n", v.label()),
        _ => format!("{}: {detail}\n", v.label()),
    };
    Ok(Outcome { text, violation: v.is_refuted() })
}

fn check(g: &Global, spec: &Path, mode: Mode) -> Result<Outcome> {
    let v: Value = serde_json::from_str(&read(spec)?).map_err(|e| Usage(format!("{}: {e}", spec.display())))?;
    let field = |k: &str| -> Result<&str> {
        v.get(k).and_then(Value::as_str).ok_or_else(|| Usage(format!("spec needs a string `{k}`")).into())
    };
    let p = parse_process(field("process")?).map_err(|e| Usage(e.to_string()))?;
    let pre = assertion(field("pre")?)?;
    let post = assertion(field("post")?)?;
    let states: Vec<State> = match v.get("states") {
        Some(Value::Array(xs)) => xs.iter().map(state_from_json).collect::<Result<_>>().map_err(|e| Usage(e.to_string()))?,
        _ => return usage("spec needs a list of `states`"),
    };
    let nums = |k: &str, d: Vec<f64>| -> Result<Vec<f64>> {
        match v.get(k) {
            None => Ok(d),
            Some(Value::Array(xs)) => xs.iter().map(|x| x.as_f64().ok_or_else(|| anyhow!("`{k}` holds numbers"))).collect(),
            Some(_) => usage(format!("`{k}` must be a list")),
        }
    };
    let values = nums("values", vec![0.0, 1.0, 2.0])?;
    let times = nums("times", vec![1.0])?;
    let ecfg = EvalConfig { values: Some(values.clone()), times: Some(times.clone()), tol: g.tol, ..EvalConfig::default() };
    let exec = exec_cfg(g);
    let mut delays = vec![Delay::Now];
    delays.extend(times.iter().map(|&t| Delay::After(t)));
    delays.push(Delay::Never);
    let modes: Vec<CheckMode> = match mode {
        Mode::Exact => {
            let budget = EnumBudget { values: values.clone(), delays, rep_bound: g.rep_bound.min(8), ..EnumBudget::default() };
            states.iter().map(|_| CheckMode::Exact { budget: budget.clone() }).collect()
        }
        Mode::Test => {
            let oracle = RandomConfig { values: hcsp_core::oracle::ValueDomain::Finite(values), delay_values: times, ..RandomConfig::default() };
            (0..states.len())
                .map(|i| CheckMode::Test {
                    trials: g.trials,
                    seed: g.seed.wrapping_add((i as u64) << 32),
                    oracle: oracle.clone(),
                })
                .collect()
        }
    };
    let jobs: Vec<(State, CheckMode)> = states.into_iter().zip(modes).collect();
    let parts = par_map(&jobs, |(s, m)| check_triple_at(&pre, &p, &post, s, m, &exec, &ecfg));
    let mut rep = TripleReport::default();
    for r in parts {
        rep.absorb(r?);
    }
    let text = match g.format {
        Format::Json => pretty_json(&json!({
            "valid": rep.valid(),
            "states": rep.states,
            "runs": rep.runs,
            "undecided": rep.undecided,
            "counterexamples": rep.counterexamples.iter().map(|c| json!({
                "init": state_to_json(&c.init),
                "state": state_to_json(&c.state),
                "trace": trace_to_json(&c.trace),
                "verdict": truth(c.verdict),
            })).collect::<Vec<_>>(),
        })),
        _ => {
            let mut s = format!(
                "{}: {} states, {} runs, {} undecided\n",
                if rep.valid() { "valid" } else { "INVALID" },
                rep.states,
                rep.runs,
                rep.undecided
            );
            for c in rep.counterexamples.iter().take(5) {
                s.push_str(&format!("counterexample from {}: final {} trace {}\n", c.init, c.state, c.trace));
            }
            s
        }
    };
    Ok(Outcome { text, violation: !rep.valid() })
}

fn euler(g: &Global, field: &str, init: &str, until: f64, h: f64) -> Result<Outcome> {
    let f = Arc::new(parse_field(field)?);
    let x0 = parse_state(init)?;
    if !(h > 0.0) || !(until >= 0.0) {
        return usage("--h must be positive and --until non-negative");
    }
    let path = euler_traj(&f, &x0, h, until)?;
    let exact = OdeSol::new(f.clone(), x0, g.step.min(h / 10.0))?;
    let vars: Vec<String> = f.iter().map(|(x, _)| x.clone()).collect();
    let mut rows = Vec::new();
    let mut max_err: f64 = 0.0;
    for i in 0..path.vertices().len() {
        let t = (i as f64 * h).min(until);
        let e = path.vertex(i);
        let x = exact.values_at(t)?;
        let mut row = vec![t.to_string()];
        for (k, v) in vars.iter().enumerate() {
            let ev = e.get(v)?;
            max_err = max_err.max((ev - x[k]).abs());
            row.push(ev.to_string());
            row.push(x[k].to_string());
        }
        rows.push(row);
    }
    let text = match g.format {
        Format::Csv => {
            let mut header = vec![String::from("t")];
            for v in &vars {
                header.push(format!("{v}_euler"));
                header.push(format!("{v}_exact"));
            }
            let h: Vec<&str> = header.iter().map(String::as_str).collect();
            csv_rows(&h, rows)?
        }
        Format::Json => pretty_json(&json!({
            "h": h, "until": until, "max_error": max_err,
            "final": rows.last().cloned().unwrap_or_default(),
            "closed_form": exact.is_closed_form(),
        })),
        Format::Text => format!("h = {h}, until = {until}: max |euler - exact| = {max_err:.6e}\n"),
    };
    Ok(Outcome { text, violation: false })
}

fn lander(g: &Global, rounds: usize, v0: Option<f64>, inv: Option<&str>) -> Result<Outcome> {
    if rounds == 0 {
        return usage("--rounds must be at least 1");
    }
    let mut cfg = LanderConfig { sim: sim(g), ..LanderConfig::default() };
    if let Some(v) = v0 {
        cfg.init.set("v", v);
    }
    if let Some(src) = inv {
        cfg.inv = bexpr(src)?;
    }
    let r = lander_check(rounds, &cfg)?;
    let text = match g.format {
        Format::Csv => csv_rows(
            &["t", "v", "w"],
            r.series.iter().map(|(t, v, w)| vec![t.to_string(), v.to_string(), w.to_string()]),
        )?,
        Format::Json => pretty_json(&json!({
            "rounds": r.rounds,
            "safe": r.safe(),
            "samples": r.series.len(),
            "v_min": r.v_range.0,
            "v_max": r.v_range.1,
            "shape_ok": r.shape_ok,
            "violations": r.violations.iter().map(|v| json!({"t": v.time, "v": v.v})).collect::<Vec<_>>(),
            "inv_violation": r.inv_time.map(|t| json!({"t": t})),
        })),
        Format::Text => {
            let mut s = format!(
                "{} rounds, {} samples, v in [{:.6}, {:.6}], round shape {}\n",
                r.rounds,
                r.series.len(),
                r.v_range.0,
                r.v_range.1,
                if r.shape_ok { "ok" } else { "BROKEN" }
            );
            match r.violations.first() {
                Some(v) => s.push_str(&format!("VIOLATION at t = {}: v = {}\n", v.time, v.v)),
                None => s.push_str(&format!("no violation in {} samples\n", r.series.len())),
            }
            if let Some(t) = r.inv_time {
                s.push_str(&format!("invariant fails at t = {t}\n"));
            }
            s
        }
    };
    Ok(Outcome { text, violation: !r.safe() || !r.shape_ok })
}

fn scheduler(g: &Global, rounds: usize, seeds: Option<&str>, priors: Option<&str>) -> Result<Outcome> {
    let seeds: Vec<u64> = match seeds {
        None => vec![g.seed],
        Some(s) => s
            .split(',')
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse().map_err(|_| Usage(format!("bad seed {x:?}")).into()))
            .collect::<Result<_>>()?,
    };
    let mut cfg = SchedulerConfig { sim: sim(g), ..SchedulerConfig::default() };
    if let Some(p) = priors {
        let ps = parse_list(p)?;
        if ps.len() != cfg.modules.len() {
            return usage(format!("need {} priorities", cfg.modules.len()));
        }
        for (m, p) in cfg.modules.iter_mut().zip(ps) {
            m.prior = p;
        }
    }
    let runs = par_map(&seeds, |&s| scheduler_check(rounds, &[s], &cfg));
    let mut rep = SchedulerReport::default();
    for r in runs {
        rep.runs.extend(r?.runs);
    }
    let text = match g.format {
        Format::Csv => csv_rows(
            &["seed", "rounds", "time", "checks", "violations"],
            rep.runs.iter().map(|r| {
                vec![r.seed.to_string(), r.rounds.to_string(), r.time.to_string(), r.checks.to_string(), r.violations.len().to_string()]
            }),
        )?,
        Format::Json => pretty_json(&json!({
            "ok": rep.ok(),
            "runs": rep.runs.iter().map(|r| json!({
                "seed": r.seed, "rounds": r.rounds, "time": r.time, "checks": r.checks,
                "violations": r.violations.iter().map(|v| json!({
                    "property": v.property.label(), "t": v.time, "detail": v.detail,
                    "state": state_to_json(&v.state),
                })).collect::<Vec<_>>(),
                "trace": if r.violations.is_empty() { Value::Null } else { trace_to_json(&r.trace) },
            })).collect::<Vec<_>>(),
        })),
        Format::Text => {
            let mut s = String::new();
            for r in &rep.runs {
                s.push_str(&format!(
                    "seed {}: {} rounds, t = {:.3}, {} checks, {} violations\n",
                    r.seed,
                    r.rounds,
                    r.time,
                    r.checks,
                    r.violations.len()
                ));
                for v in &r.violations {
                    s.push_str(&format!("  {} at t = {}: {} ({})\n", v.property.label(), v.time, v.detail, v.state));
                }
                if !r.violations.is_empty() {
                    s.push_str(&format!("  trace: {}\n", r.trace));
                }
            }
            s
        }
    };
    Ok(Outcome { text, violation: !rep.ok() })
}

/// Runs the CLI and returns the process exit code.
pub fn run(args: impl IntoIterator<Item = std::ffi::OsString>) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let written = match &cli.global.out {
                Some(p) => fs::write(p, &out.text).with_context(|| format!("writing {}", p.display())),
                None => std::io::stdout().write_all(out.text.as_bytes()).map_err(Into::into),
            };
            if let Err(e) = written {
                eprintln!("error: {e:#}");
                return 2;
            }
            i32::from(out.violation)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
