//! Resolution of nondeterministic choices.
//!
//! Every query carries the path of the sequential component asking: `""`
//! for the root and one `0`/`1` digit per parallel composition descended.
//! Choices are logged per path, so a log recorded by one executor can be
//! replayed by another that visits the components in a different order.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::CommDir;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Delay {
    Now,
    After(f64),
    Never,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IntChoice {
    Fire { branch: usize, at: f64 },
    /// Run until the domain fails.
    Boundary,
    /// Evolve forever.
    Never,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Choice {
    Branch(bool),
    RepCount(usize),
    Value(f64),
    Delay(Delay),
    Interrupt(IntChoice),
    Sync(usize),
    Step(f64),
    Move(usize),
}

impl Choice {
    pub fn kind(&self) -> &'static str {
        match self {
            Choice::Branch(_) => "branch",
            Choice::RepCount(_) => "rep",
            Choice::Value(_) => "value",
            Choice::Delay(_) => "delay",
            Choice::Interrupt(_) => "interrupt",
            Choice::Sync(_) => "sync",
            Choice::Step(_) => "step",
            Choice::Move(_) => "move",
        }
    }
}

pub type ChoiceLog = BTreeMap<String, Vec<Choice>>;

const FALLBACK: &str = "\u{0}fallback";

fn is_fallback(e: &Error) -> bool {
    matches!(e, Error::Oracle(m) if m == FALLBACK)
}

pub trait Oracle {
    /// `true` picks the left operand of `++`.
    fn choose_branch(&mut self, path: &str) -> Result<bool>;
    fn choose_rep_count(&mut self, path: &str, max: usize) -> Result<usize>;
    fn choose_input_value(&mut self, path: &str, ch: &str) -> Result<f64>;
    fn choose_comm_delay(&mut self, path: &str, cd: &CommDir) -> Result<Delay>;
    /// `n` branches; `boundary` is the domain exit time if there is one.
    fn choose_interrupt(&mut self, path: &str, n: usize, boundary: Option<f64>) -> Result<IntChoice>;
    fn choose_sync(&mut self, path: &str, n: usize) -> Result<usize>;
    /// Length of the next delay step, at most `max` (which may be infinite).
    fn choose_step(&mut self, path: &str, max: f64) -> Result<f64>;
    fn choose_move(&mut self, path: &str, n: usize) -> Result<usize>;
    /// The input value a replayed log will give next at `path`, if known.
    fn peek_value(&self, _path: &str) -> Option<f64> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ValueDomain {
    Finite(Vec<f64>),
    Range(f64, f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RepPolicy {
    Uniform,
    Max,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RandomConfig {
    pub values: ValueDomain,
    /// Weights for now / after / never.
    pub delay_weights: [f64; 3],
    /// Finite delays are drawn from here when nonempty, else from `(0, max_delay]`.
    pub delay_values: Vec<f64>,
    pub max_delay: f64,
    pub rep: RepPolicy,
    /// Probability that an interrupt fires before its boundary.
    pub fire_prob: f64,
    /// Probability that an unbounded interrupt or ODE never stops.
    pub never_prob: f64,
    /// Probability that a delay step covers the whole allowance.
    pub full_step_prob: f64,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            values: ValueDomain::Finite(alloc::vec![0.0, 1.0, 2.0]),
            delay_weights: [0.6, 0.3, 0.1],
            delay_values: Vec::new(),
            max_delay: 2.0,
            rep: RepPolicy::Uniform,
            fire_prob: 0.5,
            never_prob: 0.1,
            full_step_prob: 0.5,
        }
    }
}

pub struct RandomOracle {
    rng: ChaCha8Rng,
    pub cfg: RandomConfig,
}

impl RandomOracle {
    pub fn new(seed: u64) -> Self {
        RandomOracle::with_config(seed, RandomConfig::default())
    }

    pub fn with_config(seed: u64, cfg: RandomConfig) -> Self {
        RandomOracle { rng: ChaCha8Rng::seed_from_u64(seed), cfg }
    }

    fn positive_delay(&mut self) -> f64 {
        if !self.cfg.delay_values.is_empty() {
            let i = self.rng.gen_range(0..self.cfg.delay_values.len());
            return self.cfg.delay_values[i];
        }
        // (0, max]
        self.cfg.max_delay * (1.0 - self.rng.gen::<f64>())
    }
}

impl Oracle for RandomOracle {
    fn choose_branch(&mut self, _: &str) -> Result<bool> {
        Ok(self.rng.gen_bool(0.5))
    }

    fn choose_rep_count(&mut self, _: &str, max: usize) -> Result<usize> {
        Ok(match self.cfg.rep {
            RepPolicy::Max => max,
            RepPolicy::Uniform => self.rng.gen_range(0..=max),
        })
    }

    fn choose_input_value(&mut self, _: &str, _: &str) -> Result<f64> {
        Ok(match &self.cfg.values {
            ValueDomain::Finite(vs) if !vs.is_empty() => vs[self.rng.gen_range(0..vs.len())],
            ValueDomain::Finite(_) => 0.0,
            ValueDomain::Range(lo, hi) => lo + (hi - lo) * self.rng.gen::<f64>(),
        })
    }

    fn choose_comm_delay(&mut self, _: &str, _: &CommDir) -> Result<Delay> {
        let [a, b, c] = self.cfg.delay_weights;
        let u = self.rng.gen::<f64>() * (a + b + c);
        Ok(if u < a {
            Delay::Now
        } else if u < a + b {
            Delay::After(self.positive_delay())
        } else {
            Delay::Never
        })
    }

    fn choose_interrupt(&mut self, _: &str, n: usize, boundary: Option<f64>) -> Result<IntChoice> {
        match boundary {
            Some(d) => {
                if n > 0 && (d == 0.0 || self.rng.gen_bool(self.cfg.fire_prob)) {
                    let at = if d == 0.0 { 0.0 } else { d * (1.0 - self.rng.gen::<f64>()) };
                    let branch = self.rng.gen_range(0..n);
                    Ok(IntChoice::Fire { branch, at })
                } else {
                    Ok(IntChoice::Boundary)
                }
            }
            None => {
                if n == 0 || self.rng.gen_bool(self.cfg.never_prob) {
                    Ok(IntChoice::Never)
                } else {
                    let at = self.positive_delay();
                    Ok(IntChoice::Fire { branch: self.rng.gen_range(0..n), at })
                }
            }
        }
    }

    fn choose_sync(&mut self, _: &str, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::Oracle("no synchronization candidates".into()));
        }
        Ok(self.rng.gen_range(0..n))
    }

    fn choose_step(&mut self, _: &str, max: f64) -> Result<f64> {
        if max.is_finite() && self.rng.gen_bool(self.cfg.full_step_prob) {
            return Ok(max);
        }
        let cap = if max.is_finite() { max } else { self.cfg.max_delay };
        Ok(cap * (1.0 - self.rng.gen::<f64>()))
    }

    fn choose_move(&mut self, _: &str, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::Oracle("no moves".into()));
        }
        Ok(self.rng.gen_range(0..n))
    }
}

/// Replays a recorded log. Each path is consumed in order.
#[derive(Clone, Debug, Default)]
pub struct ReplayOracle {
    log: ChoiceLog,
    pos: BTreeMap<String, usize>,
    fallback: bool,
}

impl ReplayOracle {
    pub fn new(log: ChoiceLog) -> Self {
        ReplayOracle { log, pos: BTreeMap::new(), fallback: false }
    }

    /// Past the end of a path's log, answer with fixed defaults instead of
    /// failing: right branch, zero repetitions, value 0, block forever,
    /// first candidate, full steps.
    pub fn with_fallback(log: ChoiceLog) -> Self {
        ReplayOracle { log, pos: BTreeMap::new(), fallback: true }
    }

    fn next(&mut self, path: &str, kind: &str) -> Result<Choice> {
        let i = self.pos.entry(path.to_string()).or_insert(0);
        let Some(c) = self.log.get(path).and_then(|v| v.get(*i)).cloned() else {
            if self.fallback {
                return Err(Error::Oracle(String::from(FALLBACK)));
            }
            return Err(Error::Oracle(alloc::format!("log exhausted at path `{path}` wanting {kind}")));
        };
        if c.kind() != kind {
            return Err(Error::Oracle(alloc::format!("path `{path}`: log has {} where {kind} is needed", c.kind())));
        }
        *i += 1;
        Ok(c)
    }

    /// True when every recorded choice has been consumed.
    pub fn exhausted(&self) -> bool {
        self.log.iter().all(|(p, v)| self.pos.get(p).copied().unwrap_or(0) >= v.len())
    }

    pub fn remaining(&self, path: &str) -> &[Choice] {
        let i = self.pos.get(path).copied().unwrap_or(0);
        self.log.get(path).map(|v| &v[i.min(v.len())..]).unwrap_or(&[])
    }
}

impl Oracle for ReplayOracle {
    fn choose_branch(&mut self, path: &str) -> Result<bool> {
        match self.next(path, "branch") {
            Ok(Choice::Branch(b)) => Ok(b),
            Err(e) if is_fallback(&e) => Ok(false),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_rep_count(&mut self, path: &str, max: usize) -> Result<usize> {
        match self.next(path, "rep") {
            Ok(Choice::RepCount(n)) if n <= max => Ok(n),
            Ok(Choice::RepCount(n)) => Err(Error::Oracle(alloc::format!("rep count {n} above bound {max}"))),
            Err(e) if is_fallback(&e) => Ok(0),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_input_value(&mut self, path: &str, _: &str) -> Result<f64> {
        match self.next(path, "value") {
            Ok(Choice::Value(v)) => Ok(v),
            Err(e) if is_fallback(&e) => Ok(0.0),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_comm_delay(&mut self, path: &str, _: &CommDir) -> Result<Delay> {
        match self.next(path, "delay") {
            Ok(Choice::Delay(d)) => Ok(d),
            Err(e) if is_fallback(&e) => Ok(Delay::Never),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_interrupt(&mut self, path: &str, _: usize, boundary: Option<f64>) -> Result<IntChoice> {
        match self.next(path, "interrupt") {
            Ok(Choice::Interrupt(c)) => Ok(c),
            Err(e) if is_fallback(&e) => {
                Ok(if boundary.is_some() { IntChoice::Boundary } else { IntChoice::Never })
            }
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_sync(&mut self, path: &str, n: usize) -> Result<usize> {
        match self.next(path, "sync") {
            Ok(Choice::Sync(i)) if i < n => Ok(i),
            Ok(Choice::Sync(i)) => Err(Error::Oracle(alloc::format!("sync index {i} of {n}"))),
            Err(e) if is_fallback(&e) => Ok(0),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_step(&mut self, path: &str, max: f64) -> Result<f64> {
        match self.next(path, "step") {
            Ok(Choice::Step(d)) => Ok(d),
            Err(e) if is_fallback(&e) => Ok(max),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn choose_move(&mut self, path: &str, n: usize) -> Result<usize> {
        match self.next(path, "move") {
            Ok(Choice::Move(i)) if i < n => Ok(i),
            Ok(Choice::Move(i)) => Err(Error::Oracle(alloc::format!("move index {i} of {n}"))),
            Err(e) if is_fallback(&e) => Ok(0),
            Err(e) => Err(e),
            _ => unreachable!(),
        }
    }

    fn peek_value(&self, path: &str) -> Option<f64> {
        match self.remaining(path).first() {
            Some(Choice::Value(v)) => Some(*v),
            _ => None,
        }
    }
}

/// Wraps an oracle and records every answer.
pub struct Recorder<O> {
    pub inner: O,
    pub log: ChoiceLog,
}

impl<O: Oracle> Recorder<O> {
    pub fn new(inner: O) -> Self {
        Recorder { inner, log: ChoiceLog::new() }
    }

    fn rec(&mut self, path: &str, c: Choice) {
        self.log.entry(path.to_string()).or_default().push(c);
    }
}

impl<O: Oracle> Oracle for Recorder<O> {
    fn choose_branch(&mut self, path: &str) -> Result<bool> {
        let v = self.inner.choose_branch(path)?;
        self.rec(path, Choice::Branch(v));
        Ok(v)
    }

    fn choose_rep_count(&mut self, path: &str, max: usize) -> Result<usize> {
        let v = self.inner.choose_rep_count(path, max)?;
        self.rec(path, Choice::RepCount(v));
        Ok(v)
    }

    fn choose_input_value(&mut self, path: &str, ch: &str) -> Result<f64> {
        let v = self.inner.choose_input_value(path, ch)?;
        self.rec(path, Choice::Value(v));
        Ok(v)
    }

    fn choose_comm_delay(&mut self, path: &str, cd: &CommDir) -> Result<Delay> {
        let v = self.inner.choose_comm_delay(path, cd)?;
        self.rec(path, Choice::Delay(v));
        Ok(v)
    }

    fn choose_interrupt(&mut self, path: &str, n: usize, boundary: Option<f64>) -> Result<IntChoice> {
        let v = self.inner.choose_interrupt(path, n, boundary)?;
        self.rec(path, Choice::Interrupt(v));
        Ok(v)
    }

    fn choose_sync(&mut self, path: &str, n: usize) -> Result<usize> {
        let v = self.inner.choose_sync(path, n)?;
        self.rec(path, Choice::Sync(v));
        Ok(v)
    }

    fn choose_step(&mut self, path: &str, max: f64) -> Result<f64> {
        let v = self.inner.choose_step(path, max)?;
        self.rec(path, Choice::Step(v));
        Ok(v)
    }

    fn choose_move(&mut self, path: &str, n: usize) -> Result<usize> {
        let v = self.inner.choose_move(path, n)?;
        self.rec(path, Choice::Move(v));
        Ok(v)
    }

    fn peek_value(&self, path: &str) -> Option<f64> {
        self.inner.peek_value(path)
    }
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn choose_branch(&mut self, path: &str) -> Result<bool> {
        (**self).choose_branch(path)
    }
    fn choose_rep_count(&mut self, path: &str, max: usize) -> Result<usize> {
        (**self).choose_rep_count(path, max)
    }
    fn choose_input_value(&mut self, path: &str, ch: &str) -> Result<f64> {
        (**self).choose_input_value(path, ch)
    }
    fn choose_comm_delay(&mut self, path: &str, cd: &CommDir) -> Result<Delay> {
        (**self).choose_comm_delay(path, cd)
    }
    fn choose_interrupt(&mut self, path: &str, n: usize, boundary: Option<f64>) -> Result<IntChoice> {
        (**self).choose_interrupt(path, n, boundary)
    }
    fn choose_sync(&mut self, path: &str, n: usize) -> Result<usize> {
        (**self).choose_sync(path, n)
    }
    fn choose_step(&mut self, path: &str, max: f64) -> Result<f64> {
        (**self).choose_step(path, max)
    }
    fn choose_move(&mut self, path: &str, n: usize) -> Result<usize> {
        (**self).choose_move(path, n)
    }
    fn peek_value(&self, path: &str) -> Option<f64> {
        (**self).peek_value(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recorded_choices_replay_identically() {
        let mut rec = Recorder::new(RandomOracle::new(7));
        let cd = CommDir::output("c");
        let mut first = Vec::new();
        for _ in 0..20 {
            first.push(Choice::Branch(rec.choose_branch("0").unwrap()));
            first.push(Choice::Delay(rec.choose_comm_delay("1", &cd).unwrap()));
            first.push(Choice::RepCount(rec.choose_rep_count("0", 4).unwrap()));
        }
        let mut rep = ReplayOracle::new(rec.log.clone());
        let mut second = Vec::new();
        for _ in 0..20 {
            second.push(Choice::Branch(rep.choose_branch("0").unwrap()));
            second.push(Choice::Delay(rep.choose_comm_delay("1", &cd).unwrap()));
            second.push(Choice::RepCount(rep.choose_rep_count("0", 4).unwrap()));
        }
        assert_eq!(first, second);
        assert!(rep.exhausted());
    }

    #[test]
    fn replay_rejects_wrong_kind_and_exhaustion() {
        let mut log = ChoiceLog::new();
        log.insert(String::new(), alloc::vec![Choice::Branch(true)]);
        let mut rep = ReplayOracle::new(log);
        assert!(rep.choose_rep_count("", 3).is_err());
        assert!(rep.choose_branch("").unwrap());
        assert!(rep.choose_branch("").is_err());
    }

    #[test]
    fn random_interrupt_respects_boundary() {
        let mut o = RandomOracle::new(1);
        for _ in 0..200 {
            match o.choose_interrupt("", 2, Some(1.5)).unwrap() {
                IntChoice::Fire { branch, at } => assert!(branch < 2 && at > 0.0 && at <= 1.5),
                IntChoice::Boundary => {}
                IntChoice::Never => panic!("never with a boundary"),
            }
        }
    }
}
