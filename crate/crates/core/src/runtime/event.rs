use alloc::collections::BTreeSet;
use alloc::vec::Vec;
use core::fmt;

use super::traj::Trajectory;
use crate::syntax::{CommDir, Dir};
use crate::{Error, Result};

pub type ReadySet = BTreeSet<CommDir>;

/// False iff some channel has both its input and output end waiting.
pub fn compat(r1: &ReadySet, r2: &ReadySet) -> bool {
    !r1.iter().any(|cd| cd.dir != Dir::Sync && r2.contains(&cd.dual()))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Event {
    Comm { cd: CommDir, value: f64 },
    /// `dur` may be infinite.
    Wait { dur: f64, traj: Trajectory, rdy: ReadySet },
}

impl Event {
    pub fn comm(ch: &str, dir: Dir, value: f64) -> Event {
        Event::Comm { cd: CommDir::new(ch, dir), value }
    }

    pub fn wait(dur: f64, traj: Trajectory, rdy: ReadySet) -> Event {
        Event::Wait { dur, traj, rdy }
    }

    pub fn is_infinite_wait(&self) -> bool {
        matches!(self, Event::Wait { dur, .. } if dur.is_infinite())
    }

    pub fn duration(&self) -> f64 {
        match self {
            Event::Wait { dur, .. } => *dur,
            Event::Comm { .. } => 0.0,
        }
    }

    pub fn approx_eq(&self, other: &Event, tol: f64) -> bool {
        match (self, other) {
            (Event::Comm { cd: a, value: v }, Event::Comm { cd: b, value: w }) => {
                a == b && (v == w || (v - w).abs() <= tol * (1.0 + v.abs()))
            }
            (Event::Wait { dur: d1, traj: p1, rdy: r1 }, Event::Wait { dur: d2, traj: p2, rdy: r2 }) => {
                r1 == r2
                    && (d1 == d2 || (d1 - d2).abs() <= tol * (1.0 + d1.abs()))
                    && p1.approx_eq(p2, d1.min(*d2), tol)
            }
            _ => false,
        }
    }

    pub fn mirror(&self) -> Event {
        match self {
            Event::Wait { dur, traj, rdy } => Event::Wait { dur: *dur, traj: traj.mirror(), rdy: rdy.clone() },
            e => e.clone(),
        }
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Comm { cd, value } => write!(f, "<{cd}, {value}>"),
            Event::Wait { dur, traj, rdy } => {
                write!(f, "<{dur}, {traj}, {{")?;
                for (i, r) in rdy.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{r}")?;
                }
                write!(f, "}}>")
            }
        }
    }
}

/// Sequence of generalized events, optionally closed by deadlock.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub events: Vec<Event>,
    pub delta: bool,
}

impl Trace {
    pub fn new() -> Self {
        Trace::default()
    }

    pub fn from_events(events: Vec<Event>) -> Self {
        Trace { events, delta: false }
    }

    pub fn deadlock(events: Vec<Event>) -> Self {
        Trace { events, delta: true }
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty() && !self.delta
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    /// No further events may be appended.
    pub fn is_closed(&self) -> bool {
        self.delta || self.events.last().is_some_and(Event::is_infinite_wait)
    }

    pub fn push(&mut self, e: Event) -> Result<()> {
        if self.is_closed() {
            return Err(Error::Extend);
        }
        self.events.push(e);
        Ok(())
    }

    pub fn concat(&self, other: &Trace) -> Result<Trace> {
        if other.events.is_empty() && !other.delta {
            return Ok(self.clone());
        }
        if self.is_closed() {
            return Err(Error::Extend);
        }
        let mut events = self.events.clone();
        events.extend(other.events.iter().cloned());
        Ok(Trace { events, delta: other.delta })
    }

    pub fn total_duration(&self) -> f64 {
        self.events.iter().map(Event::duration).sum()
    }

    pub fn comm_events(&self) -> impl Iterator<Item = (&CommDir, f64)> {
        self.events.iter().filter_map(|e| match e {
            Event::Comm { cd, value } => Some((cd, *value)),
            _ => None,
        })
    }

    pub fn approx_eq(&self, other: &Trace, tol: f64) -> bool {
        self.delta == other.delta
            && self.events.len() == other.events.len()
            && self.events.iter().zip(&other.events).all(|(a, b)| a.approx_eq(b, tol))
    }

    pub fn mirror(&self) -> Trace {
        Trace { events: self.events.iter().map(Event::mirror).collect(), delta: self.delta }
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.events.is_empty() && !self.delta {
            return write!(f, "ε");
        }
        for (i, e) in self.events.iter().enumerate() {
            if i > 0 {
                write!(f, " ^ ")?;
            }
            write!(f, "{e}")?;
        }
        if self.delta {
            if !self.events.is_empty() {
                write!(f, " ^ ")?;
            }
            write!(f, "δ")?;
        }
        Ok(())
    }
}

/// `t1 ⌢ t2`.
pub fn trace_concat(t1: &Trace, t2: &Trace) -> Result<Trace> {
    t1.concat(t2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::State;

    fn rs(items: &[(&str, Dir)]) -> ReadySet {
        items.iter().map(|(c, d)| CommDir::new(c, *d)).collect()
    }

    #[test]
    fn compat_examples() {
        assert!(!compat(&rs(&[("ch", Dir::Out)]), &rs(&[("ch", Dir::In)])));
        assert!(compat(&ReadySet::new(), &rs(&[("ch", Dir::In)])));
        assert!(compat(&rs(&[("a", Dir::Out)]), &rs(&[("b", Dir::In)])));
    }

    #[test]
    fn concat_units_and_closure() {
        let t = Trace::from_events(alloc::vec![Event::comm("ch", Dir::Out, 3.0)]);
        assert_eq!(trace_concat(&Trace::new(), &t).unwrap(), t);
        assert_eq!(trace_concat(&t, &Trace::new()).unwrap(), t);
        let inf = Trace::from_events(alloc::vec![Event::wait(
            f64::INFINITY,
            Trajectory::Const(State::new()),
            ReadySet::new()
        )]);
        assert_eq!(trace_concat(&inf, &t), Err(Error::Extend));
        assert_eq!(trace_concat(&Trace::deadlock(alloc::vec![]), &t), Err(Error::Extend));
    }
}
