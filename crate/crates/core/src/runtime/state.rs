use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;

use crate::{Error, Result};

/// Program state: variable name to real value.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct State(BTreeMap<String, f64>);

impl State {
    pub fn new() -> Self {
        State(BTreeMap::new())
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Self {
        State(pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect())
    }

    pub fn get(&self, x: &str) -> Result<f64> {
        self.0.get(x).copied().ok_or_else(|| Error::Unbound(x.to_string()))
    }

    pub fn try_get(&self, x: &str) -> Option<f64> {
        self.0.get(x).copied()
    }

    pub fn contains(&self, x: &str) -> bool {
        self.0.contains_key(x)
    }

    pub fn set(&mut self, x: &str, v: f64) {
        match self.0.get_mut(x) {
            Some(slot) => *slot = v,
            None => {
                self.0.insert(x.to_string(), v);
            }
        }
    }

    pub fn with(&self, x: &str, v: f64) -> State {
        let mut s = self.clone();
        s.set(x, v);
        s
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(|k| k.as_str())
    }

    /// Disjoint union.
    pub fn merge(&self, other: &State) -> Result<State> {
        let mut out = self.0.clone();
        for (k, v) in &other.0 {
            if out.insert(k.clone(), *v).is_some() {
                return Err(Error::Overlap(k.clone()));
            }
        }
        Ok(State(out))
    }

    /// Largest per-variable gap; infinite when the domains differ.
    pub fn max_gap(&self, other: &State) -> f64 {
        if self.0.len() != other.0.len() {
            return f64::INFINITY;
        }
        let mut m: f64 = 0.0;
        for ((k1, v1), (k2, v2)) in self.0.iter().zip(other.0.iter()) {
            if k1 != k2 {
                return f64::INFINITY;
            }
            if v1 != v2 {
                m = m.max((v1 - v2).abs());
            }
        }
        m
    }

    /// Gap measured relative to magnitude, for values that may be large.
    pub fn close_to(&self, other: &State, tol: f64) -> bool {
        if self.0.len() != other.0.len() {
            return false;
        }
        self.0.iter().zip(other.0.iter()).all(|((k1, v1), (k2, v2))| {
            k1 == k2 && (v1 == v2 || (v1 - v2).abs() <= tol * (1.0 + v1.abs().max(v2.abs())))
        })
    }
}

impl FromIterator<(String, f64)> for State {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        State(iter.into_iter().collect())
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{k}: {v}")?;
        }
        write!(f, "}}")
    }
}

/// `s1 ⊎ s2`.
pub fn merge_states(s1: &State, s2: &State) -> Result<State> {
    s1.merge(s2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merge_is_disjoint_union() {
        let a = State::from_pairs(&[("x", 1.0)]);
        let b = State::from_pairs(&[("y", 2.0)]);
        assert_eq!(merge_states(&a, &b).unwrap(), State::from_pairs(&[("x", 1.0), ("y", 2.0)]));
        assert_eq!(merge_states(&State::new(), &a).unwrap(), a);
        assert_eq!(merge_states(&a, &State::from_pairs(&[("x", 2.0)])), Err(Error::Overlap("x".into())));
    }

    #[test]
    fn unbound_lookup_errors() {
        assert_eq!(State::new().get("q"), Err(Error::Unbound("q".into())));
    }
}
