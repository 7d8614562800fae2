//! Executable semantics and verification tooling for Hybrid CSP (HCSP).
//!
//! The crate is `no_std` with `alloc`. It covers the process syntax, the
//! trace-based big-step and small-step semantics, trace synchronization,
//! an assertion language over states and traces, weakest liberal
//! preconditions, Lie-derivative invariant checks, Euler discretization and
//! two reference models (a lunar lander and a priority scheduler).
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod math;

pub mod assertion;
pub mod casestudies;
pub mod diffinv;
pub mod discretize;
pub mod exec_big;
pub mod exec_small;
pub mod gen;
pub mod oracle;
pub mod poly;
pub mod runtime;
pub mod sync;
pub mod syntax;
pub mod vcgen;

pub use error::{Error, Result};
pub use runtime::{CommDir, Dir, Event, ReadySet, State, Trace, Trajectory};
pub use syntax::{parse_process, pretty, BExpr, Expr, Process};
