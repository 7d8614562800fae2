//! Assertions over states and traces.
//!
//! Formulas combine real comparisons, trace equalities and synchronization
//! atoms with connectives and quantifiers over reals, times, traces and
//! trajectories. `γ` stands for the trace accumulated so far.
//!
//! Substitution comes in two forms. [`Assertion::subst_var`] and friends
//! rewrite eagerly; [`Assertion::with_subst`] records the substitution and
//! the evaluator applies it to the environment instead, which keeps
//! preconditions of long programs linear in size.

mod ast;
pub mod builders;
mod eval;
mod parse;
mod print;
mod subst;

pub use ast::*;
pub use eval::{eval, eval_term, eval_trace, EvalConfig, Truth, Valuation, Value};
pub use parse::{parse_assertion, parse_term, parse_trace, KEYWORDS};
pub use print::{term_to_sexpr, to_sexpr};
