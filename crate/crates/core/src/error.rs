use alloc::string::String;

/// Errors raised by parsing, execution and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("state domains overlap on `{0}`")]
    Overlap(String),
    #[error("division by zero in `{0}`")]
    DivZero(String),
    #[error("integrator failure: {0}")]
    Integrator(String),
    #[error("trajectory evaluated outside its domain: {0}")]
    Domain(String),
    #[error("cannot extend a trace that ends in deadlock or an infinite wait")]
    Extend,
    #[error("oracle: {0}")]
    Oracle(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("stuck configuration: {0}")]
    Stuck(String),
    #[error("ill-formed input: {0}")]
    Invalid(String),
}

pub type Result<T> = core::result::Result<T, Error>;
