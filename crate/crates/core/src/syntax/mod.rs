//! HCSP abstract syntax, concrete grammar, printer and static checks.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! proc  := choice [ "||[" chans "]||" proc ]
//! choice:= seq [ "++" choice ]
//! seq   := atom [ ";" seq ]
//! atom  := "skip" | "wait" expr | x ":=" expr | ch "?" x | ch "!" expr
//!        | "(" proc ")" | "(" proc ")*"
//!        | "if" bexpr "then" proc "else" proc "endif"
//!        | "<" x_dot "=" expr {"," ...} "&" bexpr ">" [ "|>" "[](" branches ")" ]
//! ```
//!
//! `//` starts a comment. Binary operators associate to the right.

mod expr;
mod lexer;
mod parser;
mod pretty;
mod process;
mod wellformed;

pub use expr::{BExpr, BinOp, CmpOp, Expr, Func, Num};
pub use lexer::{tokenize, Cursor, Tok, Token};
pub use parser::{bexpr as parse_bexpr_at, cmp_op, expr as parse_expr_at, parse_bexpr, parse_expr, parse_process, KEYWORDS};
pub use pretty::pretty;
pub use process::{Branch, ChanSet, Comm, CommDir, Dir, Field, Ode, Process};
pub use wellformed::check_wellformed;
