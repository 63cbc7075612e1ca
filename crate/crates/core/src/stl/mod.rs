//! Signals, STL formulas, parsing and robustness.

mod formula;
mod parser;
mod robustness;
mod signal;
mod term;

pub use formula::{Comparator, Formula, Interval, Predicate};
pub use parser::{parse_pstl, parse_stl, parse_term, ParseError};
pub use robustness::{robustness, robustness_trace, satisfies, EvalError, RobustnessValue};
pub use signal::{Signal, SignalError};
pub use term::Term;
