//! Linear and mixed-integer programming, and the encoding of requirement
//! adaptation as a MILP.

mod adapt;
mod bnb;
mod encode;
mod expr;
mod oracle;
mod problem;
mod simplex;

pub use adapt::{
    mode_box, planning_horizon, solve_adaptation, time_candidates, time_grid, AdaptMode, AdaptRequest, SolveError,
    SolveResult, SolveStats,
};
pub use bnb::{branch_and_bound, branch_and_bound_from, BnbOptions, Budget, MilpSolution, MilpStatus};
pub use encode::{encode_robustness, Bounded, EncodeError, EncodeStats, Encoder, ParamValue, Side, SignalVars};
pub use expr::{LinExpr, VarId};
pub use oracle::{exhaustive_adaptation, OracleResult};
pub use problem::{Constraint, Definition, MilpProblem, ObjectiveSense, ProblemError, Sense, Var, VarKind};
pub use simplex::{solve_lp, LpSolution, LpStatus};
