//! Requirement-driven graceful degradation and recovery for cyber-physical systems.
//!
//! Requirements are parametric Signal Temporal Logic formulas. When a degradation
//! event arrives the runtime weakens the current requirement as little as possible;
//! after a restoration event it strengthens it as far as the predicted behaviour
//! allows. Both searches are solved as mixed-integer linear programs over a linear
//! environment model, with a built-in branch-and-bound solver.
//!
//! The numeric core (signals, formulas, robustness, LP/MILP) is generic over
//! [`Scalar`]; the aliases below fix it to `f64`, which everything above the core
//! uses.

pub mod env;
pub mod milp;
pub mod pstl;
pub mod runtime;
pub mod scalar;
pub mod stl;
pub mod uuv;

pub use scalar::Scalar;

/// Sampled multi-variable signal over `f64`.
pub type Signal = stl::Signal<f64>;
/// Single-precision signal.
pub type Signal32 = stl::Signal<f32>;
/// STL formula with `f64` constants.
pub type StlFormula = stl::Formula<f64>;
/// STL formula with `f32` constants.
pub type StlFormula32 = stl::Formula<f32>;
/// Linear term with `f64` coefficients.
pub type Term = stl::Term<f64>;
/// Robustness value over `f64`.
pub type Robustness = stl::RobustnessValue<f64>;
/// MILP over `f64`.
pub type MilpProblem = milp::MilpProblem<f64>;
/// MILP over `f32`.
pub type MilpProblem32 = milp::MilpProblem<f32>;
/// Linear expression over MILP variables, `f64` coefficients.
pub type LinExpr = milp::LinExpr<f64>;
