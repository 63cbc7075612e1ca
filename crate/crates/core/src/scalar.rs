//! Scalar abstraction shared by the robustness evaluator and the LP/MILP solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar the numeric core is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Absolute tolerance used for pivoting, feasibility and integrality tests.
    fn tolerance() -> Self;

    /// Lossy conversion from `f64`; used for literals and configuration values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-4
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-9
    }
}
