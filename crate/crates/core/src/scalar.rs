//! Floating-point scalar abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real scalar the engine can compute with: `f32` or `f64`.
///
/// The tolerance hooks let the geometry solvers scale their stopping rules
/// to the precision of the type instead of hard-coding `f64` constants.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Slack a synthesized proposal must clear so that re-checking approval
    /// with the strict comparison never flips.
    fn approval_margin() -> Self;

    /// Optimality gap the convex solvers aim for (relative to problem scale).
    fn solver_target_gap() -> Self;

    /// Largest optimality gap accepted when the iteration budget runs out.
    fn solver_accepted_gap() -> Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Widening conversion used for serialization keys and reports.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn approval_margin() -> Self {
        1e-9
    }
    fn solver_target_gap() -> Self {
        1e-11
    }
    fn solver_accepted_gap() -> Self {
        1e-7
    }
}

impl Scalar for f32 {
    fn approval_margin() -> Self {
        1e-5
    }
    fn solver_target_gap() -> Self {
        2e-6
    }
    fn solver_accepted_gap() -> Self {
        1e-4
    }
}
