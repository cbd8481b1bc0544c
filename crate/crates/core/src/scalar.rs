//! Scalar abstractions shared by the analytic modules.
//!
//! Probability formulas are written against [`Real`] (any IEEE float). The
//! signal-flow-graph engine only needs field arithmetic, so it is written
//! against [`Field`], which is also implemented for exact rationals.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, Num, Signed};
use twofloat::TwoFloat;

use crate::error::Result;
use crate::sfg::{mason_expansion, FlowGraph, TransferValue};

/// Floating point scalar used by the closed-form probability modules.
pub trait Real:
    Float + FloatConst + FromPrimitive + Field + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the target cannot hold it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    /// Converts a count into the scalar type.
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + Field
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

/// Field arithmetic with an ordering, as needed for pivoted elimination and
/// polynomial bookkeeping in the flow-graph engine.
pub trait Field: Num + Signed + PartialOrd + Copy + Debug + Send + Sync {
    /// Slack allowed when checking conservation (`Σ out = 1`) and `H(1) = 1`.
    fn identity_tol() -> Self;

    fn from_u32(n: u32) -> Self;

    /// Evaluates Mason's expansion of `g` at `z0`. The expansion is an
    /// alternating sum that cancels badly when loop gains approach 1, so
    /// `f64` overrides this to carry the arithmetic in double-double.
    fn mason_transfer(g: &FlowGraph<Self>, z0: Self) -> Result<TransferValue<Self>> {
        mason_expansion(g)?.evaluate(z0)
    }
}

impl Field for f64 {
    fn identity_tol() -> Self {
        1e-10
    }
    fn from_u32(n: u32) -> Self {
        f64::from(n)
    }
    fn mason_transfer(g: &FlowGraph<Self>, z0: Self) -> Result<TransferValue<Self>> {
        let wide = g.map_coeffs(TwoFloat::from);
        let tv = mason_expansion(&wide)?.evaluate(TwoFloat::from(z0))?;
        Ok(TransferValue {
            h: f64::from(tv.h),
            dh: f64::from(tv.dh),
        })
    }
}

impl Field for TwoFloat {
    fn identity_tol() -> Self {
        TwoFloat::from(1e-20)
    }
    fn from_u32(n: u32) -> Self {
        TwoFloat::from(n)
    }
}

impl Field for f32 {
    fn identity_tol() -> Self {
        1e-4
    }
    fn from_u32(n: u32) -> Self {
        n as f32
    }
}

impl Field for Ratio<i64> {
    fn identity_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn from_u32(n: u32) -> Self {
        Ratio::from_integer(i64::from(n))
    }
}

impl Field for Ratio<i128> {
    fn identity_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn from_u32(n: u32) -> Self {
        Ratio::from_integer(i128::from(n))
    }
}
