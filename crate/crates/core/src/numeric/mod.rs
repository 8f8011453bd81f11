//! Scalar-generic numerical kernels: quadrature, bracketing root finders and
//! an adaptive Dormand-Prince integrator with dense output.

pub mod ode;
pub mod quad;
pub mod roots;

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar accepted by the numerical kernels.
pub trait Real: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
