//! Scalar abstraction shared by the covariance-matrix code.
//!
//! Everything that only manipulates covariance matrices (states, bases,
//! tomography, the PPT scan) is written against [`Real`], so the same code
//! runs in `f64` for analysis and in `f32` when memory matters. The spectral
//! source model and the pulse simulator stay in `f64`.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Slack on eigenvalue-sign decisions (physicality, entanglement).
    fn eig_tol() -> Self;

    /// Slack on orthonormality checks.
    fn ortho_tol() -> Self;

    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn eig_tol() -> Self {
        1e-9
    }

    fn ortho_tol() -> Self {
        1e-8
    }
}

impl Real for f32 {
    // single precision cannot resolve 1e-9 after a 2n x 2n eigensolve
    fn eig_tol() -> Self {
        1e-5
    }

    fn ortho_tol() -> Self {
        1e-4
    }
}
