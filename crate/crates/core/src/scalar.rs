//! Scalar abstraction: everything numerical is generic over [`Real`].

/// Floating-point scalar the solvers are generic over (`f32` or `f64`).
///
/// All tolerances in the crate are stated in `f64` and lifted with
/// [`Real::of`]; the shipped runs and the acceptance suite use `f64`.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
