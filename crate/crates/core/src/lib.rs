//! Curvature-driven trapezoidal quadrature and residual-driven adaptive
//! sampling of collocation points for physics-informed networks.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`.

pub mod bench;
pub mod error;
pub mod net;
pub mod pde;
pub mod quad;
pub mod rad;
pub mod scalar;
pub mod train;

pub use bench::BenchFunction;
pub use error::{Error, Result};
pub use scalar::Real;

pub type Interval64 = quad::Interval<f64>;
pub type Interval32 = quad::Interval<f32>;
pub type AllocationPlan64 = quad::AllocationPlan<f64>;
pub type Comparison64 = quad::Comparison<f64>;
pub type Problem64 = pde::Problem<f64>;
pub type TrainConfig64 = train::TrainConfig<f64>;
pub type TrainTrace64 = train::TrainTrace<f64>;
pub type Params64 = net::ParameterVector<f64>;
