//! Estimation of the sphere-radius distribution in Wicksell's corpuscle
//! problem when the distribution is known to be constant on an interval.

pub mod asymptotics;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod model;
pub mod quadrature;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Interval, SquaredRadiusCdf, WicksellModel};
pub use quadrature::QuadratureSpec;
