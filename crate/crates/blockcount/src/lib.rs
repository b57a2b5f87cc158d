//! Stationary laws of the block counting process in Moran and
//! Λ-Wright–Fisher models with selection and mutation.
//!
//! The numerical core is written against [`scalar::Real`] and
//! [`scalar::Exact`]; the aliases below fix the scalar to `f64`.

pub mod closedform;
pub mod duality;
pub mod error;
pub mod geomfix;
pub mod measures;
pub mod recursions;
pub mod scalar;
pub mod simulate;
pub mod specfun;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type SeriesResult = specfun::SeriesResult<f64>;
pub type QuadResult = specfun::quad::QuadResult<f64>;
pub type Quadrature = specfun::quad::Quadrature<f64>;
