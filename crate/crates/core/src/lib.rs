//! Numerical laboratory for rotationally symmetric stable processes and the
//! stable-like jump processes obtained by modulating their jump kernel.

pub mod error;
pub mod krylov;
pub mod meyer;
pub mod operator;
pub mod quadrature;
pub mod report;
pub mod rng;
pub mod scalar;
pub mod special;
pub mod sphere;
pub mod stable;
pub mod stats;
pub mod table;

pub use error::{Error, Result};
pub use report::{CheckReport, StudyCell};
pub use scalar::Real;
pub use stable::StableParams;

pub type GaussKronrod64 = quadrature::GaussKronrod<f64>;
pub type Integral64 = quadrature::Integral<f64>;
pub type Tolerance64 = quadrature::Tolerance<f64>;
