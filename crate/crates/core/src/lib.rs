//! Numerical laboratory for an evolutionary-game account of shortcut learning.
//!
//! The core routines are generic over the scalar type (see [`scalar`]); the
//! aliases below pin the common `f64` instantiations.

pub mod egt;
pub mod error;
pub mod feature;
pub mod kernel;
pub mod linalg;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod sde;

pub use error::{Error, Result};
pub use scalar::{Field, Scalar};

pub type Matrix = linalg::Mat<f64>;
pub type PayoffMatrix = egt::PayoffMatrix<f64>;
pub type ChainConfig = egt::ChainConfig<f64>;
pub type StationaryDistribution = egt::StationaryDistribution<f64>;
pub type GramMatrix = kernel::GramMatrix<f64>;
pub type SpectralReport = kernel::SpectralReport<f64>;
pub type SdeParams = sde::SdeParams<f64>;
pub type SdeState = sde::SdeState<f64>;
pub type Mlp = nn::Mlp<f64>;
pub type BiasReport = feature::BiasReport<f64>;

/// Exact rationals, used where a check must be free of rounding.
pub type Rational = num_rational::BigRational;
