//! Finite-population evolutionary dynamics of core vs shortcut sample
//! strategies: payoff tables, Darwinian selection with binomial mutation,
//! full-batch and mini-batch payoff regimes, stationary distributions and
//! stochastic-stability sweeps.

mod chain;
mod energy;
mod payoff;
mod stationary;
mod sweep;

pub use chain::*;
pub use energy::*;
pub use payoff::*;
pub use stationary::*;
pub use sweep::*;
