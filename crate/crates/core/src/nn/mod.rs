//! Desk-scale neural-network testbed on a synthetic colored-feature dataset.

mod data;
mod mlp;
mod probe;
mod train;

pub use data::*;
pub use mlp::*;
pub use probe::*;
pub use train::*;
