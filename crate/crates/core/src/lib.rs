//! Numerical laboratory for maximal operators, Muckenhoupt weights, grand
//! Lebesgue/Sobolev norms, and pointwise-gradient verification on uniform
//! cell-center grids over boxes in dimension 1 to 3.
//!
//! Everything is deterministic: fixed seeds reproduce sampled point sets and
//! random families bit for bit, and parallel reductions preserve a fixed
//! association order, so repeated runs of the same configuration produce
//! byte-identical reports.

pub mod embeddings;
pub mod error;
pub mod grid;
pub mod hajlasz;
pub mod maximal;
pub mod norms;
pub mod numeric;
pub mod report;
pub mod weights;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
