//! Reliable N-k contingency screening with input-convex neural networks.

pub mod error;
pub mod grid;
pub mod region;
pub mod data;
pub mod icnn;
pub mod oracle;
pub mod training;
pub mod pipeline;
pub mod baselines;
pub mod scopf;

pub use error::{Error, Result};
