//! Merkle-style key establishment over simulated random oracles, with
//! classical and cost-charged quantum eavesdroppers.

pub mod attacks;
pub mod error;
pub mod harness;
pub mod lowerbound;
pub mod oracle;
pub mod protocols;
pub mod qsim;
pub mod walkmodel;

pub use error::{Error, Result};
