//! Simulation toolkit for measuring how data characteristics limit the
//! scalability of parallel SGD-style trainers for L2-regularized logistic
//! regression.

pub mod algorithms;
pub mod data;
pub mod generators;
pub mod harness;
pub mod metrics;
pub mod objective;
