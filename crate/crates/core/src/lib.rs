//! Non-normal stability diagnostics for linearized optimizer update
//! operators.
//!
//! The crate builds the Jacobians of Adam and momentum SGD, measures their
//! departure from normality (eigenvector condition number, pseudospectra,
//! Kreiss constant) and runs the small MLP training experiments that
//! exercise those diagnostics.

pub mod cli;
pub mod config;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod pseudospec;
pub mod train;
