//! Spectral GNN training laboratory: polynomial graph filters, exact
//! hand-derived gradients, Hessian block spectrum probing, and the
//! asymmetric gradient preconditioner, plus a synthetic quadratic
//! benchmark where the preconditioner's guarantees can be checked
//! against explicit Hessians.

pub mod basis;
pub mod dense;
pub mod error;
pub mod graphcore;
pub mod harness;
pub mod hessian;
pub mod model;
pub mod optim;
pub mod quadbench;

pub use error::{Error, Result};
