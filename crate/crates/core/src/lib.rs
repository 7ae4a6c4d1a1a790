//! Projection-free stochastic optimization.
//!
//! One-sample stochastic Frank-Wolfe for oblivious and non-oblivious
//! problems, quantized distributed Frank-Wolfe on an in-process
//! master/worker simulator, and black-box continuous greedy for
//! DR-submodular maximization.

pub mod constraints;
pub mod distsim;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod problems;
pub mod quantize;
pub mod rng;
pub mod sampling;
pub mod scalar;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{norms, DenseMatrix, DenseVector, Norms};
pub use rng::RngStream;
pub use scalar::Real;

pub type Vector = DenseVector<f64>;
pub type Matrix = DenseMatrix<f64>;
pub type ConstraintSet = constraints::FeasibleSet<f64>;
