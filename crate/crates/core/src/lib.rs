//! Bayesian optimization of expensive black-box functions with Gaussian
//! process surrogates, plus the benchmark machinery to compare configurations
//! on a noiseless test suite.

pub mod error;
pub mod rng;
pub mod stats;
pub mod optim;
pub mod linalg;
pub mod testbed;
pub mod doe;
pub mod gp;
pub mod transforms;
pub mod train;
pub mod acquisition;
pub mod bo;
pub mod metrics;

pub use error::{Error, Result};
