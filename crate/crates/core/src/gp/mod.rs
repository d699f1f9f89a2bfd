//! Gaussian-process regression with universal-kriging trends.

pub mod kernel;
pub mod likelihood;
pub mod model;
pub mod trend;

pub use kernel::{kernel_eval, KernelFamily, KernelSpec};
pub use likelihood::concentrated_nll;
pub use model::GPModel;
pub use trend::{trend_basis, TrendDegree, TrendSpec};

use serde::{Deserialize, Serialize};

/// Observations `(x^i, f^i)` in working coordinates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Self {
        Self { inputs, outputs }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, |x| x.len())
    }
}
