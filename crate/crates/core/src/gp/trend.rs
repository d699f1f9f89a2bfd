//! Polynomial trend bases without interaction terms.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrendDegree {
    Constant,
    Linear,
    QuadraticNoInteraction,
}

impl TrendDegree {
    pub fn basis_len(self, d: usize) -> usize {
        match self {
            TrendDegree::Constant => 1,
            TrendDegree::Linear => d + 1,
            TrendDegree::QuadraticNoInteraction => 2 * d + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendSpec {
    pub degree: TrendDegree,
    pub coefficients: Vec<f64>,
}

impl TrendSpec {
    pub fn value(&self, x: &[f64]) -> f64 {
        trend_basis(self.degree, x)
            .iter()
            .zip(&self.coefficients)
            .map(|(h, b)| h * b)
            .sum()
    }
}

/// `(1)`, `(1, x_1..x_d)` or `(1, x_1..x_d, x_1^2..x_d^2)`.
pub fn trend_basis(degree: TrendDegree, x: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(degree.basis_len(x.len()));
    h.push(1.0);
    if degree != TrendDegree::Constant {
        h.extend_from_slice(x);
    }
    if degree == TrendDegree::QuadraticNoInteraction {
        h.extend(x.iter().map(|v| v * v));
    }
    h
}

/// Derivative of the basis with respect to `x_k`.
pub fn trend_basis_grad(degree: TrendDegree, x: &[f64], k: usize) -> Vec<f64> {
    let d = x.len();
    let mut g = vec![0.0; degree.basis_len(d)];
    if degree != TrendDegree::Constant {
        g[1 + k] = 1.0;
    }
    if degree == TrendDegree::QuadraticNoInteraction {
        g[1 + d + k] = 2.0 * x[k];
    }
    g
}
