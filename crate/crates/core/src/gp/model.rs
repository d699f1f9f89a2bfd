use super::kernel::{KernelFamily, KernelSpec};
use super::likelihood::{correlation_matrix, factorize, trend_matrix};
use super::trend::{trend_basis, trend_basis_grad, TrendDegree, TrendSpec};
use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::transforms::InputScaling;

/// Variances below this fraction of the process variance are numerically
/// zero.
pub const ZERO_VARIANCE_RATIO: f64 = 1e-12;

/// A Gaussian process conditioned on its training data.
///
/// Inputs are working coordinates (the unit cube in the optimization loop).
/// With an input scaling the kernel sees the scaled coordinates while the
/// trend keeps the raw ones.
#[derive(Debug, Clone)]
pub struct GPModel {
    inputs: Vec<Vec<f64>>,
    kernel_inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    kernel: KernelSpec,
    trend: TrendSpec,
    nugget: f64,
    scaling: Option<InputScaling>,
    chol: Vec<f64>,
    f_tilde: Vec<f64>,
    g_chol: Vec<f64>,
    alpha: Vec<f64>,
    /// `R^-1 F`, row-major `t x p`.
    r_inv_f: Vec<f64>,
    nll: f64,
}

/// Intermediate quantities of a posterior query.
struct Query {
    mean: f64,
    corr: Vec<f64>,
    /// `L^-1 r(x)`.
    v: Vec<f64>,
    /// `h(x) - F~^T v`.
    u: Vec<f64>,
}

impl GPModel {
    /// Conditions the process on `data` for fixed correlation parameters,
    /// estimating the trend by generalized least squares and the variance by
    /// maximum likelihood.
    pub fn fit(
        data: &Dataset,
        family: KernelFamily,
        lengthscales: Vec<f64>,
        degree: TrendDegree,
        nugget: f64,
        scaling: Option<InputScaling>,
    ) -> Result<Self> {
        let t = data.inputs.len();
        if t == 0 {
            return Err(Error::Empty("training data"));
        }
        if data.outputs.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                got: data.outputs.len(),
            });
        }
        let d = data.inputs[0].len();
        if lengthscales.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: lengthscales.len(),
            });
        }
        let (trend_mat, p) = trend_matrix(&data.inputs, degree);
        if t <= p {
            return Err(Error::InsufficientData { have: t, need: p + 1 });
        }
        let kernel_inputs: Vec<Vec<f64>> = match &scaling {
            Some(s) => data.inputs.iter().map(|x| s.apply(x)).collect(),
            None => data.inputs.clone(),
        };
        let r = correlation_matrix(&kernel_inputs, family, &lengthscales, nugget, None);
        let fz = factorize(r, &trend_mat, p, &data.outputs)?;

        let mut r_inv_f = vec![0.0; t * p];
        let mut col = vec![0.0; t];
        for c in 0..p {
            for i in 0..t {
                col[i] = fz.f_tilde[i * p + c];
            }
            linalg::solve_upper_t(&fz.chol, t, &mut col);
            for i in 0..t {
                r_inv_f[i * p + c] = col[i];
            }
        }

        Ok(Self {
            inputs: data.inputs.clone(),
            kernel_inputs,
            outputs: data.outputs.clone(),
            kernel: KernelSpec {
                family,
                lengthscales,
                variance: fz.sigma2,
            },
            trend: TrendSpec {
                degree,
                coefficients: fz.beta,
            },
            nugget,
            scaling,
            chol: fz.chol,
            f_tilde: fz.f_tilde,
            g_chol: fz.g_chol,
            alpha: fz.alpha,
            r_inv_f,
            nll: fz.nll,
        })
    }

    pub fn n(&self) -> usize {
        self.inputs.len()
    }

    pub fn dim(&self) -> usize {
        self.kernel.lengthscales.len()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn trend(&self) -> &TrendSpec {
        &self.trend
    }

    pub fn nugget(&self) -> f64 {
        self.nugget
    }

    pub fn scaling(&self) -> Option<&InputScaling> {
        self.scaling.as_ref()
    }

    pub fn variance(&self) -> f64 {
        self.kernel.variance
    }

    pub fn neg_log_likelihood(&self) -> f64 {
        self.nll
    }

    pub fn min_output(&self) -> f64 {
        self.outputs.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether [`Self::posterior_with_gradient`] is available.
    pub fn has_analytic_gradient(&self) -> bool {
        self.kernel.family.is_smooth() && self.scaling.is_none()
    }

    fn kernel_point(&self, x: &[f64]) -> Vec<f64> {
        match &self.scaling {
            Some(s) => s.apply(x),
            None => x.to_vec(),
        }
    }

    fn query(&self, x: &[f64]) -> Query {
        let t = self.n();
        let d = self.dim();
        let p = self.trend.coefficients.len();
        let xk = self.kernel_point(x);
        let theta = &self.kernel.lengthscales;
        let mut h = vec![0.0; d];
        let corr: Vec<f64> = self
            .kernel_inputs
            .iter()
            .map(|xi| {
                for k in 0..d {
                    h[k] = xk[k] - xi[k];
                }
                self.kernel.family.correlation(&h, theta)
            })
            .collect();
        let basis = trend_basis(self.trend.degree, x);
        let mean = linalg::dot(&basis, &self.trend.coefficients) + linalg::dot(&corr, &self.alpha);
        let mut v = corr.clone();
        linalg::solve_lower(&self.chol, t, &mut v);
        let u: Vec<f64> = (0..p)
            .map(|a| basis[a] - (0..t).map(|i| self.f_tilde[i * p + a] * v[i]).sum::<f64>())
            .collect();
        Query { mean, corr, v, u }
    }

    fn trend_inflation(&self, u: &[f64], w: &[f64]) -> f64 {
        let p = u.len();
        let mut z = w.to_vec();
        linalg::solve_spd(&self.g_chol, p, &mut z);
        linalg::dot(u, &z)
    }

    /// Posterior mean and variance at `x`.
    pub fn posterior_moments(&self, x: &[f64]) -> (f64, f64) {
        let q = self.query(x);
        let c = 1.0 - linalg::dot(&q.v, &q.v) + self.trend_inflation(&q.u, &q.u);
        (q.mean, (self.kernel.variance * c).max(0.0))
    }

    pub fn posterior_mean(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let xk = self.kernel_point(x);
        let mut h = vec![0.0; d];
        let theta = &self.kernel.lengthscales;
        let mut m = self.trend.value(x);
        for (xi, a) in self.kernel_inputs.iter().zip(&self.alpha) {
            for k in 0..d {
                h[k] = xk[k] - xi[k];
            }
            m += a * self.kernel.family.correlation(&h, theta);
        }
        m
    }

    /// Posterior covariance between `x` and `y`.
    pub fn posterior_cross_cov(&self, x: &[f64], y: &[f64]) -> f64 {
        let qx = self.query(x);
        let qy = self.query(y);
        let h: Vec<f64> = self
            .kernel_point(x)
            .iter()
            .zip(self.kernel_point(y))
            .map(|(a, b)| a - b)
            .collect();
        let prior = self.kernel.family.correlation(&h, &self.kernel.lengthscales);
        let c = prior - linalg::dot(&qx.v, &qy.v) + self.trend_inflation(&qx.u, &qy.u);
        self.kernel.variance * c
    }

    /// Posterior covariances between `x` and every training point, together
    /// with the posterior variance at `x` and at each training point.
    pub fn posterior_cov_to_training(&self, x: &[f64]) -> (f64, Vec<(f64, f64)>) {
        let qx = self.query(x);
        let cxx = 1.0 - linalg::dot(&qx.v, &qx.v) + self.trend_inflation(&qx.u, &qx.u);
        let s2 = self.kernel.variance;
        let out = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, xi)| {
                let qi = self.query(xi);
                let cii = 1.0 - linalg::dot(&qi.v, &qi.v) + self.trend_inflation(&qi.u, &qi.u);
                let cix = qx.corr[i] - linalg::dot(&qi.v, &qx.v) + self.trend_inflation(&qi.u, &qx.u);
                (s2 * cii, s2 * cix)
            })
            .collect();
        (s2 * cxx, out)
    }

    /// Posterior mean and variance with their gradients in `x`. Requires a
    /// smooth kernel and no input scaling.
    pub fn posterior_with_gradient(&self, x: &[f64]) -> (f64, f64, Vec<f64>, Vec<f64>) {
        assert!(self.has_analytic_gradient(), "analytic gradient unavailable");
        let t = self.n();
        let d = self.dim();
        let p = self.trend.coefficients.len();
        let theta = &self.kernel.lengthscales;
        let q = self.query(x);

        let mut z = q.u.clone();
        linalg::solve_spd(&self.g_chol, p, &mut z);
        let c = 1.0 - linalg::dot(&q.v, &q.v) + linalg::dot(&q.u, &z);
        // R^-1 r(x) + R^-1 F z
        let mut w = q.v.clone();
        linalg::solve_upper_t(&self.chol, t, &mut w);
        for i in 0..t {
            w[i] += (0..p).map(|a| self.r_inv_f[i * p + a] * z[a]).sum::<f64>();
        }

        let mut dm = vec![0.0; d];
        let mut dc = vec![0.0; d];
        for k in 0..d {
            let hb = trend_basis_grad(self.trend.degree, x, k);
            dm[k] = linalg::dot(&hb, &self.trend.coefficients);
            dc[k] = linalg::dot(&z, &hb);
        }
        let mut h = vec![0.0; d];
        for (i, xi) in self.inputs.iter().enumerate() {
            for k in 0..d {
                h[k] = x[k] - xi[k];
            }
            let (_, g) = self.kernel.family.correlation_and_factor(&h, theta);
            for k in 0..d {
                let dr = self.kernel.family.d_correlation_dh(g, h[k], theta[k]);
                dm[k] += self.alpha[i] * dr;
                dc[k] -= w[i] * dr;
            }
        }
        let s2 = self.kernel.variance;
        for v in dc.iter_mut() {
            *v *= 2.0 * s2;
        }
        (q.mean, (s2 * c).max(0.0), dm, dc)
    }
}
