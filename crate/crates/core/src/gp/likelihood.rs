//! Concentrated Gaussian likelihood of a universal-kriging model.
//!
//! The trend coefficients are estimated by generalized least squares and the
//! process variance by its closed-form maximizer, so the likelihood only
//! depends on the correlation parameters. Gradients are analytic: for any
//! parameter `p` entering the correlation matrix `R`,
//! `dNLL/dp = 1/2 sum_ij W_ij dR_ij/dp` with `W = R^-1 - a a^T / sigma2`
//! and `a = R^-1 (y - F beta)`.

use super::kernel::KernelFamily;
use super::trend::{trend_basis, TrendDegree};
use super::Dataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::transforms::InputScaling;
use std::f64::consts::PI;

/// Lower bound on the concentrated variance, reached only for exactly
/// constant outputs.
pub(crate) const SIGMA2_FLOOR: f64 = 1e-290;

/// Pieces of a factorized kriging system shared by the likelihood and the
/// posterior.
pub(crate) struct Factorized {
    pub chol: Vec<f64>,
    /// `L^-1 F`, row-major `t x p`.
    pub f_tilde: Vec<f64>,
    /// Cholesky factor of `F^T R^-1 F`.
    pub g_chol: Vec<f64>,
    pub beta: Vec<f64>,
    /// `R^-1 (y - F beta)`.
    pub alpha: Vec<f64>,
    pub sigma2: f64,
    pub nll: f64,
}

pub(crate) fn trend_matrix(inputs: &[Vec<f64>], degree: TrendDegree) -> (Vec<f64>, usize) {
    let d = inputs.first().map_or(0, |x| x.len());
    let p = degree.basis_len(d);
    let mut f = Vec::with_capacity(inputs.len() * p);
    for x in inputs {
        f.extend(trend_basis(degree, x));
    }
    (f, p)
}

/// Builds `R + nugget I` over `kin`; when `factors` is given, also stores
/// the per-pair derivative factor (row-major, lower triangle).
pub(crate) fn correlation_matrix(
    kin: &[Vec<f64>],
    family: KernelFamily,
    theta: &[f64],
    nugget: f64,
    mut factors: Option<&mut Vec<f64>>,
) -> Vec<f64> {
    let t = kin.len();
    let d = theta.len();
    let mut r = vec![0.0; t * t];
    if let Some(f) = factors.as_deref_mut() {
        f.clear();
        f.resize(t * t, 0.0);
    }
    let mut h = vec![0.0; d];
    for i in 0..t {
        r[i * t + i] = 1.0 + nugget;
        for j in 0..i {
            for k in 0..d {
                h[k] = kin[i][k] - kin[j][k];
            }
            let (c, g) = family.correlation_and_factor(&h, theta);
            r[i * t + j] = c;
            r[j * t + i] = c;
            if let Some(f) = factors.as_deref_mut() {
                f[i * t + j] = g;
            }
        }
    }
    r
}

pub(crate) fn factorize(
    mut r: Vec<f64>,
    trend: &[f64],
    p: usize,
    z: &[f64],
) -> Result<Factorized> {
    let t = z.len();
    linalg::cholesky_in_place(&mut r, t)?;
    let chol = r;

    // Columns of L^-1 F.
    let mut f_tilde = vec![0.0; t * p];
    let mut col = vec![0.0; t];
    for c in 0..p {
        for i in 0..t {
            col[i] = trend[i * p + c];
        }
        linalg::solve_lower(&chol, t, &mut col);
        for i in 0..t {
            f_tilde[i * p + c] = col[i];
        }
    }
    let mut g = vec![0.0; p * p];
    for a in 0..p {
        for b in 0..=a {
            let s: f64 = (0..t).map(|i| f_tilde[i * p + a] * f_tilde[i * p + b]).sum();
            g[a * p + b] = s;
            g[b * p + a] = s;
        }
    }
    linalg::cholesky_in_place(&mut g, p)?;
    let g_chol = g;

    let mut y_tilde = z.to_vec();
    linalg::solve_lower(&chol, t, &mut y_tilde);
    let mut beta: Vec<f64> = (0..p)
        .map(|a| (0..t).map(|i| f_tilde[i * p + a] * y_tilde[i]).sum())
        .collect();
    linalg::solve_spd(&g_chol, p, &mut beta);
    let mut resid: Vec<f64> = (0..t)
        .map(|i| y_tilde[i] - (0..p).map(|a| f_tilde[i * p + a] * beta[a]).sum::<f64>())
        .collect();
    let sigma2 = (linalg::dot(&resid, &resid) / t as f64).max(SIGMA2_FLOOR);
    linalg::solve_upper_t(&chol, t, &mut resid);
    let alpha = resid;

    let nll = 0.5 * t as f64 * ((2.0 * PI * sigma2).ln() + 1.0)
        + 0.5 * linalg::log_det_from_cholesky(&chol, t);
    if !nll.is_finite() {
        return Err(Error::Factorization);
    }
    Ok(Factorized {
        chol,
        f_tilde,
        g_chol,
        beta,
        alpha,
        sigma2,
        nll,
    })
}

/// Gradients of the negative log-likelihood.
#[derive(Debug, Clone, Default)]
pub(crate) struct NllGradient {
    pub log_theta: Vec<f64>,
    /// With respect to `log alpha` then `log beta` of the input scaling.
    pub log_scaling: Vec<f64>,
    /// With respect to each output value.
    pub outputs: Vec<f64>,
}

pub(crate) struct NllValue {
    pub nll: f64,
    pub grad: NllGradient,
}

/// A training set prepared for repeated likelihood evaluations.
pub(crate) struct LikelihoodProblem<'a> {
    pub inputs: &'a [Vec<f64>],
    pub family: KernelFamily,
    pub nugget: f64,
    trend: Vec<f64>,
    p: usize,
}

impl<'a> LikelihoodProblem<'a> {
    pub fn new(
        inputs: &'a [Vec<f64>],
        family: KernelFamily,
        degree: TrendDegree,
        nugget: f64,
    ) -> Result<Self> {
        let (trend, p) = trend_matrix(inputs, degree);
        if inputs.len() <= p {
            return Err(Error::InsufficientData {
                have: inputs.len(),
                need: p + 1,
            });
        }
        Ok(Self {
            inputs,
            family,
            nugget,
            trend,
            p,
        })
    }

    pub fn evaluate(
        &self,
        theta: &[f64],
        scaling: Option<&InputScaling>,
        outputs: &[f64],
        with_output_grad: bool,
    ) -> Result<NllValue> {
        let t = self.inputs.len();
        let d = theta.len();
        let scaled;
        let kin: &[Vec<f64>] = match scaling {
            Some(s) => {
                scaled = self.inputs.iter().map(|x| s.apply(x)).collect::<Vec<_>>();
                &scaled
            }
            None => self.inputs,
        };
        let mut factors = Vec::new();
        let r = correlation_matrix(kin, self.family, theta, self.nugget, Some(&mut factors));
        let fz = factorize(r, &self.trend, self.p, outputs)?;

        let mut w = linalg::inverse_from_cholesky(&fz.chol, t);
        for i in 0..t {
            let ai = fz.alpha[i] / fz.sigma2;
            for j in 0..t {
                w[i * t + j] -= ai * fz.alpha[j];
            }
        }

        let mut grad = NllGradient {
            log_theta: vec![0.0; d],
            ..Default::default()
        };
        let scaling_derivs: Option<Vec<Vec<(f64, f64)>>> = scaling.map(|s| {
            self.inputs
                .iter()
                .map(|x| (0..d).map(|k| s.d_log_params(k, x[k])).collect())
                .collect()
        });
        if scaling.is_some() {
            grad.log_scaling = vec![0.0; 2 * d];
        }
        for i in 0..t {
            for j in 0..i {
                let wij = w[i * t + j];
                let g = factors[i * t + j];
                for k in 0..d {
                    let hk = kin[i][k] - kin[j][k];
                    grad.log_theta[k] +=
                        wij * self.family.d_correlation_dlog_theta(g, hk, theta[k]);
                    if let Some(sd) = &scaling_derivs {
                        let drdh = self.family.d_correlation_dh(g, hk, theta[k]);
                        let (ai, bi) = sd[i][k];
                        let (aj, bj) = sd[j][k];
                        grad.log_scaling[k] += wij * drdh * (ai - aj);
                        grad.log_scaling[d + k] += wij * drdh * (bi - bj);
                    }
                }
            }
        }
        if with_output_grad {
            grad.outputs = fz.alpha.iter().map(|a| a / fz.sigma2).collect();
        }
        Ok(NllValue { nll: fz.nll, grad })
    }
}

/// Negative log-likelihood (with the process variance and trend coefficients
/// concentrated out) and its gradient with respect to `log(theta)`.
pub fn concentrated_nll(
    data: &Dataset,
    family: KernelFamily,
    theta: &[f64],
    degree: TrendDegree,
    nugget: f64,
) -> Result<(f64, Vec<f64>)> {
    let problem = LikelihoodProblem::new(&data.inputs, family, degree, nugget)?;
    let v = problem.evaluate(theta, None, &data.outputs, false)?;
    Ok((v.nll, v.grad.log_theta))
}
