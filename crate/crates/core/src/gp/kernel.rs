//! Stationary anisotropic kernels.

use serde::{Deserialize, Serialize};

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelFamily {
    Matern52,
    /// Tensor product of one-dimensional exponential kernels.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub variance: f64,
}

impl KernelFamily {
    /// Correlation between two points separated by `h`.
    pub fn correlation(self, h: &[f64], theta: &[f64]) -> f64 {
        match self {
            KernelFamily::Matern52 => {
                let r = h
                    .iter()
                    .zip(theta)
                    .map(|(hi, ti)| (hi / ti) * (hi / ti))
                    .sum::<f64>()
                    .sqrt();
                (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * (-SQRT5 * r).exp()
            }
            KernelFamily::Exponential => {
                (-h.iter().zip(theta).map(|(hi, ti)| hi.abs() / ti).sum::<f64>()).exp()
            }
        }
    }

    /// Correlation together with a pair factor `g` from which the
    /// lengthscale derivatives follow:
    ///
    /// * Matern 5/2: `dR/dlog(theta_k) = g h_k^2 / theta_k^2` and
    ///   `dR/dh_k = -g h_k / theta_k^2`;
    /// * exponential: `g = R`, `dR/dlog(theta_k) = g |h_k| / theta_k` and
    ///   `dR/dh_k = -g sign(h_k) / theta_k`.
    pub fn correlation_and_factor(self, h: &[f64], theta: &[f64]) -> (f64, f64) {
        match self {
            KernelFamily::Matern52 => {
                let r = h
                    .iter()
                    .zip(theta)
                    .map(|(hi, ti)| (hi / ti) * (hi / ti))
                    .sum::<f64>()
                    .sqrt();
                let e = (-SQRT5 * r).exp();
                (
                    (1.0 + SQRT5 * r + 5.0 / 3.0 * r * r) * e,
                    5.0 / 3.0 * (1.0 + SQRT5 * r) * e,
                )
            }
            KernelFamily::Exponential => {
                let c = self.correlation(h, theta);
                (c, c)
            }
        }
    }

    /// `dR/dh_k` given the pair factor of [`Self::correlation_and_factor`].
    pub fn d_correlation_dh(self, factor: f64, hk: f64, theta_k: f64) -> f64 {
        match self {
            KernelFamily::Matern52 => -factor * hk / (theta_k * theta_k),
            KernelFamily::Exponential => {
                if hk == 0.0 {
                    0.0
                } else {
                    -factor * hk.signum() / theta_k
                }
            }
        }
    }

    /// `dR/dlog(theta_k)` given the pair factor.
    pub fn d_correlation_dlog_theta(self, factor: f64, hk: f64, theta_k: f64) -> f64 {
        match self {
            KernelFamily::Matern52 => factor * hk * hk / (theta_k * theta_k),
            KernelFamily::Exponential => factor * hk.abs() / theta_k,
        }
    }

    /// Whether the kernel is differentiable at the origin, so that the
    /// posterior moments have analytic gradients everywhere.
    pub fn is_smooth(self) -> bool {
        matches!(self, KernelFamily::Matern52)
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    let h: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    spec.variance * spec.family.correlation(&h, &spec.lengthscales)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn values() {
        let m = KernelSpec {
            family: KernelFamily::Matern52,
            lengthscales: vec![1.0],
            variance: 1.0,
        };
        // (1 + sqrt5 + 5/3) exp(-sqrt5), high-precision reference.
        assert_relative_eq!(kernel_eval(&m, &[0.0], &[1.0]), 0.523_994_108_831_820_3, epsilon = 1e-15);
        assert_eq!(kernel_eval(&m, &[0.3], &[0.3]), 1.0);
        let e = KernelSpec {
            family: KernelFamily::Exponential,
            lengthscales: vec![1.0, 2.0],
            variance: 1.0,
        };
        assert_relative_eq!(kernel_eval(&e, &[0.0, 0.0], &[1.0, 2.0]), (-2.0f64).exp(), epsilon = 1e-15);
        let s = KernelSpec { variance: 2.5, ..e };
        assert_eq!(kernel_eval(&s, &[1.0, 1.0], &[1.0, 1.0]), 2.5);
        assert_eq!(kernel_eval(&s, &[0.1, 0.7], &[0.4, -0.2]), kernel_eval(&s, &[0.4, -0.2], &[0.1, 0.7]));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let theta = [0.7, 1.3];
        let h = [0.4, -0.25];
        for fam in [KernelFamily::Matern52, KernelFamily::Exponential] {
            let (_, g) = fam.correlation_and_factor(&h, &theta);
            for k in 0..2 {
                let eps: f64 = 1e-6;
                let mut tp = theta;
                let mut tm = theta;
                tp[k] *= eps.exp();
                tm[k] *= (-eps).exp();
                let fd = (fam.correlation(&h, &tp) - fam.correlation(&h, &tm)) / (2.0 * eps);
                assert_relative_eq!(fam.d_correlation_dlog_theta(g, h[k], theta[k]), fd, max_relative = 1e-6);
                let mut hp = h;
                let mut hm = h;
                hp[k] += eps;
                hm[k] -= eps;
                let fd = (fam.correlation(&hp, &theta) - fam.correlation(&hm, &theta)) / (2.0 * eps);
                assert_relative_eq!(fam.d_correlation_dh(g, h[k], theta[k]), fd, max_relative = 1e-6);
            }
        }
    }
}
