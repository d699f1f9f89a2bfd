//! Output warping and per-axis input scaling.
//!
//! The output warp is a monotone sum of `tanh` terms,
//! `f + sum_j a_j tanh(b_j (c_j + f))` with `a_j, b_j >= 0`, fitted once on
//! the initial design. The input scaling maps each unit-cube coordinate
//! through the Kumaraswamy CDF `1 - (1 - x^alpha)^beta` and is refitted
//! together with the kernel at every training.

use crate::error::{Error, Result};
use crate::gp::likelihood::LikelihoodProblem;
use crate::gp::{Dataset, KernelFamily, TrendDegree};
use crate::optim::{self, LbfgsOptions};
use crate::rng::Rng;
use crate::train::{self, TrainConfig};
use crate::doe;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Number of `tanh` terms in the output warp.
pub const WARP_TERMS: usize = 2;

/// Box of the per-axis scaling parameters.
pub const SCALING_PARAM_BOUNDS: (f64, f64) = (0.25, 4.0);

// Search box of the warp parameters, on rescaled outputs.
const WARP_A_BOUNDS: (f64, f64) = (1e-3, 5.0);
const WARP_B_BOUNDS: (f64, f64) = (0.1, 5.0);
const WARP_C_BOUNDS: (f64, f64) = (-3.0, 3.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputWarp {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl OutputWarp {
    pub fn identity() -> Self {
        Self {
            a: vec![0.0; WARP_TERMS],
            b: vec![1.0; WARP_TERMS],
            c: vec![0.0; WARP_TERMS],
        }
    }

    pub fn new(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.len() != c.len() {
            return Err(Error::InvalidArgument("warp parameter lengths differ".into()));
        }
        if a.iter().chain(&b).any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidArgument(
                "warp amplitudes and slopes must be non-negative".into(),
            ));
        }
        Ok(Self { a, b, c })
    }

    pub fn is_identity(&self) -> bool {
        self.a.iter().all(|a| *a == 0.0)
    }

    pub fn apply(&self, f: f64) -> f64 {
        let mut z = f;
        for j in 0..self.a.len() {
            z += self.a[j] * (self.b[j] * (self.c[j] + f)).tanh();
        }
        z
    }

    /// `d warp / d f`, at least 1.
    pub fn derivative(&self, f: f64) -> f64 {
        let mut g = 1.0;
        for j in 0..self.a.len() {
            let th = (self.b[j] * (self.c[j] + f)).tanh();
            g += self.a[j] * self.b[j] * (1.0 - th * th);
        }
        g
    }

    /// Inverse of [`Self::apply`], by safeguarded Newton iterations.
    pub fn invert(&self, z: f64) -> f64 {
        if self.is_identity() {
            return z;
        }
        let amp: f64 = self.a.iter().sum();
        let (mut lo, mut hi) = (z - amp - 1.0, z + amp + 1.0);
        let mut f = z;
        for _ in 0..200 {
            let r = self.apply(f) - z;
            if r == 0.0 {
                return f;
            }
            if r > 0.0 {
                hi = f;
            } else {
                lo = f;
            }
            let mut next = f - r / self.derivative(f);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - f).abs() <= 1e-15 * (1.0 + f.abs()) {
                return next;
            }
            f = next;
        }
        f
    }
}

pub fn warp_apply(w: &OutputWarp, f: f64) -> f64 {
    w.apply(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarpFit {
    pub warp: OutputWarp,
    /// False when the fit failed and the identity was returned instead.
    pub converged: bool,
    pub neg_log_likelihood: f64,
}

fn warp_from_params(p: &[f64]) -> OutputWarp {
    let j = WARP_TERMS;
    OutputWarp {
        a: p[..j].iter().map(|u| u.exp()).collect(),
        b: p[j..2 * j].iter().map(|v| v.exp()).collect(),
        c: p[2 * j..3 * j].to_vec(),
    }
}

/// Fits the output warp by maximizing the likelihood of the warped outputs,
/// Jacobian included, jointly with the kernel lengthscales. The identity is
/// returned unless the warp improves the Bayesian information criterion.
pub fn warp_fit(
    data: &Dataset,
    family: KernelFamily,
    degree: TrendDegree,
    seed: u64,
) -> WarpFit {
    let failed = || WarpFit {
        warp: OutputWarp::identity(),
        converged: false,
        neg_log_likelihood: f64::NAN,
    };
    let d = data.dim();
    let problem = match LikelihoodProblem::new(&data.inputs, family, degree, 0.0) {
        Ok(p) => p,
        Err(_) => return failed(),
    };
    let (theta_lo, theta_hi) = train::lengthscale_bounds(&crate::testbed::SearchSpace::unit(d));
    let j = WARP_TERMS;
    let mut lower = Vec::with_capacity(3 * j + d);
    let mut upper = Vec::with_capacity(3 * j + d);
    lower.extend(std::iter::repeat(WARP_A_BOUNDS.0.ln()).take(j));
    upper.extend(std::iter::repeat(WARP_A_BOUNDS.1.ln()).take(j));
    lower.extend(std::iter::repeat(WARP_B_BOUNDS.0.ln()).take(j));
    upper.extend(std::iter::repeat(WARP_B_BOUNDS.1.ln()).take(j));
    lower.extend(std::iter::repeat(WARP_C_BOUNDS.0).take(j));
    upper.extend(std::iter::repeat(WARP_C_BOUNDS.1).take(j));
    lower.extend(theta_lo.iter().map(|v| v.ln()));
    upper.extend(theta_hi.iter().map(|v| v.ln()));

    let objective = |p: &[f64]| -> Option<(f64, Vec<f64>)> {
        let warp = warp_from_params(p);
        let theta: Vec<f64> = p[3 * j..].iter().map(|v| v.exp()).collect();
        let y = &data.outputs;
        let z: Vec<f64> = y.iter().map(|f| warp.apply(*f)).collect();
        let v = problem.evaluate(&theta, None, &z, true).ok()?;
        let mut value = v.nll;
        let mut grad = vec![0.0; p.len()];
        for (i, &f) in y.iter().enumerate() {
            let jac = warp.derivative(f);
            value -= jac.ln();
            let dz = v.grad.outputs[i];
            for k in 0..j {
                let (a, b, c) = (warp.a[k], warp.b[k], warp.c[k]);
                let q = b * (c + f);
                let th = q.tanh();
                let s2 = 1.0 - th * th;
                // Chain rule through z_i.
                grad[k] += dz * a * th;
                grad[j + k] += dz * a * s2 * q;
                grad[2 * j + k] += dz * a * b * s2;
                // Jacobian term, -log J_i.
                let dj_du = a * b * s2;
                let dj_dv = a * b * s2 * (1.0 - 2.0 * th * q);
                let dj_dc = -2.0 * a * b * b * s2 * th;
                grad[k] -= dj_du / jac;
                grad[j + k] -= dj_dv / jac;
                grad[2 * j + k] -= dj_dc / jac;
            }
        }
        grad[3 * j..].copy_from_slice(&v.grad.log_theta);
        Some((value, grad))
    };

    let mut rng = Rng::seed_from_u64(seed);
    let n_starts = (2 * d).max(2);
    let design = doe::lhs(n_starts, lower.len(), &mut rng);
    let mut starts: Vec<Vec<f64>> = Vec::with_capacity(n_starts + 1);
    // Near-identity start with mid-range lengthscales.
    let mut near_identity = vec![lower[0]; j];
    near_identity.extend(std::iter::repeat(0.0).take(2 * j));
    near_identity.extend((0..d).map(|k| 0.5 * (lower[3 * j + k] + upper[3 * j + k])));
    starts.push(near_identity);
    for u in design.points() {
        starts.push(
            u.iter()
                .enumerate()
                .map(|(k, v)| lower[k] + v * (upper[k] - lower[k]))
                .collect(),
        );
    }
    let opts = LbfgsOptions::default();
    let mut best: Option<optim::Minimum> = None;
    for s in &starts {
        if let Some(m) = optim::minimize(objective, s, &lower, &upper, &opts) {
            if best.as_ref().map_or(true, |b| m.value < b.value) {
                best = Some(m);
            }
        }
    }
    let best = match best {
        Some(m) if m.value.is_finite() => m,
        _ => return failed(),
    };
    // The warp must pay for its parameters: keep it only if it beats the
    // identity by the BIC penalty, otherwise small samples get overfitted.
    let config = TrainConfig::new(family, degree, false, d);
    let identity_nll = train::train(data, &config, &mut train::TrainerState::default(), seed)
        .map(|o| o.model.neg_log_likelihood())
        .unwrap_or(f64::INFINITY);
    let penalty = 0.5 * (3 * j) as f64 * (data.len() as f64).ln();
    if best.value + penalty < identity_nll {
        WarpFit {
            warp: warp_from_params(&best.x),
            converged: true,
            neg_log_likelihood: best.value,
        }
    } else {
        WarpFit {
            warp: OutputWarp::identity(),
            converged: true,
            neg_log_likelihood: identity_nll,
        }
    }
}

/// Per-axis monotone bijection of the unit interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaling {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl InputScaling {
    pub fn identity(d: usize) -> Self {
        Self {
            alpha: vec![1.0; d],
            beta: vec![1.0; d],
        }
    }

    pub fn new(alpha: Vec<f64>, beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::InvalidArgument("scaling parameter lengths differ".into()));
        }
        if alpha.iter().chain(&beta).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument("scaling parameters must be positive".into()));
        }
        Ok(Self { alpha, beta })
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_identity(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(|v| *v == 1.0)
    }

    pub fn apply_axis(&self, k: usize, x: f64) -> f64 {
        let (a, b) = (self.alpha[k], self.beta[k]);
        let x = x.clamp(0.0, 1.0);
        if a == 1.0 && b == 1.0 {
            return x;
        }
        (1.0 - (1.0 - x.powf(a)).powf(b)).clamp(0.0, 1.0)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(k, v)| self.apply_axis(k, *v)).collect()
    }

    /// Derivatives of axis `k` at `x` with respect to `log alpha_k` and
    /// `log beta_k`.
    pub fn d_log_params(&self, k: usize, x: f64) -> (f64, f64) {
        if x <= 0.0 || x >= 1.0 {
            return (0.0, 0.0);
        }
        let (a, b) = (self.alpha[k], self.beta[k]);
        let xa = x.powf(a);
        let om = 1.0 - xa;
        if om <= 0.0 {
            return (0.0, 0.0);
        }
        let d_alpha = a * b * om.powf(b - 1.0) * xa * x.ln();
        let d_beta = -b * om.powf(b) * om.ln();
        (d_alpha, d_beta)
    }
}

pub fn scaling_apply(s: &InputScaling, x_unit: &[f64]) -> Vec<f64> {
    s.apply(x_unit)
}

/// Fits the input scaling jointly with the kernel lengthscales by maximum
/// likelihood. Falls back to the identity when training fails.
pub fn scaling_fit(
    data: &Dataset,
    family: KernelFamily,
    degree: TrendDegree,
    seed: u64,
) -> InputScaling {
    let d = data.dim();
    let config = TrainConfig::new(family, degree, true, d);
    let mut state = train::TrainerState::default();
    match train::train(data, &config, &mut state, seed) {
        Ok(out) => out
            .model
            .scaling()
            .cloned()
            .unwrap_or_else(|| InputScaling::identity(d)),
        Err(_) => InputScaling::identity(d),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng as _;
    use crate::rng::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn warp_values() {
        let id = OutputWarp::identity();
        assert_eq!(id.apply(3.25), 3.25);
        let w = OutputWarp::new(vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(w.apply(0.0), 0.0);
        assert_relative_eq!(w.apply(1.0), 1.761_594_155_955_764_9, epsilon = 1e-14);
        assert!(OutputWarp::new(vec![-1.0, 0.0], vec![1.0, 1.0], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn scaling_values() {
        let id = InputScaling::identity(2);
        assert_eq!(id.apply(&[0.3, 0.9]), vec![0.3, 0.9]);
        let s = InputScaling::new(vec![2.0], vec![1.0]).unwrap();
        assert_relative_eq!(s.apply(&[0.5])[0], 0.25, epsilon = 1e-15);
        let s = InputScaling::new(vec![0.3, 3.7], vec![2.2, 0.4]).unwrap();
        assert_eq!(s.apply(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(s.apply(&[1.0, 1.0]), vec![1.0, 1.0]);
    }

    #[test]
    fn scaling_derivatives() {
        let s = InputScaling::new(vec![0.7, 1.8], vec![1.6, 0.6]).unwrap();
        for k in 0..2 {
            for &x in &[0.1, 0.45, 0.93] {
                let (da, db) = s.d_log_params(k, x);
                let eps = 1e-6;
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.alpha[k] *= f64::exp(eps);
                sm.alpha[k] *= f64::exp(-eps);
                let fd = (sp.apply_axis(k, x) - sm.apply_axis(k, x)) / (2.0 * eps);
                assert_relative_eq!(da, fd, max_relative = 1e-6);
                let mut sp = s.clone();
                let mut sm = s.clone();
                sp.beta[k] *= f64::exp(eps);
                sm.beta[k] *= f64::exp(-eps);
                let fd = (sp.apply_axis(k, x) - sm.apply_axis(k, x)) / (2.0 * eps);
                assert_relative_eq!(db, fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn warp_inverse() {
        let w = OutputWarp::new(vec![2.0, 0.5], vec![3.0, 0.2], vec![-0.5, 1.0]).unwrap();
        for &f in &[-10.0, -1.0, -0.5, 0.0, 0.3, 4.0, 100.0] {
            assert_relative_eq!(w.invert(w.apply(f)), f, epsilon = 1e-10);
        }
    }

    fn standardize(v: &[f64]) -> Vec<f64> {
        let r = train::OutputRescaler::fit(v);
        v.iter().map(|x| r.forward(*x)).collect()
    }

    fn fit_on(outputs: &[f64], seed: u64) -> WarpFit {
        let des = doe::maximin_lhs(outputs.len(), 2, seed, 100);
        let data = Dataset::new(des.into_points(), standardize(outputs));
        warp_fit(&data, KernelFamily::Matern52, TrendDegree::Constant, seed)
    }

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = Rng::seed_from_u64(1000 + seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn gaussian_outputs_are_left_nearly_unwarped() {
        for seed in 0..10 {
            let fit = fit_on(&normal_sample(20, seed), seed);
            assert!(fit.converged);
            assert!(fit.warp.a.iter().all(|a| *a <= 0.5), "seed {seed}: {:?}", fit.warp);
        }
    }

    #[test]
    fn warping_skewed_outputs_improves_normality() {
        let mut before = Vec::new();
        let mut after = Vec::new();
        for seed in 0..10 {
            let y: Vec<f64> = normal_sample(30, seed).iter().map(|z| z.exp()).collect();
            let y = standardize(&y);
            let fit = fit_on(&y, seed);
            let warped: Vec<f64> = y.iter().map(|v| fit.warp.apply(*v)).collect();
            before.push(stats::ks_normal_pvalue(&y));
            after.push(stats::ks_normal_pvalue(&standardize(&warped)));
        }
        let median = |v: &mut Vec<f64>| {
            v.sort_by(f64::total_cmp);
            0.5 * (v[4] + v[5])
        };
        let (b, a) = (median(&mut before), median(&mut after));
        assert!(a >= b, "median p-value {a} < {b}");
    }

    #[test]
    fn warp_fit_is_deterministic() {
        let y: Vec<f64> = normal_sample(15, 3).iter().map(|z| z.exp()).collect();
        assert_eq!(fit_on(&y, 3), fit_on(&y, 3));
    }

    #[test]
    fn stationary_data_gives_mild_scaling() {
        let mut alphas = Vec::new();
        let mut betas = Vec::new();
        for seed in 0..10u64 {
            let mut rng = Rng::seed_from_u64(seed);
            let des = doe::maximin_lhs(30, 2, seed, 100);
            let y = gp_sample(des.points(), &[0.3, 0.3], &mut rng);
            let data = Dataset::new(des.into_points(), y);
            let s = scaling_fit(&data, KernelFamily::Matern52, TrendDegree::Constant, seed);
            assert_eq!(s, scaling_fit(&data, KernelFamily::Matern52, TrendDegree::Constant, seed));
            alphas.extend(s.alpha);
            betas.extend(s.beta);
        }
        for v in [&mut alphas, &mut betas] {
            v.sort_by(f64::total_cmp);
            let med = 0.5 * (v[9] + v[10]);
            assert!((0.5..=2.0).contains(&med), "median {med}");
        }
    }

    fn gp_sample(inputs: &[Vec<f64>], theta: &[f64], rng: &mut Rng) -> Vec<f64> {
        use crate::gp::likelihood::correlation_matrix;
        let t = inputs.len();
        let mut r = correlation_matrix(inputs, KernelFamily::Matern52, theta, 1e-10, None);
        crate::linalg::cholesky_in_place(&mut r, t).unwrap();
        let e: Vec<f64> = (0..t).map(|_| rng.sample(StandardNormal)).collect();
        (0..t).map(|i| (0..=i).map(|j| r[i * t + j] * e[j]).sum()).collect()
    }

    proptest! {
        #[test]
        fn warp_is_increasing(a1 in 0.0..5.0f64, a2 in 0.0..5.0f64, b1 in 0.0..5.0f64, b2 in 0.0..5.0f64,
                               c1 in -3.0..3.0f64, c2 in -3.0..3.0f64, f in -10.0..10.0f64, df in 1e-6..5.0f64) {
            let w = OutputWarp::new(vec![a1, a2], vec![b1, b2], vec![c1, c2]).unwrap();
            prop_assert!(w.apply(f + df) > w.apply(f));
            prop_assert!(w.derivative(f) >= 1.0);
        }

        #[test]
        fn warp_preserves_argmin(a1 in 0.0..5.0f64, b1 in 0.0..5.0f64, c1 in -3.0..3.0f64,
                                 ys in proptest::collection::vec(-5.0..5.0f64, 2..30)) {
            let w = OutputWarp::new(vec![a1, 0.3], vec![b1, 1.0], vec![c1, 0.0]).unwrap();
            let argmin = |v: &[f64]| v.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, x)| if *x < acc.1 { (i, *x) } else { acc }).0;
            let warped: Vec<f64> = ys.iter().map(|y| w.apply(*y)).collect();
            prop_assert_eq!(argmin(&ys), argmin(&warped));
        }

        #[test]
        fn scaling_stays_in_box(a in 0.25..4.0f64, b in 0.25..4.0f64, x in 0.0..=1.0f64) {
            let s = InputScaling::new(vec![a], vec![b]).unwrap();
            let y = s.apply(&[x])[0];
            prop_assert!((0.0..=1.0).contains(&y));
            let y2 = s.apply(&[(x + 0.01).min(1.0)])[0];
            prop_assert!(y2 >= y);
        }
    }
}
