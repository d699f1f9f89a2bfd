//! Expected Improvement, the GP-mean proxy criterion, their optimization and
//! the fallback chain used when the optimization fails.

use crate::doe;
use crate::gp::GPModel;
use crate::optim::{self, LbfgsOptions};
use crate::rng::{self, Rng, Stream};
use crate::stats::{norm_cdf, norm_pdf};
use crate::testbed::SearchSpace;
use crate::train::TrainerState;
use serde::{Deserialize, Serialize};

/// EI at or below this value (in working output units) counts as zero.
pub const EI_EPSILON: f64 = 1e-12;
/// Threshold of the proximity criterion.
pub const PROXIMITY_THRESHOLD: f64 = 1e-6;
/// With the GP-mean option, every iteration that is a multiple of this uses
/// the mean instead of EI.
pub const MEAN_PERIOD: usize = 5;
/// Relative finite-difference step, as a fraction of the box diagonal.
const FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Space-filling warm-up, then a quasi-Newton ascent from its best point,
    /// repeated with fresh warm-ups.
    MultistartBfgs,
    /// Best of uniformly drawn points, no local step.
    RandomOnly,
    /// One ascent from one uniform starting point.
    SingleLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionStrategy {
    pub kind: StrategyKind,
    pub warmup_size: usize,
    pub restarts: usize,
}

impl AcquisitionStrategy {
    /// Warm-up of `min(2000, 500 d)` points and `min(10, d)` restarts.
    pub fn new(kind: StrategyKind, d: usize) -> Self {
        Self {
            kind,
            warmup_size: (500 * d).min(2000),
            restarts: d.clamp(1, 10),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionStatus {
    EiSuccess,
    /// The GP mean was used because of the periodic schedule.
    ScheduledMean,
    FellBackToMean,
    FellBackToRandom,
    ReplacedByProximity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionOutcome {
    pub point: Vec<f64>,
    /// Value of the criterion that produced the point (EI, or minus the
    /// mean). For random points, the EI there.
    pub value: f64,
    pub status: AcquisitionStatus,
}

/// EI for a Gaussian prediction `N(mean, sd^2)` below `f_min`.
pub fn ei_from_moments(mean: f64, sd: f64, f_min: f64) -> f64 {
    let diff = f_min - mean;
    if !(sd > 0.0) {
        return diff.max(0.0);
    }
    let u = diff / sd;
    (diff * norm_cdf(u) + sd * norm_pdf(u)).max(0.0)
}

fn zero_sd(model: &GPModel) -> f64 {
    1e-12 * model.variance().sqrt()
}

pub fn expected_improvement(model: &GPModel, f_min: f64, x: &[f64]) -> f64 {
    let (m, var) = model.posterior_moments(x);
    let s = var.sqrt();
    if s <= zero_sd(model) {
        return (f_min - m).max(0.0);
    }
    ei_from_moments(m, s, f_min)
}

pub fn neg_posterior_mean(model: &GPModel, x: &[f64]) -> f64 {
    -model.posterior_mean(x)
}

/// Smallest normalized distance between `x` and the training points,
/// `min_i (c(x_i, x_i) + c(x, x) - 2 c(x_i, x)) / sigma^2`.
pub fn proximity_ratio(model: &GPModel, x: &[f64]) -> f64 {
    let (cxx, rows) = model.posterior_cov_to_training(x);
    let k = model.variance();
    rows.iter()
        .map(|(cii, cix)| (cii + cxx - 2.0 * cix) / k)
        .fold(f64::INFINITY, f64::min)
}

pub fn proximity_check(model: &GPModel, x: &[f64]) -> bool {
    proximity_ratio(model, x) >= PROXIMITY_THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Criterion {
    Ei { f_min: f64 },
    NegMean,
}

impl Criterion {
    fn value(self, model: &GPModel, x: &[f64]) -> f64 {
        match self {
            Criterion::Ei { f_min } => expected_improvement(model, f_min, x),
            Criterion::NegMean => neg_posterior_mean(model, x),
        }
    }

    fn value_and_grad(self, model: &GPModel, x: &[f64], space: &SearchSpace) -> (f64, Vec<f64>) {
        if !model.has_analytic_gradient() {
            return self.fd_grad(model, x, space);
        }
        let (m, c, dm, dc) = model.posterior_with_gradient(x);
        match self {
            Criterion::NegMean => (-m, dm.iter().map(|v| -v).collect()),
            Criterion::Ei { f_min } => {
                let s = c.sqrt();
                if s <= zero_sd(model) {
                    let v = (f_min - m).max(0.0);
                    let g = if v > 0.0 { dm.iter().map(|v| -v).collect() } else { vec![0.0; x.len()] };
                    return (v, g);
                }
                let u = (f_min - m) / s;
                let (cdf, pdf) = (norm_cdf(u), norm_pdf(u));
                let v = ((f_min - m) * cdf + s * pdf).max(0.0);
                let g = dm
                    .iter()
                    .zip(&dc)
                    .map(|(dm, dc)| -cdf * dm + pdf * dc / (2.0 * s))
                    .collect();
                (v, g)
            }
        }
    }

    fn fd_grad(self, model: &GPModel, x: &[f64], space: &SearchSpace) -> (f64, Vec<f64>) {
        let d = x.len();
        let diag = (0..d).map(|i| space.width(i).powi(2)).sum::<f64>().sqrt();
        let h = FD_STEP * diag;
        let v = self.value(model, x);
        let mut xp = x.to_vec();
        let g = (0..d)
            .map(|k| {
                let hi = (x[k] + h).min(space.upper()[k]);
                let lo = (x[k] - h).max(space.lower()[k]);
                xp[k] = hi;
                let fp = if hi > x[k] { self.value(model, &xp) } else { v };
                xp[k] = lo;
                let fm = if lo < x[k] { self.value(model, &xp) } else { v };
                xp[k] = x[k];
                if hi > lo {
                    (fp - fm) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect();
        (v, g)
    }
}

struct Search {
    point: Vec<f64>,
    value: f64,
    best_warmup: f64,
}

fn ascend(
    model: &GPModel,
    criterion: Criterion,
    space: &SearchSpace,
    start: &[f64],
    start_value: f64,
) -> (Vec<f64>, f64) {
    let scale = model.variance().sqrt().max(f64::MIN_POSITIVE);
    let opts = LbfgsOptions::default();
    let objective = |x: &[f64]| {
        let (v, g) = criterion.value_and_grad(model, x, space);
        if !v.is_finite() || g.iter().any(|g| !g.is_finite()) {
            return None;
        }
        Some((-v / scale, g.iter().map(|g| -g / scale).collect()))
    };
    match optim::minimize(objective, start, space.lower(), space.upper(), &opts) {
        Some(m) => {
            let v = criterion.value(model, &m.x);
            if v >= start_value {
                (m.x, v)
            } else {
                (start.to_vec(), start_value)
            }
        }
        None => (start.to_vec(), start_value),
    }
}

fn search(
    model: &GPModel,
    criterion: Criterion,
    strategy: &AcquisitionStrategy,
    space: &SearchSpace,
    rng: &mut Rng,
) -> Search {
    let d = space.dim();
    let mut best = Search {
        point: space.sample_uniform(rng),
        value: f64::NEG_INFINITY,
        best_warmup: f64::NEG_INFINITY,
    };
    let consider = |best: &mut Search, x: Vec<f64>, v: f64| {
        // Strict comparison keeps the earliest candidate on ties.
        if v > best.value {
            best.point = x;
            best.value = v;
        }
    };
    match strategy.kind {
        StrategyKind::MultistartBfgs => {
            for _ in 0..strategy.restarts.max(1) {
                let design = doe::lhs(strategy.warmup_size.max(1), d, rng);
                let (mut wx, mut wv) = (None, f64::NEG_INFINITY);
                for u in design.points() {
                    let x = space.from_unit(u);
                    let v = criterion.value(model, &x);
                    if v > wv {
                        wv = v;
                        wx = Some(x);
                    }
                }
                let wx = wx.unwrap_or_else(|| space.sample_uniform(rng));
                best.best_warmup = best.best_warmup.max(wv);
                let (x, v) = ascend(model, criterion, space, &wx, wv);
                consider(&mut best, x, v);
            }
        }
        StrategyKind::RandomOnly => {
            for _ in 0..strategy.warmup_size.max(1) * strategy.restarts.max(1) {
                let x = space.sample_uniform(rng);
                let v = criterion.value(model, &x);
                best.best_warmup = best.best_warmup.max(v);
                consider(&mut best, x, v);
            }
        }
        StrategyKind::SingleLocal => {
            let x0 = space.sample_uniform(rng);
            let v0 = criterion.value(model, &x0);
            best.best_warmup = v0;
            let (x, v) = ascend(model, criterion, space, &x0, v0);
            consider(&mut best, x, v);
        }
    }
    best
}

/// Maximizes EI with the given strategy. Returns `None` when no candidate
/// has EI above [`EI_EPSILON`], which asks the caller for a fallback.
pub fn optimize_acquisition(
    model: &GPModel,
    f_min: f64,
    strategy: &AcquisitionStrategy,
    space: &SearchSpace,
    seed: u64,
) -> Option<AcquisitionOutcome> {
    let mut rng = rng::stream(seed, Stream::AcquisitionWarmup);
    let found = search(model, Criterion::Ei { f_min }, strategy, space, &mut rng);
    (found.value > EI_EPSILON).then(|| AcquisitionOutcome {
        point: found.point,
        value: found.value,
        status: AcquisitionStatus::EiSuccess,
    })
}

/// Minimizes the posterior mean with the given strategy.
pub fn optimize_mean(
    model: &GPModel,
    strategy: &AcquisitionStrategy,
    space: &SearchSpace,
    seed: u64,
) -> (Vec<f64>, f64) {
    let mut rng = rng::stream(seed, Stream::AcquisitionWarmup);
    let found = search(model, Criterion::NegMean, strategy, space, &mut rng);
    (found.point, found.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquireOptions {
    pub strategy: AcquisitionStrategy,
    /// Use the GP mean periodically and as the first fallback.
    pub use_mean: bool,
    /// Iteration index, counted from 1 at the first acquisition after the
    /// initial design.
    pub iteration: usize,
}

/// Picks the next point to evaluate.
///
/// Failures to find a positive EI, and EI points rejected by the proximity
/// check, increment `state.consecutive_failures`; an accepted EI point
/// resets it.
pub fn acquire(
    model: &GPModel,
    f_min: f64,
    opts: &AcquireOptions,
    state: &mut TrainerState,
    space: &SearchSpace,
    seed: u64,
) -> AcquisitionOutcome {
    let mut fallback = rng::stream(seed, Stream::Fallback);
    let mean_outcome = |status| {
        let (point, value) = optimize_mean(model, &opts.strategy, space, seed);
        AcquisitionOutcome { point, value, status }
    };
    let outcome = if opts.use_mean && opts.iteration > 0 && opts.iteration % MEAN_PERIOD == 0 {
        mean_outcome(AcquisitionStatus::ScheduledMean)
    } else {
        match optimize_acquisition(model, f_min, &opts.strategy, space, seed) {
            Some(o) => o,
            None => {
                state.consecutive_failures += 1;
                if opts.use_mean {
                    mean_outcome(AcquisitionStatus::FellBackToMean)
                } else {
                    let point = space.sample_uniform(&mut fallback);
                    let value = expected_improvement(model, f_min, &point);
                    AcquisitionOutcome {
                        point,
                        value,
                        status: AcquisitionStatus::FellBackToRandom,
                    }
                }
            }
        }
    };
    let mut outcome = outcome;
    space.clamp(&mut outcome.point);
    if proximity_check(model, &outcome.point) {
        if outcome.status == AcquisitionStatus::EiSuccess {
            state.consecutive_failures = 0;
        }
        return outcome;
    }
    if outcome.status == AcquisitionStatus::EiSuccess {
        state.consecutive_failures += 1;
    }
    let point = space.sample_uniform(&mut fallback);
    let value = expected_improvement(model, f_min, &point);
    AcquisitionOutcome {
        point,
        value,
        status: AcquisitionStatus::ReplacedByProximity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Dataset, KernelFamily, TrendDegree};
    use approx::assert_relative_eq;
    use rand::{Rng as _, SeedableRng};
    use rand_distr::StandardNormal;

    fn model_1d(xs: &[f64], ys: &[f64], theta: f64) -> GPModel {
        let data = Dataset::new(xs.iter().map(|x| vec![*x]).collect(), ys.to_vec());
        GPModel::fit(&data, KernelFamily::Matern52, vec![theta], TrendDegree::Constant, 0.0, None).unwrap()
    }

    fn grid_argmax(f: impl Fn(f64) -> f64, n: usize) -> (f64, f64) {
        (0..=n)
            .map(|i| i as f64 / n as f64)
            .map(|x| (x, f(x)))
            .fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a })
    }

    #[test]
    fn ei_closed_form_values() {
        assert_eq!(ei_from_moments(-1.0, 0.0, 0.0), 1.0);
        assert_relative_eq!(ei_from_moments(-1.0, 1e-300, 0.0), 1.0);
        assert_relative_eq!(ei_from_moments(2.0, 1.0, 2.0), 0.398_942_280_401_432_7, epsilon = 1e-15);
        assert_relative_eq!(ei_from_moments(0.0, 1.0, 1.0), 1.083_315_470_587_686_3, epsilon = 1e-14);
        assert_eq!(ei_from_moments(3.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn ei_matches_monte_carlo() {
        let mut rng = Rng::seed_from_u64(42);
        let n = 10_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let y: f64 = rng.sample(StandardNormal);
            let v = (1.0 - y).max(0.0);
            s1 += v;
            s2 += v * v;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!((ei_from_moments(0.0, 1.0, 1.0) - mean).abs() <= 3.0 * se);
    }

    #[test]
    fn ei_increases_with_uncertainty() {
        for &gap in &[0.1, 1.0, 3.0] {
            let mut prev = 0.0;
            for i in 1..200 {
                let s = i as f64 * 0.05;
                let v = ei_from_moments(gap, s, 0.0);
                assert!(v > prev || (v == 0.0 && prev == 0.0));
                prev = v;
            }
        }
    }

    #[test]
    fn ei_is_nonnegative_and_zero_at_data() {
        let m = model_1d(&[0.1, 0.4, 0.7, 0.95], &[0.3, -0.2, 0.5, 0.1], 0.2);
        for i in 0..=500 {
            assert!(expected_improvement(&m, -0.2, &[i as f64 / 500.0]) >= 0.0);
        }
        for x in m.inputs() {
            assert!(expected_improvement(&m, -0.2, x) < 1e-12);
        }
    }

    #[test]
    fn ei_is_shift_invariant() {
        let xs = [0.1, 0.4, 0.7, 0.95];
        let ys = [0.3, -0.2, 0.5, 0.1];
        let a = model_1d(&xs, &ys, 0.2);
        let shifted: Vec<f64> = ys.iter().map(|y| y + 100.0).collect();
        let b = model_1d(&xs, &shifted, 0.2);
        for i in 0..=100 {
            let x = [i as f64 / 100.0];
            let (ea, eb) = (expected_improvement(&a, -0.2, &x), expected_improvement(&b, 99.8, &x));
            assert!((ea - eb).abs() <= 1e-9 * (1.0 + ea), "{ea} vs {eb}");
        }
    }

    #[test]
    fn neg_mean_at_training_points() {
        let ys = [0.3, -0.2, 0.5, 0.1];
        let m = model_1d(&[0.1, 0.4, 0.7, 0.95], &ys, 0.2);
        assert!((neg_posterior_mean(&m, &[0.4]) - 0.2).abs() < 1e-9);
        let best = (0..4)
            .max_by(|&i, &j| neg_posterior_mean(&m, &m.inputs()[i]).total_cmp(&neg_posterior_mean(&m, &m.inputs()[j])))
            .unwrap();
        assert_eq!(best, 1);
    }

    #[test]
    fn mean_minimizer_matches_grid() {
        let m = model_1d(&[0.2, 0.8], &[1.0, 0.0], 0.3);
        let space = SearchSpace::unit(1);
        let (x, _) = optimize_mean(&m, &AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1), &space, 1);
        let (gx, _) = grid_argmax(|x| neg_posterior_mean(&m, &[x]), 10_000);
        assert!(gx > 0.0 && gx < 1.0);
        assert!((x[0] - gx).abs() <= 2e-4, "{} vs {gx}", x[0]);
    }

    /// Data only at the two ends, so EI has a single interior peak.
    fn single_peak_model() -> GPModel {
        model_1d(&[0.0, 1.0], &[0.3, -0.4], 0.3)
    }

    #[test]
    fn all_strategies_find_a_single_peak() {
        let m = single_peak_model();
        let f_min = -0.4;
        let ei = |x: f64| expected_improvement(&m, f_min, &[x]);
        let n = 100_000;
        let (gx, gv) = grid_argmax(ei, n);
        let peaks = (1..n)
            .filter(|&i| {
                let x = i as f64 / n as f64;
                let h = 1.0 / n as f64;
                ei(x) > 1e-6 * gv && ei(x) > ei(x - h) && ei(x) >= ei(x + h)
            })
            .count();
        assert_eq!(peaks, 1, "test model must have one EI peak");
        let space = SearchSpace::unit(1);
        for kind in [StrategyKind::MultistartBfgs, StrategyKind::RandomOnly, StrategyKind::SingleLocal] {
            let out = optimize_acquisition(&m, f_min, &AcquisitionStrategy::new(kind, 1), &space, 5).unwrap();
            assert!((out.point[0] - gx).abs() <= 1e-3, "{kind:?}: {} vs {gx}", out.point[0]);
        }
    }

    #[test]
    fn local_step_never_loses() {
        let m = model_1d(&[0.1, 0.35, 0.5, 0.9], &[0.0, 0.4, -0.1, 0.2], 0.15);
        let space = SearchSpace::unit(1);
        for seed in 0..10 {
            let mut rng = rng::stream(seed, Stream::AcquisitionWarmup);
            let s = AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1);
            let found = search(&m, Criterion::Ei { f_min: -0.1 }, &s, &space, &mut rng);
            assert!(found.value >= found.best_warmup);
        }
    }

    #[test]
    fn single_local_can_miss_the_better_peak() {
        // Two basins: a shallow one near 0.15 and a deep one near 0.85.
        let m = model_1d(&[0.0, 0.3, 0.5, 0.7, 1.0], &[0.4, 0.5, 1.0, 0.2, 0.1], 0.12);
        let f_min = 0.1;
        let space = SearchSpace::unit(1);
        let multi = optimize_acquisition(&m, f_min, &AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1), &space, 0)
            .unwrap();
        let (_, gv) = grid_argmax(|x| expected_improvement(&m, f_min, &[x]), 100_000);
        assert!(multi.value >= gv * (1.0 - 1e-6));
        let missed = (0..50).any(|seed| {
            let o = optimize_acquisition(&m, f_min, &AcquisitionStrategy::new(StrategyKind::SingleLocal, 1), &space, seed)
                .unwrap();
            o.value < 0.9 * multi.value
        });
        assert!(missed);
    }

    #[test]
    fn deterministic_in_seed() {
        let m = single_peak_model();
        let s = AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1);
        let space = SearchSpace::unit(1);
        assert_eq!(
            optimize_acquisition(&m, -0.4, &s, &space, 7),
            optimize_acquisition(&m, -0.4, &s, &space, 7)
        );
    }

    #[test]
    fn ei_gradient_matches_finite_differences() {
        let mut rng = Rng::seed_from_u64(2);
        let des = doe::lhs(12, 2, &mut rng);
        let y: Vec<f64> = des.points().iter().map(|x| (5.0 * x[0]).sin() + x[1]).collect();
        let data = Dataset::new(des.into_points(), y);
        let m = GPModel::fit(&data, KernelFamily::Matern52, vec![0.3, 0.4], TrendDegree::Linear, 0.0, None).unwrap();
        let space = SearchSpace::unit(2);
        let crit = Criterion::Ei { f_min: m.min_output() };
        for x in [[0.21, 0.66], [0.5, 0.12], [0.83, 0.91]] {
            let (_, g) = crit.value_and_grad(&m, &x, &space);
            let (_, gf) = crit.fd_grad(&m, &x, &space);
            for k in 0..2 {
                assert!((g[k] - gf[k]).abs() < 1e-5 * (1.0 + g[k].abs()), "{g:?} vs {gf:?}");
            }
        }
    }

    #[test]
    fn proximity_examples() {
        let m = model_1d(&[0.2, 0.6], &[0.0, 1.0], 0.3);
        assert!(!proximity_check(&m, &[0.2]));
        let far = model_1d(&[0.2, 0.6], &[0.0, 1.0], 0.01);
        let r = proximity_ratio(&far, &[0.95]);
        assert!(proximity_check(&far, &[0.95]));
        let (cxx, _) = far.posterior_cov_to_training(&[0.95]);
        assert!((r - cxx / far.variance()).abs() < 1e-6);
    }

    #[test]
    fn proximity_boundary_is_inclusive() {
        let m = model_1d(&[0.2, 0.6], &[0.0, 1.0], 0.3);
        let (mut lo, mut hi) = (0.2, 0.4);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if proximity_ratio(&m, &[mid]) >= PROXIMITY_THRESHOLD {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert!(proximity_ratio(&m, &[hi]) >= PROXIMITY_THRESHOLD);
        assert!(proximity_check(&m, &[hi]));
        assert!(proximity_ratio(&m, &[lo]) < PROXIMITY_THRESHOLD);
        assert!(!proximity_check(&m, &[lo]));
        assert!((hi - lo) < 1e-12);
    }

    #[test]
    fn mean_schedule() {
        let m = single_peak_model();
        let space = SearchSpace::unit(1);
        let mut state = TrainerState::default();
        for it in 1..=15 {
            let opts = AcquireOptions {
                strategy: AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1),
                use_mean: true,
                iteration: it,
            };
            let o = acquire(&m, -0.4, &opts, &mut state, &space, it as u64);
            if it % 5 == 0 {
                assert!(matches!(o.status, AcquisitionStatus::ScheduledMean | AcquisitionStatus::ReplacedByProximity));
            } else {
                assert_ne!(o.status, AcquisitionStatus::ScheduledMean);
            }
        }
    }

    #[test]
    fn constant_model_falls_back_to_random() {
        let m = model_1d(&[0.1, 0.5, 0.9], &[2.0, 2.0, 2.0], 0.3);
        let space = SearchSpace::unit(1);
        let mut state = TrainerState::default();
        let opts = AcquireOptions {
            strategy: AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1),
            use_mean: false,
            iteration: 1,
        };
        let o = acquire(&m, 2.0, &opts, &mut state, &space, 0);
        assert!(matches!(o.status, AcquisitionStatus::FellBackToRandom | AcquisitionStatus::ReplacedByProximity));
        assert_eq!(state.consecutive_failures, 1);
    }

    #[test]
    fn duplicate_proposal_is_replaced() {
        // The mean minimizer of an interpolating model on a grid of data is a
        // training point, so the scheduled mean step proposes a duplicate.
        let m = model_1d(&[0.0, 0.25, 0.5, 0.75, 1.0], &[1.0, 0.5, -1.0, 0.5, 1.0], 0.05);
        let space = SearchSpace::unit(1);
        let mut state = TrainerState::default();
        let opts = AcquireOptions {
            strategy: AcquisitionStrategy::new(StrategyKind::MultistartBfgs, 1),
            use_mean: true,
            iteration: 5,
        };
        let o = acquire(&m, -1.0, &opts, &mut state, &space, 0);
        assert_eq!(o.status, AcquisitionStatus::ReplacedByProximity);
    }

    #[test]
    fn fuzzed_calls_stay_in_the_box() {
        let mut rng = Rng::seed_from_u64(9);
        let models: Vec<(GPModel, SearchSpace)> = (1..=3)
            .map(|d| {
                let des = doe::lhs(4 + 2 * d, d, &mut rng);
                let y: Vec<f64> = (0..des.n()).map(|_| rng.gen()).collect();
                let data = Dataset::new(des.into_points(), y);
                let m = GPModel::fit(&data, KernelFamily::Matern52, vec![0.3; d], TrendDegree::Constant, 0.0, None)
                    .unwrap();
                (m, SearchSpace::unit(d))
            })
            .collect();
        let mut state = TrainerState::default();
        for i in 0..10_000u64 {
            let (m, space) = &models[(i % 3) as usize];
            let kind = [StrategyKind::MultistartBfgs, StrategyKind::RandomOnly, StrategyKind::SingleLocal][(i / 3 % 3) as usize];
            let opts = AcquireOptions {
                strategy: AcquisitionStrategy { kind, warmup_size: 8, restarts: 1 },
                use_mean: rng.gen(),
                iteration: rng.gen_range(1..20),
            };
            let f_min = rng.gen_range(-1.0..1.5);
            let o = acquire(m, f_min, &opts, &mut state, space, i);
            assert!(space.contains(&o.point));
        }
    }
}
