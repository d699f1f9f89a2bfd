//! Benchmark metrics: ERTD curves, relative optimization performance, Q2
//! and the normality of standardized prediction residuals.

use crate::bo::RunResult;
use crate::doe;
use crate::error::{Error, Result};
use crate::gp::{Dataset, GPModel, KernelFamily, TrendDegree};
use crate::rng::{self, Stream};
use crate::stats;
use crate::testbed::{make_instance_any_dim, TestFunctionId};
use crate::train::{self, OutputRescaler, TrainConfig, TrainerState};
use crate::transforms::{self, OutputWarp};
use serde::{Deserialize, Serialize};

pub use crate::stats::{ks_normal_pvalue, ks_statistic};

/// Proportion of problems solved as a function of the number of
/// evaluations, on the grid `1..=max_evals`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErtdCurve {
    pub evals: Vec<usize>,
    pub proportion: Vec<f64>,
    pub problems: usize,
}

impl ErtdCurve {
    /// Proportion solved after `n` evaluations (0 before the first).
    pub fn at(&self, n: usize) -> f64 {
        match n {
            0 => 0.0,
            n => self.proportion[n.min(self.evals.len()) - 1],
        }
    }

    pub fn final_value(&self) -> f64 {
        self.proportion.last().copied().unwrap_or(0.0)
    }

    /// `log10(n / d)` for each grid point, the usual plotting abscissa.
    pub fn log_evals(&self, d: usize) -> Vec<f64> {
        self.evals.iter().map(|n| (*n as f64 / d as f64).log10()).collect()
    }
}

/// ERTD from the 1-based first-hit index of each problem.
pub fn ertd_from_hits(hits: &[Option<usize>], max_evals: usize) -> Result<ErtdCurve> {
    if hits.is_empty() {
        return Err(Error::Empty("problem set"));
    }
    let mut solved_at = vec![0usize; max_evals + 1];
    for h in hits.iter().flatten() {
        if *h >= 1 && *h <= max_evals {
            solved_at[*h] += 1;
        }
    }
    let total = hits.len() as f64;
    let mut acc = 0;
    let proportion = (1..=max_evals)
        .map(|n| {
            acc += solved_at[n];
            acc as f64 / total
        })
        .collect();
    Ok(ErtdCurve {
        evals: (1..=max_evals).collect(),
        proportion,
        problems: hits.len(),
    })
}

/// First hits of each target `f_opt + precision` by one run.
pub fn run_hits(run: &RunResult, precisions: &[f64]) -> Vec<Option<usize>> {
    precisions
        .iter()
        .map(|p| {
            let target = run.instance.f_opt + p;
            run.evaluations.iter().position(|e| e.1 <= target).map(|i| i + 1)
        })
        .collect()
}

/// ERTD over every (run, precision) problem.
pub fn ertd(runs: &[&RunResult], precisions: &[f64], max_evals: usize) -> Result<ErtdCurve> {
    let hits: Vec<Option<usize>> = runs.iter().flat_map(|r| run_hits(r, precisions)).collect();
    ertd_from_hits(&hits, max_evals)
}

/// Per-problem earliest hit over several methods run on the same problems.
pub fn virtual_best_hits(per_method: &[Vec<Option<usize>>]) -> Vec<Option<usize>> {
    let n = per_method.first().map_or(0, |v| v.len());
    (0..n)
        .map(|i| per_method.iter().filter_map(|v| v[i]).min())
        .collect()
}

/// Relative optimization performance `(algo - random) / (reference - random)`.
pub fn popt(algo: f64, reference: f64, random: f64) -> Result<f64> {
    let den = reference - random;
    if !(den > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    Ok((algo - random) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Q2 {
    /// Clamped to `[-1, 1]`.
    pub value: f64,
    pub raw: f64,
    pub clamped: bool,
}

pub fn q2(y_true: &[f64], y_pred: &[f64]) -> Result<Q2> {
    if y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: y_true.len(),
            got: y_pred.len(),
        });
    }
    if y_true.len() < 2 {
        return Err(Error::InvalidArgument("Q2 needs at least two values".into()));
    }
    let mean = stats::mean(y_true);
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if !(ss_tot > 0.0) {
        return Err(Error::InvalidArgument("Q2 of a constant sample".into()));
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p) * (y - p)).sum();
    let raw = 1.0 - ss_res / ss_tot;
    Ok(Q2 {
        value: raw.max(-1.0),
        raw,
        clamped: raw < -1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpVariant {
    Default,
    Quadratic,
    Scaling,
    Warping,
    Exponential,
}

impl GpVariant {
    pub const ALL: [GpVariant; 5] = [
        GpVariant::Default,
        GpVariant::Quadratic,
        GpVariant::Scaling,
        GpVariant::Warping,
        GpVariant::Exponential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GpVariant::Default => "default",
            GpVariant::Quadratic => "quadratic",
            GpVariant::Scaling => "scaling",
            GpVariant::Warping => "warping",
            GpVariant::Exponential => "exponential",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownConfig(s.to_string()))
    }

    fn family(self) -> KernelFamily {
        match self {
            GpVariant::Exponential => KernelFamily::Exponential,
            _ => KernelFamily::Matern52,
        }
    }

    fn degree(self) -> TrendDegree {
        match self {
            GpVariant::Quadratic => TrendDegree::QuadraticNoInteraction,
            _ => TrendDegree::Constant,
        }
    }
}

/// Held-out prediction quality of one GP variant on one function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionEntry {
    pub variant: GpVariant,
    pub function: TestFunctionId,
    pub dim: usize,
    pub q2_mean: f64,
    pub q2_sd: f64,
    pub ks_mean: f64,
    pub ks_sd: f64,
    pub q2_values: Vec<f64>,
    pub instances_used: usize,
    /// Instances on which training failed.
    pub instances_skipped: usize,
}

/// Points per design, `30 d`.
pub fn regression_design_size(d: usize) -> usize {
    30 * d
}

struct Prediction {
    q2: f64,
    ks: f64,
}

fn regression_instance(variant: GpVariant, fid: TestFunctionId, d: usize, seed: u64) -> Result<Prediction> {
    let instance = make_instance_any_dim(fid, d, seed)?;
    let n = regression_design_size(d);
    let mut rng = rng::stream(seed, Stream::Experiment);
    let iters = doe::default_improve_iters(n, d);
    let train_design = doe::maximin_lhs_with(n, d, &mut rng, iters);
    let test_design = doe::maximin_lhs_with(n, d, &mut rng, iters);
    let f = |u: &[f64]| instance.value(&instance.space().from_unit(u));
    let y_train: Vec<f64> = train_design.points().iter().map(|u| f(u)).collect();
    let y_test: Vec<f64> = test_design.points().iter().map(|u| f(u)).collect();

    let rescaler = OutputRescaler::fit(&y_train);
    let mut z: Vec<f64> = y_train.iter().map(|v| rescaler.forward(*v)).collect();
    let mut warp = OutputWarp::identity();
    if variant == GpVariant::Warping {
        let data = Dataset::new(train_design.points().to_vec(), z.clone());
        warp = transforms::warp_fit(&data, variant.family(), variant.degree(), rng::child_seed(&mut rng)).warp;
        z = z.iter().map(|v| warp.apply(*v)).collect();
    }
    let data = Dataset::new(train_design.into_points(), z);
    let config = TrainConfig::new(variant.family(), variant.degree(), variant == GpVariant::Scaling, d);
    let model: GPModel = train::train(&data, &config, &mut TrainerState::default(), rng::child_seed(&mut rng))?.model;

    let mut y_pred = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (u, y) in test_design.points().iter().zip(&y_test) {
        let (m, c) = model.posterior_moments(u);
        y_pred.push(rescaler.inverse(warp.invert(m)));
        let z_true = warp.apply(rescaler.forward(*y));
        residuals.push((z_true - m) / c.sqrt().max(f64::MIN_POSITIVE));
    }
    Ok(Prediction {
        q2: q2(&y_test, &y_pred)?.value,
        ks: ks_normal_pvalue(&residuals),
    })
}

/// Trains `variant` on a `30 d` maximin design and tests it on another, on
/// `n_instances` instances of `fid`.
pub fn regression_experiment(
    variant: GpVariant,
    fid: TestFunctionId,
    d: usize,
    n_instances: usize,
    seed: u64,
) -> Result<RegressionEntry> {
    let mut seeds = rng::stream(seed, Stream::Instance);
    let mut q2s = Vec::new();
    let mut kss = Vec::new();
    let mut skipped = 0;
    for _ in 0..n_instances {
        let s = rng::child_seed(&mut seeds);
        match regression_instance(variant, fid, d, s) {
            Ok(p) => {
                q2s.push(p.q2);
                kss.push(p.ks);
            }
            Err(Error::UnsupportedDimension(d)) => return Err(Error::UnsupportedDimension(d)),
            Err(_) => skipped += 1,
        }
    }
    if q2s.is_empty() {
        return Err(Error::Training(format!("{} failed on every instance of {fid}", variant.name())));
    }
    Ok(RegressionEntry {
        variant,
        function: fid,
        dim: d,
        q2_mean: stats::mean(&q2s),
        q2_sd: stats::std_sample(&q2s),
        ks_mean: stats::mean(&kss),
        ks_sd: stats::std_sample(&kss),
        instances_used: q2s.len(),
        q2_values: q2s,
        instances_skipped: skipped,
    })
}

/// Ranks from 1 (largest value) upward; ties keep the input order.
pub fn ranks_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut ranks = vec![0; values.len()];
    for (r, i) in order.into_iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub entry: RegressionEntry,
    pub rank_q2: usize,
}

/// Regression entries with Q2 ranks computed among the variants of each
/// (function, dimension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub entries: Vec<RankedEntry>,
}

impl RegressionReport {
    /// Ties are broken by variant registry order.
    pub fn new(mut entries: Vec<RegressionEntry>) -> Self {
        let pos = |v: GpVariant| GpVariant::ALL.iter().position(|x| *x == v).unwrap_or(usize::MAX);
        entries.sort_by(|a, b| {
            (a.function, a.dim, pos(a.variant)).cmp(&(b.function, b.dim, pos(b.variant)))
        });
        let mut ranked = Vec::with_capacity(entries.len());
        let mut i = 0;
        while i < entries.len() {
            let key = (entries[i].function, entries[i].dim);
            let j = entries[i..]
                .iter()
                .position(|e| (e.function, e.dim) != key)
                .map_or(entries.len(), |k| i + k);
            let q: Vec<f64> = entries[i..j].iter().map(|e| e.q2_mean).collect();
            for (e, r) in entries[i..j].iter().zip(ranks_descending(&q)) {
                ranked.push(RankedEntry {
                    entry: e.clone(),
                    rank_q2: r,
                });
            }
            i = j;
        }
        Self { entries: ranked }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bo::random_search_baseline;
    use crate::testbed::make_instance;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ertd_example() {
        let c = ertd_from_hits(&[Some(5), None], 90).unwrap();
        assert_eq!(c.at(4), 0.0);
        assert_eq!(c.at(5), 0.5);
        assert_eq!(c.at(90), 0.5);
        assert_eq!(c.final_value(), 0.5);
        assert!(ertd_from_hits(&[], 10).is_err());
        let flat = ertd_from_hits(&[None, None, None], 20).unwrap();
        assert!(flat.proportion.iter().all(|p| *p == 0.0));
        assert_relative_eq!(c.log_evals(3)[29], 1.0);
    }

    #[test]
    fn unreachable_targets_give_a_flat_curve() {
        let inst = make_instance(TestFunctionId::Sphere, 2, 0).unwrap();
        let r = random_search_baseline(&inst, 30, 0);
        let c = ertd(&[&r], &[-1.0, -10.0], 30).unwrap();
        assert!(c.proportion.iter().all(|p| *p == 0.0));
    }

    #[test]
    fn random_search_hit_probability() {
        let inst = make_instance(TestFunctionId::Sphere, 2, 3).unwrap();
        let s = inst.shift().to_vec();
        // Area of the radius-10 disc around the optimum inside the box, on
        // a fine midpoint grid.
        let m = 2000;
        let h = 10.0 / m as f64;
        let mut inside = 0usize;
        for i in 0..m {
            for j in 0..m {
                let x = -5.0 + (i as f64 + 0.5) * h;
                let y = -5.0 + (j as f64 + 0.5) * h;
                if (x - s[0]).powi(2) + (y - s[1]).powi(2) <= 100.0 {
                    inside += 1;
                }
            }
        }
        let p = inside as f64 / (m * m) as f64;
        let runs: Vec<_> = (0..100).map(|seed| random_search_baseline(&inst, 20, seed)).collect();
        let refs: Vec<&RunResult> = runs.iter().collect();
        let c = ertd(&refs, &[1e2], 20).unwrap();
        for n in [1, 2, 3, 5, 10, 20] {
            let exact = 1.0 - (1.0 - p).powi(n as i32);
            assert!((c.at(n) - exact).abs() <= 0.05, "n={n}: {} vs {exact}", c.at(n));
        }
    }

    #[test]
    fn popt_examples() {
        assert_eq!(popt(0.2, 0.8, 0.2).unwrap(), 0.0);
        assert_eq!(popt(0.8, 0.8, 0.2).unwrap(), 1.0);
        assert_relative_eq!(popt(0.6, 0.8, 0.2).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(popt(0.5, 0.3, 0.3), Err(Error::DegenerateDenominator));
        assert_eq!(popt(0.5, 0.2, 0.3), Err(Error::DegenerateDenominator));
    }

    #[test]
    fn virtual_best() {
        let a = vec![Some(3), None, Some(9)];
        let b = vec![Some(5), Some(7), None];
        assert_eq!(virtual_best_hits(&[a, b]), vec![Some(3), Some(7), Some(9)]);
    }

    #[test]
    fn q2_examples() {
        let y = [1.0, 3.0, 2.0, 6.0];
        assert_eq!(q2(&y, &y).unwrap().value, 1.0);
        let mean = [3.0; 4];
        assert_eq!(q2(&y, &mean).unwrap().value, 0.0);
        let mirrored: Vec<f64> = y.iter().map(|v| 6.0 - v).collect();
        assert_eq!(q2(&y, &mirrored).unwrap().value, -1.0);
        let wild: Vec<f64> = y.iter().map(|v| -10.0 * v).collect();
        let w = q2(&y, &wild).unwrap();
        assert_eq!(w.value, -1.0);
        assert!(w.clamped && w.raw < -1.0);
        assert!(q2(&[2.0, 2.0], &[1.0, 3.0]).is_err());
        assert!(q2(&[2.0], &[1.0]).is_err());
    }

    #[test]
    fn ks_examples() {
        let n = 100;
        let q: Vec<f64> = (1..=n)
            .map(|i| {
                let p = (i as f64 - 0.5) / n as f64;
                // Invert the normal CDF by bisection.
                let (mut lo, mut hi) = (-10.0, 10.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if stats::norm_cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        assert!(ks_statistic(&q) <= 0.005 + 1e-12);
        assert!(ks_normal_pvalue(&q) >= 0.999);
        let zeros = vec![0.0; 50];
        assert_relative_eq!(ks_statistic(&zeros), 0.5, epsilon = 1e-15);
        assert!(ks_normal_pvalue(&zeros) < 1e-10);
        let shifted: Vec<f64> = q.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!(ks_normal_pvalue(&shifted) < ks_normal_pvalue(&q));
    }

    #[test]
    fn ranks() {
        assert_eq!(ranks_descending(&[0.5, 0.9, 0.1]), vec![2, 1, 3]);
        assert_eq!(ranks_descending(&[0.5, 0.5, 0.7]), vec![2, 3, 1]);
    }

    #[test]
    fn regression_is_deterministic_and_ranked() {
        let a = regression_experiment(GpVariant::Default, TestFunctionId::Sphere, 2, 2, 5).unwrap();
        assert_eq!(a, regression_experiment(GpVariant::Default, TestFunctionId::Sphere, 2, 2, 5).unwrap());
        assert!(a.q2_mean > 0.99 && a.q2_mean <= 1.0);
        let b = regression_experiment(GpVariant::Warping, TestFunctionId::Sphere, 2, 2, 5).unwrap();
        let report = RegressionReport::new(vec![b, a]);
        let mut r: Vec<usize> = report.entries.iter().map(|e| e.rank_q2).collect();
        r.sort();
        assert_eq!(r, vec![1, 2]);
        assert_eq!(report.entries[0].entry.variant, GpVariant::Default);
    }

    proptest! {
        #[test]
        fn ertd_is_monotone(hits in proptest::collection::vec(proptest::option::of(1usize..60), 1..40)) {
            let c = ertd_from_hits(&hits, 50).unwrap();
            prop_assert!(c.proportion.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(c.proportion.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn q2_is_affine_invariant(y in proptest::collection::vec(-10.0..10.0f64, 3..20), a in 0.1..10.0f64, b in -50.0..50.0f64, noise in 0.0..2.0f64) {
            let pred: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + noise * ((i as f64).sin())).collect();
            prop_assume!(y.iter().any(|v| (v - y[0]).abs() > 1e-3));
            let q = q2(&y, &pred).unwrap().raw;
            let ya: Vec<f64> = y.iter().map(|v| a * v + b).collect();
            let pa: Vec<f64> = pred.iter().map(|v| a * v + b).collect();
            let qa = q2(&ya, &pa).unwrap().raw;
            prop_assert!((q - qa).abs() <= 1e-12 * (1.0 + q.abs()));
        }

        #[test]
        fn ks_pvalue_decreases_with_d(a in 0.0..3.0f64, b in 0.0..3.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(stats::kolmogorov_sf(lo) >= stats::kolmogorov_sf(hi));
        }
    }
}
