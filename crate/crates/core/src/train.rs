//! Hyperparameter training by multistart maximum likelihood.

use crate::doe;
use crate::error::{Error, Result};
use crate::gp::likelihood::LikelihoodProblem;
use crate::gp::{Dataset, GPModel, KernelFamily, TrendDegree};
use crate::optim::{self, LbfgsOptions};
use crate::rng::Rng;
use crate::stats;
use crate::testbed::SearchSpace;
use crate::transforms::{InputScaling, SCALING_PARAM_BOUNDS};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

/// Consecutive acquisition failures after which the lengthscales are shrunk
/// instead of re-estimated.
pub const RANGE_DECREASE_AFTER: usize = 3;
pub const RANGE_DECREASE_FACTOR: f64 = 2.0 / 3.0;
/// Nugget, relative to the output variance, added once plain training fails.
pub const NUGGET_RATIO: f64 = 1e-8;

/// Affine map of raw objective values to zero mean and unit population
/// standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputRescaler {
    pub mean: f64,
    pub scale: f64,
}

impl OutputRescaler {
    /// A constant sample keeps scale 1.
    pub fn fit(values: &[f64]) -> Self {
        let mean = stats::mean(values);
        let sd = stats::std_pop(values);
        let scale = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        Self { mean, scale }
    }

    pub fn forward(&self, f: f64) -> f64 {
        (f - self.mean) / self.scale
    }

    pub fn inverse(&self, y: f64) -> f64 {
        y * self.scale + self.mean
    }
}

/// Lengthscale box `[w sqrt(d) / 100, w sqrt(d)]` per axis of width `w`.
pub fn lengthscale_bounds(space: &SearchSpace) -> (Vec<f64>, Vec<f64>) {
    let sd = (space.dim() as f64).sqrt();
    let w: Vec<f64> = (0..space.dim()).map(|i| space.width(i)).collect();
    (
        w.iter().map(|w| w * sd / 100.0).collect(),
        w.iter().map(|w| w * sd).collect(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub family: KernelFamily,
    pub degree: TrendDegree,
    pub input_scaling: bool,
    /// Box of the training inputs, which sets the lengthscale bounds.
    pub space: SearchSpace,
    pub lbfgs: LbfgsOptions,
}

impl TrainConfig {
    /// Configuration for inputs in the unit cube of dimension `d`.
    pub fn new(family: KernelFamily, degree: TrendDegree, input_scaling: bool, d: usize) -> Self {
        Self {
            family,
            degree,
            input_scaling,
            space: SearchSpace::unit(d),
            lbfgs: LbfgsOptions::default(),
        }
    }
}

/// State carried between trainings of one optimization run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub consecutive_failures: usize,
    pub nugget_active: bool,
    pub nugget: f64,
    pub previous_lengthscales: Option<Vec<f64>>,
    pub previous_scaling: Option<InputScaling>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: GPModel,
    pub likelihood_evaluations: usize,
    /// The lengthscales were shrunk without a likelihood search.
    pub range_decreased: bool,
    /// The nugget was switched on during this training.
    pub nugget_engaged: bool,
    /// Starting points of the local searches, in log-parameter space.
    pub start_points: Vec<Vec<f64>>,
}

struct Search {
    lengthscales: Vec<f64>,
    scaling: Option<InputScaling>,
    evaluations: usize,
    starts: Vec<Vec<f64>>,
}

fn search(
    data: &Dataset,
    config: &TrainConfig,
    state: &TrainerState,
    nugget: f64,
    rng: &mut Rng,
) -> Result<Search> {
    let d = data.dim();
    let problem = LikelihoodProblem::new(&data.inputs, config.family, config.degree, nugget)?;
    let (lo, hi) = lengthscale_bounds(&config.space);
    let mut lower: Vec<f64> = lo.iter().map(|v| v.ln()).collect();
    let mut upper: Vec<f64> = hi.iter().map(|v| v.ln()).collect();
    if config.input_scaling {
        let (a, b) = (SCALING_PARAM_BOUNDS.0.ln(), SCALING_PARAM_BOUNDS.1.ln());
        lower.extend(std::iter::repeat(a).take(2 * d));
        upper.extend(std::iter::repeat(b).take(2 * d));
    }
    let m = lower.len();

    let mut starts: Vec<Vec<f64>> = doe::lhs(2 * d, m, rng)
        .points()
        .iter()
        .map(|u| (0..m).map(|k| lower[k] + u[k] * (upper[k] - lower[k])).collect())
        .collect();
    if let Some(prev) = &state.previous_lengthscales {
        let mut warm: Vec<f64> = prev.iter().map(|v| v.ln()).collect();
        if config.input_scaling {
            let s = state
                .previous_scaling
                .clone()
                .unwrap_or_else(|| InputScaling::identity(d));
            warm.extend(s.alpha.iter().chain(&s.beta).map(|v| v.ln()));
        }
        starts.push(warm);
    }

    let mut evaluations = 0usize;
    let objective = |p: &[f64]| -> Option<(f64, Vec<f64>)> {
        evaluations += 1;
        let theta: Vec<f64> = p[..d].iter().map(|v| v.exp()).collect();
        let scaling = config.input_scaling.then(|| InputScaling {
            alpha: p[d..2 * d].iter().map(|v| v.exp()).collect(),
            beta: p[2 * d..].iter().map(|v| v.exp()).collect(),
        });
        let v = problem
            .evaluate(&theta, scaling.as_ref(), &data.outputs, false)
            .ok()?;
        let mut g = v.grad.log_theta;
        g.extend(v.grad.log_scaling);
        Some((v.nll, g))
    };
    let mut objective = objective;
    let mut best: Option<optim::Minimum> = None;
    for s in &starts {
        if let Some(found) = optim::minimize(&mut objective, s, &lower, &upper, &config.lbfgs) {
            if best.as_ref().map_or(true, |b| found.value < b.value) {
                best = Some(found);
            }
        }
    }
    let best = best.ok_or(Error::Factorization)?;
    let x = best.x;
    Ok(Search {
        lengthscales: x[..d].iter().map(|v| v.exp()).collect(),
        scaling: config.input_scaling.then(|| InputScaling {
            alpha: x[d..2 * d].iter().map(|v| v.exp()).collect(),
            beta: x[2 * d..].iter().map(|v| v.exp()).collect(),
        }),
        evaluations,
        starts,
    })
}

fn engage_nugget(state: &mut TrainerState, outputs: &[f64]) {
    let var = stats::std_pop(outputs).powi(2);
    state.nugget = if var > 0.0 && var.is_finite() {
        NUGGET_RATIO * var
    } else {
        NUGGET_RATIO
    };
    state.nugget_active = true;
}

/// Estimates the hyperparameters on `data` and conditions a model on them.
///
/// After [`RANGE_DECREASE_AFTER`] consecutive acquisition failures the
/// previous lengthscales are multiplied by [`RANGE_DECREASE_FACTOR`] and no
/// likelihood search is run. If no local search succeeds a nugget is
/// switched on for the rest of the run and training is retried once.
pub fn train(
    data: &Dataset,
    config: &TrainConfig,
    state: &mut TrainerState,
    seed: u64,
) -> Result<TrainOutcome> {
    if data.is_empty() {
        return Err(Error::Empty("training data"));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let d = data.dim();
    let mut nugget_engaged = false;

    if state.consecutive_failures >= RANGE_DECREASE_AFTER {
        if let Some(prev) = state.previous_lengthscales.clone() {
            let (lo, hi) = lengthscale_bounds(&config.space);
            let theta: Vec<f64> = prev
                .iter()
                .enumerate()
                .map(|(k, v)| (v * RANGE_DECREASE_FACTOR).clamp(lo[k], hi[k]))
                .collect();
            let scaling = if config.input_scaling {
                state.previous_scaling.clone()
            } else {
                None
            };
            let fit = |nugget: f64| {
                GPModel::fit(data, config.family, theta.clone(), config.degree, nugget, scaling.clone())
            };
            let model = match fit(state.nugget) {
                Err(Error::Factorization) if !state.nugget_active => {
                    engage_nugget(state, &data.outputs);
                    nugget_engaged = true;
                    fit(state.nugget)
                }
                other => other,
            }
            .map_err(|e| Error::Training(e.to_string()))?;
            state.previous_lengthscales = Some(theta);
            return Ok(TrainOutcome {
                model,
                likelihood_evaluations: 0,
                range_decreased: true,
                nugget_engaged,
                start_points: Vec::new(),
            });
        }
    }

    let attempt = |state: &TrainerState, rng: &mut Rng| -> Result<(GPModel, Search)> {
        let nugget = if state.nugget_active { state.nugget } else { 0.0 };
        let found = search(data, config, state, nugget, rng)?;
        let model = GPModel::fit(
            data,
            config.family,
            found.lengthscales.clone(),
            config.degree,
            nugget,
            found.scaling.clone(),
        )?;
        Ok((model, found))
    };
    let (model, found) = match attempt(state, &mut rng) {
        Ok(v) => v,
        Err(Error::Factorization) if !state.nugget_active => {
            engage_nugget(state, &data.outputs);
            nugget_engaged = true;
            attempt(state, &mut rng).map_err(|e| match e {
                Error::Factorization => Error::Training("no start could be evaluated".into()),
                other => other,
            })?
        }
        Err(Error::Factorization) => {
            return Err(Error::Training("no start could be evaluated".into()))
        }
        Err(e) => return Err(e),
    };
    debug_assert_eq!(found.lengthscales.len(), d);
    state.previous_lengthscales = Some(found.lengthscales);
    state.previous_scaling = found.scaling;
    Ok(TrainOutcome {
        model,
        likelihood_evaluations: found.evaluations,
        range_decreased: false,
        nugget_engaged,
        start_points: found.starts,
    })
}
