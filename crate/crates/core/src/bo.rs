//! The optimization loop, the registry of named configurations and the
//! random-search baseline.

use crate::acquisition::{self, AcquireOptions, AcquisitionStatus, AcquisitionStrategy, StrategyKind};
use crate::doe::{self, DoeClass};
use crate::error::{Error, Result};
use crate::gp::{Dataset, KernelFamily, TrendDegree};
use crate::rng::{self, Stream};
use crate::testbed::{self, EvaluationLedger, FunctionInstance, InstanceDescriptor, SearchSpace};
use crate::train::{self, OutputRescaler, TrainConfig, TrainerState};
use crate::transforms::{self, OutputWarp};
use serde::{Deserialize, Serialize};

pub const DEFAULT_BUDGET_MULTIPLIER: usize = 30;
/// A run stops after this many consecutive iterations without a model.
pub const MAX_CONSECUTIVE_FAILURES: usize = 10;

/// Names of the registered configurations, in registry order.
pub const CONFIG_NAMES: [&str; 21] = [
    "M", "S", "L", "LinM", "QuadM", "ScalM", "ScalS", "ScalL", "WarpM", "WarpS", "WarpL", "ExpM",
    "ExpS", "ExpScalM", "MeanM", "EirandM", "EilocM", "MeanS", "ExpMeanS", "QuadMean", "ExpWarpM",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BOConfig {
    pub name: String,
    pub doe_class: DoeClass,
    pub kernel_family: KernelFamily,
    pub trend_degree: TrendDegree,
    pub output_warp: bool,
    pub input_scaling: bool,
    pub gp_mean_acq: bool,
    pub ei_strategy: StrategyKind,
    pub budget_multiplier: usize,
}

impl BOConfig {
    fn default_named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            doe_class: DoeClass::Medium,
            kernel_family: KernelFamily::Matern52,
            trend_degree: TrendDegree::Constant,
            output_warp: false,
            input_scaling: false,
            gp_mean_acq: false,
            ei_strategy: StrategyKind::MultistartBfgs,
            budget_multiplier: DEFAULT_BUDGET_MULTIPLIER,
        }
    }

    pub fn budget(&self, d: usize) -> usize {
        self.budget_multiplier * d
    }
}

/// Looks up a registered configuration and checks that its initial design
/// fits in the budget at dimension `d`.
pub fn config_from_name(name: &str, d: usize) -> Result<BOConfig> {
    let mut c = BOConfig::default_named(name);
    match name {
        "M" => {}
        "S" => c.doe_class = DoeClass::Small,
        "L" => c.doe_class = DoeClass::Large,
        "LinM" => c.trend_degree = TrendDegree::Linear,
        "QuadM" => c.trend_degree = TrendDegree::QuadraticNoInteraction,
        "ScalM" => c.input_scaling = true,
        "ScalS" => {
            c.input_scaling = true;
            c.doe_class = DoeClass::Small;
        }
        "ScalL" => {
            c.input_scaling = true;
            c.doe_class = DoeClass::Large;
        }
        "WarpM" => c.output_warp = true,
        "WarpS" => {
            c.output_warp = true;
            c.doe_class = DoeClass::Small;
        }
        "WarpL" => {
            c.output_warp = true;
            c.doe_class = DoeClass::Large;
        }
        "ExpM" => c.kernel_family = KernelFamily::Exponential,
        "ExpS" => {
            c.kernel_family = KernelFamily::Exponential;
            c.doe_class = DoeClass::Small;
        }
        "ExpScalM" => {
            c.kernel_family = KernelFamily::Exponential;
            c.input_scaling = true;
        }
        "ExpWarpM" => {
            c.kernel_family = KernelFamily::Exponential;
            c.output_warp = true;
        }
        "MeanM" => c.gp_mean_acq = true,
        "EirandM" => c.ei_strategy = StrategyKind::RandomOnly,
        "EilocM" => c.ei_strategy = StrategyKind::SingleLocal,
        "MeanS" => {
            c.gp_mean_acq = true;
            c.doe_class = DoeClass::Small;
        }
        "ExpMeanS" => {
            c.kernel_family = KernelFamily::Exponential;
            c.gp_mean_acq = true;
            c.doe_class = DoeClass::Small;
        }
        "QuadMean" => {
            c.gp_mean_acq = true;
            c.trend_degree = TrendDegree::QuadraticNoInteraction;
            c.doe_class = DoeClass::QuadMean;
        }
        _ => return Err(Error::UnknownConfig(name.to_string())),
    }
    if d == 0 || doe::doe_size(c.doe_class, d) >= c.budget(d) {
        return Err(Error::UnsupportedDimension(d));
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    BudgetExhausted,
    RepeatedFailures,
}

/// What happened in one iteration of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub trained: bool,
    pub nugget_active: bool,
    pub range_decreased: bool,
    pub likelihood_evaluations: usize,
    /// `None` when training failed and a random point was drawn instead.
    pub acquisition: Option<AcquisitionStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: String,
    pub instance: InstanceDescriptor,
    pub seed: u64,
    /// Evaluated points in the original box, with their values.
    pub evaluations: Vec<(Vec<f64>, f64)>,
    pub best_so_far: Vec<f64>,
    pub initial_design_size: usize,
    pub iterations: Vec<IterationRecord>,
    pub warp: Option<OutputWarp>,
    pub termination: Termination,
}

impl RunResult {
    pub fn values(&self) -> Vec<f64> {
        self.evaluations.iter().map(|e| e.1).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Use this warp instead of fitting one (warping configurations only).
    pub forced_warp: Option<OutputWarp>,
}

/// Runs a configuration on an instance. Deterministic in
/// `(config, instance, seed)`.
pub fn run(config: &BOConfig, instance: &FunctionInstance, seed: u64) -> RunResult {
    run_with(config, instance, seed, &RunOptions::default())
}

pub fn run_with(config: &BOConfig, instance: &FunctionInstance, seed: u64, opts: &RunOptions) -> RunResult {
    let d = instance.dim();
    let space = instance.space();
    let unit = SearchSpace::unit(d);
    let budget = config.budget(d);
    let mut ledger = EvaluationLedger::new();
    let mut unit_points: Vec<Vec<f64>> = Vec::with_capacity(budget);

    let n0 = doe::doe_size(config.doe_class, d).min(budget);
    let mut doe_rng = rng::stream(seed, Stream::Doe);
    let design = doe::maximin_lhs_with(n0, d, &mut doe_rng, doe::default_improve_iters(n0, d));
    for u in design.into_points() {
        let x = to_box(space, &u);
        testbed::evaluate(instance, &mut ledger, &x).expect("design point inside the box");
        unit_points.push(u);
    }

    let rescaler = OutputRescaler::fit(&ledger.values());
    let warp = config.output_warp.then(|| match &opts.forced_warp {
        Some(w) => w.clone(),
        None => {
            let y: Vec<f64> = ledger.values().iter().map(|f| rescaler.forward(*f)).collect();
            let data = Dataset::new(unit_points.clone(), y);
            let mut warp_rng = rng::stream(seed, Stream::Warp);
            let fit = transforms::warp_fit(&data, config.kernel_family, config.trend_degree, rng::child_seed(&mut warp_rng));
            fit.warp
        }
    });
    let working = |f: f64| {
        let y = rescaler.forward(f);
        match &warp {
            Some(w) => w.apply(y),
            None => y,
        }
    };

    let train_config = TrainConfig::new(config.kernel_family, config.trend_degree, config.input_scaling, d);
    let strategy = AcquisitionStrategy::new(config.ei_strategy, d);
    let mut train_rng = rng::stream(seed, Stream::TrainingStarts);
    let mut acq_rng = rng::stream(seed, Stream::AcquisitionWarmup);
    let mut fallback_rng = rng::stream(seed, Stream::Fallback);
    let mut state = TrainerState::default();
    let mut iterations = Vec::new();
    let mut failures = 0;
    let mut termination = Termination::BudgetExhausted;

    let mut outputs: Vec<f64> = ledger.values().iter().map(|f| working(*f)).collect();
    let mut iteration = 0;
    while ledger.count() < budget {
        iteration += 1;
        let train_seed = rng::child_seed(&mut train_rng);
        let acq_seed = rng::child_seed(&mut acq_rng);
        let data = Dataset::new(unit_points.clone(), outputs.clone());
        let (u, record) = match train::train(&data, &train_config, &mut state, train_seed) {
            Ok(out) => {
                failures = 0;
                let f_min = outputs.iter().copied().fold(f64::INFINITY, f64::min);
                let acq_opts = AcquireOptions {
                    strategy,
                    use_mean: config.gp_mean_acq,
                    iteration,
                };
                let a = acquisition::acquire(&out.model, f_min, &acq_opts, &mut state, &unit, acq_seed);
                let record = IterationRecord {
                    iteration,
                    trained: true,
                    nugget_active: state.nugget_active,
                    range_decreased: out.range_decreased,
                    likelihood_evaluations: out.likelihood_evaluations,
                    acquisition: Some(a.status),
                };
                (a.point, record)
            }
            Err(_) => {
                failures += 1;
                let record = IterationRecord {
                    iteration,
                    trained: false,
                    nugget_active: state.nugget_active,
                    range_decreased: false,
                    likelihood_evaluations: 0,
                    acquisition: None,
                };
                (unit.sample_uniform(&mut fallback_rng), record)
            }
        };
        iterations.push(record);
        let x = to_box(space, &u);
        let f = testbed::evaluate(instance, &mut ledger, &x).expect("acquired point inside the box");
        unit_points.push(u);
        outputs.push(working(f));
        if failures >= MAX_CONSECUTIVE_FAILURES && ledger.count() < budget {
            termination = Termination::RepeatedFailures;
            break;
        }
    }

    let best_so_far = ledger.best_so_far();
    RunResult {
        config: config.name.clone(),
        instance: instance.descriptor(),
        seed,
        evaluations: ledger.entries().to_vec(),
        best_so_far,
        initial_design_size: n0,
        iterations,
        warp,
        termination,
    }
}

fn to_box(space: &SearchSpace, u: &[f64]) -> Vec<f64> {
    let mut x = space.from_unit(u);
    space.clamp(&mut x);
    x
}

/// Name under which the random-search baseline is reported.
pub const RANDOM_SEARCH: &str = "random";

/// Uniform i.i.d. sampling of the box, in the same result format.
pub fn random_search_baseline(instance: &FunctionInstance, budget: usize, seed: u64) -> RunResult {
    let mut rng = rng::stream(seed, Stream::RandomSearch);
    let mut ledger = EvaluationLedger::new();
    for _ in 0..budget {
        let x = instance.space().sample_uniform(&mut rng);
        testbed::evaluate(instance, &mut ledger, &x).expect("uniform point inside the box");
    }
    RunResult {
        config: RANDOM_SEARCH.to_string(),
        instance: instance.descriptor(),
        seed,
        best_so_far: ledger.best_so_far(),
        evaluations: ledger.entries().to_vec(),
        initial_design_size: 0,
        iterations: Vec::new(),
        warp: None,
        termination: Termination::BudgetExhausted,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Bo { config: BOConfig },
    RandomSearch { budget: usize },
}

/// Everything needed to re-execute a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub run_id: String,
    #[serde(flatten)]
    pub method: Method,
    pub instance: InstanceDescriptor,
    pub seed: u64,
    pub streams: Vec<(Stream, u64)>,
    pub version: String,
    pub warp: Option<OutputWarp>,
}

impl Provenance {
    pub fn new(run_id: impl Into<String>, method: Method, result: &RunResult) -> Self {
        Self {
            run_id: run_id.into(),
            method,
            instance: result.instance.clone(),
            seed: result.seed,
            streams: Stream::ALL.iter().map(|s| (*s, s.id())).collect(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            warp: result.warp.clone(),
        }
    }

    /// Rebuilds the instance, checking it against the recorded descriptor,
    /// and re-executes the run.
    pub fn replay(&self) -> Result<RunResult> {
        let instance = FunctionInstance::from_descriptor(&self.instance)?;
        let result = match &self.method {
            Method::Bo { config } => run(config, &instance, self.seed),
            Method::RandomSearch { budget } => random_search_baseline(&instance, *budget, self.seed),
        };
        if result.warp != self.warp {
            return Err(Error::Provenance(format!("{}: fitted warp differs on replay", self.run_id)));
        }
        Ok(result)
    }
}
