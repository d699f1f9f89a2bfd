//! Search spaces, test functions, randomized instances and targets.
//!
//! Twelve functions cover the five groups of the noiseless black-box
//! testbed. Each instance applies a seeded translation of the optimum and,
//! outside the separable group, a seeded rotation: `z = R (x - shift)` and
//! `f(x) = canonical(z) + f_opt`.

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

/// Dimensions of the benchmark grid.
pub const SUPPORTED_DIMS: [usize; 4] = [2, 3, 5, 10];

/// Absolute precisions defining the targets of an instance.
pub const TARGET_PRECISIONS: [f64; 6] = [1e2, 1e1, 1e0, 1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SearchSpace {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidSpace("dimension must be at least 1".into()));
        }
        if lower.len() != upper.len() {
            return Err(Error::InvalidSpace(format!(
                "{} lower bounds but {} upper bounds",
                lower.len(),
                upper.len()
            )));
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] < upper[i])) {
            return Err(Error::InvalidSpace(format!(
                "lower[{i}] = {} is not below upper[{i}] = {}",
                lower[i], upper[i]
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The `[-5, 5]^d` box shared by every test function.
    pub fn bbob(dim: usize) -> Self {
        Self::new(vec![-5.0; dim], vec![5.0; dim]).expect("dim >= 1")
    }

    pub fn unit(dim: usize) -> Self {
        Self::new(vec![0.0; dim], vec![1.0; dim]).expect("dim >= 1")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !(value >= self.lower[index] && value <= self.upper[index]) {
                return Err(Error::OutOfBounds { index, value });
            }
        }
        Ok(())
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, v)| {
                let x = self.lower[i] + v * self.width(i);
                x.clamp(self.lower[i], self.upper[i])
            })
            .collect()
    }

    /// Maps a point of the box into the unit cube.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, v)| ((v - self.lower[i]) / self.width(i)).clamp(0.0, 1.0))
            .collect()
    }

    pub fn sample_uniform(&self, rng: &mut Rng) -> Vec<f64> {
        (0..self.dim())
            .map(|i| rng.gen_range(self.lower[i]..=self.upper[i]))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionGroup {
    Separable,
    ModerateConditioning,
    HighConditioning,
    MultimodalAdequate,
    MultimodalWeak,
}

impl FunctionGroup {
    pub const ALL: [FunctionGroup; 5] = [
        FunctionGroup::Separable,
        FunctionGroup::ModerateConditioning,
        FunctionGroup::HighConditioning,
        FunctionGroup::MultimodalAdequate,
        FunctionGroup::MultimodalWeak,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionGroup::Separable => "separable",
            FunctionGroup::ModerateConditioning => "moderate_conditioning",
            FunctionGroup::HighConditioning => "high_conditioning",
            FunctionGroup::MultimodalAdequate => "multimodal_adequate",
            FunctionGroup::MultimodalWeak => "multimodal_weak",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TestFunctionId {
    Sphere,
    Ellipsoidal,
    Rastrigin,
    AttractiveSector,
    Rosenbrock,
    RotatedEllipsoidal,
    BentCigar,
    SharpRidge,
    RotatedRastrigin,
    SchaffersF7,
    Schwefel,
    Gallagher101,
}

impl TestFunctionId {
    pub const ALL: [TestFunctionId; 12] = [
        TestFunctionId::Sphere,
        TestFunctionId::Ellipsoidal,
        TestFunctionId::Rastrigin,
        TestFunctionId::AttractiveSector,
        TestFunctionId::Rosenbrock,
        TestFunctionId::RotatedEllipsoidal,
        TestFunctionId::BentCigar,
        TestFunctionId::SharpRidge,
        TestFunctionId::RotatedRastrigin,
        TestFunctionId::SchaffersF7,
        TestFunctionId::Schwefel,
        TestFunctionId::Gallagher101,
    ];

    /// Number in the 24-function noiseless suite.
    pub fn number(self) -> u32 {
        match self {
            TestFunctionId::Sphere => 1,
            TestFunctionId::Ellipsoidal => 2,
            TestFunctionId::Rastrigin => 3,
            TestFunctionId::AttractiveSector => 6,
            TestFunctionId::Rosenbrock => 8,
            TestFunctionId::RotatedEllipsoidal => 10,
            TestFunctionId::BentCigar => 12,
            TestFunctionId::SharpRidge => 13,
            TestFunctionId::RotatedRastrigin => 15,
            TestFunctionId::SchaffersF7 => 17,
            TestFunctionId::Schwefel => 20,
            TestFunctionId::Gallagher101 => 21,
        }
    }

    pub fn from_number(n: u32) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.number() == n)
            .ok_or_else(|| Error::UnknownFunction(format!("f{n}")))
    }

    pub fn group(self) -> FunctionGroup {
        use TestFunctionId::*;
        match self {
            Sphere | Ellipsoidal | Rastrigin => FunctionGroup::Separable,
            AttractiveSector | Rosenbrock => FunctionGroup::ModerateConditioning,
            RotatedEllipsoidal | BentCigar | SharpRidge => FunctionGroup::HighConditioning,
            RotatedRastrigin | SchaffersF7 => FunctionGroup::MultimodalAdequate,
            Schwefel | Gallagher101 => FunctionGroup::MultimodalWeak,
        }
    }

    pub fn is_rotated(self) -> bool {
        self.group() != FunctionGroup::Separable
    }
}

impl fmt::Display for TestFunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.number())
    }
}

impl FromStr for TestFunctionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let digits = t.strip_prefix('f').or_else(|| t.strip_prefix('F')).unwrap_or(t);
        let n: u32 = digits
            .parse()
            .map_err(|_| Error::UnknownFunction(s.to_string()))?;
        Self::from_number(n).map_err(|_| Error::UnknownFunction(s.to_string()))
    }
}

/// Gaussian peak of the Gallagher landscape, in the rotated frame.
#[derive(Debug, Clone, PartialEq)]
struct Peak {
    center: Vec<f64>,
    weight: f64,
    /// Diagonal of the peak's quadratic form.
    curvature: Vec<f64>,
}

const GALLAGHER_TOP: f64 = 10.0;

/// Maximizer of `u sin(sqrt(u))` on `[-500, 500]`.
const SCHWEFEL_ARGMAX: f64 = 420.968_746_359_982_03;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionInstance {
    function: TestFunctionId,
    dim: usize,
    seed: u64,
    rotation: DMatrix<f64>,
    shift: Vec<f64>,
    f_opt: f64,
    space: SearchSpace,
    peaks: Vec<Peak>,
}

/// Serializable description of an instance, sufficient for exact replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescriptor {
    pub function: TestFunctionId,
    pub dim: usize,
    pub seed: u64,
    pub shift: Vec<f64>,
    /// Row-major `dim x dim` rotation.
    pub rotation: Vec<f64>,
    pub f_opt: f64,
}

fn instance_stream(fid: TestFunctionId, d: usize) -> u64 {
    u64::from(fid.number()) * 1000 + d as u64
}

fn random_rotation(d: usize, rng: &mut Rng) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Builds the instance `seed` of function `fid` in dimension `d`, which must
/// be one of the benchmark dimensions.
pub fn make_instance(fid: TestFunctionId, d: usize, seed: u64) -> Result<FunctionInstance> {
    if !SUPPORTED_DIMS.contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    make_instance_any_dim(fid, d, seed)
}

/// Same as [`make_instance`] without the restriction to benchmark
/// dimensions; useful for low-dimensional experiments.
pub fn make_instance_any_dim(fid: TestFunctionId, d: usize, seed: u64) -> Result<FunctionInstance> {
    if d == 0 {
        return Err(Error::UnsupportedDimension(d));
    }
    let mut rng = rng::substream(seed, instance_stream(fid, d));
    let rotation_draw = random_rotation(d, &mut rng);
    let rotation = if fid.is_rotated() {
        rotation_draw
    } else {
        DMatrix::identity(d, d)
    };
    let shift: Vec<f64> = (0..d).map(|_| rng.gen_range(-4.0..4.0)).collect();
    let space = SearchSpace::bbob(d);

    let mut peaks = Vec::new();
    let mut f_opt = 0.0;
    if fid == TestFunctionId::Gallagher101 {
        let mut conditionings: Vec<f64> = (0..100).map(|j| 30f64.powf(j as f64 / 99.0)).collect();
        conditionings.shuffle(&mut rng);
        let mut axes: Vec<usize> = (0..d).collect();
        for i in 0..101 {
            let (center_x, weight, alpha) = if i == 0 {
                (shift.clone(), GALLAGHER_TOP, 30.0)
            } else {
                let c: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
                (c, 1.1 + 8.0 * (i - 1) as f64 / 99.0, conditionings[i - 1])
            };
            axes.shuffle(&mut rng);
            let curvature: Vec<f64> = axes
                .iter()
                .map(|&k| {
                    let e = if d == 1 { 0.0 } else { k as f64 / (d - 1) as f64 - 0.5 };
                    alpha.powf(e)
                })
                .collect();
            let diff: Vec<f64> = center_x.iter().zip(&shift).map(|(c, s)| c - s).collect();
            let center = rotate(&rotation, &diff);
            peaks.push(Peak {
                center,
                weight,
                curvature,
            });
        }
        let top = peaks.iter().map(|p| p.weight).fold(f64::MIN, f64::max);
        f_opt = GALLAGHER_TOP - top;
    }

    Ok(FunctionInstance {
        function: fid,
        dim: d,
        seed,
        rotation,
        shift,
        f_opt,
        space,
        peaks,
    })
}

fn rotate(r: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d)
        .map(|i| (0..d).map(|j| r[(i, j)] * v[j]).sum())
        .collect()
}

fn ellipsoid(z: &[f64]) -> f64 {
    let d = z.len();
    z.iter()
        .enumerate()
        .map(|(i, v)| {
            let e = if d == 1 { 0.0 } else { 6.0 * i as f64 / (d - 1) as f64 };
            10f64.powf(e) * v * v
        })
        .sum()
}

fn rastrigin(z: &[f64]) -> f64 {
    10.0 * z.len() as f64
        + z.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

fn schwefel_term(u: f64) -> f64 {
    let peak = SCHWEFEL_ARGMAX * SCHWEFEL_ARGMAX.sqrt().sin();
    if u.abs() <= 500.0 {
        peak - u * u.abs().sqrt().sin()
    } else {
        let edge = 500f64.copysign(u);
        let excess = u.abs() - 500.0;
        peak - edge * 500f64.sqrt().sin() + excess * excess
    }
}

impl FunctionInstance {
    pub fn function(&self) -> TestFunctionId {
        self.function
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn rotation(&self) -> &DMatrix<f64> {
        &self.rotation
    }

    pub fn f_opt(&self) -> f64 {
        self.f_opt
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    /// Coordinates of `x` in the function's canonical frame.
    pub fn to_canonical(&self, x: &[f64]) -> Vec<f64> {
        let diff: Vec<f64> = x.iter().zip(&self.shift).map(|(a, b)| a - b).collect();
        rotate(&self.rotation, &diff)
    }

    /// Value of the canonical function at `z` (before adding `f_opt`).
    pub fn canonical(&self, z: &[f64]) -> f64 {
        use TestFunctionId::*;
        let d = z.len();
        match self.function {
            Sphere => z.iter().map(|v| v * v).sum(),
            Ellipsoidal | RotatedEllipsoidal => ellipsoid(z),
            Rastrigin | RotatedRastrigin => rastrigin(z),
            AttractiveSector => z
                .iter()
                .zip(&self.shift)
                .map(|(v, s)| {
                    let scale = if v * s > 0.0 { 100.0 } else { 1.0 };
                    (scale * v) * (scale * v)
                })
                .sum(),
            Rosenbrock => {
                let c = ((d as f64).sqrt() / 8.0).max(1.0);
                let w: Vec<f64> = z.iter().map(|v| c * v + 1.0).collect();
                w.windows(2)
                    .map(|p| 100.0 * (p[0] * p[0] - p[1]).powi(2) + (p[0] - 1.0).powi(2))
                    .sum()
            }
            BentCigar => z[0] * z[0] + 1e6 * z[1..].iter().map(|v| v * v).sum::<f64>(),
            SharpRidge => z[0] * z[0] + 100.0 * z[1..].iter().map(|v| v * v).sum::<f64>().sqrt(),
            SchaffersF7 => {
                if d < 2 {
                    return z[0].abs().sqrt();
                }
                let w: Vec<f64> = z
                    .iter()
                    .enumerate()
                    .map(|(i, v)| 10f64.powf(0.5 * i as f64 / (d - 1) as f64) * v)
                    .collect();
                let sum: f64 = w
                    .windows(2)
                    .map(|p| {
                        let s = (p[0] * p[0] + p[1] * p[1]).sqrt();
                        let rs = s.sqrt();
                        rs + rs * (50.0 * s.powf(0.2)).sin().powi(2)
                    })
                    .sum();
                (sum / (d - 1) as f64).powi(2)
            }
            Schwefel => {
                z.iter()
                    .map(|v| schwefel_term(SCHWEFEL_ARGMAX + 100.0 * v))
                    .sum::<f64>()
                    / (100.0 * d as f64)
            }
            Gallagher101 => {
                let best = self
                    .peaks
                    .iter()
                    .map(|p| {
                        let q: f64 = z
                            .iter()
                            .zip(&p.center)
                            .zip(&p.curvature)
                            .map(|((zi, ci), k)| k * (zi - ci) * (zi - ci))
                            .sum();
                        p.weight * (-q / (2.0 * d as f64)).exp()
                    })
                    .fold(f64::MIN, f64::max);
                // Shifted so that the canonical minimum is zero.
                GALLAGHER_TOP - best - self.f_opt
            }
        }
    }

    /// Function value at `x` without bookkeeping or bound checks.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.canonical(&self.to_canonical(x)) + self.f_opt
    }

    pub fn descriptor(&self) -> InstanceDescriptor {
        let d = self.dim;
        let mut rotation = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                rotation.push(self.rotation[(i, j)]);
            }
        }
        InstanceDescriptor {
            function: self.function,
            dim: d,
            seed: self.seed,
            shift: self.shift.clone(),
            rotation,
            f_opt: self.f_opt,
        }
    }

    /// Rebuilds an instance from its descriptor and checks that it matches
    /// bit for bit.
    pub fn from_descriptor(desc: &InstanceDescriptor) -> Result<Self> {
        let inst = make_instance_any_dim(desc.function, desc.dim, desc.seed)?;
        if inst.descriptor() != *desc {
            return Err(Error::Provenance(format!(
                "instance {} d={} seed={} does not match its descriptor",
                desc.function, desc.dim, desc.seed
            )));
        }
        Ok(inst)
    }
}

/// A pair (instance, absolute value to reach).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub precision: f64,
    pub target: f64,
}

pub fn targets_for(instance: &FunctionInstance) -> Vec<Problem> {
    TARGET_PRECISIONS
        .iter()
        .map(|&precision| Problem {
            precision,
            target: instance.f_opt() + precision,
        })
        .collect()
}

/// Append-only record of the evaluations of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluationLedger {
    entries: Vec<(Vec<f64>, f64)>,
}

impl EvaluationLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Vec<f64>, f64)] {
        &self.entries
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn record(&mut self, x: Vec<f64>, f: f64) {
        self.entries.push((x, f));
    }

    pub fn best_so_far(&self) -> Vec<f64> {
        best_so_far(&self.values())
    }

    /// 1-based index of the first evaluation reaching `target`.
    pub fn first_hit(&self, target: f64) -> Option<usize> {
        self.entries.iter().position(|e| e.1 <= target).map(|i| i + 1)
    }
}

pub fn best_so_far(values: &[f64]) -> Vec<f64> {
    let mut best = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            if v < best {
                best = v;
            }
            best
        })
        .collect()
}

/// Evaluates the instance at `x`, which must lie in the search space, and
/// appends the evaluation to the ledger.
pub fn evaluate(instance: &FunctionInstance, ledger: &mut EvaluationLedger, x: &[f64]) -> Result<f64> {
    instance.space().check(x)?;
    let f = instance.value(x);
    ledger.record(x.to_vec(), f);
    Ok(f)
}
