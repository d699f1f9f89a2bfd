//! Initial designs: Latin hypercubes optimized for the maximin criterion.

use crate::rng::Rng;
use crate::testbed::SearchSpace;
use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use serde::{Deserialize, Serialize};

/// Initial design size class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoeClass {
    Small,
    Medium,
    Large,
    /// `2d + 1`, the size used with a quadratic trend and mean acquisition.
    QuadMean,
}

pub fn doe_size(class: DoeClass, d: usize) -> usize {
    match class {
        DoeClass::Small => d + 4,
        DoeClass::Medium => (7.5 * d as f64).round() as usize,
        DoeClass::Large => 20 * d,
        DoeClass::QuadMean => 2 * d + 1,
    }
}

/// `n` points in the unit cube, stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl Design {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    /// Whether each column, scaled by n and floored, is a permutation of
    /// `0..n`.
    pub fn is_latin(&self) -> bool {
        let n = self.n();
        (0..self.dim).all(|j| {
            let mut seen = vec![false; n];
            self.points.iter().all(|p| {
                let b = (p[j] * n as f64).floor();
                if !(0.0..n as f64).contains(&b) {
                    return false;
                }
                let b = b as usize;
                !std::mem::replace(&mut seen[b], true)
            })
        })
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                best = best.min(sq_dist(&self.points[i], &self.points[j]));
            }
        }
        best.sqrt()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// A random Latin hypercube with jittered positions inside each bin.
pub fn lhs(n: usize, d: usize, rng: &mut Rng) -> Design {
    let mut points = vec![vec![0.0; d]; n];
    let mut bins: Vec<usize> = (0..n).collect();
    for j in 0..d {
        bins.shuffle(rng);
        for (i, &b) in bins.iter().enumerate() {
            let u: f64 = rng.gen();
            // Stay strictly inside the bin so the Latin check is exact.
            let v = (b as f64 + u) / n as f64;
            let hi = (b + 1) as f64 / n as f64;
            points[i][j] = if v >= hi { b as f64 / n as f64 } else { v };
        }
    }
    Design { points, dim: d }
}

/// Default number of improvement iterations, `10 n d`.
pub fn default_improve_iters(n: usize, d: usize) -> usize {
    10 * n * d
}

/// Latin hypercube improved for the maximin criterion by random column
/// swaps between two rows, keeping a swap whenever the smallest pairwise
/// distance does not decrease.
pub fn maximin_lhs(n: usize, d: usize, seed: u64, n_improve_iters: usize) -> Design {
    let mut rng = Rng::seed_from_u64(seed);
    maximin_lhs_with(n, d, &mut rng, n_improve_iters)
}

pub fn maximin_lhs_with(n: usize, d: usize, rng: &mut Rng, n_improve_iters: usize) -> Design {
    let mut design = lhs(n, d, rng);
    if n < 3 || d == 0 {
        return design;
    }
    let pts = &mut design.points;
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_dist(&pts[i], &pts[j]);
            dist[i][j] = v;
            dist[j][i] = v;
        }
    }
    let global_min = |dist: &Vec<Vec<f64>>| {
        let mut m = f64::INFINITY;
        for (i, row) in dist.iter().enumerate() {
            for v in &row[(i + 1)..] {
                m = m.min(*v);
            }
        }
        m
    };
    let mut current = global_min(&dist);
    let mut row_a = vec![0.0; n];
    let mut row_b = vec![0.0; n];
    for _ in 0..n_improve_iters {
        let a = rng.gen_range(0..n);
        let mut b = rng.gen_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let col = rng.gen_range(0..d);
        row_a.copy_from_slice(&dist[a]);
        row_b.copy_from_slice(&dist[b]);

        let (va, vb) = (pts[a][col], pts[b][col]);
        pts[a][col] = vb;
        pts[b][col] = va;
        for k in 0..n {
            if k != a {
                let v = sq_dist(&pts[a], &pts[k]);
                dist[a][k] = v;
                dist[k][a] = v;
            }
            if k != b {
                let v = sq_dist(&pts[b], &pts[k]);
                dist[b][k] = v;
                dist[k][b] = v;
            }
        }
        let candidate = global_min(&dist);
        if candidate >= current {
            current = candidate;
        } else {
            pts[a][col] = va;
            pts[b][col] = vb;
            for k in 0..n {
                dist[a][k] = row_a[k];
                dist[k][a] = row_a[k];
                dist[b][k] = row_b[k];
                dist[k][b] = row_b[k];
            }
        }
    }
    design
}

/// Maps every design point from the unit cube into `space`.
pub fn scale_to_box(design: &Design, space: &SearchSpace) -> Vec<Vec<f64>> {
    design.points().iter().map(|p| space.from_unit(p)).collect()
}
