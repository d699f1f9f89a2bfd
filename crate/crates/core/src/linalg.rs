//! Dense row-major helpers for symmetric positive-definite systems.
//!
//! These sit on the hot path of the likelihood search and of acquisition
//! optimization, so they work on flat slices rather than matrix types.

use crate::error::{Error, Result};

/// Pivots below this fraction of the original diagonal entry are treated
/// as a failed factorization.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

/// In-place Cholesky factorization of the `n x n` row-major matrix `a`.
/// On success the lower triangle holds `L`; the strict upper triangle is
/// zeroed.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..=i {
            let (row_i, row_j) = if i == j {
                (&a[i * n..i * n + j], &a[j * n..j * n + j])
            } else {
                let (head, tail) = a.split_at(i * n);
                (&tail[..j], &head[j * n..j * n + j])
            };
            let s: f64 = row_i.iter().zip(row_j).map(|(x, y)| x * y).sum();
            let v = a[i * n + j] - s;
            if i == j {
                let diag = a[i * n + i];
                if !(v > PIVOT_TOLERANCE * diag.abs()) || !v.is_finite() {
                    return Err(Error::Factorization);
                }
                a[i * n + i] = v.sqrt();
            } else {
                a[i * n + j] = v / a[j * n + j];
            }
        }
        for j in (i + 1)..n {
            a[i * n + j] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L x = b` in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(x, y)| x * y).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// Solves `L^T x = b` in place.
pub fn solve_upper_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        b[i] /= l[i * n + i];
        let xi = b[i];
        let row = &l[i * n..i * n + i];
        for (bj, lij) in b[..i].iter_mut().zip(row) {
            *bj -= lij * xi;
        }
    }
}

/// Solves `(L L^T) x = b` in place.
pub fn solve_spd(l: &[f64], n: usize, b: &mut [f64]) {
    solve_lower(l, n, b);
    solve_upper_t(l, n, b);
}

/// Full inverse of `L L^T`, row-major.
pub fn inverse_from_cholesky(l: &[f64], n: usize) -> Vec<f64> {
    // Inverse of L, lower triangular, row-major.
    let mut linv = vec![0.0; n * n];
    for j in 0..n {
        linv[j * n + j] = 1.0 / l[j * n + j];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s += l[i * n + k] * linv[k * n + j];
            }
            linv[i * n + j] = -s / l[i * n + i];
        }
    }
    // (L L^T)^-1 = L^-T L^-1; entry (i, j) = sum_{k >= max(i, j)} Linv[k,i] Linv[k,j].
    let mut inv = vec![0.0; n * n];
    for k in 0..n {
        let row = &linv[k * n..k * n + k + 1];
        for i in 0..=k {
            let lki = row[i];
            if lki == 0.0 {
                continue;
            }
            let out = &mut inv[i * n..i * n + i + 1];
            for (o, lkj) in out.iter_mut().zip(&row[..=i]) {
                *o += lki * lkj;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            inv[j * n + i] = inv[i * n + j];
        }
    }
    inv
}

pub fn log_det_from_cholesky(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let m = &a * a.transpose() + DMatrix::identity(n, n) * 0.5;
        (0..n * n).map(|k| m[(k / n, k % n)]).collect()
    }

    #[test]
    fn factor_and_solve() {
        let n = 7;
        let a = random_spd(n, 1);
        let mut l = a.clone();
        cholesky_in_place(&mut l, n).unwrap();
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let mut x = b.clone();
        solve_spd(&l, n, &mut x);
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| a[i * n + j] * x[j]).sum();
            assert!((ax - b[i]).abs() < 1e-10);
        }
        let inv = inverse_from_cholesky(&l, n);
        for i in 0..n {
            for j in 0..n {
                let v: f64 = (0..n).map(|k| a[i * n + k] * inv[k * n + j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((v - e).abs() < 1e-10);
            }
        }
        let dm = DMatrix::from_row_slice(n, n, &a);
        assert!((log_det_from_cholesky(&l, n) - dm.determinant().ln()).abs() < 1e-10);
    }

    #[test]
    fn singular_fails() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0];
        assert_eq!(cholesky_in_place(&mut a, 2), Err(Error::Factorization));
    }
}
