//! Independent reference computations used as test oracles. Nothing here
//! calls into the crate's numerical code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// N×d rows with entries uniform in (-1, 1).
pub fn random_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

pub fn column_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for j in 0..d {
            mean[j] += r[j];
        }
    }
    mean.iter().map(|m| m / rows.len() as f64).collect()
}

/// (1/N) Σ (z_i − μ)(z_i − μ)ᵀ by explicit loops.
pub fn dense_covariance(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = rows[0].len();
    let mean = column_mean(rows);
    let mut c = vec![vec![0.0; d]; d];
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                c[a][b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    let n = rows.len() as f64;
    for row in c.iter_mut() {
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    c
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
pub fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let p = a[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in a[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// sqrt((z − μ)ᵀ C⁻¹ (z − μ)) with an explicit inverse.
pub fn dense_mahalanobis(rows: &[Vec<f64>], z: &[f64]) -> f64 {
    let mean = column_mean(rows);
    let inv = invert(&dense_covariance(rows));
    let diff: Vec<f64> = z.iter().zip(&mean).map(|(a, b)| a - b).collect();
    let mut q = 0.0;
    for a in 0..diff.len() {
        for b in 0..diff.len() {
            q += diff[a] * inv[a][b] * diff[b];
        }
    }
    q.sqrt()
}

/// Exhaustive pairwise AUROC: correct pairs plus half the ties, over all
/// (positive, negative) pairs.
pub fn pairwise_auroc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut correct = 0.0;
    for &p in pos {
        for &n in neg {
            if p > n {
                correct += 1.0;
            } else if p == n {
                correct += 0.5;
            }
        }
    }
    correct / (pos.len() as f64 * neg.len() as f64)
}

/// Random orthogonal matrix via Gram-Schmidt on a random square matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    while basis.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= dot * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            basis.push(v.iter().map(|x| x / norm).collect());
        }
    }
    basis
}

pub fn apply(q: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    q.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}
