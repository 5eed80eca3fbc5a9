//! Test-only helpers: random datasets and a brute-force PCA oracle that
//! builds the D×D covariance explicitly and diagonalises it with cyclic
//! Jacobi rotations. Nothing here calls into the Gram-matrix path.

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wds_core::DataMatrix;

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DataMatrix::from_row_major(rows, cols, &v).unwrap()
}

/// Random data with columns of different scales, so eigenvalues are spread.
pub fn random_dataset(seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(3..=20);
    let d = rng.random_range(2..=12);
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..3.0)).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
    let mut v = Vec::with_capacity(n * d);
    for _ in 0..n {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            v.push(offset[j] + scales[j] * z);
        }
    }
    DataMatrix::from_row_major(n, d, &v).unwrap()
}

pub struct Oracle {
    pub mean: Vec<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// Columns are unit eigenvectors, same order as `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

/// Mean, covariance `(X−X̄)ᵀ(X−X̄)/(N−1)`, and its full eigendecomposition.
pub fn covariance_oracle(data: &DataMatrix) -> Oracle {
    let (n, d) = (data.n_rows(), data.n_cols());
    let x = data.values();
    let mean: Vec<f64> = (0..d)
        .map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let s: f64 = (0..n)
                .map(|i| (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]))
                .sum();
            cov[(a, b)] = s / (n - 1) as f64;
        }
    }
    let (vals, vecs) = jacobi_eigen(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap());
    let eigenvalues = order.iter().map(|&i| vals[i]).collect();
    let eigenvectors = DMatrix::from_fn(d, d, |r, c| vecs[(r, order[c])]);
    Oracle {
        mean,
        eigenvalues,
        eigenvectors,
    }
}

/// Cyclic Jacobi on a symmetric matrix; returns (eigenvalues, eigenvector columns).
pub fn jacobi_eigen(mut a: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        let scale: f64 = (0..n)
            .map(|i| a[(i, i)] * a[(i, i)])
            .sum::<f64>()
            .max(1e-300);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[(i, i)]).collect(), v)
}

/// Entry-wise mean of squared differences, written out longhand.
pub fn naive_mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut s = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += (a[(i, j)] - b[(i, j)]).powi(2);
        }
    }
    s / (a.nrows() * a.ncols()) as f64
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
