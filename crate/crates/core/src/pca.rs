//! Mean-centred PCA for wide data (D ≫ N).
//!
//! The covariance of an N×D matrix with D in the tens of thousands cannot be
//! formed, so [`fit`] diagonalises the N×N Gram matrix of the centred rows
//! instead. Both matrices share their non-zero spectrum; a Gram eigenvector
//! `v` maps to the covariance eigenvector `Xcᵀv / ‖Xcᵀv‖`.
//!
//! Models are fully deterministic: eigenpairs are ordered by a stable
//! descending sort, and each basis row is flipped so that its
//! largest-magnitude entry is positive (lowest index wins ties).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::{check_finite, default_ids, DataMatrix, WeightMatrix};
use crate::scalar::Real;

/// Fitted PCA model: mean row, orthonormal k×D basis and descending variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T: Real> {
    mean: DVector<T>,
    basis: DMatrix<T>,
    variances: Vec<T>,
}

impl<T: Real> PcaModel<T> {
    /// Assembles a model from stored parts, checking shapes and the variance
    /// ordering. Orthonormality of `basis` is the caller's responsibility.
    pub fn from_parts(mean: DVector<T>, basis: DMatrix<T>, variances: Vec<T>) -> Result<Self> {
        if basis.ncols() != mean.len() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: basis.ncols(),
            });
        }
        if basis.nrows() != variances.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.nrows(),
                found: variances.len(),
            });
        }
        if let Some(j) = mean.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: j });
        }
        check_finite(&basis)?;
        for (j, v) in variances.iter().enumerate() {
            if !v.is_finite() || *v < T::zero() {
                return Err(Error::Range(format!(
                    "variance {j} is negative or non-finite"
                )));
            }
            if j > 0 && *v > variances[j - 1] {
                return Err(Error::Range(format!("variances not descending at {j}")));
            }
        }
        Ok(Self {
            mean,
            basis,
            variances,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.variances.len()
    }

    pub fn mean(&self) -> &DVector<T> {
        &self.mean
    }

    /// k×D, one component per row.
    pub fn basis(&self) -> &DMatrix<T> {
        &self.basis
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn total_variance(&self) -> T {
        self.variances.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    /// Model keeping only the leading `m` components.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        check_m(m, self.n_components())?;
        Ok(Self {
            mean: self.mean.clone(),
            basis: self.basis.rows(0, m).into_owned(),
            variances: self.variances[..m].to_vec(),
        })
    }
}

/// Fits a PCA model through the N×N Gram matrix `Xc·Xcᵀ / (N−1)`.
pub fn fit<T: Real>(data: &DataMatrix<T>) -> Result<PcaModel<T>> {
    let n = data.n_rows();
    if n < 2 {
        return Err(Error::Range(format!("fit needs at least 2 rows, got {n}")));
    }
    check_finite(data.values())?;

    let mean = column_mean(data.values());
    let centered = center(data.values(), &mean);
    let gram = gram_matrix(&centered);

    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable: equal eigenvalues keep solver index order.
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .expect("Gram eigenvalues are finite")
    });

    let largest = eig.eigenvalues[order[0]];
    if largest <= T::zero() {
        return Err(Error::DegenerateData("all rows are identical".into()));
    }
    let cut = largest * T::rank_tolerance();
    let k = order
        .iter()
        .take(n - 1)
        .take_while(|&&i| eig.eigenvalues[i] > cut)
        .count();

    let mut vk = DMatrix::<T>::zeros(n, k);
    for (c, &i) in order[..k].iter().enumerate() {
        vk.set_column(c, &eig.eigenvectors.column(i));
    }
    let mut columns = centered.transpose() * vk;
    orthonormalize_columns(&mut columns)?;
    let mut basis = columns.transpose();
    normalize_signs(&mut basis);

    let variances = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    Ok(PcaModel {
        mean,
        basis,
        variances,
    })
}

/// Projects rows onto the model: `Y = (X − X̄)·Uᵀ`.
pub fn transform<T: Real>(model: &PcaModel<T>, data: &DataMatrix<T>) -> Result<WeightMatrix<T>> {
    if data.n_cols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: data.n_cols(),
        });
    }
    let centered = center(data.values(), &model.mean);
    Ok(WeightMatrix::new(centered * model.basis.transpose()))
}

/// Keeps the first `m` weight columns and zeroes the rest.
pub fn truncate<T: Real>(weights: &WeightMatrix<T>, m: usize) -> Result<WeightMatrix<T>> {
    let k = weights.n_components();
    check_m(m, k)?;
    let mut values = weights.values().clone();
    values.columns_mut(m, k - m).fill(T::zero());
    Ok(WeightMatrix::new(values))
}

/// Maps weights back to data space: `X̃ = Y·U + X̄`.
pub fn reconstruct<T: Real>(
    model: &PcaModel<T>,
    weights: &WeightMatrix<T>,
) -> Result<DataMatrix<T>> {
    if weights.n_components() != model.n_components() {
        return Err(Error::DimensionMismatch {
            expected: model.n_components(),
            found: weights.n_components(),
        });
    }
    let mut out = weights.values() * &model.basis;
    for mut row in out.row_iter_mut() {
        for (x, &mu) in row.iter_mut().zip(model.mean.iter()) {
            *x += mu;
        }
    }
    let ids = default_ids(out.nrows());
    Ok(DataMatrix::from_parts_unchecked(out, ids))
}

/// Cumulative percentage of total variance held by the first `m` components.
pub fn cpv<T: Real>(model: &PcaModel<T>, m: usize) -> Result<T> {
    check_m(m, model.n_components())?;
    Ok(cpv_unchecked(model.variances(), m))
}

/// Whole CPV curve for `m = 0..=k`.
pub fn cpv_curve<T: Real>(model: &PcaModel<T>) -> Vec<T> {
    (0..=model.n_components())
        .map(|m| cpv_unchecked(model.variances(), m))
        .collect()
}

/// Smallest `m` whose CPV reaches `threshold` percent.
pub fn components_for_cpv<T: Real>(model: &PcaModel<T>, threshold: T) -> Result<usize> {
    let hundred = T::of(100.0);
    if !(threshold > T::zero() && threshold <= hundred) {
        return Err(Error::Range(format!(
            "threshold {threshold} outside (0, 100]"
        )));
    }
    let k = model.n_components();
    Ok((0..=k)
        .find(|&m| cpv_unchecked(model.variances(), m) >= threshold)
        .unwrap_or(k))
}

fn cpv_unchecked<T: Real>(variances: &[T], m: usize) -> T {
    if m == 0 {
        return T::zero();
    }
    // Partial and total sums share the same left-to-right order, so m = k
    // gives exactly 100.
    let partial = variances[..m].iter().fold(T::zero(), |acc, &v| acc + v);
    let total = variances.iter().fold(T::zero(), |acc, &v| acc + v);
    T::of(100.0) * (partial / total)
}

fn check_m(m: usize, k: usize) -> Result<()> {
    if m > k {
        return Err(Error::Range(format!("m = {m} exceeds {k} components")));
    }
    Ok(())
}

/// Column average, accumulated as offsets from the first row so that
/// identical rows give their common value exactly.
pub(crate) fn column_mean<T: Real>(values: &DMatrix<T>) -> DVector<T> {
    let d = values.ncols();
    if values.nrows() == 0 {
        return DVector::zeros(d);
    }
    let n = T::from_usize(values.nrows()).expect("row count fits in scalar");
    let pivot: DVector<T> = values.row(0).transpose();
    let mut offset = DVector::<T>::zeros(d);
    for row in values.row_iter().skip(1) {
        for ((acc, &x), &p) in offset.iter_mut().zip(row.iter()).zip(pivot.iter()) {
            *acc += x - p;
        }
    }
    offset /= n;
    pivot + offset
}

pub(crate) fn center<T: Real>(values: &DMatrix<T>, mean: &DVector<T>) -> DMatrix<T> {
    let mut out = values.clone();
    for mut row in out.row_iter_mut() {
        for (x, &mu) in row.iter_mut().zip(mean.iter()) {
            *x -= mu;
        }
    }
    out
}

/// `Xc·Xcᵀ / (N−1)`, mirrored from the lower triangle so it is exactly symmetric.
fn gram_matrix<T: Real>(centered: &DMatrix<T>) -> DMatrix<T> {
    let n = centered.nrows();
    let scale = T::one() / T::from_usize(n - 1).expect("row count fits in scalar");
    let mut gram = centered * centered.transpose();
    for i in 0..n {
        for j in 0..i {
            let v = gram[(i, j)] * scale;
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        gram[(i, i)] *= scale;
    }
    gram
}

/// Two passes of modified Gram-Schmidt over the columns, in order.
pub(crate) fn orthonormalize_columns<T: Real>(cols: &mut DMatrix<T>) -> Result<()> {
    let k = cols.ncols();
    for _ in 0..2 {
        for i in 0..k {
            for j in 0..i {
                let (done, mut rest) = cols.columns_range_pair_mut(j, i);
                let proj = rest.dot(&done);
                rest.axpy(-proj, &done, T::one());
            }
            let norm = cols.column(i).norm();
            if !norm.is_finite() || norm <= T::zero() {
                return Err(Error::DegenerateData(format!(
                    "component {i} has no independent direction"
                )));
            }
            cols.column_mut(i).unscale_mut(norm);
        }
    }
    Ok(())
}

pub(crate) fn normalize_signs<T: Real>(basis: &mut DMatrix<T>) {
    for i in 0..basis.nrows() {
        let mut best = 0;
        let mut best_abs = T::zero();
        for (j, &x) in basis.row(i).iter().enumerate() {
            if x.abs() > best_abs {
                best_abs = x.abs();
                best = j;
            }
        }
        if basis[(i, best)] < T::zero() {
            basis.row_mut(i).neg_mut();
        }
    }
}
