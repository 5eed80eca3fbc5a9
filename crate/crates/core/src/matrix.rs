//! Row-per-subject data containers.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// N×D matrix of subjects stored as rows, with one opaque label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix<T: Real> {
    values: DMatrix<T>,
    subject_ids: Vec<String>,
}

impl<T: Real> DataMatrix<T> {
    /// Wraps `values`, labelling rows `0..N`.
    pub fn new(values: DMatrix<T>) -> Result<Self> {
        let ids = default_ids(values.nrows());
        Self::with_ids(values, ids)
    }

    pub fn with_ids(values: DMatrix<T>, subject_ids: Vec<String>) -> Result<Self> {
        if subject_ids.len() != values.nrows() {
            return Err(Error::DimensionMismatch {
                expected: values.nrows(),
                found: subject_ids.len(),
            });
        }
        check_finite(&values)?;
        Ok(Self {
            values,
            subject_ids,
        })
    }

    pub fn from_row_major(n_rows: usize, n_cols: usize, data: &[T]) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_cols,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n_rows, n_cols, data))
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::DimensionMismatch {
                    expected: n_cols,
                    found: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), n_cols, &flat)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<T> {
        self.values
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        self.values.row(i).iter().copied().collect()
    }

    pub fn to_row_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_rows() * self.n_cols());
        for i in 0..self.n_rows() {
            out.extend(self.values.row(i).iter().copied());
        }
        out
    }

    /// New matrix made of the given rows, in the given order, labels carried over.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        for &i in indices {
            if i >= self.n_rows() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    limit: self.n_rows(),
                });
            }
        }
        let values = self.values.select_rows(indices);
        let ids = indices
            .iter()
            .map(|&i| self.subject_ids[i].clone())
            .collect();
        Ok(Self {
            values,
            subject_ids: ids,
        })
    }

    pub(crate) fn from_parts_unchecked(values: DMatrix<T>, subject_ids: Vec<String>) -> Self {
        debug_assert_eq!(values.nrows(), subject_ids.len());
        Self {
            values,
            subject_ids,
        }
    }
}

/// PC weights, one row per subject, one column per retained component.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix<T: Real> {
    values: DMatrix<T>,
}

impl<T: Real> WeightMatrix<T> {
    pub fn new(values: DMatrix<T>) -> Self {
        Self { values }
    }

    pub fn from_row_major(n_rows: usize, n_components: usize, data: &[T]) -> Result<Self> {
        if data.len() != n_rows * n_components {
            return Err(Error::DimensionMismatch {
                expected: n_rows * n_components,
                found: data.len(),
            });
        }
        Ok(Self::new(DMatrix::from_row_slice(
            n_rows,
            n_components,
            data,
        )))
    }

    pub fn zeros(n_rows: usize, n_components: usize) -> Self {
        Self::new(DMatrix::zeros(n_rows, n_components))
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_components(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<T> {
        &self.values
    }

    pub fn get(&self, row: usize, component: usize) -> T {
        self.values[(row, component)]
    }

    pub fn to_row_major(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_rows() * self.n_components());
        for i in 0..self.n_rows() {
            out.extend(self.values.row(i).iter().copied());
        }
        out
    }
}

pub(crate) fn default_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

pub(crate) fn check_finite<T: Real>(values: &DMatrix<T>) -> Result<()> {
    for i in 0..values.nrows() {
        for j in 0..values.ncols() {
            if !values[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nan() {
        let err = DataMatrix::<f64>::from_rows(&[vec![1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { row: 0, col: 1 }));
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = DataMatrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0]]).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn row_major_layout() {
        let m = DataMatrix::<f64>::from_row_major(2, 3, &[1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(m.row(1), vec![4., 5., 6.]);
        assert_eq!(m.to_row_major(), vec![1., 2., 3., 4., 5., 6.]);
        assert_eq!(m.subject_ids(), &["0", "1"]);
    }

    #[test]
    fn select_rows_keeps_labels() {
        let m = DataMatrix::<f64>::with_ids(
            DMatrix::from_row_slice(3, 1, &[1., 2., 3.]),
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let s = m.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.to_row_major(), vec![3., 1.]);
        assert_eq!(s.subject_ids(), &["c", "a"]);
        assert!(m.select_rows(&[3]).is_err());
    }
}
