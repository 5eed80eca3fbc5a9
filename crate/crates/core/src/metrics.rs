//! Reconstruction error and the CPV ↔ MSE identity.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::io::{atomic_write, format_f64};
use crate::matrix::{DataMatrix, WeightMatrix};
use crate::pca::{self, PcaModel};
use crate::scalar::Real;

/// Mean of squared entry-wise differences between equal-shaped matrices.
pub fn mse<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> Result<T> {
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            found: b.ncols(),
        });
    }
    let count = a.len();
    if count == 0 {
        return Ok(T::zero());
    }
    let sum = a
        .iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
    Ok(sum / T::from_usize(count).expect("entry count fits in scalar"))
}

/// Error of predicting every row of `data` by the model mean.
pub fn mean_predictor_mse<T: Real>(model: &PcaModel<T>, data: &DataMatrix<T>) -> Result<T> {
    let zeros = WeightMatrix::zeros(data.n_rows(), model.n_components());
    let stack = pca::reconstruct(model, &zeros)?;
    mse(stack.values(), data.values())
}

/// Reconstruction of `data` keeping the first `m` components.
pub fn reconstruct_truncated<T: Real>(
    model: &PcaModel<T>,
    data: &DataMatrix<T>,
    m: usize,
) -> Result<DataMatrix<T>> {
    let weights = pca::transform(model, data)?;
    let kept = pca::truncate(&weights, m)?;
    pca::reconstruct(model, &kept)
}

/// `|CPV(m)/100 − (1 − MSE(X̃⁽ᵐ⁾, X) / MSE(X̄, X))|` for the model's own
/// training set. Zero up to rounding for every `m`.
pub fn cpv_mse_check<T: Real>(model: &PcaModel<T>, data: &DataMatrix<T>, m: usize) -> Result<T> {
    let cpv = pca::cpv(model, m)?;
    let approx = reconstruct_truncated(model, data, m)?;
    let err_m = mse(approx.values(), data.values())?;
    let err_0 = mean_predictor_mse(model, data)?;
    if err_0.partial_cmp(&T::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateData(
            "data has zero variance about the model mean".into(),
        ));
    }
    let from_mse = T::one() - err_m / err_0;
    Ok((cpv / T::of(100.0) - from_mse).abs())
}

/// Reconstruction error as a function of the number of retained components.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve<T: Real> {
    m_values: Vec<usize>,
    errors: Vec<T>,
}

impl<T: Real> ErrorCurve<T> {
    pub fn new(m_values: Vec<usize>, errors: Vec<T>) -> Result<Self> {
        if m_values.len() != errors.len() {
            return Err(Error::DimensionMismatch {
                expected: m_values.len(),
                found: errors.len(),
            });
        }
        check_strictly_increasing(&m_values)?;
        Ok(Self { m_values, errors })
    }

    pub fn m_values(&self) -> &[usize] {
        &self.m_values
    }

    pub fn errors(&self) -> &[T] {
        &self.errors
    }

    pub fn len(&self) -> usize {
        self.m_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m_values.is_empty()
    }

    /// `m,mse` CSV, values at 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,mse\n");
        for (m, e) in self.m_values.iter().zip(&self.errors) {
            out.push_str(&format!("{m},{}\n", format_f64(e.to_f64_lossy())));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let text = self.to_csv();
        atomic_write(path, |w| Ok(w.write_all(text.as_bytes())?))
    }
}

impl ErrorCurve<f64> {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["m", "mse"] {
            return Err(Error::Format(format!("unexpected header {headers:?}")));
        }
        let mut m_values = Vec::new();
        let mut errors = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                col: 1,
                msg: e.to_string(),
            })?;
            m_values.push(parse_field::<usize>(&rec, row, 0)?);
            errors.push(parse_field::<f64>(&rec, row, 1)?);
        }
        Self::new(m_values, errors)
    }
}

fn parse_field<F: std::str::FromStr>(rec: &csv::StringRecord, row: usize, col: usize) -> Result<F>
where
    F::Err: std::fmt::Display,
{
    let field = rec.get(col).ok_or_else(|| Error::Parse {
        row,
        col: col + 1,
        msg: "missing field".into(),
    })?;
    field.trim().parse().map_err(|e: F::Err| Error::Parse {
        row,
        col: col + 1,
        msg: e.to_string(),
    })
}

pub(crate) fn check_strictly_increasing(m_values: &[usize]) -> Result<()> {
    if let Some(w) = m_values.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Range(format!(
            "m values must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// For each `m`: truncate, reconstruct and compare against `data`.
pub fn error_curve<T: Real>(
    model: &PcaModel<T>,
    data: &DataMatrix<T>,
    m_values: &[usize],
) -> Result<ErrorCurve<T>> {
    check_strictly_increasing(m_values)?;
    let weights = pca::transform(model, data)?;
    let errors = m_values
        .iter()
        .map(|&m| {
            let kept = pca::truncate(&weights, m)?;
            let approx = pca::reconstruct(model, &kept)?;
            mse(approx.values(), data.values())
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorCurve::new(m_values.to_vec(), errors)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, v)
    }

    #[test]
    fn mse_identity_and_arithmetic() {
        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = m(2, 2, &[3.0, 2.0, 3.0, 6.0]);
        assert_eq!(mse(&a, &b).unwrap(), 2.0);
        assert!(matches!(
            mse(&a, &m(1, 2, &[0.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mean_stack_error_on_two_points() {
        // Deviations from the mean (2,2) are (±1,±1): four unit squares over four entries.
        let data = DataMatrix::from_rows(&[vec![1.0, 1.0], vec![3.0, 3.0]]).unwrap();
        let model = pca::fit(&data).unwrap();
        assert_eq!(mean_predictor_mse(&model, &data).unwrap(), 1.0);
    }

    #[test]
    fn cpv_mse_residual_at_bounds() {
        let data = DataMatrix::from_rows(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, -1.0],
            vec![3.0, 1.0, 0.5],
            vec![-1.0, 2.0, 1.0],
        ])
        .unwrap();
        let model = pca::fit(&data).unwrap();
        let k = model.n_components();
        assert!(cpv_mse_check(&model, &data, 0).unwrap() < 1e-10);
        assert!(cpv_mse_check(&model, &data, k).unwrap() < 1e-10);
    }

    #[test]
    fn error_curve_endpoints() {
        let data = DataMatrix::from_rows(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 1.0, -1.0],
            vec![3.0, 1.0, 0.5],
            vec![-1.0, 2.0, 1.0],
        ])
        .unwrap();
        let model = pca::fit(&data).unwrap();
        let k = model.n_components();
        let c0 = error_curve(&model, &data, &[0]).unwrap();
        assert_eq!(c0.errors()[0], mean_predictor_mse(&model, &data).unwrap());
        let ck = error_curve(&model, &data, &[k]).unwrap();
        assert!(ck.errors()[0] < 1e-12 * model.variances()[0]);
        assert!(error_curve(&model, &data, &[k + 1]).is_err());
        assert!(error_curve(&model, &data, &[1, 1]).is_err());
    }

    #[test]
    fn curve_csv_round_trip() {
        let curve = ErrorCurve::new(vec![0, 2, 5], vec![1.0 / 3.0, 0.1, 0.0]).unwrap();
        let text = curve.to_csv();
        assert!(text.starts_with("m,mse\n"));
        assert_eq!(ErrorCurve::from_csv(&text).unwrap(), curve);
    }

    #[test]
    fn curve_requires_increasing_m() {
        assert!(ErrorCurve::new(vec![2, 1], vec![0.0, 0.0]).is_err());
        assert!(ErrorCurve::<f64>::new(vec![1], vec![]).is_err());
    }
}
