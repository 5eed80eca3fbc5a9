//! PRTF sets: per-subject magnitude spectra on a frequency × direction grid.
//!
//! Values are stored subject-major, then direction-major, then frequency, so
//! flat index = `((s·n_d) + d)·n_f + f`. A subject's row vector for PCA is
//! therefore one contiguous slice: every direction's `n_f`-point filter laid
//! end to end.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{default_ids, DataMatrix};
use crate::scalar::Real;

/// Linear magnitudes below this are clamped before taking the log (−200 dB).
pub const MAGNITUDE_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Decibel,
}

impl Scale {
    pub fn flag(self) -> u8 {
        match self {
            Scale::Linear => 0,
            Scale::Decibel => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            0 => Some(Scale::Linear),
            1 => Some(Scale::Decibel),
            _ => None,
        }
    }
}

/// Azimuth and elevation in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrtfTensor<T: Real> {
    scale: Scale,
    freqs_hz: Vec<f64>,
    directions: Vec<Direction>,
    n_subjects: usize,
    values: Vec<T>,
    subject_ids: Vec<String>,
}

impl<T: Real> PrtfTensor<T> {
    pub fn new(
        scale: Scale,
        freqs_hz: Vec<f64>,
        directions: Vec<Direction>,
        n_subjects: usize,
        values: Vec<T>,
    ) -> Result<Self> {
        let ids = default_ids(n_subjects);
        Self::with_ids(scale, freqs_hz, directions, values, ids)
    }

    pub fn with_ids(
        scale: Scale,
        freqs_hz: Vec<f64>,
        directions: Vec<Direction>,
        values: Vec<T>,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        let n_subjects = subject_ids.len();
        if let Some(i) = freqs_hz.iter().position(|f| !f.is_finite()) {
            return Err(Error::NonFinite { row: 0, col: i });
        }
        if let Some(w) = freqs_hz.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::Range(format!(
                "frequencies not strictly increasing at index {}",
                w + 1
            )));
        }
        if let Some(i) = directions
            .iter()
            .position(|d| !d.azimuth.is_finite() || !d.elevation.is_finite())
        {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        let expected = n_subjects * freqs_hz.len() * directions.len();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        let per_subject = (freqs_hz.len() * directions.len()).max(1);
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: i / per_subject,
                    col: i % per_subject,
                });
            }
            if scale == Scale::Linear && v < T::zero() {
                return Err(Error::NegativeMagnitude {
                    index: i,
                    value: v.to_f64_lossy(),
                });
            }
        }
        Ok(Self {
            scale,
            freqs_hz,
            directions,
            n_subjects,
            values,
            subject_ids,
        })
    }

    /// Builds a tensor from per-subject `n_f × n_d` spectra.
    pub fn from_spectra(
        scale: Scale,
        freqs_hz: Vec<f64>,
        directions: Vec<Direction>,
        spectra: &[DMatrix<T>],
    ) -> Result<Self> {
        let (n_f, n_d) = (freqs_hz.len(), directions.len());
        let mut values = Vec::with_capacity(spectra.len() * n_f * n_d);
        for s in spectra {
            if s.nrows() != n_f || s.ncols() != n_d {
                return Err(Error::DimensionMismatch {
                    expected: n_f * n_d,
                    found: s.len(),
                });
            }
            values.extend(direction_major(s));
        }
        Self::new(scale, freqs_hz, directions, spectra.len(), values)
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn n_dirs(&self) -> usize {
        self.directions.len()
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Flat values in storage order.
    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn get(&self, subject: usize, freq: usize, dir: usize) -> T {
        self.values[(subject * self.n_dirs() + dir) * self.n_freqs() + freq]
    }

    /// One subject's `n_f × n_d` spectra.
    pub fn spectra(&self, subject: usize) -> Result<DMatrix<T>> {
        let row = self.subject_slice(subject)?;
        unflatten_prtf(row, self.n_freqs(), self.n_dirs())
    }

    fn subject_slice(&self, subject: usize) -> Result<&[T]> {
        if subject >= self.n_subjects {
            return Err(Error::IndexOutOfRange {
                index: subject,
                limit: self.n_subjects,
            });
        }
        let len = self.n_freqs() * self.n_dirs();
        Ok(&self.values[subject * len..(subject + 1) * len])
    }

    fn require_db(&self) -> Result<()> {
        if self.scale != Scale::Decibel {
            return Err(Error::Scale("operation needs a dB-scale tensor".into()));
        }
        Ok(())
    }
}

fn direction_major<T: Real>(spectra: &DMatrix<T>) -> impl Iterator<Item = T> + '_ {
    // nalgebra storage is column-major: columns are directions.
    spectra.iter().copied()
}

/// Entry-wise `20·log10(max(|p|, 1e-10))`.
pub fn log_magnitude<T: Real>(tensor: &PrtfTensor<T>) -> Result<PrtfTensor<T>> {
    if tensor.scale == Scale::Decibel {
        return Err(Error::AlreadyLogScale);
    }
    let floor = T::of(MAGNITUDE_FLOOR);
    let twenty = T::of(20.0);
    let mut values = Vec::with_capacity(tensor.values.len());
    for (i, &v) in tensor.values.iter().enumerate() {
        if v < T::zero() {
            return Err(Error::NegativeMagnitude {
                index: i,
                value: v.to_f64_lossy(),
            });
        }
        let clamped = if v < floor { floor } else { v };
        values.push(twenty * clamped.log10());
    }
    Ok(PrtfTensor {
        scale: Scale::Decibel,
        values,
        ..tensor.clone_meta()
    })
}

impl<T: Real> PrtfTensor<T> {
    fn clone_meta(&self) -> Self {
        Self {
            scale: self.scale,
            freqs_hz: self.freqs_hz.clone(),
            directions: self.directions.clone(),
            n_subjects: self.n_subjects,
            values: Vec::new(),
            subject_ids: self.subject_ids.clone(),
        }
    }
}

/// Row vector of one subject, `index = d·n_f + f`.
pub fn flatten_prtf<T: Real>(tensor: &PrtfTensor<T>, subject: usize) -> Result<Vec<T>> {
    tensor.require_db()?;
    Ok(tensor.subject_slice(subject)?.to_vec())
}

/// Inverse of [`flatten_prtf`]: row vector back to `n_f × n_d` spectra.
pub fn unflatten_prtf<T: Real>(row: &[T], n_freqs: usize, n_dirs: usize) -> Result<DMatrix<T>> {
    if row.len() != n_freqs * n_dirs {
        return Err(Error::DimensionMismatch {
            expected: n_freqs * n_dirs,
            found: row.len(),
        });
    }
    Ok(DMatrix::from_column_slice(n_freqs, n_dirs, row))
}

/// Stacks every subject's flattened dB spectra as rows.
pub fn to_data_matrix<T: Real>(tensor: &PrtfTensor<T>) -> Result<DataMatrix<T>> {
    tensor.require_db()?;
    let cols = tensor.n_freqs() * tensor.n_dirs();
    let values = DMatrix::from_row_slice(tensor.n_subjects, cols, &tensor.values);
    DataMatrix::with_ids(values, tensor.subject_ids.clone())
}

/// Rebuilds a dB tensor from a data matrix whose rows are flattened PRTF sets.
pub fn from_data_matrix<T: Real>(
    data: &DataMatrix<T>,
    freqs_hz: Vec<f64>,
    directions: Vec<Direction>,
) -> Result<PrtfTensor<T>> {
    let cols = freqs_hz.len() * directions.len();
    if data.n_cols() != cols {
        return Err(Error::DimensionMismatch {
            expected: cols,
            found: data.n_cols(),
        });
    }
    PrtfTensor::with_ids(
        Scale::Decibel,
        freqs_hz,
        directions,
        data.to_row_major(),
        data.subject_ids().to_vec(),
    )
}
