//! Low-rank Gaussian datasets with a known generating model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;
use crate::pca::{normalize_signs, orthonormalize_columns, PcaModel};
use crate::rng::RowStream;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_cols: usize,
    /// Per-component standard deviations, positive and non-increasing.
    /// Its length is the rank.
    pub singular_spectrum: Vec<f64>,
    pub noise_std: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn rank(&self) -> usize {
        self.singular_spectrum.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.rank();
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Range(
                "synthetic data needs at least one row and column".into(),
            ));
        }
        if r > (self.n_rows - 1).min(self.n_cols) {
            return Err(Error::Range(format!(
                "rank {r} exceeds min(N-1, D) = {}",
                (self.n_rows - 1).min(self.n_cols)
            )));
        }
        for (i, &s) in self.singular_spectrum.iter().enumerate() {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Range(format!("spectrum[{i}] = {s} is not positive")));
            }
            if i > 0 && s > self.singular_spectrum[i - 1] {
                return Err(Error::Range(format!("spectrum increases at {i}")));
            }
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Range(format!(
                "noise std {} is invalid",
                self.noise_std
            )));
        }
        Ok(())
    }
}

/// Rows `mean + Σᵢ wᵢ·sᵢ·uᵢ + ε` with `wᵢ ~ N(0,1)`, `ε ~ N(0, σ_n²)`, and the
/// model that generated them (basis `uᵢ`, variances `sᵢ²`).
///
/// Stream layout under `seed`: 0 = mean, `1..=r` = basis seeds,
/// `r+1+row` = that row's weights followed by its noise.
pub fn generate<T: Real>(spec: &SynthSpec) -> Result<(DataMatrix<T>, PcaModel<T>)> {
    spec.validate()?;
    let (n, d, r) = (spec.n_rows, spec.n_cols, spec.rank());

    let mut stream = RowStream::new(spec.seed, 0);
    let mean = DVector::<f64>::from_fn(d, |_, _| stream.next_standard_normal());

    let mut columns = DMatrix::<f64>::zeros(d, r);
    for i in 0..r {
        let mut s = RowStream::new(spec.seed, 1 + i as u64);
        for j in 0..d {
            columns[(j, i)] = s.next_standard_normal();
        }
    }
    orthonormalize_columns(&mut columns)?;
    let mut basis = columns.transpose();
    normalize_signs(&mut basis);

    let mut values = DMatrix::<f64>::zeros(n, d);
    for row in 0..n {
        let mut s = RowStream::new(spec.seed, (1 + r + row) as u64);
        let coeffs: Vec<f64> = spec
            .singular_spectrum
            .iter()
            .map(|&sd| sd * s.next_standard_normal())
            .collect();
        for j in 0..d {
            let signal: f64 = (0..r).map(|i| coeffs[i] * basis[(i, j)]).sum();
            let noise = if spec.noise_std > 0.0 {
                spec.noise_std * s.next_standard_normal()
            } else {
                0.0
            };
            values[(row, j)] = mean[j] + signal + noise;
        }
    }

    let data = DataMatrix::new(values.map(T::of))?;
    let truth = PcaModel::from_parts(
        mean.map(T::of),
        basis.map(T::of),
        spec.singular_spectrum
            .iter()
            .map(|s| T::of(s * s))
            .collect(),
    )?;
    Ok((data, truth))
}
