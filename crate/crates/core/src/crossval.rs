//! K-fold cross-validation of PCA reconstruction error.
//!
//! Each fold fits a model on the other K−1 folds, projects its own subjects
//! with the training mean and basis, and reports training and validation
//! MSE for every requested number of retained components `m`.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::{atomic_write, format_f64};
use crate::matrix::DataMatrix;
use crate::metrics::check_strictly_increasing;
use crate::pca::{self, PcaModel};
use crate::scalar::Real;

/// Fold index per subject.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPartition {
    assignments: Vec<usize>,
    k_folds: usize,
    seed: Option<u64>,
}

impl FoldPartition {
    /// Validates an explicit assignment: folds `0..K` all non-empty, sizes
    /// within one of each other.
    pub fn from_assignments(assignments: Vec<usize>, seed: Option<u64>) -> Result<Self> {
        let k_folds = assignments.iter().max().map_or(0, |&m| m + 1);
        if k_folds < 2 {
            return Err(Error::Range(format!(
                "need at least 2 folds, found {k_folds}"
            )));
        }
        let mut sizes = vec![0usize; k_folds];
        for &f in &assignments {
            sizes[f] += 1;
        }
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if *lo == 0 {
            return Err(Error::Range("a fold is empty".into()));
        }
        if hi - lo > 1 {
            return Err(Error::Range(format!("fold sizes range from {lo} to {hi}")));
        }
        Ok(Self {
            assignments,
            k_folds,
            seed,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.assignments.len()
    }

    pub fn k_folds(&self) -> usize {
        self.k_folds
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k_folds];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Ascending subject indices of the training and validation sets of `fold`.
    pub fn split(&self, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
        if fold >= self.k_folds {
            return Err(Error::IndexOutOfRange {
                index: fold,
                limit: self.k_folds,
            });
        }
        let (val, train): (Vec<usize>, Vec<usize>) =
            (0..self.assignments.len()).partition(|&i| self.assignments[i] == fold);
        Ok((train, val))
    }

    /// Smallest training-set size over all folds.
    pub fn min_train_size(&self) -> usize {
        let largest_fold = self.fold_sizes().into_iter().max().unwrap_or(0);
        self.n_subjects() - largest_fold
    }
}

fn check_fold_count(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::Range(format!(
            "fold count {k} must satisfy 2 <= K <= N = {n}"
        )));
    }
    Ok(())
}

/// Seeded shuffle of `0..n`, dealt round-robin into `k` folds.
pub fn partition(n: usize, k: usize, seed: u64) -> Result<FoldPartition> {
    check_fold_count(n, k)?;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0; n];
    for (pos, &subject) in order.iter().enumerate() {
        assignments[subject] = pos % k;
    }
    FoldPartition::from_assignments(assignments, Some(seed))
}

/// Consecutive index blocks; the first `n mod k` folds take one extra subject.
pub fn partition_contiguous(n: usize, k: usize) -> Result<FoldPartition> {
    check_fold_count(n, k)?;
    let (base, extra) = (n / k, n % k);
    let mut assignments = Vec::with_capacity(n);
    for fold in 0..k {
        let size = base + usize::from(fold < extra);
        assignments.extend(std::iter::repeat_n(fold, size));
    }
    FoldPartition::from_assignments(assignments, None)
}

/// `0, step, 2·step, …` up to `max_m`, always ending at `max_m`.
pub fn m_sweep(max_m: usize, step: usize) -> Vec<usize> {
    let step = step.max(1);
    let mut out: Vec<usize> = (0..=max_m).step_by(step).collect();
    if out.last() != Some(&max_m) {
        out.push(max_m);
    }
    out
}

/// Errors of one fold for each requested `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult<T: Real> {
    pub fold: usize,
    pub train_size: usize,
    pub val_size: usize,
    /// Components kept by the training fit (may be below `train_size − 1`
    /// for rank-deficient data).
    pub n_components: usize,
    pub train_mse: Vec<T>,
    pub val_mse: Vec<T>,
}

/// Squared reconstruction error of `data` under `model` for each `m`.
///
/// With an orthonormal basis the residual after keeping `m` components splits
/// into the full-rank residual plus the energy of the dropped weights,
/// `‖X − X̃⁽ᵐ⁾‖² = ‖X − X̃⁽ᵏ⁾‖² + Σ_{j>m} ‖y_j‖²`, so one full reconstruction
/// serves the whole sweep. `m` above `k` keeps all `k` components.
pub fn sweep_mse<T: Real>(
    model: &PcaModel<T>,
    data: &DataMatrix<T>,
    m_values: &[usize],
) -> Result<Vec<T>> {
    let weights = pca::transform(model, data)?;
    let full = pca::reconstruct(model, &weights)?;
    let residual = full
        .values()
        .iter()
        .zip(data.values().iter())
        .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));

    let k = model.n_components();
    // tail[m] = Σ_{j ≥ m} ‖y_j‖², accumulated from the last component down.
    let mut tail = vec![T::zero(); k + 1];
    for j in (0..k).rev() {
        let energy = weights
            .values()
            .column(j)
            .iter()
            .fold(T::zero(), |acc, &y| acc + y * y);
        tail[j] = tail[j + 1] + energy;
    }

    let count = T::from_usize(data.n_rows() * data.n_cols()).expect("entry count fits in scalar");
    Ok(m_values
        .iter()
        .map(|&m| (residual + tail[m.min(k)]) / count)
        .collect())
}

/// Fits on every fold but `fold` and evaluates on both halves.
pub fn run_fold<T: Real>(
    data: &DataMatrix<T>,
    part: &FoldPartition,
    fold: usize,
    m_values: &[usize],
) -> Result<FoldResult<T>> {
    if part.n_subjects() != data.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: data.n_rows(),
            found: part.n_subjects(),
        });
    }
    check_strictly_increasing(m_values)?;
    let (train_idx, val_idx) = part.split(fold)?;
    if let Some(&m) = m_values.iter().find(|&&m| m >= train_idx.len()) {
        return Err(Error::Range(format!(
            "m = {m} needs more than {} training subjects",
            train_idx.len()
        )));
    }
    let train = data.select_rows(&train_idx)?;
    let val = data.select_rows(&val_idx)?;
    let model = pca::fit(&train)?;
    Ok(FoldResult {
        fold,
        train_size: train_idx.len(),
        val_size: val_idx.len(),
        n_components: model.n_components(),
        train_mse: sweep_mse(&model, &train, m_values)?,
        val_mse: sweep_mse(&model, &val, m_values)?,
    })
}

/// The model a fold trains on; exposed for leakage checks.
pub fn fold_model<T: Real>(
    data: &DataMatrix<T>,
    part: &FoldPartition,
    fold: usize,
) -> Result<PcaModel<T>> {
    let (train_idx, _) = part.split(fold)?;
    pca::fit(&data.select_rows(&train_idx)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossValReport<T: Real> {
    pub partition: FoldPartition,
    pub m_values: Vec<usize>,
    pub folds: Vec<FoldResult<T>>,
    pub mean_train: Vec<T>,
    pub mean_val: Vec<T>,
}

/// Partitions with [`partition`] and runs every fold.
pub fn run_crossval<T: Real>(
    data: &DataMatrix<T>,
    k: usize,
    seed: u64,
    m_values: &[usize],
) -> Result<CrossValReport<T>> {
    let part = partition(data.n_rows(), k, seed)?;
    run_crossval_with(data, part, m_values)
}

/// Runs every fold of `part`. Folds execute in parallel; results are
/// gathered and averaged in fold order.
pub fn run_crossval_with<T: Real>(
    data: &DataMatrix<T>,
    part: FoldPartition,
    m_values: &[usize],
) -> Result<CrossValReport<T>> {
    let folds = (0..part.k_folds())
        .into_par_iter()
        .map(|f| run_fold(data, &part, f, m_values))
        .collect::<Result<Vec<_>>>()?;
    let kf = T::from_usize(folds.len()).expect("fold count fits in scalar");
    let average = |pick: fn(&FoldResult<T>) -> &Vec<T>| -> Vec<T> {
        (0..m_values.len())
            .map(|i| folds.iter().fold(T::zero(), |acc, f| acc + pick(f)[i]) / kf)
            .collect()
    };
    let mean_train = average(|f| &f.train_mse);
    let mean_val = average(|f| &f.val_mse);
    Ok(CrossValReport {
        partition: part,
        m_values: m_values.to_vec(),
        folds,
        mean_train,
        mean_val,
    })
}

/// Per-fold and averaged curves as stored in the report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub m_values: Vec<usize>,
    /// `(train, val)` per fold, in fold order.
    pub folds: Vec<(Vec<f64>, Vec<f64>)>,
    pub mean_train: Vec<f64>,
    pub mean_val: Vec<f64>,
}

impl<T: Real> CrossValReport<T> {
    pub fn to_table(&self) -> CurveTable {
        let conv = |v: &[T]| v.iter().map(|x| x.to_f64_lossy()).collect::<Vec<_>>();
        CurveTable {
            m_values: self.m_values.clone(),
            folds: self
                .folds
                .iter()
                .map(|f| (conv(&f.train_mse), conv(&f.val_mse)))
                .collect(),
            mean_train: conv(&self.mean_train),
            mean_val: conv(&self.mean_val),
        }
    }

    /// `fold,m,train_mse,val_mse`; rows with fold −1 carry the averages.
    pub fn to_csv(&self) -> String {
        self.to_table().to_csv()
    }

    pub fn emit(&self, path: &Path) -> Result<()> {
        let text = self.to_csv();
        atomic_write(path, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Smallest swept `m` whose fold-averaged validation error is at most `limit`.
    pub fn smallest_m_with_val_at_most(&self, limit: T) -> Option<usize> {
        self.m_values
            .iter()
            .zip(&self.mean_val)
            .find(|(_, &e)| e <= limit)
            .map(|(&m, _)| m)
    }
}

impl CurveTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fold,m,train_mse,val_mse\n");
        let rows = self
            .folds
            .iter()
            .enumerate()
            .map(|(f, (t, v))| (f as i64, t, v))
            .chain(std::iter::once((-1, &self.mean_train, &self.mean_val)));
        for (fold, train, val) in rows {
            for (i, m) in self.m_values.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{fold},{m},{},{}",
                    format_f64(train[i]),
                    format_f64(val[i])
                );
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["fold", "m", "train_mse", "val_mse"] {
            return Err(Error::Format(format!("unexpected header {headers:?}")));
        }
        let mut rows: Vec<(i64, usize, f64, f64)> = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                col: 1,
                msg: e.to_string(),
            })?;
            let field = |c: usize| -> &str { rec.get(c).unwrap_or("") };
            let err = |c: usize, msg: String| Error::Parse {
                row,
                col: c + 1,
                msg,
            };
            rows.push((
                field(0).parse().map_err(|e| err(0, format!("{e}")))?,
                field(1).parse().map_err(|e| err(1, format!("{e}")))?,
                field(2).parse().map_err(|e| err(2, format!("{e}")))?,
                field(3).parse().map_err(|e| err(3, format!("{e}")))?,
            ));
        }

        let mut table = CurveTable {
            m_values: Vec::new(),
            folds: Vec::new(),
            mean_train: Vec::new(),
            mean_val: Vec::new(),
        };
        for &(fold, m, train, val) in &rows {
            if fold == -1 {
                table.m_values.push(m);
                table.mean_train.push(train);
                table.mean_val.push(val);
            }
        }
        check_strictly_increasing(&table.m_values)?;
        for &(fold, m, train, val) in &rows {
            if fold < 0 {
                continue;
            }
            let f = fold as usize;
            if f > table.folds.len() {
                return Err(Error::Format(format!("fold {f} appears out of order")));
            }
            if f == table.folds.len() {
                table.folds.push((Vec::new(), Vec::new()));
            }
            let (t, v) = &mut table.folds[f];
            if table.m_values.get(t.len()) != Some(&m) {
                return Err(Error::Format(format!("fold {f}: unexpected m = {m}")));
            }
            t.push(train);
            v.push(val);
        }
        if let Some(f) = table
            .folds
            .iter()
            .position(|(t, _)| t.len() != table.m_values.len())
        {
            return Err(Error::Format(format!("fold {f} is missing m values")));
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics;

    fn toy_data(n: usize, d: usize) -> DataMatrix<f64> {
        // Deterministic, full-rank-ish values without an RNG.
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        ((i * 7 + j * 13) % 11) as f64 + 0.1 * (i * j) as f64 - (j as f64).sqrt()
                    })
                    .collect()
            })
            .collect();
        DataMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn fold_sizes_119_and_1005() {
        let p = partition(119, 20, 0).unwrap();
        let mut sizes = p.fold_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes.iter().filter(|&&s| s == 6).count(), 19);
        assert_eq!(sizes.iter().filter(|&&s| s == 5).count(), 1);
        let mut seen = [false; 119];
        for f in 0..20 {
            for i in p.split(f).unwrap().1 {
                assert!(!seen[i]);
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));

        let p = partition(1005, 20, 0).unwrap();
        let sizes = p.fold_sizes();
        assert_eq!(sizes.iter().filter(|&&s| s == 51).count(), 5);
        assert_eq!(sizes.iter().filter(|&&s| s == 50).count(), 15);
        assert_eq!(p.min_train_size(), 954);
    }

    #[test]
    fn partition_range_errors() {
        assert!(matches!(partition(4, 5, 0), Err(Error::Range(_))));
        assert!(matches!(partition(4, 1, 0), Err(Error::Range(_))));
        assert!(partition(4, 4, 0).is_ok());
    }

    #[test]
    fn partition_is_seeded() {
        assert_eq!(partition(50, 7, 3).unwrap(), partition(50, 7, 3).unwrap());
        assert_ne!(partition(50, 7, 3).unwrap(), partition(50, 7, 4).unwrap());
    }

    #[test]
    fn contiguous_blocks() {
        let p = partition_contiguous(7, 3).unwrap();
        assert_eq!(p.assignments(), &[0, 0, 0, 1, 1, 2, 2]);
        assert_eq!(p.seed(), None);
    }

    #[test]
    fn assignments_validated() {
        assert!(FoldPartition::from_assignments(vec![0, 0, 0, 1], None).is_err());
        assert!(FoldPartition::from_assignments(vec![0, 2, 0, 2], None).is_err());
        assert!(FoldPartition::from_assignments(vec![0, 0], None).is_err());
    }

    #[test]
    fn sweep_values() {
        assert_eq!(m_sweep(10, 3), vec![0, 3, 6, 9, 10]);
        assert_eq!(m_sweep(9, 3), vec![0, 3, 6, 9]);
        assert_eq!(m_sweep(0, 1), vec![0]);
    }

    #[test]
    fn sweep_matches_direct_reconstruction() {
        let data = toy_data(9, 6);
        let model = pca::fit(&data).unwrap();
        let ms: Vec<usize> = (0..=model.n_components()).collect();
        let direct = metrics::error_curve(&model, &data, &ms).unwrap();
        let fast = sweep_mse(&model, &data, &ms).unwrap();
        for (a, b) in direct.errors().iter().zip(&fast) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12), "{a} vs {b}");
        }
        // Held-out rows too.
        let other = toy_data(12, 6).select_rows(&[9, 10, 11]).unwrap();
        let direct = metrics::error_curve(&model, &other, &ms).unwrap();
        let fast = sweep_mse(&model, &other, &ms).unwrap();
        for (a, b) in direct.errors().iter().zip(&fast) {
            assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
        }
    }

    #[test]
    fn fold_endpoints() {
        let data = toy_data(12, 8);
        let part = partition(12, 3, 1).unwrap();
        let r = run_fold(&data, &part, 0, &[0, 7]).unwrap();
        assert!(r.train_mse[1] < 1e-12 * pca::fit(&data).unwrap().variances()[0]);

        let (train_idx, val_idx) = part.split(0).unwrap();
        let train = data.select_rows(&train_idx).unwrap();
        let val = data.select_rows(&val_idx).unwrap();
        let model = pca::fit(&train).unwrap();
        let t0 = metrics::mean_predictor_mse(&model, &train).unwrap();
        let v0 = metrics::mean_predictor_mse(&model, &val).unwrap();
        assert!((r.train_mse[0] - t0).abs() <= 1e-12 * t0);
        assert!((r.val_mse[0] - v0).abs() <= 1e-12 * v0);

        assert!(matches!(
            run_fold(&data, &part, 0, &[8]),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            run_fold(&data, &part, 3, &[0]),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn duplicated_validation_rows_match_training_error() {
        // Every subject appears twice; assigning the copies to opposite
        // sides of a 2-fold split makes train and val sets identical.
        let base = toy_data(6, 4);
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push(base.row(i));
        }
        for i in 0..6 {
            rows.push(base.row(i));
        }
        let data = DataMatrix::from_rows(&rows).unwrap();
        let part = FoldPartition::from_assignments(vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1], None)
            .unwrap();
        let r = run_fold(&data, &part, 0, &[0, 1, 2, 3]).unwrap();
        for (t, v) in r.train_mse.iter().zip(&r.val_mse) {
            assert!((t - v).abs() <= 1e-12 * t.abs().max(1e-300), "{t} vs {v}");
        }
    }

    #[test]
    fn leave_one_out() {
        let data = toy_data(6, 4);
        let report = run_crossval(&data, 6, 0, &[0, 1, 2]).unwrap();
        assert_eq!(report.folds.len(), 6);
        assert!(report.folds.iter().all(|f| f.val_size == 1));
    }

    #[test]
    fn averages_are_fold_means() {
        let data = toy_data(20, 5);
        let report = run_crossval(&data, 4, 2, &[0, 2, 4]).unwrap();
        for i in 0..3 {
            let mean: f64 = report.folds.iter().map(|f| f.val_mse[i]).sum::<f64>() / 4.0;
            assert!((mean - report.mean_val[i]).abs() <= 1e-12 * mean);
        }
    }

    #[test]
    fn report_csv_rows_and_round_trip() {
        let data = toy_data(10, 4);
        let part = partition(10, 2, 5).unwrap();
        let report = run_crossval_with(&data, part, &[0, 1, 3]).unwrap();
        let csv = report.to_csv();
        assert_eq!(csv.lines().count(), 1 + 6 + 3);
        let table = CurveTable::from_csv(&csv).unwrap();
        assert_eq!(table, report.to_table());

        let empty = run_crossval(&data, 2, 5, &[]).unwrap();
        assert_eq!(empty.to_csv(), "fold,m,train_mse,val_mse\n");
        let t = CurveTable::from_csv(&empty.to_csv()).unwrap();
        assert!(t.m_values.is_empty());
    }
}
