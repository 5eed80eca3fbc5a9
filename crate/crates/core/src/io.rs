//! Binary containers and CSV helpers.
//!
//! | extension | magic  | contents                         |
//! |-----------|--------|----------------------------------|
//! | `.wdsm`   | `WDSM` | data matrix, optional row labels |
//! | `.wdsp`   | `WDSP` | PCA model                        |
//! | `.wdst`   | `WDST` | PRTF tensor                      |
//!
//! All integers and floats are little-endian; every header is the magic
//! followed by a `u32` format version (currently 1). Readers reject wrong
//! magic, unknown versions, truncated payloads and trailing bytes. Writers go
//! through a temporary file renamed into place on success.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use tempfile::NamedTempFile;

use crate::crossval::FoldPartition;
use crate::error::{Error, Result};
use crate::matrix::{default_ids, DataMatrix};
use crate::pca::PcaModel;
use crate::prtf::{Direction, PrtfTensor, Scale};

pub const FORMAT_VERSION: u32 = 1;
pub const MATRIX_MAGIC: &[u8; 4] = b"WDSM";
pub const MODEL_MAGIC: &[u8; 4] = b"WDSP";
pub const TENSOR_MAGIC: &[u8; 4] = b"WDST";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Runs `body` against a temporary file next to `path`, then renames it over
/// `path`. Nothing is left behind on error.
pub fn atomic_write<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<&File>) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = NamedTempFile::new_in(dir)?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        body(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write(path, |w| Ok(w.write_all(bytes)?))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, pos: 0, what }
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Format(format!(
                "{}: truncated at byte {} (need {n}, have {})",
                self.what,
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != magic {
            return Err(Error::Format(format!(
                "{}: bad magic {:?}, expected {:?}",
                self.what,
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported version {version}",
                self.what
            )));
        }
        Ok(())
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Format(format!("{}: size {v} too large", self.what)))
    }

    /// `count` floats, checked against the remaining payload before allocating.
    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let bytes = count
            .checked_mul(8)
            .ok_or_else(|| Error::Format(format!("{}: size overflow", self.what)))?;
        let raw = self.take(bytes)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Format(format!(
                "{}: {} trailing bytes",
                self.what,
                self.remaining()
            )));
        }
        Ok(())
    }
}

fn checked_product(what: &str, dims: &[usize]) -> Result<usize> {
    dims.iter().try_fold(1usize, |acc, &d| {
        acc.checked_mul(d)
            .ok_or_else(|| Error::Format(format!("{what}: size overflow")))
    })
}

fn put_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn header(out: &mut Vec<u8>, magic: &[u8; 4]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
}

/// Matrix container. Layout after the header: `n_rows u64`, `n_cols u64`,
/// row-major `f64` values, then a `u8` label flag (1 = labels follow), then
/// per row a `u64` byte length and UTF-8 label.
pub fn encode_matrix(m: &DataMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 8 * m.n_rows() * m.n_cols());
    header(&mut out, MATRIX_MAGIC);
    out.extend_from_slice(&(m.n_rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.n_cols() as u64).to_le_bytes());
    put_f64s(&mut out, m.to_row_major());
    out.push(1);
    for id in m.subject_ids() {
        out.extend_from_slice(&(id.len() as u64).to_le_bytes());
        out.extend_from_slice(id.as_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DataMatrix<f64>> {
    let mut r = Reader::new(bytes, "matrix");
    r.header(MATRIX_MAGIC)?;
    let n_rows = r.len()?;
    let n_cols = r.len()?;
    let count = checked_product("matrix", &[n_rows, n_cols])?;
    let values = r.f64s(count)?;
    let ids = if r.remaining() == 0 {
        default_ids(n_rows)
    } else {
        match r.u8()? {
            0 => default_ids(n_rows),
            1 => {
                let mut ids = Vec::with_capacity(n_rows.min(r.remaining() / 8));
                for i in 0..n_rows {
                    let len = r.len()?;
                    let raw = r.take(len)?;
                    let s = std::str::from_utf8(raw).map_err(|e| {
                        Error::Format(format!("matrix: label {i} is not UTF-8: {e}"))
                    })?;
                    ids.push(s.to_owned());
                }
                ids
            }
            flag => return Err(Error::Format(format!("matrix: bad label flag {flag}"))),
        }
    };
    r.finish()?;
    let m = DMatrix::from_row_slice(n_rows, n_cols, &values);
    DataMatrix::with_ids(m, ids).map_err(|e| Error::Format(format!("matrix: {e}")))
}

pub fn write_matrix(m: &DataMatrix<f64>, path: &Path) -> Result<()> {
    write_bytes(path, &encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<DataMatrix<f64>> {
    decode_matrix(&fs::read(path)?)
}

/// Model container. Layout after the header: `D u64`, `k u64`, mean
/// (D × f64), variances (k × f64), basis (k × D f64, row-major).
pub fn encode_model(model: &PcaModel<f64>) -> Vec<u8> {
    let (d, k) = (model.dim(), model.n_components());
    let mut out = Vec::with_capacity(24 + 8 * (d + k + k * d));
    header(&mut out, MODEL_MAGIC);
    out.extend_from_slice(&(d as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    put_f64s(&mut out, model.mean().iter().copied());
    put_f64s(&mut out, model.variances().iter().copied());
    for row in model.basis().row_iter() {
        put_f64s(&mut out, row.iter().copied());
    }
    out
}

pub fn decode_model(bytes: &[u8]) -> Result<PcaModel<f64>> {
    let mut r = Reader::new(bytes, "model");
    r.header(MODEL_MAGIC)?;
    let d = r.len()?;
    let k = r.len()?;
    let mean = r.f64s(d)?;
    let variances = r.f64s(k)?;
    let basis = r.f64s(checked_product("model", &[k, d])?)?;
    r.finish()?;
    PcaModel::from_parts(
        DVector::from_vec(mean),
        DMatrix::from_row_slice(k, d, &basis),
        variances,
    )
    .map_err(|e| Error::Format(format!("model: {e}")))
}

pub fn write_model(model: &PcaModel<f64>, path: &Path) -> Result<()> {
    write_bytes(path, &encode_model(model))
}

pub fn read_model(path: &Path) -> Result<PcaModel<f64>> {
    decode_model(&fs::read(path)?)
}

/// Tensor container. Layout after the header: scale flag `u8`
/// (0 linear, 1 dB), `n_subjects u64`, `n_f u64`, `n_d u64`, frequencies
/// (n_f × f64), directions (n_d × (azimuth f64, elevation f64)), values with
/// index `((s·n_d)+d)·n_f+f`.
pub fn encode_tensor(t: &PrtfTensor<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(37 + 8 * (t.n_freqs() + 2 * t.n_dirs() + t.values().len()));
    header(&mut out, TENSOR_MAGIC);
    out.push(t.scale().flag());
    for n in [t.n_subjects(), t.n_freqs(), t.n_dirs()] {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    put_f64s(&mut out, t.freqs_hz().iter().copied());
    put_f64s(
        &mut out,
        t.directions().iter().flat_map(|d| [d.azimuth, d.elevation]),
    );
    put_f64s(&mut out, t.values().iter().copied());
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<PrtfTensor<f64>> {
    let mut r = Reader::new(bytes, "tensor");
    r.header(TENSOR_MAGIC)?;
    let flag = r.u8()?;
    let scale = Scale::from_flag(flag)
        .ok_or_else(|| Error::Format(format!("tensor: bad scale flag {flag}")))?;
    let n_subjects = r.len()?;
    let n_f = r.len()?;
    let n_d = r.len()?;
    let freqs = r.f64s(n_f)?;
    let dir_pairs = r.f64s(checked_product("tensor", &[n_d, 2])?)?;
    let values = r.f64s(checked_product("tensor", &[n_subjects, n_f, n_d])?)?;
    r.finish()?;
    let directions = dir_pairs
        .chunks_exact(2)
        .map(|p| Direction {
            azimuth: p[0],
            elevation: p[1],
        })
        .collect();
    PrtfTensor::new(scale, freqs, directions, n_subjects, values)
        .map_err(|e| Error::Format(format!("tensor: {e}")))
}

pub fn write_tensor(t: &PrtfTensor<f64>, path: &Path) -> Result<()> {
    write_bytes(path, &encode_tensor(t))
}

pub fn read_tensor(path: &Path) -> Result<PrtfTensor<f64>> {
    decode_tensor(&fs::read(path)?)
}

/// `subject_index,fold` CSV, one row per subject in index order.
pub fn partition_to_csv(p: &FoldPartition) -> String {
    let mut out = String::from("subject_index,fold\n");
    for (i, f) in p.assignments().iter().enumerate() {
        out.push_str(&format!("{i},{f}\n"));
    }
    out
}

pub fn partition_from_csv(text: &str) -> Result<FoldPartition> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "subject_index,fold" => {}
        other => {
            return Err(Error::Format(format!(
                "partition: expected header subject_index,fold, found {:?}",
                other.map(|(_, l)| l)
            )))
        }
    }
    let mut assignments = Vec::new();
    for (line_no, line) in lines {
        let row = line_no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                row,
                col: 1,
                msg: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let parse = |col: usize| -> Result<usize> {
            fields[col]
                .parse()
                .map_err(|e: std::num::ParseIntError| Error::Parse {
                    row,
                    col: col + 1,
                    msg: e.to_string(),
                })
        };
        let (idx, fold) = (parse(0)?, parse(1)?);
        if idx != assignments.len() {
            return Err(Error::Format(format!(
                "partition: row {row} has subject {idx}, expected {}",
                assignments.len()
            )));
        }
        assignments.push(fold);
    }
    FoldPartition::from_assignments(assignments, None)
        .map_err(|e| Error::Format(format!("partition: {e}")))
}

pub fn write_partition(p: &FoldPartition, path: &Path) -> Result<()> {
    write_bytes(path, partition_to_csv(p).as_bytes())
}

pub fn read_partition(path: &Path) -> Result<FoldPartition> {
    partition_from_csv(&fs::read_to_string(path)?)
}

/// Rectangular numeric CSV, rows are subjects. A first line containing any
/// non-numeric field is taken as a header.
pub fn parse_csv_matrix(text: &str) -> Result<DataMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (i, rec) in reader.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            col: 1,
            msg: e.to_string(),
        })?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if i == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if let Some(w) = width {
            if rec.len() != w {
                return Err(Error::Parse {
                    row,
                    col: rec.len().min(w) + 1,
                    msg: format!("expected {w} fields, found {}", rec.len()),
                });
            }
        }
        width = Some(rec.len());
        let values = rec
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|e| Error::Parse {
                    row,
                    col: c + 1,
                    msg: format!("{f:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    DataMatrix::from_rows(&rows)
}

pub fn read_csv_matrix(path: &Path) -> Result<DataMatrix<f64>> {
    parse_csv_matrix(&fs::read_to_string(path)?)
}

/// Values at 17 significant digits, no header.
pub fn write_csv_matrix(m: &DataMatrix<f64>, path: &Path) -> Result<()> {
    atomic_write(path, |w| {
        for i in 0..m.n_rows() {
            let line: Vec<String> = m.values().row(i).iter().map(|&v| format_f64(v)).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    })
}

/// Reads `.wdsm`, or CSV when the extension is `.csv`.
pub fn read_any_matrix(path: &Path) -> Result<DataMatrix<f64>> {
    if has_extension(path, "csv") {
        read_csv_matrix(path)
    } else {
        read_matrix(path)
    }
}

/// Writes `.wdsm`, or CSV when the extension is `.csv`.
pub fn write_any_matrix(m: &DataMatrix<f64>, path: &Path) -> Result<()> {
    if has_extension(path, "csv") {
        write_csv_matrix(m, path)
    } else {
        write_matrix(m, path)
    }
}

fn has_extension(path: &Path, ext: &str) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case(ext))
}
