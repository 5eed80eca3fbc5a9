//! Registered ear point clouds as PCA row vectors, random ear drawing from a
//! fitted model, and mesh export for inspection.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::io::atomic_write;
use crate::matrix::{DataMatrix, WeightMatrix};
use crate::pca::{self, PcaModel};
use crate::rng::RowStream;
use crate::scalar::Real;

/// Vertex count of the registered ear meshes.
pub const EAR_VERTICES: usize = 18176;
/// Triangle count shared by every registered ear mesh.
pub const EAR_FACES: usize = 35750;

/// Vertices in millimetres, indexed consistently across subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<T: Real> {
    points: Vec<[T; 3]>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<[T; 3]>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if let Some(c) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: i, col: c });
            }
        }
        Ok(Self { points })
    }

    pub fn n_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[[T; 3]] {
        &self.points
    }
}

/// `[x₁, y₁, z₁, x₂, y₂, z₂, …]`.
pub fn flatten_cloud<T: Real>(cloud: &PointCloud<T>) -> Vec<T> {
    cloud
        .points
        .iter()
        .flat_map(|p| p.iter().copied())
        .collect()
}

pub fn unflatten_cloud<T: Real>(row: &[T]) -> Result<PointCloud<T>> {
    if !row.len().is_multiple_of(3) {
        return Err(Error::DimensionMismatch {
            expected: row.len() - row.len() % 3,
            found: row.len(),
        });
    }
    PointCloud::new(row.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect())
}

/// Triangles shared by all clouds, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeshTopology {
    faces: Vec<[usize; 3]>,
}

impl MeshTopology {
    pub fn new(faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, f) in faces.iter().enumerate() {
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Range(format!("face {i} repeats a vertex: {f:?}")));
            }
        }
        Ok(Self { faces })
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    /// Checks every index against a cloud of `n_vertices`.
    pub fn validate_for(&self, n_vertices: usize) -> Result<()> {
        for f in &self.faces {
            if let Some(&bad) = f.iter().find(|&&v| v >= n_vertices) {
                return Err(Error::IndexOutOfRange {
                    index: bad,
                    limit: n_vertices,
                });
            }
        }
        Ok(())
    }

    /// Parses `i,j,k` rows of 0-based indices; a non-numeric first line is a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut faces = Vec::new();
        for (line_no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Vec<std::result::Result<usize, _>> =
                fields.iter().map(|f| f.parse::<usize>()).collect();
            if line_no == 0 && parsed.iter().all(|p| p.is_err()) {
                continue;
            }
            if fields.len() != 3 {
                return Err(Error::Parse {
                    row: line_no + 1,
                    col: fields.len().min(4),
                    msg: format!("expected 3 fields, found {}", fields.len()),
                });
            }
            let mut face = [0usize; 3];
            for (c, p) in parsed.into_iter().enumerate() {
                face[c] = p.map_err(|e| Error::Parse {
                    row: line_no + 1,
                    col: c + 1,
                    msg: e.to_string(),
                })?;
            }
            faces.push(face);
        }
        Self::new(faces)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,k\n");
        for f in &self.faces {
            out.push_str(&format!("{},{},{}\n", f[0], f[1], f[2]));
        }
        out
    }
}

/// Draws `n` weight vectors, entry `(j, i)` ~ N(0, variances[i]).
///
/// Rows are generated in parallel; each entry depends only on `(seed, j, i)`.
pub fn draw_weights<T: Real>(model: &PcaModel<T>, n: usize, seed: u64) -> WeightMatrix<T> {
    draw_weights_block(model, 0..n, 0..model.n_components(), seed)
}

/// The `rows × cols` sub-block of the matrix [`draw_weights`] would produce
/// for any `n ≥ rows.end`.
pub fn draw_weights_block<T: Real>(
    model: &PcaModel<T>,
    rows: Range<usize>,
    cols: Range<usize>,
    seed: u64,
) -> WeightMatrix<T> {
    let cols = cols.start..cols.end.min(model.n_components());
    let sigmas: Vec<f64> = model.variances()[cols.clone()]
        .iter()
        .map(|v| v.to_f64_lossy().sqrt())
        .collect();
    let width = sigmas.len();
    let rows_data: Vec<Vec<T>> = rows
        .clone()
        .into_par_iter()
        .map(|j| {
            let mut stream = RowStream::new(seed, j as u64);
            stream.seek(cols.start as u64);
            sigmas
                .iter()
                .map(|&s| T::of(s * stream.next_standard_normal()))
                .collect()
        })
        .collect();
    let flat: Vec<T> = rows_data.into_iter().flatten().collect();
    WeightMatrix::new(DMatrix::from_row_slice(rows.len(), width, &flat))
}

/// Maps weights to flattened clouds: mean + Y·U.
pub fn synthesize_shapes<T: Real>(
    model: &PcaModel<T>,
    weights: &WeightMatrix<T>,
) -> Result<DataMatrix<T>> {
    pca::reconstruct(model, weights)
}

/// Weights and the shapes they generate, reproducible from `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeSampleBatch<T: Real> {
    pub weights: WeightMatrix<T>,
    pub shapes: DataMatrix<T>,
    pub seed: u64,
}

pub fn sample_shapes<T: Real>(
    model: &PcaModel<T>,
    n: usize,
    seed: u64,
) -> Result<ShapeSampleBatch<T>> {
    let weights = draw_weights(model, n, seed);
    let shapes = synthesize_shapes(model, &weights)?;
    Ok(ShapeSampleBatch {
        weights,
        shapes,
        seed,
    })
}

/// Per-vertex Euclidean distance between `shape` and the model mean.
pub fn distance_to_mean<T: Real>(model: &PcaModel<T>, shape: &[T]) -> Result<Vec<T>> {
    if shape.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: shape.len(),
        });
    }
    if !model.dim().is_multiple_of(3) {
        return Err(Error::DimensionMismatch {
            expected: model.dim() - model.dim() % 3,
            found: model.dim(),
        });
    }
    Ok(shape
        .chunks_exact(3)
        .zip(model.mean().as_slice().chunks_exact(3))
        .map(|(p, q)| {
            let dx = p[0] - q[0];
            let dy = p[1] - q[1];
            let dz = p[2] - q[2];
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .collect())
}

/// Sidecar path for per-vertex scalars: `ear.obj` → `ear.scalars.csv`.
pub fn scalars_path(mesh_path: &Path) -> PathBuf {
    mesh_path.with_extension("scalars.csv")
}

/// Writes a Wavefront OBJ (vertex lines, then 1-based face lines). When
/// `scalars` is given, also writes `vertex_index,value` to [`scalars_path`].
pub fn export_mesh<T: Real>(
    cloud: &PointCloud<T>,
    topology: &MeshTopology,
    scalars: Option<&[T]>,
    path: &Path,
) -> Result<()> {
    topology.validate_for(cloud.n_vertices())?;
    if let Some(s) = scalars {
        if s.len() != cloud.n_vertices() {
            return Err(Error::DimensionMismatch {
                expected: cloud.n_vertices(),
                found: s.len(),
            });
        }
    }
    atomic_write(path, |w| {
        writeln!(w, "# vertices {}", cloud.n_vertices())?;
        writeln!(w, "# faces {}", topology.n_faces())?;
        for p in cloud.points() {
            writeln!(
                w,
                "v {} {} {}",
                p[0].to_f64_lossy(),
                p[1].to_f64_lossy(),
                p[2].to_f64_lossy()
            )?;
        }
        for f in topology.faces() {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    })?;
    if let Some(s) = scalars {
        atomic_write(&scalars_path(path), |w| {
            writeln!(w, "vertex_index,value")?;
            for (i, v) in s.iter().enumerate() {
                writeln!(w, "{i},{}", v.to_f64_lossy())?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

/// Reads back the `v` and `f` records of an OBJ file. Face entries may carry
/// `/vt/vn` suffixes; only the vertex index is kept.
pub fn import_obj(path: &Path) -> Result<(PointCloud<f64>, MeshTopology)> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    let mut faces = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let row = line_no + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut p = [0.0; 3];
                for (c, slot) in p.iter_mut().enumerate() {
                    let tok = parts.next().ok_or_else(|| Error::Parse {
                        row,
                        col: c + 2,
                        msg: "missing coordinate".into(),
                    })?;
                    *slot = tok
                        .parse()
                        .map_err(|e: std::num::ParseFloatError| Error::Parse {
                            row,
                            col: c + 2,
                            msg: e.to_string(),
                        })?;
                }
                points.push(p);
            }
            Some("f") => {
                let idx: Vec<usize> = parts
                    .enumerate()
                    .map(|(c, tok)| {
                        let head = tok.split('/').next().unwrap_or(tok);
                        match head.parse::<usize>() {
                            Ok(v) if v >= 1 => Ok(v - 1),
                            _ => Err(Error::Parse {
                                row,
                                col: c + 2,
                                msg: format!("bad face index {tok:?}"),
                            }),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::Parse {
                        row,
                        col: 1,
                        msg: format!("expected a triangle, found {} indices", idx.len()),
                    });
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    let cloud = PointCloud::new(points)?;
    let topology = MeshTopology::new(faces)?;
    topology.validate_for(cloud.n_vertices())?;
    Ok((cloud, topology))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn cube_model() -> PcaModel<f64> {
        // Two vertices, two components along x of vertex 0 and z of vertex 1.
        let mut basis = DMatrix::zeros(2, 6);
        basis[(0, 0)] = 1.0;
        basis[(1, 5)] = 1.0;
        PcaModel::from_parts(
            DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]),
            basis,
            vec![4.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn flatten_examples() {
        let one = PointCloud::new(vec![[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(flatten_cloud(&one), vec![1.0, 2.0, 3.0]);
        let two = PointCloud::new(vec![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(flatten_cloud(&two), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(unflatten_cloud(&flatten_cloud(&two)).unwrap(), two);
        assert!(unflatten_cloud(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn non_finite_cloud_rejected() {
        assert!(matches!(
            PointCloud::new(vec![[0.0, f64::INFINITY, 0.0]]),
            Err(Error::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn empty_draw() {
        let w = draw_weights(&cube_model(), 0, 1);
        assert_eq!((w.n_rows(), w.n_components()), (0, 2));
    }

    #[test]
    fn draw_is_deterministic_and_blockwise() {
        let model = cube_model();
        let a = draw_weights(&model, 50, 9);
        assert_eq!(a, draw_weights(&model, 50, 9));
        assert_ne!(a, draw_weights(&model, 50, 10));
        let block = draw_weights_block(&model, 20..30, 1..2, 9);
        for r in 0..10 {
            assert_eq!(block.get(r, 0), a.get(20 + r, 1));
        }
        // Longer batches extend, not reshuffle.
        let longer = draw_weights(&model, 80, 9);
        for r in 0..50 {
            assert_eq!(longer.get(r, 0), a.get(r, 0));
        }
    }

    #[test]
    fn zero_weights_give_mean_shape() {
        let model = cube_model();
        let shapes = synthesize_shapes(&model, &WeightMatrix::zeros(2, 2)).unwrap();
        assert_eq!(shapes.row(1), model.mean().as_slice());
    }

    #[test]
    fn one_hot_weight_moves_along_component() {
        let model = cube_model();
        let sigma = model.variances()[0].sqrt();
        let w = WeightMatrix::from_row_major(1, 2, &[sigma, 0.0]).unwrap();
        let shape = synthesize_shapes(&model, &w).unwrap();
        assert_eq!(shape.row(0), vec![3.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn distances() {
        let model = cube_model();
        let mean: Vec<f64> = model.mean().iter().copied().collect();
        assert_eq!(distance_to_mean(&model, &mean).unwrap(), vec![0.0, 0.0]);
        let mut moved = mean.clone();
        moved[0] += 3.0;
        moved[1] += 4.0;
        assert_eq!(distance_to_mean(&model, &moved).unwrap(), vec![5.0, 0.0]);
        assert!(distance_to_mean(&model, &mean[..3]).is_err());
    }

    #[test]
    fn distances_translation_invariant() {
        let model = cube_model();
        let shape = vec![0.5, -1.0, 2.0, 7.0, 5.5, 6.25];
        let before = distance_to_mean(&model, &shape).unwrap();
        let offset = 1000.0;
        let shifted_mean = model.mean().map(|v| v + offset);
        let shifted = PcaModel::from_parts(
            shifted_mean,
            model.basis().clone(),
            model.variances().to_vec(),
        )
        .unwrap();
        let shape2: Vec<f64> = shape.iter().map(|v| v + offset).collect();
        let after = distance_to_mean(&shifted, &shape2).unwrap();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_face_rejected() {
        assert!(MeshTopology::new(vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn face_index_out_of_range() {
        let cloud = PointCloud::new(vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]).unwrap();
        let topo = MeshTopology::new(vec![[0, 1, 99]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = export_mesh(&cloud, &topo, None, &dir.path().join("x.obj")).unwrap_err();
        assert!(matches!(
            err,
            Error::IndexOutOfRange {
                index: 99,
                limit: 3
            }
        ));
        assert!(!dir.path().join("x.obj").exists());
    }

    #[test]
    fn topology_csv() {
        let t = MeshTopology::from_csv("i,j,k\n0,1,2\n2,3,0\n").unwrap();
        assert_eq!(t.faces(), &[[0, 1, 2], [2, 3, 0]]);
        assert_eq!(MeshTopology::from_csv(&t.to_csv()).unwrap(), t);
        assert!(matches!(
            MeshTopology::from_csv("0,1,2\n0,1\n"),
            Err(Error::Parse { row: 2, .. })
        ));
        assert!(matches!(
            MeshTopology::from_csv("0,1,2\n0,x,2\n"),
            Err(Error::Parse { row: 2, col: 2, .. })
        ));
    }
}
