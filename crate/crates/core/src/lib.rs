//! Principal-component models of registered ear shapes and log-magnitude
//! PRTF sets.
//!
//! * [`pca`]: snapshot PCA via the N×N Gram matrix, projection, truncation,
//!   reconstruction and cumulative percentage of variance.
//! * [`metrics`]: reconstruction MSE and error curves.
//! * [`shape`]: point-cloud flattening, Gaussian drawing of new shapes,
//!   distance-to-mean fields and OBJ export.
//! * [`prtf`]: PRTF tensors, log-magnitude conversion and flattening.
//! * [`crossval`]: K-fold cross-validated reconstruction error.
//! * [`synth`]: low-rank datasets with a known generating model.
//! * [`io`]: the `.wdsm` / `.wdsp` / `.wdst` containers and CSV files.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the file formats store.

pub mod crossval;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod pca;
pub mod prtf;
pub mod rng;
pub mod scalar;
pub mod shape;
pub mod synth;

pub use crossval::{CurveTable, FoldPartition};
pub use error::{Error, Result};
pub use prtf::{Direction, Scale};
pub use scalar::Real;
pub use shape::MeshTopology;
pub use synth::SynthSpec;

pub type DataMatrix = matrix::DataMatrix<f64>;
pub type WeightMatrix = matrix::WeightMatrix<f64>;
pub type PcaModel = pca::PcaModel<f64>;
pub type ErrorCurve = metrics::ErrorCurve<f64>;
pub type PrtfTensor = prtf::PrtfTensor<f64>;
pub type PointCloud = shape::PointCloud<f64>;
pub type ShapeSampleBatch = shape::ShapeSampleBatch<f64>;
pub type CrossValReport = crossval::CrossValReport<f64>;
pub type FoldResult = crossval::FoldResult<f64>;

pub type DataMatrixF32 = matrix::DataMatrix<f32>;
pub type PcaModelF32 = pca::PcaModel<f32>;
