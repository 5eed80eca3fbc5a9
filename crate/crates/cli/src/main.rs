//! `wds`: fit, inspect, sample and cross-validate PCA models of ear shapes
//! and PRTF sets.
//!
//! Exit status is 0 on success, 1 on data or I/O errors and 2 on usage
//! errors. `WDS_THREADS` caps the worker pool (0 or unset = all cores).

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wds_core::crossval;
use wds_core::io::{self, atomic_write, format_f64};
use wds_core::prtf;
use wds_core::shape;
use wds_core::synth::{self, SynthSpec};
use wds_core::{pca, DataMatrix, Error, MeshTopology, Scale};

#[derive(Parser)]
#[command(name = "wds", version, about = "PCA of ear shapes and PRTF sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a PCA model to a data matrix (.wdsm or .csv) and write it as .wdsp.
    Fit(FitArgs),
    /// Write the `m,cpv` curve of a model, or print the smallest m reaching a threshold.
    Cpv(CpvArgs),
    /// Project, keep the first m components and reconstruct; prints the MSE.
    Reduce(ReduceArgs),
    /// Draw random weights and synthesize shapes from a model.
    Sample(SampleArgs),
    /// Write one shape row as an OBJ mesh.
    ExportMesh(ExportMeshArgs),
    /// K-fold cross-validated reconstruction error over a sweep of m.
    Crossval(CrossvalArgs),
    /// Generate a low-rank Gaussian dataset and its generating model.
    Synth(SynthArgs),
    /// Convert a PRTF tensor (.wdst) to a data matrix of flattened dB spectra.
    PrtfFlatten(PrtfFlattenArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CpvArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV destination; the curve goes to stdout when neither this nor
    /// --threshold is given.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Percentage in (0, 100].
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args)]
struct ReduceArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_shapes: PathBuf,
    #[arg(long)]
    out_weights: Option<PathBuf>,
}

#[derive(Args)]
struct ExportMeshArgs {
    #[arg(long)]
    shapes: PathBuf,
    #[arg(long)]
    row: usize,
    /// Face list CSV with columns i,j,k (0-based).
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write per-vertex distance to the model mean next to the mesh.
    #[arg(long, requires = "model")]
    distance_to_mean: bool,
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args)]
struct CrossvalArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    folds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    m_step: u64,
    #[arg(long)]
    out: PathBuf,
    /// Assign folds as consecutive blocks of subjects instead of shuffling.
    #[arg(long, conflicts_with = "seed")]
    contiguous: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    rows: usize,
    #[arg(long)]
    cols: usize,
    /// Defaults to the length of --spectrum.
    #[arg(long)]
    rank: Option<usize>,
    /// Comma-separated per-component standard deviations, non-increasing.
    /// Defaults to r, r-1, ..., 1.
    #[arg(long, value_delimiter = ',')]
    spectrum: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    out_truth: Option<PathBuf>,
}

#[derive(Args)]
struct PrtfFlattenArgs {
    #[arg(long)]
    tensor: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<(), Failure>;

fn fit(a: FitArgs) -> Outcome {
    let data = io::read_any_matrix(&a.input)?;
    io::write_model(&pca::fit(&data)?, &a.out)?;
    Ok(())
}

fn cpv(a: CpvArgs) -> Outcome {
    let model = io::read_model(&a.model)?;
    let curve = pca::cpv_curve(&model);
    let csv = curve
        .iter()
        .enumerate()
        .fold(String::from("m,cpv\n"), |mut s, (m, c)| {
            s.push_str(&format!("{m},{}\n", format_f64(*c)));
            s
        });
    if let Some(out) = &a.out {
        atomic_write(out, |w| Ok(w.write_all(csv.as_bytes())?))?;
    }
    match a.threshold {
        Some(t) => println!("{}", pca::components_for_cpv(&model, t)?),
        None if a.out.is_none() => print!("{csv}"),
        None => {}
    }
    Ok(())
}

fn reduce(a: ReduceArgs) -> Outcome {
    let model = io::read_model(&a.model)?;
    let data = io::read_any_matrix(&a.input)?;
    let weights = pca::truncate(&pca::transform(&model, &data)?, a.m)?;
    let rebuilt = pca::reconstruct(&model, &weights)?;
    let rebuilt = DataMatrix::with_ids(rebuilt.into_values(), data.subject_ids().to_vec())?;
    let err = wds_core::metrics::mse(rebuilt.values(), data.values())?;
    io::write_any_matrix(&rebuilt, &a.out)?;
    println!("mse {}", format_f64(err));
    Ok(())
}

fn sample(a: SampleArgs) -> Outcome {
    let model = io::read_model(&a.model)?;
    let batch = shape::sample_shapes(&model, a.count, a.seed)?;
    io::write_any_matrix(&batch.shapes, &a.out_shapes)?;
    if let Some(path) = &a.out_weights {
        let weights = DataMatrix::new(batch.weights.values().clone())?;
        io::write_any_matrix(&weights, path)?;
    }
    Ok(())
}

fn export_mesh(a: ExportMeshArgs) -> Outcome {
    let shapes = io::read_any_matrix(&a.shapes)?;
    if a.row >= shapes.n_rows() {
        return Err(Error::IndexOutOfRange {
            index: a.row,
            limit: shapes.n_rows(),
        }
        .into());
    }
    let row = shapes.row(a.row);
    let cloud = shape::unflatten_cloud(&row)?;
    let topology = MeshTopology::read_csv(&a.topology)?;
    let scalars = match (&a.model, a.distance_to_mean) {
        (Some(path), true) => Some(shape::distance_to_mean(&io::read_model(path)?, &row)?),
        _ => None,
    };
    shape::export_mesh(&cloud, &topology, scalars.as_deref(), &a.out)?;
    Ok(())
}

fn crossval(a: CrossvalArgs) -> Outcome {
    let data = io::read_any_matrix(&a.input)?;
    let (n, k) = (data.n_rows(), a.folds as usize);
    let part = if a.contiguous {
        crossval::partition_contiguous(n, k)?
    } else {
        crossval::partition(n, k, a.seed)?
    };
    let max_m = part.min_train_size().saturating_sub(1);
    let ms = crossval::m_sweep(max_m, a.m_step as usize);
    let report = crossval::run_crossval_with(&data, part, &ms)?;
    report.emit(&a.out)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Outcome {
    let spectrum = match (a.spectrum, a.rank) {
        (Some(s), Some(r)) if s.len() != r => {
            return Err(Failure::Usage(format!(
                "--spectrum has {} values but --rank is {r}",
                s.len()
            )))
        }
        (Some(s), _) => s,
        (None, Some(r)) => (1..=r).rev().map(|v| v as f64).collect(),
        (None, None) => {
            return Err(Failure::Usage(
                "one of --rank or --spectrum is required".into(),
            ))
        }
    };
    let spec = SynthSpec {
        n_rows: a.rows,
        n_cols: a.cols,
        singular_spectrum: spectrum,
        noise_std: a.noise,
        seed: a.seed,
    };
    let (data, truth) = synth::generate::<f64>(&spec)?;
    io::write_any_matrix(&data, &a.out)?;
    if let Some(path) = &a.out_truth {
        io::write_model(&truth, path)?;
    }
    Ok(())
}

fn prtf_flatten(a: PrtfFlattenArgs) -> Outcome {
    let tensor = io::read_tensor(&a.tensor)?;
    let db = match tensor.scale() {
        Scale::Decibel => tensor,
        Scale::Linear => prtf::log_magnitude(&tensor)?,
    };
    io::write_any_matrix(&prtf::to_data_matrix(&db)?, &a.out)?;
    Ok(())
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("WDS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("WDS_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    Ok(())
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Fit(a) => fit(a),
        Command::Cpv(a) => cpv(a),
        Command::Reduce(a) => reduce(a),
        Command::Sample(a) => sample(a),
        Command::ExportMesh(a) => export_mesh(a),
        Command::Crossval(a) => crossval(a),
        Command::Synth(a) => synth(a),
        Command::PrtfFlatten(a) => prtf_flatten(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("wds: usage error: {msg}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("wds: usage error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(e)) => {
            eprintln!("wds: error: {e}");
            ExitCode::from(1)
        }
    }
}
