//! `mprp`: runs the accuracy studies and writes CSV/JSON reports.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mprp::container::{self, Array, Layout, Storage};
use mprp::experiments::{fmt_stats, gemm_accuracy, mantissa_sweep, rphosvd_experiment, rsvd_experiment, FmtStatsRow};
use mprp::testmats::{
    cauchy_matrix, hosvd_test_tensor, matrix_type1, matrix_type2, matrix_with_spectrum, SpectrumKind, SpectrumSpec,
};
use mprp::FloatFormat;
use serde::Serialize;

use config::{load, parse_sigma_range, FmtStatsFields, GemmFields, HosvdFields, RsvdFields, RunArgs, SweepFields};
use report::{config_hash, emit, Provenance};

#[derive(Parser)]
#[command(name = "mprp", version, about = "Accuracy studies for mixed-precision random projection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Overflow/underflow probabilities, variance and value counts of Gaussian draws per format.
    FmtStats {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated format names (`fp16`, `tf32`, `e6m4`, ...).
        #[arg(long, value_delimiter = ',')]
        formats: Vec<String>,
        /// Window exponents `s` (values with `|v| < 2^s`), as `a..b` or `a..=b`.
        #[arg(long)]
        sigma: Option<String>,
    },
    /// Projection error against the mantissa length of the random matrix.
    MantissaSweep(RunArgs),
    /// Relative GEMM error of each backend against an `f64` oracle.
    GemmAccuracy(RunArgs),
    /// Randomized SVD residuals per backend and test matrix.
    Rsvd(RunArgs),
    /// Random-projection HOSVD residuals per backend.
    Rphosvd(RunArgs),
    /// Writes one test matrix or tensor to a binary container file.
    GenMatrix(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Linear,
    Exp,
    Type1,
    Type2,
    Cauchy,
    /// Low multilinear-rank `n x n x n` tensor.
    Tensor,
}

#[derive(Clone, Copy, ValueEnum)]
enum StorageArg {
    F32,
    F64,
    Fp16,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 512)]
    n: usize,
    /// Target rank (`p` for spectra, `r` for type 1/2, `J` for tensors).
    #[arg(long, default_value_t = 32)]
    rank: usize,
    /// Spectrum value at the target rank.
    #[arg(long, default_value_t = 0.1)]
    s_p: f64,
    /// Rank padding for tensors.
    #[arg(long, default_value_t = 4)]
    padding: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "f32")]
    storage: StorageArg,
    #[arg(long)]
    row_major: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    overwrite: bool,
}

fn provenance<C: Serialize>(experiment: &str, cfg: &C) -> Result<Provenance> {
    Ok(Provenance { config_hash: config_hash(experiment, cfg)?, version: mprp::VERSION })
}

#[derive(Serialize)]
struct FmtResolved {
    formats: Vec<String>,
    sigma_exponents: Vec<i32>,
}

#[derive(Serialize)]
struct FmtSummaryRow {
    format: String,
    overflow_probability: f64,
    underflow_probability: f64,
    not_normalized_probability: f64,
    variance: f64,
}

fn run_fmt_stats(run: &RunArgs, formats: &[String], sigma: Option<&str>) -> Result<()> {
    if run.seeds.is_some() {
        bail!("fmt-stats is deterministic and takes no seeds");
    }
    let loaded = load::<FmtStatsFields>("fmt-stats", run)?;
    let names: Vec<String> = if !formats.is_empty() {
        formats.to_vec()
    } else {
        loaded.fields.formats.unwrap_or_else(|| FloatFormat::TABLE.iter().map(|f| f.to_string()).collect())
    };
    let parsed: Vec<FloatFormat> = names
        .iter()
        .map(|n| n.parse::<FloatFormat>().with_context(|| format!("format `{n}`")))
        .collect::<Result<_>>()?;
    let sigma_exponents = match sigma {
        Some(s) => parse_sigma_range(s)?,
        None => loaded.fields.sigma_exponents.unwrap_or_else(|| vec![0, 1, 2]),
    };
    let resolved = FmtResolved { formats: parsed.iter().map(|f| f.to_string()).collect(), sigma_exponents };
    let rows: Vec<FmtStatsRow> = fmt_stats(&parsed, &resolved.sigma_exponents);
    let mut summary: Vec<FmtSummaryRow> = Vec::new();
    for r in &rows {
        if summary.last().map(|s| s.format != r.format).unwrap_or(true) {
            summary.push(FmtSummaryRow {
                format: r.format.clone(),
                overflow_probability: r.overflow_probability,
                underflow_probability: r.underflow_probability,
                not_normalized_probability: r.not_normalized_probability,
                variance: r.variance,
            });
        }
    }
    emit(&loaded.output, &provenance("fmt-stats", &resolved)?, &rows, &summary)
}

fn run_generate(args: &GenArgs) -> Result<()> {
    if args.out.exists() && !args.overwrite {
        bail!("{} exists; pass --overwrite to replace it", args.out.display());
    }
    let storage = match args.storage {
        StorageArg::F32 => Storage::F32,
        StorageArg::F64 => Storage::F64,
        StorageArg::Fp16 => Storage::Fp16,
    };
    let spectrum = |kind| -> Result<_> {
        Ok(matrix_with_spectrum(&SpectrumSpec::new(kind, args.s_p, args.n, args.rank)?, args.seed))
    };
    let array = match args.kind {
        GenKind::Linear => Array::from_matrix(&spectrum(SpectrumKind::Linear)?, storage),
        GenKind::Exp => Array::from_matrix(&spectrum(SpectrumKind::Exp)?, storage),
        GenKind::Type1 => Array::from_matrix(&matrix_type1(args.n, args.rank, 1e-4, args.seed), storage),
        GenKind::Type2 => Array::from_matrix(&matrix_type2(args.n, args.rank, 3.0, 1e6, args.seed), storage),
        GenKind::Cauchy => Array::from_matrix(&cauchy_matrix(args.n, 1e-3, args.seed)?, storage),
        GenKind::Tensor => {
            let t = hosvd_test_tensor(&[args.n; 3], &[args.rank; 3], args.padding, args.seed)?;
            Array::from_tensor(&t, storage)
        }
    };
    let layout = if args.row_major { Layout::RowMajor } else { Layout::ColumnMajor };
    let bytes = container::encode(&array, layout)?;
    std::fs::write(&args.out, &bytes).with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!("wrote {:?} array ({} bytes) to {}", array.dims, bytes.len(), args.out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::FmtStats { run, formats, sigma } => run_fmt_stats(run, formats, sigma.as_deref()),
        Command::MantissaSweep(run) => {
            let l = load::<SweepFields>("mantissa-sweep", run)?;
            let cfg = l.fields.resolve(l.full_scale, l.seeds);
            let (rows, summary) = mantissa_sweep(&cfg)?;
            emit(&l.output, &provenance("mantissa-sweep", &cfg)?, &rows, &summary)
        }
        Command::GemmAccuracy(run) => {
            let l = load::<GemmFields>("gemm-accuracy", run)?;
            let cfg = l.fields.resolve(l.full_scale, l.seeds);
            let (rows, summary) = gemm_accuracy(&cfg)?;
            emit(&l.output, &provenance("gemm-accuracy", &cfg)?, &rows, &summary)
        }
        Command::Rsvd(run) => {
            let l = load::<RsvdFields>("rsvd", run)?;
            let cfg = l.fields.resolve(l.full_scale, l.seeds);
            let (rows, summary) = rsvd_experiment(&cfg)?;
            emit(&l.output, &provenance("rsvd", &cfg)?, &rows, &summary)
        }
        Command::Rphosvd(run) => {
            let l = load::<HosvdFields>("rphosvd", run)?;
            let cfg = l.fields.resolve(l.full_scale, l.seeds);
            let (rows, summary) = rphosvd_experiment(&cfg)?;
            emit(&l.output, &provenance("rphosvd", &cfg)?, &rows, &summary)
        }
        Command::GenMatrix(args) => run_generate(args),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let result = run(Cli::parse());
    // Wall-clock is metadata only, never part of a report.
    eprintln!("elapsed {:.2}s", start.elapsed().as_secs_f64());
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
