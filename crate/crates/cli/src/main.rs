//! `dbcd`: generate instances, run the distributed solver, print analysis
//! tables and run verification suites.
//!
//! Exit codes: 0 success, 1 usage or other error, 2 parse error,
//! 3 verification failure, 4 divergence.

mod analyze;
mod solve;
mod verify;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dbcd_core::generator::{self, BlockAngularSpec};
use dbcd_core::io::{write_instance, xstar_to_string};
use dbcd_core::ProblemInstance;

#[derive(Debug, Parser)]
#[command(name = "dbcd", version, about = "Distributed block coordinate descent toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic instance file.
    Generate(GenerateArgs),
    /// Run the solver on an instance file.
    Solve(solve::SolveArgs),
    /// Emit analysis tables as CSV.
    Analyze(analyze::AnalyzeArgs),
    /// Run enumeration checks; exits with 3 if any fails.
    Verify(verify::VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InstanceKind {
    Lasso,
    Svm,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "lasso")]
    kind: InstanceKind,
    /// Number of nodes (diagonal blocks).
    #[arg(long = "C", default_value_t = 2)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    local_rows: usize,
    #[arg(long, default_value_t = 10)]
    local_cols: usize,
    #[arg(long, default_value_t = 5)]
    global_rows: usize,
    #[arg(long, default_value_t = 3)]
    local_nnz: usize,
    /// Nonzeros per coupling row inside each node's columns.
    #[arg(long, default_value_t = 3)]
    global_nnz: usize,
    #[arg(long, default_value_t = 4)]
    xstar_nnz: usize,
    /// Standard deviation of the Gaussian noise added to `y`.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Use the reference run's per-node shape divided by this factor.
    #[arg(long)]
    reference_scale: Option<f64>,
    /// SVM only: number of points.
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// SVM only: minimum distance of a point from the separating line.
    #[arg(long, default_value_t = 0.1)]
    margin: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure that carries its own exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return e.code;
    }
    for cause in err.chain() {
        match cause.downcast_ref::<dbcd_core::Error>() {
            Some(dbcd_core::Error::Parse { .. }) => return 2,
            Some(dbcd_core::Error::Divergence { .. }) => return 4,
            _ => {}
        }
    }
    1
}

/// Opens `path` for writing, or stdout when `None`.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let mut out = output(Some(&args.out))?;
    match args.kind {
        InstanceKind::Svm => {
            let p = generator::separable_svm(args.points, args.margin, args.lambda, args.seed)?;
            write_instance(&mut out, &ProblemInstance::SvmDual(p))?;
        }
        InstanceKind::Lasso => {
            let spec = match args.reference_scale {
                Some(scale) => BlockAngularSpec {
                    noise_sigma: args.noise,
                    lambda: args.lambda,
                    ..BlockAngularSpec::reference_shaped(args.nodes, scale, args.seed)?
                },
                None => BlockAngularSpec {
                    nodes: args.nodes,
                    local_rows: args.local_rows,
                    local_cols: args.local_cols,
                    global_rows: args.global_rows,
                    local_nnz_per_row: args.local_nnz,
                    global_nnz_per_row: args.global_nnz,
                    xstar_nnz: args.xstar_nnz,
                    noise_sigma: args.noise,
                    lambda: args.lambda,
                    seed: args.seed,
                },
            };
            let inst = generator::generate(&spec)?;
            write_instance(&mut out, &ProblemInstance::Lasso(inst.problem))?;
            let mut sidecar = args.out.clone().into_os_string();
            sidecar.push(".xstar");
            std::fs::write(&sidecar, xstar_to_string(&inst.x_star))
                .with_context(|| format!("cannot write {}", PathBuf::from(&sidecar).display()))?;
            log::info!("{} x {} block-angular instance written", spec.rows(), spec.cols());
        }
    }
    out.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => generate(&args),
        Command::Solve(args) => solve::run(&args),
        Command::Analyze(args) => analyze::run(&args),
        Command::Verify(args) => verify::run(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        // reader went away, e.g. `dbcd analyze --table1 | head`
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>()
            .or_else(|| match c.downcast_ref::<dbcd_core::Error>() {
                Some(dbcd_core::Error::Io(io)) => Some(io),
                _ => None,
            })
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}
