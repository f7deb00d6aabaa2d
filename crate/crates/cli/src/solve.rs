use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use dbcd_core::io::read_instance;
use dbcd_core::solver::{solve_with_trace, write_trace_csv};
use dbcd_core::{BetaChoice, CostModel, Overlap, PartitionScheme, SolverConfig, Strategy, TransmitMode};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyArg {
    Ra,
    Asl,
    Ast,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OverlapArg {
    Ps,
    Fp,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PartitionArg {
    Contiguous,
    Strided,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TransmitArg {
    Full,
    Coupling,
}

/// `auto`, `eta`, or a number `>= 1`.
#[derive(Debug, Clone, Copy)]
pub struct BetaArg(pub BetaChoice);

impl FromStr for BetaArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self(BetaChoice::Auto)),
            "eta" => Ok(Self(BetaChoice::Eta)),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|b| *b >= 1.0 && b.is_finite())
                .map(|b| Self(BetaChoice::Fixed(b)))
                .ok_or_else(|| format!("expected auto, eta or a number >= 1, got '{v}'")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file in DBCD-SPARSE v1 format.
    pub instance: PathBuf,
    #[arg(long = "C", default_value_t = 1)]
    pub nodes: usize,
    #[arg(long, default_value_t = 1)]
    pub tau: usize,
    #[arg(long, value_enum, default_value = "ra")]
    pub strategy: StrategyArg,
    /// Group width r for the torus strategy.
    #[arg(long, default_value_t = 1)]
    pub torus_width: usize,
    #[arg(long, value_enum, default_value = "ps")]
    pub overlap: OverlapArg,
    #[arg(long, default_value = "auto")]
    pub beta: BetaArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps: f64,
    /// Iterations between from-scratch residual audits (0 disables).
    #[arg(long, default_value_t = 100)]
    pub audit_period: u64,
    /// Iterations between report records.
    #[arg(long, default_value_t = 100)]
    pub record_period: u64,
    /// Known optimal value; LASSO runs then stop on F - F* <= eps.
    #[arg(long)]
    pub f_star: Option<f64>,
    /// LASSO stagnation window in iterations (0 disables).
    #[arg(long, default_value_t = 1000)]
    pub stagnation_window: u64,
    #[arg(long, default_value_t = 1.0)]
    pub t1: f64,
    #[arg(long, default_value_t = 10.0)]
    pub t2: f64,
    #[arg(long, default_value_t = 10.0)]
    pub tp2p: f64,
    #[arg(long, value_enum, default_value = "contiguous")]
    pub partition: PartitionArg,
    #[arg(long, value_enum, default_value = "coupling")]
    pub transmit: TransmitArg,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Writes `<out>.csv` and `<out>.json` (and `<out>.trace.csv` with --trace).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record per-node metrics after every iteration.
    #[arg(long)]
    pub trace: bool,
}

impl SolveArgs {
    pub fn config(&self) -> Result<SolverConfig> {
        let strategy = match self.strategy {
            StrategyArg::Ra => Strategy::ReduceAll,
            StrategyArg::Asl => Strategy::AsyncRing,
            StrategyArg::Ast => Strategy::AsyncTorus { width: self.torus_width },
        };
        Ok(SolverConfig {
            nodes: self.nodes,
            tau: self.tau,
            strategy,
            overlap: match self.overlap {
                OverlapArg::Ps => Overlap::ParallelSerial,
                OverlapArg::Fp => Overlap::FullyParallel,
            },
            beta: self.beta.0,
            max_iter: self.max_iter,
            epsilon: self.eps,
            seed: self.seed,
            audit_period: self.audit_period,
            record_period: self.record_period,
            f_star: self.f_star,
            stagnation_window: self.stagnation_window,
            partition: match self.partition {
                PartitionArg::Contiguous => PartitionScheme::Contiguous,
                PartitionArg::Strided => PartitionScheme::Strided,
            },
            workers: self.workers,
            cost: CostModel::new(self.t1, self.t2, self.tp2p)?,
            transmit: match self.transmit {
                TransmitArg::Full => TransmitMode::Full,
                TransmitArg::Coupling => TransmitMode::CouplingRows,
            },
        })
    }
}

fn with_suffix(prefix: &std::path::Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn run(args: &SolveArgs) -> Result<()> {
    let file = File::open(&args.instance).with_context(|| format!("cannot open {}", args.instance.display()))?;
    let problem = read_instance(BufReader::new(file)).with_context(|| format!("reading {}", args.instance.display()))?;
    let config = args.config()?;
    let mut trace = Vec::new();
    let report = solve_with_trace(&problem, &config, args.trace.then_some(&mut trace))?;

    match &args.out {
        Some(prefix) => {
            let mut csv = crate::output(Some(&with_suffix(prefix, ".csv")))?;
            report.write_csv(&mut csv)?;
            csv.flush()?;
            std::fs::write(with_suffix(prefix, ".json"), report.to_json()?)?;
            if args.trace {
                let mut t = crate::output(Some(&with_suffix(prefix, ".trace.csv")))?;
                write_trace_csv(&trace, &mut t)?;
                t.flush()?;
            }
        }
        None => {
            let mut out = crate::output(None)?;
            report.write_csv(&mut out)?;
            out.flush()?;
        }
    }
    let last = report.final_record();
    let summary = serde_json::json!({
        "stop": report.stop,
        "iterations": report.iterations,
        "objective": last.objective,
        "accuracy": last.accuracy,
        "beta": report.beta,
        "regime": report.regime,
        "virtual_time": last.virtual_time,
        "bytes_sent": last.bytes_sent,
    });
    eprintln!("{summary}");
    Ok(())
}
