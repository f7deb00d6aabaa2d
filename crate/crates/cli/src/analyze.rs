use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use dbcd_core::eso::{cost_of_distribution_bounds, optimal_tau, speedup_curve, time_model};
use dbcd_core::io::fmt_real;

/// `(n, omega, C, tau)` of the published bound table.
pub const TABLE1_ROWS: [(usize, usize, usize, usize); 3] = [
    (1_000_000, 100, 10, 50),
    (10_000_000, 100, 10, 50),
    (100_000_000, 100, 100, 100),
];

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Bounds on the cost of distribution: columns n,omega,C,tau,beta2,LB,UB.
    #[arg(long)]
    pub table1: bool,
    /// Extra bound-table rows as `n,omega,C,tau`.
    #[arg(long, value_delimiter = ';')]
    pub row: Vec<String>,
    /// Speed-up factor curves: columns Ctau,eta,speedup.
    #[arg(long)]
    pub speedup: bool,
    /// Densities for --speedup.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.001, 0.01, 0.1, 0.5, 1.0])]
    pub eta: Vec<f64>,
    /// Largest C*tau for --speedup.
    #[arg(long, default_value_t = 10_000)]
    pub max_ctau: usize,
    /// Modelled run time against tau: columns tau,time,tau_star.
    #[arg(long)]
    pub tau_sweep: bool,
    #[arg(long, default_value_t = 1000)]
    pub s: usize,
    #[arg(long, default_value_t = 1)]
    pub xi: usize,
    #[arg(long = "C", default_value_t = 4)]
    pub nodes: usize,
    /// Ratio of block-update time to exchange time.
    #[arg(long, default_value_t = 0.01)]
    pub r12: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_row(s: &str) -> Result<(usize, usize, usize, usize)> {
    let v: Vec<usize> = s
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [n, w, c, t] => Ok((n, w, c, t)),
        _ => bail!("row '{s}' must be n,omega,C,tau"),
    }
}

pub fn table1(rows: &[(usize, usize, usize, usize)], out: &mut impl Write) -> Result<()> {
    writeln!(out, "n,omega,C,tau,beta2,LB,UB")?;
    for &(n, w, c, t) in rows {
        let b = cost_of_distribution_bounds(n, w, c, t)?;
        writeln!(
            out,
            "{n},{w},{c},{t},{},{},{}",
            fmt_real(b.beta_single),
            fmt_real(b.lower),
            fmt_real(b.upper)
        )?;
    }
    Ok(())
}

/// `C tau` on a 1-2-5 grid up to `max`.
fn ctau_grid(max: usize) -> Vec<usize> {
    let mut grid = Vec::new();
    let mut decade = 1;
    while decade <= max {
        for m in [1, 2, 5] {
            if m * decade <= max {
                grid.push(m * decade);
            }
        }
        decade *= 10;
    }
    grid
}

pub fn speedup(etas: &[f64], max_ctau: usize, out: &mut impl Write) -> Result<()> {
    writeln!(out, "Ctau,eta,speedup")?;
    for &eta in etas {
        if !(eta > 0.0 && eta <= 1.0) {
            bail!("eta = {eta} must lie in (0, 1]");
        }
        for (ct, factor) in speedup_curve(eta, ctau_grid(max_ctau)) {
            writeln!(out, "{ct},{},{}", fmt_real(eta), fmt_real(factor))?;
        }
    }
    Ok(())
}

pub fn tau_sweep(s: usize, xi: usize, nodes: usize, r12: f64, out: &mut impl Write) -> Result<()> {
    let star = optimal_tau(s, xi, nodes, r12)?;
    writeln!(out, "tau,time,tau_star")?;
    for tau in 1..=s {
        let t = time_model(tau as f64, s, xi, nodes, r12);
        writeln!(out, "{tau},{},{}", fmt_real(t), fmt_real(star))?;
    }
    Ok(())
}

pub fn run(args: &AnalyzeArgs) -> Result<()> {
    if !(args.table1 || args.speedup || args.tau_sweep || !args.row.is_empty()) {
        return Err(crate::Exit {
            code: 1,
            message: "choose at least one of --table1, --row, --speedup, --tau-sweep".into(),
        }
        .into());
    }
    let mut out = crate::output(args.out.as_deref())?;
    if args.table1 || !args.row.is_empty() {
        let mut rows = if args.table1 { TABLE1_ROWS.to_vec() } else { Vec::new() };
        for r in &args.row {
            rows.push(parse_row(r)?);
        }
        table1(&rows, &mut out)?;
    }
    if args.speedup {
        speedup(&args.eta, args.max_ctau, &mut out)?;
    }
    if args.tau_sweep {
        tau_sweep(args.s, args.xi, args.nodes, args.r12, &mut out)?;
    }
    out.flush()?;
    Ok(())
}
