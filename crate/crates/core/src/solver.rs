//! The outer loop: sample, update, exchange, audit, record, stop.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::block::{compute_xi, Partition, PartitionScheme};
use crate::cluster::{AuditRecord, Cluster, ClusterOptions, Overlap, Strategy, TransmitMode};
use crate::eso::{compute_beta, eta_surrogate_beta, CostModel};
use crate::error::{Error, Result};
use crate::io::fmt_real;
use crate::numeric::max_abs_diff;
use crate::problems::{CompositeProblem, ProblemKind};

/// How the step-size multiplier is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum BetaChoice {
    /// `beta(xi, tau, s, C)` with `xi` measured on the instance.
    Auto,
    /// The looser `1 + eta (C tau - 1)` with `eta = xi / s`.
    Eta,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub nodes: usize,
    pub tau: usize,
    pub strategy: Strategy,
    pub overlap: Overlap,
    pub beta: BetaChoice,
    pub max_iter: u64,
    pub epsilon: f64,
    pub seed: u64,
    /// Iterations between from-scratch residual audits; 0 disables them.
    pub audit_period: u64,
    /// Iterations between metric records.
    pub record_period: u64,
    /// Known optimal value, used for LASSO stopping and reporting.
    pub f_star: Option<f64>,
    /// LASSO without `f_star` stops once `F` fell by at most `epsilon * max(1, |F|)`
    /// over this many iterations.
    pub stagnation_window: u64,
    pub partition: PartitionScheme,
    pub workers: Option<usize>,
    pub cost: CostModel,
    pub transmit: TransmitMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nodes: 1,
            tau: 1,
            strategy: Strategy::ReduceAll,
            overlap: Overlap::ParallelSerial,
            beta: BetaChoice::Auto,
            max_iter: 1000,
            epsilon: 1e-6,
            seed: 0,
            audit_period: 100,
            record_period: 100,
            f_star: None,
            stagnation_window: 1000,
            partition: PartitionScheme::Contiguous,
            workers: None,
            cost: CostModel::default(),
            transmit: TransmitMode::Full,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes == 0 || self.tau == 0 {
            return Err(Error::Parameter("C and tau must be positive".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter(format!("epsilon = {} must be positive", self.epsilon)));
        }
        if let BetaChoice::Fixed(b) = self.beta {
            if !(b >= 1.0 && b.is_finite()) {
                return Err(Error::Parameter(format!("beta = {b} must be at least 1")));
            }
        }
        if self.record_period == 0 {
            return Err(Error::Parameter("record period must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopReason {
    Converged,
    Stagnated,
    Budget,
}

/// Metrics at one recorded iteration, all computed from a from-scratch residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub iteration: u64,
    pub objective: f64,
    /// Duality gap (SVM) or `F - F*` (when `F*` is known).
    pub accuracy: Option<f64>,
    pub virtual_time: f64,
    pub wall_time: f64,
    pub bytes_sent: u64,
}

/// One row of the optional per-node trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: u64,
    pub node: usize,
    pub objective: f64,
    /// Duality gap from the node's copy (SVM) or its residual error.
    pub gap_or_residual_error: f64,
    pub virtual_time: f64,
    pub bytes_sent: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub problem: ProblemKind,
    pub config: SolverConfig,
    pub beta: f64,
    pub xi: usize,
    pub s: usize,
    /// `"analyzed"` for RA; asynchronous strategies lie outside the convergence theory.
    pub regime: String,
    pub records: Vec<Record>,
    pub audits: Vec<AuditRecord>,
    pub stop: StopReason,
    pub iterations: u64,
    pub x: Vec<f64>,
}

pub const REPORT_SCHEMA: &str = "dbcd-report/1";

impl RunReport {
    /// `k,objective,accuracy,virtual_time,wall_time,bytes_sent`; empty accuracy when unknown.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "k,objective,accuracy,virtual_time,wall_time,bytes_sent")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                fmt_real(r.objective),
                r.accuracy.map(fmt_real).unwrap_or_default(),
                fmt_real(r.virtual_time),
                fmt_real(r.wall_time),
                r.bytes_sent
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn final_record(&self) -> &Record {
        self.records.last().expect("a report always holds the initial record")
    }
}

pub fn write_trace_csv(rows: &[TraceRow], out: &mut impl Write) -> Result<()> {
    writeln!(out, "k,node,F,gap_or_residual_error,virtual_time,bytes_sent")?;
    for t in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            t.iteration,
            t.node,
            fmt_real(t.objective),
            fmt_real(t.gap_or_residual_error),
            fmt_real(t.virtual_time),
            t.bytes_sent
        )?;
    }
    Ok(())
}

/// Decision after a record: converged, stagnated, or keep going (`None`).
pub fn stop_check(records: &[Record], kind: ProblemKind, epsilon: f64, f_star: Option<f64>, window: u64) -> Option<StopReason> {
    let last = records.last()?;
    if (kind == ProblemKind::SvmDual || f_star.is_some())
        && last.accuracy.is_some_and(|a| a <= epsilon) {
            return Some(StopReason::Converged);
        }
    if kind == ProblemKind::Lasso && window > 0 && last.iteration >= window {
        let earlier = records.iter().rev().find(|r| r.iteration + window <= last.iteration)?;
        if earlier.objective - last.objective <= epsilon * last.objective.abs().max(1.0) {
            return Some(StopReason::Stagnated);
        }
    }
    None
}

/// Step multiplier and the measured `xi`, `s` for this problem and partition.
pub fn resolve_beta<P: CompositeProblem>(problem: &P, partition: &Partition, config: &SolverConfig) -> Result<(f64, usize)> {
    let xi = compute_xi(&problem.separability(), partition);
    let s = partition.group_size();
    let beta = match config.beta {
        BetaChoice::Auto => compute_beta(xi, config.tau, s, config.nodes)?,
        BetaChoice::Eta => eta_surrogate_beta(xi as f64 / s as f64, config.nodes, config.tau),
        BetaChoice::Fixed(b) => b,
    };
    Ok((beta, xi))
}

/// Metric record from a freshly recomputed residual.
fn measure<P: CompositeProblem>(problem: &P, cluster: &Cluster, f_star: Option<f64>, started: Instant) -> Result<Record> {
    let x = cluster.x();
    let g = problem.residual_from_scratch(x);
    let objective = problem.objective(x, &g);
    let iteration = cluster.iteration();
    if !objective.is_finite() {
        return Err(Error::Divergence { iteration, value: objective });
    }
    let accuracy = match problem.optimality_gap(x, &g) {
        Some(gap) => Some(gap),
        None => f_star.map(|f| objective - f),
    };
    Ok(Record {
        iteration,
        objective,
        accuracy,
        virtual_time: cluster.clock().elapsed(),
        wall_time: started.elapsed().as_secs_f64(),
        bytes_sent: cluster.clock().bytes_sent(),
    })
}

fn trace_rows<P: CompositeProblem>(problem: &P, cluster: &Cluster, out: &mut Vec<TraceRow>) {
    let x = cluster.x();
    let truth = problem.residual_from_scratch(x);
    for c in 0..cluster.nodes() {
        let g = cluster.residual(c);
        let gap_or_err = problem
            .optimality_gap(x, g)
            .unwrap_or_else(|| max_abs_diff(g, &truth));
        out.push(TraceRow {
            iteration: cluster.iteration(),
            node: c,
            objective: problem.objective(x, g),
            gap_or_residual_error: gap_or_err,
            virtual_time: cluster.clock().node_elapsed(c),
            bytes_sent: cluster.clock().bytes_sent(),
        });
    }
}

/// Runs the distributed method and returns the report.
pub fn solve<P: CompositeProblem>(problem: &P, config: &SolverConfig) -> Result<RunReport> {
    solve_with_trace(problem, config, None)
}

/// As [`solve`], optionally appending one trace row per node and iteration.
pub fn solve_with_trace<P: CompositeProblem>(problem: &P, config: &SolverConfig, mut trace: Option<&mut Vec<TraceRow>>) -> Result<RunReport> {
    config.validate()?;
    let partition = Partition::balanced(problem.num_blocks(), config.nodes, config.partition)?;
    let (beta, xi) = resolve_beta(problem, &partition, config)?;
    let s = partition.group_size();
    let degenerate = problem.degenerate_blocks();
    if !degenerate.is_empty() {
        log::warn!("{} blocks have zero curvature and are held at their prox point", degenerate.len());
    }

    let options = ClusterOptions {
        overlap: config.overlap,
        cost: config.cost,
        transmit: config.transmit,
        workers: config.workers,
        ..ClusterOptions::new(config.strategy, config.tau, config.seed)
    };
    let mut cluster = Cluster::new(problem, partition, options)?;
    let started = Instant::now();
    let mut records = vec![measure(problem, &cluster, config.f_star, started)?];
    let mut audits = Vec::new();
    if let Some(t) = trace.as_deref_mut() {
        trace_rows(problem, &cluster, t);
    }

    let mut stop = stop_check(&records, problem.kind(), config.epsilon, config.f_star, config.stagnation_window);
    while stop.is_none() && cluster.iteration() < config.max_iter {
        cluster.step(problem, beta);
        let k = cluster.iteration();
        if config.audit_period > 0 && k % config.audit_period == 0 {
            audits.extend(cluster.audit(problem)?);
        }
        if let Some(t) = trace.as_deref_mut() {
            trace_rows(problem, &cluster, t);
        }
        if k % config.record_period == 0 || k == config.max_iter {
            records.push(measure(problem, &cluster, config.f_star, started)?);
            stop = stop_check(&records, problem.kind(), config.epsilon, config.f_star, config.stagnation_window);
        }
    }
    let stop = stop.unwrap_or(StopReason::Budget);
    log::info!("stopped after {} iterations: {stop:?}", cluster.iteration());

    Ok(RunReport {
        schema: REPORT_SCHEMA.to_string(),
        problem: problem.kind(),
        config: config.clone(),
        beta,
        xi,
        s,
        regime: if config.strategy.is_synchronous() {
            "analyzed".into()
        } else {
            "outside analyzed regime".into()
        },
        records,
        audits,
        stop,
        iterations: cluster.iteration(),
        x: cluster.x().to_vec(),
    })
}
