use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bytes_per_iteration, Overlap, Strategy, Topology, VirtualClock};
use crate::block::{DistributedSampler, DistributedSampling, Partition};
use crate::eso::CostModel;
use crate::error::{Error, Result};
use crate::numeric::norm_inf;
use crate::problems::CompositeProblem;

/// Which residual entries travel over the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransmitMode {
    /// Every message carries the whole residual-length vector.
    #[default]
    Full,
    /// Only entries touched by blocks of two or more nodes are sent; each
    /// node applies its private entries locally.
    CouplingRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub strategy: Strategy,
    pub overlap: Overlap,
    pub cost: CostModel,
    pub tau: usize,
    pub seed: u64,
    pub transmit: TransmitMode,
    /// Size of the worker pool; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Relative drift above which an audit replaces the node's copy.
    pub drift_tolerance: f64,
    /// Relative drift treated as a hard failure.
    pub drift_limit: f64,
}

impl ClusterOptions {
    pub fn new(strategy: Strategy, tau: usize, seed: u64) -> Self {
        Self {
            strategy,
            overlap: Overlap::default(),
            cost: CostModel::default(),
            tau,
            seed,
            transmit: TransmitMode::default(),
            workers: None,
            drift_tolerance: 1e-8,
            drift_limit: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub iteration: u64,
    pub updates: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub iteration: u64,
    pub node: usize,
    pub drift: f64,
    pub replaced: bool,
}

/// Ring state of one group root.
#[derive(Debug, Clone)]
struct RingMember {
    /// Own aggregates `Delta_{k-Q} .. Delta_{k-1}` at the start of iteration `k`.
    history: VecDeque<Vec<f64>>,
    /// Accumulated message `dG_{k-1}` received from the predecessor.
    inbox: Vec<f64>,
}

/// `C` simulated nodes sharing the iterate `x`, each with its own copy of
/// the residual.
pub struct Cluster {
    options: ClusterOptions,
    topology: Topology,
    partition: Partition,
    sampler: DistributedSampler,
    x: Vec<f64>,
    residuals: Vec<Vec<f64>>,
    ring: Vec<RingMember>,
    clock: VirtualClock,
    coupling: Option<Vec<bool>>,
    views: Vec<Vec<usize>>,
    payload_len: usize,
    last_deltas: Vec<Vec<f64>>,
    last_sampling: Option<DistributedSampling>,
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Cluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cluster")
            .field("options", &self.options)
            .field("iteration", &self.clock.iterations())
            .finish_non_exhaustive()
    }
}

impl Cluster {
    pub fn new<P: CompositeProblem>(problem: &P, partition: Partition, options: ClusterOptions) -> Result<Self> {
        if partition.num_blocks() != problem.num_blocks() {
            return Err(Error::Partition(format!(
                "partition covers {} blocks but the problem has {}",
                partition.num_blocks(),
                problem.num_blocks()
            )));
        }
        let nodes = partition.num_nodes();
        let topology = Topology::new(options.strategy, nodes)?;
        let sampler = DistributedSampler::new(&partition, options.tau, options.seed)?;
        let m = problem.residual_len();
        let x = problem.initial_point();
        let g0 = problem.residual_from_scratch(&x);

        let (coupling, views, payload_len) = match options.transmit {
            TransmitMode::Full => (None, vec![(0..m).collect(); nodes], m),
            TransmitMode::CouplingRows => {
                let mut touched_by = vec![usize::MAX; m];
                let mut shared = vec![false; m];
                let mut views = Vec::with_capacity(nodes);
                for c in 0..nodes {
                    let mut view = Vec::new();
                    for &i in partition.group(c) {
                        for &r in problem.residual_pattern(i) {
                            if touched_by[r] == usize::MAX {
                                touched_by[r] = c;
                            } else if touched_by[r] != c {
                                shared[r] = true;
                            }
                            view.push(r);
                        }
                    }
                    view.sort_unstable();
                    view.dedup();
                    views.push(view);
                }
                let len = shared.iter().filter(|&&s| s).count();
                (Some(shared), views, len)
            }
        };

        let q = topology.ring_len();
        let ring = (0..q)
            .map(|_| RingMember {
                history: (0..q).map(|_| vec![0.0; m]).collect(),
                inbox: vec![0.0; m],
            })
            .collect();
        let pool = match options.workers {
            Some(w) => Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build()
                    .map_err(|e| Error::Parameter(format!("cannot build worker pool: {e}")))?,
            ),
            None => None,
        };
        let clock = VirtualClock::new(options.cost, options.overlap, options.strategy, nodes, options.tau);
        Ok(Self {
            topology,
            sampler,
            x,
            residuals: vec![g0; nodes],
            ring,
            clock,
            coupling,
            views,
            payload_len,
            last_deltas: vec![vec![0.0; m]; nodes],
            last_sampling: None,
            pool,
            partition,
            options,
        })
    }

    pub fn options(&self) -> &ClusterOptions {
        &self.options
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn nodes(&self) -> usize {
        self.partition.num_nodes()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    /// Node `c`'s residual copy.
    pub fn residual(&self, c: usize) -> &[f64] {
        &self.residuals[c]
    }

    pub fn residuals(&self) -> &[Vec<f64>] {
        &self.residuals
    }

    /// Residual entries node `c` reads; all of them unless only coupling rows are sent.
    pub fn view(&self, c: usize) -> &[usize] {
        &self.views[c]
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn iteration(&self) -> u64 {
        self.clock.iterations()
    }

    /// Reals per message.
    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    /// Per-node residual contributions of the last step.
    pub fn last_deltas(&self) -> &[Vec<f64>] {
        &self.last_deltas
    }

    pub fn last_sampling(&self) -> Option<&DistributedSampling> {
        self.last_sampling.as_ref()
    }

    /// One iteration: sample, update every sampled block against the
    /// node's own residual copy, then exchange.
    pub fn step<P: CompositeProblem>(&mut self, problem: &P, beta: f64) -> StepStats {
        let sampling = self.sampler.sample();
        let work = {
            let x = &self.x;
            let residuals = &self.residuals;
            let sampling = &sampling;
            let run = || compute_all(problem, x, residuals, sampling, beta);
            match &self.pool {
                Some(pool) => pool.install(run),
                None => run(),
            }
        };
        let mut updates = 0;
        let mut deltas = Vec::with_capacity(work.len());
        for (c, (steps, delta)) in work.into_iter().enumerate() {
            for (&i, h) in sampling.node(c).iter().zip(steps) {
                debug_assert_eq!(self.partition.owner(i), c);
                self.x[i] += h;
                updates += 1;
            }
            deltas.push(delta);
        }
        self.last_sampling = Some(sampling);
        let bytes = self.exchange(deltas);
        StepStats {
            iteration: self.clock.iterations(),
            updates,
            bytes,
        }
    }

    /// An iteration in which no node updates but messages still flow.
    pub fn idle_step(&mut self) -> StepStats {
        let m = self.payload_m();
        let deltas = vec![vec![0.0; m]; self.nodes()];
        self.last_sampling = None;
        let bytes = self.exchange(deltas);
        StepStats {
            iteration: self.clock.iterations(),
            updates: 0,
            bytes,
        }
    }

    fn payload_m(&self) -> usize {
        self.residuals[0].len()
    }

    fn payload(&self, delta: &[f64]) -> Vec<f64> {
        match &self.coupling {
            None => delta.to_vec(),
            Some(shared) => delta
                .iter()
                .zip(shared)
                .map(|(&v, &s)| if s { v } else { 0.0 })
                .collect(),
        }
    }

    fn apply_private(&mut self, deltas: &[Vec<f64>]) {
        if let Some(shared) = &self.coupling {
            for (g, d) in self.residuals.iter_mut().zip(deltas) {
                for ((gj, &dj), &s) in g.iter_mut().zip(d).zip(shared) {
                    if !s {
                        *gj += dj;
                    }
                }
            }
        }
    }

    fn exchange(&mut self, deltas: Vec<Vec<f64>>) -> u64 {
        let payloads: Vec<Vec<f64>> = deltas.iter().map(|d| self.payload(d)).collect();
        match self.topology.strategy() {
            Strategy::ReduceAll => {
                let mut total = payloads[0].clone();
                for p in &payloads[1..] {
                    add_assign(&mut total, p);
                }
                for g in &mut self.residuals {
                    add_assign(g, &total);
                }
            }
            Strategy::AsyncRing | Strategy::AsyncTorus { .. } => self.ring_exchange(&payloads),
        }
        self.apply_private(&deltas);
        self.last_deltas = deltas;
        let bytes = bytes_per_iteration(&self.topology, self.payload_len);
        self.clock.tick(bytes);
        bytes
    }

    /// Group reduce, one ring hop between roots, broadcast within groups.
    ///
    /// Root `q` sends `dG_k = (dG_{k-1}^pred - Delta_{k-Q}) + Delta_k` and applies
    /// `Delta_k + (dG_k^pred - Delta_{k-Q+1})`, which by induction delivers the
    /// aggregate of ring member `pred^j(q)` with a lag of `j - 1` iterations.
    fn ring_exchange(&mut self, payloads: &[Vec<f64>]) {
        let groups = self.topology.groups().to_vec();
        let aggregates: Vec<Vec<f64>> = groups
            .iter()
            .map(|members| {
                let mut agg = payloads[members[0]].clone();
                for &c in &members[1..] {
                    add_assign(&mut agg, &payloads[c]);
                }
                agg
            })
            .collect();

        let outgoing: Vec<Vec<f64>> = self
            .ring
            .iter_mut()
            .zip(&aggregates)
            .map(|(member, agg)| {
                let oldest = member.history.pop_front().expect("history is never empty");
                let out = member
                    .inbox
                    .iter()
                    .zip(&oldest)
                    .zip(agg)
                    .map(|((&a, &o), &d)| (a - o) + d)
                    .collect();
                member.history.push_back(agg.clone());
                out
            })
            .collect();

        let q = self.topology.ring_len();
        for (r, out) in outgoing.into_iter().enumerate() {
            self.ring[self.topology.succ(r)].inbox = out;
        }

        for r in 0..q {
            let member = &self.ring[r];
            let agg = &aggregates[r];
            let lagged = member.history.front().expect("history is never empty");
            let inc: Vec<f64> = agg
                .iter()
                .zip(&member.inbox)
                .zip(lagged)
                .map(|((&d, &a), &l)| d + (a - l))
                .collect();
            for &c in &groups[r] {
                add_assign(&mut self.residuals[c], &inc);
            }
        }
    }

    /// Portion of the remote aggregates not yet applied at ring member `q`.
    fn undelivered(&self, q: usize) -> Vec<f64> {
        let len = self.ring.len();
        let mut out = vec![0.0; self.payload_m()];
        let mut p = self.topology.pred(q);
        for j in 1..len {
            if j >= 2 {
                // aggregates of iterations K-j+1 .. K-1 sit at the tail of the history
                let hist = &self.ring[p].history;
                for delta in hist.iter().skip(len - j + 1) {
                    add_assign(&mut out, delta);
                }
            }
            p = self.topology.pred(p);
        }
        out
    }

    /// Residual every node should hold right now: the from-scratch residual
    /// minus the messages still in flight.
    pub fn expected_residual<P: CompositeProblem>(&self, problem: &P, node: usize) -> Vec<f64> {
        let mut want = problem.residual_from_scratch(&self.x);
        if !self.topology.strategy().is_synchronous() {
            let pending = self.undelivered(self.topology.group_of(node));
            want.iter_mut().zip(&pending).for_each(|(w, p)| *w -= p);
        }
        want
    }

    /// Relative sup-distance between node `c`'s copy and its expected value, on the rows it reads.
    pub fn drift<P: CompositeProblem>(&self, problem: &P, node: usize) -> f64 {
        let want = self.expected_residual(problem, node);
        relative_drift(&self.residuals[node], &want, &self.views[node])
    }

    /// Compares every copy against its expected value and replaces copies
    /// that have drifted past the tolerance.
    pub fn audit<P: CompositeProblem>(&mut self, problem: &P) -> Result<Vec<AuditRecord>> {
        let scratch = problem.residual_from_scratch(&self.x);
        let iteration = self.clock.iterations();
        let pending: Vec<Vec<f64>> = if self.topology.strategy().is_synchronous() {
            Vec::new()
        } else {
            (0..self.ring.len()).map(|q| self.undelivered(q)).collect()
        };
        let mut records = Vec::with_capacity(self.nodes());
        for c in 0..self.nodes() {
            let mut want = scratch.clone();
            if let Some(p) = pending.get(self.topology.group_of(c)) {
                want.iter_mut().zip(p).for_each(|(w, p)| *w -= p);
            }
            let drift = relative_drift(&self.residuals[c], &want, &self.views[c]);
            if !(drift <= self.options.drift_limit) {
                return Err(Error::ResidualDrift {
                    iteration,
                    node: c,
                    drift,
                    limit: self.options.drift_limit,
                });
            }
            let replaced = drift > self.options.drift_tolerance;
            if replaced {
                log::warn!("node {c}: residual drift {drift:e} at iteration {iteration}, resynchronising");
                for &r in &self.views[c] {
                    self.residuals[c][r] = want[r];
                }
            }
            records.push(AuditRecord {
                iteration,
                node: c,
                drift,
                replaced,
            });
        }
        Ok(records)
    }

    /// Overwrites node `c`'s residual copy, e.g. to inject a fault.
    pub fn set_residual(&mut self, c: usize, g: Vec<f64>) {
        assert_eq!(g.len(), self.payload_m());
        self.residuals[c] = g;
    }
}

fn relative_drift(have: &[f64], want: &[f64], rows: &[usize]) -> f64 {
    let diff = rows.iter().map(|&r| (have[r] - want[r]).abs()).fold(0.0, f64::max);
    diff / (1.0 + norm_inf(want))
}

fn add_assign(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// Block steps and the dense residual contribution of every node. Steps are
/// computed in parallel; contributions are accumulated in sampling order so
/// the result does not depend on the worker count.
fn compute_all<P: CompositeProblem>(
    problem: &P,
    x: &[f64],
    residuals: &[Vec<f64>],
    sampling: &DistributedSampling,
    beta: f64,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let m = problem.residual_len();
    (0..residuals.len())
        .into_par_iter()
        .map(|c| {
            let g = &residuals[c];
            let blocks = sampling.node(c);
            let steps: Vec<f64> = blocks
                .par_iter()
                .map(|&i| problem.block_update(i, x[i], g, beta))
                .collect();
            let mut delta = vec![0.0; m];
            for (&i, &h) in blocks.iter().zip(&steps) {
                if h != 0.0 {
                    problem.for_each_delta(i, h, |r, v| delta[r] += v);
                }
            }
            (steps, delta)
        })
        .collect()
}
