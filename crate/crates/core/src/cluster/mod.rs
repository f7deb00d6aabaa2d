//! In-process simulation of `C` nodes exchanging residual updates.
//!
//! Three exchange strategies are modelled:
//!
//! * **RA**: a synchronous reduce-all, after which every node holds the
//!   same residual.
//! * **ASL**: an asynchronous ring. Each node forwards one accumulated
//!   message per iteration to its successor, so remote updates arrive with a
//!   lag of up to `C - 1` iterations.
//! * **AST**: nodes are grouped into `C / r` groups of width `r`. Each group
//!   reduces synchronously and the group roots run the ASL ring among
//!   themselves.
//!
//! Asynchrony is simulated deterministically: a message sent at the end of
//! iteration `k` is read at the start of iteration `k + 1`. Nodes still meet
//! at iteration boundaries, so results depend only on the seed and
//! configuration, never on thread scheduling.

mod sim;

use serde::{Deserialize, Serialize};

use crate::eso::{ceil_log2, CostModel};
use crate::error::{Error, Result};

pub use sim::{AuditRecord, Cluster, ClusterOptions, StepStats, TransmitMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Strategy {
    #[serde(rename = "ra")]
    ReduceAll,
    #[serde(rename = "asl")]
    AsyncRing,
    #[serde(rename = "ast")]
    AsyncTorus { width: usize },
}

impl Strategy {
    /// Whether the convergence theory covers this strategy (synchronous only).
    pub fn is_synchronous(&self) -> bool {
        matches!(self, Strategy::ReduceAll)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::ReduceAll => "ra",
            Strategy::AsyncRing => "asl",
            Strategy::AsyncTorus { .. } => "ast",
        }
    }
}

/// Whether communication overlaps computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Overlap {
    /// Alternating parallel compute and serial communication.
    #[default]
    #[serde(rename = "ps")]
    ParallelSerial,
    /// A dedicated communication thread hides the exchange.
    #[serde(rename = "fp")]
    FullyParallel,
}

/// Ring and group layout of the nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    strategy: Strategy,
    nodes: usize,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl Topology {
    pub fn new(strategy: Strategy, nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Topology("at least one node is required".into()));
        }
        let width = match strategy {
            Strategy::ReduceAll => nodes,
            Strategy::AsyncRing => 1,
            Strategy::AsyncTorus { width } => {
                if width == 0 || !nodes.is_multiple_of(width) {
                    return Err(Error::Topology(format!(
                        "torus width {width} does not divide {nodes} nodes"
                    )));
                }
                width
            }
        };
        let groups: Vec<Vec<usize>> = (0..nodes / width)
            .map(|q| (q * width..(q + 1) * width).collect())
            .collect();
        let group_of = (0..nodes).map(|c| c / width).collect();
        Ok(Self {
            strategy,
            nodes,
            groups,
            group_of,
        })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Width `r` of each group (1 for ASL, `C` for RA).
    pub fn width(&self) -> usize {
        self.groups[0].len()
    }

    /// Number of ring members (`C / r`).
    pub fn ring_len(&self) -> usize {
        self.groups.len()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, node: usize) -> usize {
        self.group_of[node]
    }

    /// Root node of group `q`.
    pub fn root(&self, q: usize) -> usize {
        self.groups[q][0]
    }

    pub fn pred(&self, q: usize) -> usize {
        (q + self.ring_len() - 1) % self.ring_len()
    }

    pub fn succ(&self, q: usize) -> usize {
        (q + 1) % self.ring_len()
    }
}

/// Per-node memory, communication time and extra work of a strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accounting {
    /// Residual-length vectors held per node.
    pub memory_vectors: f64,
    /// Reals held per node, `memory_vectors * m`.
    pub memory_reals: f64,
    pub comm_time: f64,
    /// Extra additions per iteration, as a multiple of `m`.
    pub extra_additions_per_m: u32,
    pub extra_additions: usize,
}

/// Memory / time / work summary for `strategy` with residual length `m`.
pub fn accounting(strategy: Strategy, nodes: usize, m: usize, cost: &CostModel) -> Accounting {
    let (vectors, comm, adds) = match strategy {
        Strategy::ReduceAll => (2.0, cost.t_reduce_all(nodes), 0),
        Strategy::AsyncRing => (2.0 + nodes as f64, cost.t_p2p, 4),
        Strategy::AsyncTorus { width } => (
            2.0 + nodes as f64 / width as f64,
            cost.t_p2p + cost.t_reduce_all(nodes) / width as f64,
            8,
        ),
    };
    Accounting {
        memory_vectors: vectors,
        memory_reals: vectors * m as f64,
        comm_time: comm,
        extra_additions_per_m: adds,
        extra_additions: adds as usize * m,
    }
}

/// Bytes put on the network per iteration when each message carries
/// `payload` reals.
///
/// RA follows a recursive-doubling pattern of `ceil(log2 C)` rounds. AST adds
/// a group reduce of that shape, one ring message per root (when there is
/// more than one root) and a broadcast back to the `r - 1` other members.
pub fn bytes_per_iteration(topology: &Topology, payload: usize) -> u64 {
    let c = topology.nodes() as u64;
    let len = payload as u64 * 8;
    match topology.strategy() {
        Strategy::ReduceAll => c * ceil_log2(topology.nodes()) as u64 * len,
        Strategy::AsyncRing => {
            if c > 1 {
                c * len
            } else {
                0
            }
        }
        Strategy::AsyncTorus { width } => {
            let q = topology.ring_len() as u64;
            let r = width as u64;
            let reduce = r * ceil_log2(width) as u64;
            let ring = if q > 1 { 1 } else { 0 };
            q * (reduce + ring + (r - 1)) * len
        }
    }
}

/// Virtual time and traffic ledger. Every node advances by the same amount
/// per iteration, so elapsed time is `iterations * per_iteration` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualClock {
    pub cost: CostModel,
    pub overlap: Overlap,
    pub compute_time: f64,
    pub comm_time: f64,
    iterations: u64,
    bytes_sent: u64,
    nodes: usize,
}

impl VirtualClock {
    pub fn new(cost: CostModel, overlap: Overlap, strategy: Strategy, nodes: usize, tau: usize) -> Self {
        Self {
            cost,
            overlap,
            compute_time: tau as f64 * cost.t1,
            // a lone node has nobody to talk to
            comm_time: if nodes > 1 {
                accounting(strategy, nodes, 0, &cost).comm_time
            } else {
                0.0
            },
            iterations: 0,
            bytes_sent: 0,
            nodes,
        }
    }

    /// PS: `tau t1 + comm`; FP: `max(tau t1, comm)`.
    pub fn per_iteration(&self) -> f64 {
        match self.overlap {
            Overlap::ParallelSerial => self.compute_time + self.comm_time,
            Overlap::FullyParallel => self.compute_time.max(self.comm_time),
        }
    }

    pub fn tick(&mut self, bytes: u64) {
        self.iterations += 1;
        self.bytes_sent += bytes;
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn elapsed(&self) -> f64 {
        self.iterations as f64 * self.per_iteration()
    }

    /// All nodes share the iteration barrier.
    pub fn node_elapsed(&self, node: usize) -> f64 {
        assert!(node < self.nodes);
        self.elapsed()
    }

    pub fn bytes_sent(&self) -> u64 {
        self.bytes_sent
    }
}
