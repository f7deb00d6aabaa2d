//! Distributed randomized block coordinate descent for partially separable
//! composite problems, with a deterministic in-process cluster simulator.
//!
//! The main entry points are [`solver::solve`] for running the method and
//! the closed forms in [`eso`] for step sizes and complexity bounds.

pub mod block;
pub mod cluster;
pub mod error;
pub mod eso;
pub mod generator;
pub mod io;
pub mod numeric;
pub mod problems;
pub mod solver;
pub mod sparse;

pub use block::{
    compute_xi, BlockLayout, DistributedSampler, DistributedSampling, Partition, PartitionScheme,
    SeparabilityStructure, WeightVector,
};
pub use cluster::{Cluster, ClusterOptions, Overlap, Strategy, Topology, TransmitMode, VirtualClock};
pub use error::{Error, Result};
pub use eso::{compute_beta, CostModel, EsoParameters};
pub use problems::{CompositeProblem, LassoProblem, ProblemInstance, ProblemKind, SvmDualProblem};
pub use solver::{solve, BetaChoice, RunReport, SolverConfig, StopReason};
pub use sparse::SparseMatrix;
