//! Benchmark fixtures.

use dbcd_core::generator::{generate, BlockAngularSpec};
use dbcd_core::{compute_beta, compute_xi, CompositeProblem, LassoProblem, Partition, PartitionScheme};

/// Block-angular LASSO with `nodes * local_cols` columns.
pub fn lasso(nodes: usize, local_cols: usize) -> LassoProblem {
    let spec = BlockAngularSpec {
        nodes,
        local_rows: 2 * local_cols,
        local_cols,
        global_rows: local_cols / 2,
        local_nnz_per_row: 5,
        global_nnz_per_row: 5,
        xstar_nnz: nodes * local_cols / 20,
        noise_sigma: 0.01,
        lambda: 0.01,
        seed: 1,
    };
    generate(&spec).expect("valid spec").problem
}

pub fn partition(problem: &LassoProblem, nodes: usize) -> Partition {
    Partition::balanced(problem.num_blocks(), nodes, PartitionScheme::Contiguous).expect("nodes divide blocks")
}

pub fn beta(problem: &LassoProblem, partition: &Partition, tau: usize) -> f64 {
    let xi = compute_xi(&problem.separability(), partition);
    compute_beta(xi, tau, partition.group_size(), partition.num_nodes()).expect("valid sampling")
}
