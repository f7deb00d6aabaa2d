//! Problem instances and their scalar block updates.
//!
//! Both shipped problems use blocks of size one and keep an auxiliary residual
//! vector `g` from which block gradients are read in `O(nnz)` of one column or row.

pub mod lasso;
pub mod prox;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::block::SeparabilityStructure;

pub use lasso::LassoProblem;
pub use svm::SvmDualProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Lasso,
    #[serde(rename = "svm")]
    SvmDual,
}

/// A composite objective `f + Omega` with residual bookkeeping.
pub trait CompositeProblem: Sync {
    fn kind(&self) -> ProblemKind;

    fn num_blocks(&self) -> usize;

    /// Length of the residual vector `g`.
    fn residual_len(&self) -> usize;

    /// Block Lipschitz constants `L_i`; zero marks a block `f` ignores.
    fn lipschitz(&self) -> &[f64];

    fn separability(&self) -> SeparabilityStructure;

    fn residual_from_scratch(&self, x: &[f64]) -> Vec<f64>;

    fn block_gradient(&self, i: usize, g: &[f64]) -> f64;

    /// Minimiser `h` of `grad_i f * t + (beta L_i / 2) t^2 + Omega_i(x_i + t)`.
    fn block_update(&self, i: usize, xi: f64, g: &[f64], beta: f64) -> f64;

    /// Visits the nonzero entries of block `i`'s residual contribution for step `h`.
    fn for_each_delta(&self, i: usize, h: f64, f: impl FnMut(usize, f64));

    /// Residual entries block `i` reads and writes.
    fn residual_pattern(&self, i: usize) -> &[usize];

    /// `F(x) = f(x) + Omega(x)` evaluated through the residual.
    fn objective(&self, x: &[f64], g: &[f64]) -> f64;

    /// Certified optimality measure, when the problem has one.
    fn optimality_gap(&self, x: &[f64], g: &[f64]) -> Option<f64>;

    fn initial_point(&self) -> Vec<f64> {
        vec![0.0; self.num_blocks()]
    }

    /// Blocks with `L_i = 0`.
    fn degenerate_blocks(&self) -> Vec<usize> {
        self.lipschitz()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0.0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Sparse residual contribution of a set of block updates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseDelta {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseDelta {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        self.indices
            .iter()
            .zip(&self.values)
            .for_each(|(&i, &v)| out[i] = v);
        out
    }

    pub fn add_to(&self, g: &mut [f64]) {
        self.indices
            .iter()
            .zip(&self.values)
            .for_each(|(&i, &v)| g[i] += v);
    }
}

/// `delta g = sum_{(i, h)} contribution(i, h)`; the support is the union of the
/// touched patterns, in increasing order.
pub fn delta_g<P: CompositeProblem>(problem: &P, updates: &[(usize, f64)]) -> SparseDelta {
    let len = problem.residual_len();
    let mut dense = vec![0.0; len];
    let mut touched = vec![false; len];
    for &(i, h) in updates {
        problem.for_each_delta(i, h, |r, v| {
            dense[r] += v;
            touched[r] = true;
        });
    }
    let indices: Vec<usize> = (0..len).filter(|&r| touched[r]).collect();
    let values = indices.iter().map(|&r| dense[r]).collect();
    SparseDelta { indices, values }
}

/// Either of the shipped problems, as loaded from an instance file.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemInstance {
    Lasso(LassoProblem),
    SvmDual(SvmDualProblem),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $body:expr) => {
        match $self {
            ProblemInstance::Lasso($p) => $body,
            ProblemInstance::SvmDual($p) => $body,
        }
    };
}

impl CompositeProblem for ProblemInstance {
    fn kind(&self) -> ProblemKind {
        dispatch!(self, p => p.kind())
    }
    fn num_blocks(&self) -> usize {
        dispatch!(self, p => p.num_blocks())
    }
    fn residual_len(&self) -> usize {
        dispatch!(self, p => p.residual_len())
    }
    fn lipschitz(&self) -> &[f64] {
        dispatch!(self, p => p.lipschitz())
    }
    fn separability(&self) -> SeparabilityStructure {
        dispatch!(self, p => p.separability())
    }
    fn residual_from_scratch(&self, x: &[f64]) -> Vec<f64> {
        dispatch!(self, p => p.residual_from_scratch(x))
    }
    fn block_gradient(&self, i: usize, g: &[f64]) -> f64 {
        dispatch!(self, p => p.block_gradient(i, g))
    }
    fn block_update(&self, i: usize, xi: f64, g: &[f64], beta: f64) -> f64 {
        dispatch!(self, p => p.block_update(i, xi, g, beta))
    }
    fn for_each_delta(&self, i: usize, h: f64, f: impl FnMut(usize, f64)) {
        dispatch!(self, p => p.for_each_delta(i, h, f))
    }
    fn residual_pattern(&self, i: usize) -> &[usize] {
        dispatch!(self, p => p.residual_pattern(i))
    }
    fn objective(&self, x: &[f64], g: &[f64]) -> f64 {
        dispatch!(self, p => p.objective(x, g))
    }
    fn optimality_gap(&self, x: &[f64], g: &[f64]) -> Option<f64> {
        dispatch!(self, p => p.optimality_gap(x, g))
    }
}
