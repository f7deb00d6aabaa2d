use crate::block::SeparabilityStructure;
use crate::error::{Error, Result};
use crate::numeric::compensated_sum;
use crate::problems::prox::soft_threshold_update;
use crate::problems::{CompositeProblem, ProblemKind};
use crate::sparse::SparseMatrix;

/// `min_x 1/2 ||A x - y||^2 + lambda ||x||_1` with residual `g = A x - y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    a: SparseMatrix,
    y: Vec<f64>,
    lambda: f64,
    lipschitz: Vec<f64>,
}

impl LassoProblem {
    pub fn new(a: SparseMatrix, y: Vec<f64>, lambda: f64) -> Result<Self> {
        if a.rows() != y.len() {
            return Err(Error::Instance(format!(
                "matrix has {} rows but y has {} entries",
                a.rows(),
                y.len()
            )));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Instance(format!("lambda = {lambda} must be nonnegative")));
        }
        let lipschitz = (0..a.cols()).map(|i| a.column_norm_squared(i)).collect();
        Ok(Self {
            a,
            y,
            lambda,
            lipschitz,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl CompositeProblem for LassoProblem {
    fn kind(&self) -> ProblemKind {
        ProblemKind::Lasso
    }

    fn num_blocks(&self) -> usize {
        self.a.cols()
    }

    fn residual_len(&self) -> usize {
        self.a.rows()
    }

    fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// One group per row: the squared-loss term of row `j` couples its nonzero columns.
    fn separability(&self) -> SeparabilityStructure {
        let n = self.num_blocks();
        let mut covered = vec![false; n];
        let mut groups = Vec::new();
        for j in 0..self.a.rows() {
            let cols = self.a.row(j).0;
            if !cols.is_empty() {
                cols.iter().for_each(|&i| covered[i] = true);
                groups.push(cols.to_vec());
            }
        }
        groups.extend((0..n).filter(|&i| !covered[i]).map(|i| vec![i]));
        SeparabilityStructure::new(n, groups).expect("row patterns are valid groups")
    }

    fn residual_from_scratch(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(x);
        g.iter_mut().zip(&self.y).for_each(|(gi, yi)| *gi -= yi);
        g
    }

    fn block_gradient(&self, i: usize, g: &[f64]) -> f64 {
        let (rows, vals) = self.a.column(i);
        rows.iter().zip(vals).map(|(&r, &v)| v * g[r]).sum()
    }

    fn block_update(&self, i: usize, xi: f64, g: &[f64], beta: f64) -> f64 {
        let l = self.lipschitz[i];
        if l == 0.0 {
            // f does not depend on this coordinate: the regulariser alone puts it at zero
            return -xi;
        }
        let b = self.block_gradient(i, g);
        soft_threshold_update(b, beta * l, xi, self.lambda).expect("positive curvature")
    }

    fn for_each_delta(&self, i: usize, h: f64, mut f: impl FnMut(usize, f64)) {
        let (rows, vals) = self.a.column(i);
        rows.iter().zip(vals).for_each(|(&r, &v)| f(r, v * h));
    }

    fn residual_pattern(&self, i: usize) -> &[usize] {
        self.a.column(i).0
    }

    fn objective(&self, x: &[f64], g: &[f64]) -> f64 {
        0.5 * compensated_sum(g.iter().map(|v| v * v)) + self.lambda * compensated_sum(x.iter().map(|v| v.abs()))
    }

    fn optimality_gap(&self, _x: &[f64], _g: &[f64]) -> Option<f64> {
        None
    }
}
