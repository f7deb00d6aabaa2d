use crate::block::SeparabilityStructure;
use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, CompensatedSum};
use crate::problems::prox::clip_update;
use crate::problems::{CompositeProblem, ProblemKind};
use crate::sparse::SparseMatrix;

/// Dual of the hinge-loss SVM:
/// `min_{x in [0,1]^m} 1/(2 lambda m^2) x^T Q x - (1/m) 1^T x`
/// with `Q_ij = y_i y_j <A_i:, A_j:>`.
///
/// `Q` is never formed. The residual is the primal vector
/// `g = 1/(lambda m) sum_i x_i y_i A_i:^T`, one entry per feature.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmDualProblem {
    a: SparseMatrix,
    labels: Vec<f64>,
    lambda: f64,
    row_norms: Vec<f64>,
    lipschitz: Vec<f64>,
}

impl SvmDualProblem {
    pub fn new(a: SparseMatrix, labels: Vec<f64>, lambda: f64) -> Result<Self> {
        if a.rows() != labels.len() {
            return Err(Error::Instance(format!(
                "matrix has {} rows but {} labels",
                a.rows(),
                labels.len()
            )));
        }
        if let Some(j) = labels.iter().position(|&l| l != 1.0 && l != -1.0) {
            return Err(Error::Instance(format!("label {j} = {} is not +-1", labels[j])));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Instance(format!("lambda = {lambda} must be positive")));
        }
        let m = a.rows() as f64;
        let row_norms: Vec<f64> = (0..a.rows()).map(|i| a.row_norm_squared(i)).collect();
        let lipschitz = row_norms.iter().map(|r| r / (lambda * m * m)).collect();
        Ok(Self {
            a,
            labels,
            lambda,
            row_norms,
            lipschitz,
        })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn m(&self) -> usize {
        self.a.rows()
    }

    /// `y_i <A_i:, g>`.
    pub fn margin(&self, i: usize, g: &[f64]) -> f64 {
        let (cols, vals) = self.a.row(i);
        self.labels[i] * cols.iter().zip(vals).map(|(&c, &v)| v * g[c]).sum::<f64>()
    }

    /// Hinge-loss primal `P(w) = (1/m) sum_i max(0, 1 - y_i A_i: w) + lambda/2 ||w||^2`.
    pub fn primal_value(&self, w: &[f64]) -> f64 {
        let m = self.m() as f64;
        let hinge: CompensatedSum = (0..self.m())
            .map(|i| (1.0 - self.margin_exact(i, w)).max(0.0))
            .collect();
        hinge.value() / m + 0.5 * self.lambda * compensated_sum(w.iter().map(|v| v * v))
    }

    fn margin_exact(&self, i: usize, w: &[f64]) -> f64 {
        let (cols, vals) = self.a.row(i);
        self.labels[i] * compensated_sum(cols.iter().zip(vals).map(|(&c, &v)| v * w[c]))
    }

    /// `P(w(x)) + F(x)` with `w(x)` rebuilt from `x`; the reference for [`dual_gap`](CompositeProblem::optimality_gap).
    pub fn duality_gap_from_scratch(&self, x: &[f64]) -> f64 {
        let w = self.residual_from_scratch(x);
        self.primal_value(&w) + self.dual_value_from_scratch(x, &w)
    }

    fn dual_value_from_scratch(&self, x: &[f64], w: &[f64]) -> f64 {
        if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return f64::INFINITY;
        }
        0.5 * self.lambda * compensated_sum(w.iter().map(|v| v * v)) - compensated_sum(x.iter().copied()) / self.m() as f64
    }

    /// `(1/m) sum_i (max(0, 1 - y_i A_i: g) - x_i) + lambda ||g||^2`.
    pub fn duality_gap(&self, x: &[f64], g: &[f64]) -> f64 {
        let m = self.m() as f64;
        let terms: CompensatedSum = (0..self.m())
            .map(|i| (1.0 - self.margin(i, g)).max(0.0) - x[i])
            .collect();
        terms.value() / m + self.lambda * compensated_sum(g.iter().map(|v| v * v))
    }
}

impl CompositeProblem for SvmDualProblem {
    fn kind(&self) -> ProblemKind {
        ProblemKind::SvmDual
    }

    fn num_blocks(&self) -> usize {
        self.m()
    }

    fn residual_len(&self) -> usize {
        self.a.cols()
    }

    fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    /// One group per feature (dual variables sharing a nonzero in that column)
    /// plus singletons for the separable linear term.
    fn separability(&self) -> SeparabilityStructure {
        let n = self.m();
        let mut groups: Vec<Vec<usize>> = (0..self.a.cols())
            .map(|c| self.a.column(c).0.to_vec())
            .filter(|g| !g.is_empty())
            .collect();
        groups.extend((0..n).map(|i| vec![i]));
        SeparabilityStructure::new(n, groups).expect("column patterns are valid groups")
    }

    fn residual_from_scratch(&self, x: &[f64]) -> Vec<f64> {
        let scale = 1.0 / (self.lambda * self.m() as f64);
        let weighted: Vec<f64> = x.iter().zip(&self.labels).map(|(xi, yi)| xi * yi).collect();
        let mut g = self.a.transpose_mul_vec(&weighted);
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    fn block_gradient(&self, i: usize, g: &[f64]) -> f64 {
        (self.margin(i, g) - 1.0) / self.m() as f64
    }

    fn block_update(&self, i: usize, xi: f64, g: &[f64], beta: f64) -> f64 {
        clip_update(xi, self.margin(i, g), self.row_norms[i], self.lambda, self.m(), beta).unwrap_or(0.0)
    }

    fn for_each_delta(&self, i: usize, h: f64, mut f: impl FnMut(usize, f64)) {
        let s = h * self.labels[i] / (self.lambda * self.m() as f64);
        let (cols, vals) = self.a.row(i);
        cols.iter().zip(vals).for_each(|(&c, &v)| f(c, s * v));
    }

    fn residual_pattern(&self, i: usize) -> &[usize] {
        self.a.row(i).0
    }

    /// `lambda/2 ||g||^2 - (1/m) sum x`, or `+inf` outside the box.
    fn objective(&self, x: &[f64], g: &[f64]) -> f64 {
        if x.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return f64::INFINITY;
        }
        0.5 * self.lambda * compensated_sum(g.iter().map(|v| v * v)) - compensated_sum(x.iter().copied()) / self.m() as f64
    }

    fn optimality_gap(&self, x: &[f64], g: &[f64]) -> Option<f64> {
        Some(self.duality_gap(x, g))
    }
}
