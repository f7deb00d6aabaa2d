//! Synthetic instances.
//!
//! The block-angular LASSO family has `C` diagonal local blocks and a shared
//! band of coupling rows underneath:
//!
//! ```text
//! [ L_1              ]
//! [      L_2         ]
//! [           ...    ]
//! [              L_C ]
//! [ G_1  G_2 ... G_C ]
//! ```
//!
//! Node `c` owns the columns of `L_c` / `G_c`, so only the band rows couple
//! nodes. Matrix values are uniform on `[-1, 1]`; the planted solution has
//! magnitudes uniform on `[0.5, 1.5]` with random signs; the noise is Gaussian.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::{LassoProblem, SvmDualProblem};
use crate::sparse::SparseMatrix;

/// Row counts of the large block-angular run that the scaled preset mimics.
pub const REFERENCE_LOCAL_ROWS: usize = 1_952_148;
pub const REFERENCE_GLOBAL_ROWS: usize = 500_224;
pub const REFERENCE_LOCAL_COLS: usize = 976_562;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockAngularSpec {
    pub nodes: usize,
    pub local_rows: usize,
    pub local_cols: usize,
    pub global_rows: usize,
    pub local_nnz_per_row: usize,
    /// Nonzeros per band row inside each node's columns.
    pub global_nnz_per_row: usize,
    pub xstar_nnz: usize,
    pub noise_sigma: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for BlockAngularSpec {
    fn default() -> Self {
        Self {
            nodes: 2,
            local_rows: 20,
            local_cols: 10,
            global_rows: 5,
            local_nnz_per_row: 3,
            global_nnz_per_row: 3,
            xstar_nnz: 4,
            noise_sigma: 0.0,
            lambda: 0.01,
            seed: 0,
        }
    }
}

impl BlockAngularSpec {
    /// Per-node shapes of the reference run divided by `scale` (rounded),
    /// keeping the local to coupling row ratio.
    pub fn reference_shaped(nodes: usize, scale: f64, seed: u64) -> Result<Self> {
        if !(scale >= 1.0) {
            return Err(Error::Parameter(format!("scale divisor {scale} must be at least 1")));
        }
        let shrink = |v: usize| ((v as f64 / scale).round() as usize).max(1);
        let local_cols = shrink(REFERENCE_LOCAL_COLS);
        let spec = Self {
            nodes,
            local_rows: shrink(REFERENCE_LOCAL_ROWS),
            local_cols,
            global_rows: shrink(REFERENCE_GLOBAL_ROWS),
            local_nnz_per_row: 5.min(local_cols),
            global_nnz_per_row: 20.min(local_cols),
            xstar_nnz: (nodes * local_cols / 10).max(1),
            noise_sigma: 0.01,
            lambda: 0.01,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rows(&self) -> usize {
        self.nodes * self.local_rows + self.global_rows
    }

    pub fn cols(&self) -> usize {
        self.nodes * self.local_cols
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Parameter(msg));
        if self.nodes == 0 || self.local_cols == 0 {
            return fail("nodes and local columns must be positive".into());
        }
        if self.local_nnz_per_row > self.local_cols || self.global_nnz_per_row > self.local_cols {
            return fail(format!(
                "nonzeros per row ({}, {}) exceed the {} local columns",
                self.local_nnz_per_row, self.global_nnz_per_row, self.local_cols
            ));
        }
        if self.xstar_nnz > self.cols() {
            return fail(format!("x* cannot have {} nonzeros in {} columns", self.xstar_nnz, self.cols()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail(format!("noise sigma {} must be nonnegative", self.noise_sigma));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return fail(format!("lambda {} must be nonnegative", self.lambda));
        }
        if self.rows() == 0 {
            return fail("instance would have no rows".into());
        }
        Ok(())
    }

    /// Rows whose nonzeros may lie in node `c`'s columns.
    pub fn node_rows(&self, c: usize) -> std::ops::Range<usize> {
        c * self.local_rows..(c + 1) * self.local_rows
    }

    pub fn band_rows(&self) -> std::ops::Range<usize> {
        self.nodes * self.local_rows..self.rows()
    }

    pub fn node_cols(&self, c: usize) -> std::ops::Range<usize> {
        c * self.local_cols..(c + 1) * self.local_cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub problem: LassoProblem,
    pub x_star: Vec<f64>,
}

fn nonzero_uniform(rng: &mut impl Rng) -> f64 {
    loop {
        let v: f64 = rng.random_range(-1.0..=1.0);
        if v != 0.0 {
            return v;
        }
    }
}

pub fn generate(spec: &BlockAngularSpec) -> Result<GeneratedInstance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut triplets = Vec::new();
    for c in 0..spec.nodes {
        let cols = spec.node_cols(c);
        for r in spec.node_rows(c) {
            for j in sample(&mut rng, spec.local_cols, spec.local_nnz_per_row) {
                triplets.push((r, cols.start + j, nonzero_uniform(&mut rng)));
            }
        }
    }
    for r in spec.band_rows() {
        for c in 0..spec.nodes {
            let start = spec.node_cols(c).start;
            for j in sample(&mut rng, spec.local_cols, spec.global_nnz_per_row) {
                triplets.push((r, start + j, nonzero_uniform(&mut rng)));
            }
        }
    }
    let a = SparseMatrix::from_triplets(spec.rows(), spec.cols(), triplets)?;

    let mut x_star = vec![0.0; spec.cols()];
    for i in sample(&mut rng, spec.cols(), spec.xstar_nnz) {
        let magnitude: f64 = rng.random_range(0.5..=1.5);
        x_star[i] = if rng.random::<bool>() { magnitude } else { -magnitude };
    }
    let mut y = a.mul_vec(&x_star);
    if spec.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Parameter(e.to_string()))?;
        y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(GeneratedInstance {
        problem: LassoProblem::new(a, y, spec.lambda)?,
        x_star,
    })
}

/// Checks that every nonzero lies in a diagonal block or in the band.
pub fn is_block_angular(a: &SparseMatrix, spec: &BlockAngularSpec) -> bool {
    a.rows() == spec.rows()
        && a.cols() == spec.cols()
        && a.triplets().all(|(r, col, _)| {
            let c = col / spec.local_cols;
            spec.band_rows().contains(&r) || spec.node_rows(c).contains(&r)
        })
}

/// Linearly separable points in the plane, labelled by the side of the line
/// `u + v = 0` and kept at least `margin` away from it.
pub fn separable_svm(points: usize, margin: f64, lambda: f64, seed: u64) -> Result<SvmDualProblem> {
    if points == 0 || !(0.0..1.0).contains(&margin) {
        return Err(Error::Parameter("need points > 0 and margin in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(points);
    let mut labels = Vec::with_capacity(points);
    while rows.len() < points {
        let u: f64 = rng.random_range(-1.0..=1.0);
        let v: f64 = rng.random_range(-1.0..=1.0);
        let side = (u + v) / std::f64::consts::SQRT_2;
        if side.abs() < margin || u == 0.0 || v == 0.0 {
            continue;
        }
        rows.push(vec![u, v]);
        labels.push(side.signum());
    }
    SvmDualProblem::new(SparseMatrix::from_dense(&rows)?, labels, lambda)
}
