//! Exhaustive and Monte-Carlo checks of the ESO machinery.
//!
//! All expectations over the `(C, tau)`-distributed sampling are computed by
//! walking every equiprobable outcome in a fixed order, so results do not
//! depend on how many threads run the checks.

use itertools::Itertools;
use rand::Rng;
use serde::Serialize;

use crate::block::{
    compute_xi, project_onto_sampling, weighted_norm_squared, BlockLayout, DistributedSampler,
    Partition, SeparabilityStructure, WeightVector,
};
use crate::eso::compute_beta;
use crate::error::{Error, Result};

/// Largest number of outcomes the exhaustive mode will walk.
pub const ENUMERATION_BUDGET: u128 = 1_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of equiprobable outcomes `binom(s, tau)^C`.
pub fn outcome_count(partition: &Partition, tau: usize) -> u128 {
    let per = binomial(partition.group_size(), tau);
    (0..partition.num_nodes()).fold(1u128, |acc, _| acc.saturating_mul(per))
}

/// Calls `visit` with every outcome of the sampling (blocks in node order).
/// Returns the number of outcomes.
pub fn for_each_outcome(
    partition: &Partition,
    tau: usize,
    mut visit: impl FnMut(&[usize]),
) -> Result<u128> {
    let s = partition.group_size();
    if tau == 0 || tau > s {
        return Err(Error::Parameter(format!("tau = {tau} must lie in [1, {s}]")));
    }
    let outcomes = outcome_count(partition, tau);
    if outcomes > ENUMERATION_BUDGET {
        return Err(Error::Budget {
            outcomes,
            budget: ENUMERATION_BUDGET,
        });
    }
    let per_node: Vec<Vec<Vec<usize>>> = partition
        .groups()
        .iter()
        .map(|g| g.iter().copied().combinations(tau).collect())
        .collect();
    let mut buf = Vec::with_capacity(partition.num_nodes() * tau);
    for choice in per_node.iter().map(|v| v.iter()).multi_cartesian_product() {
        buf.clear();
        for z in choice {
            buf.extend_from_slice(z);
        }
        visit(&buf);
    }
    Ok(outcomes)
}

/// `E[|Z ∩ J|^2]` by enumeration.
pub fn enumerate_theta_squared(partition: &Partition, group: &[usize], tau: usize) -> Result<f64> {
    let mut member = vec![false; partition.num_blocks()];
    group.iter().for_each(|&i| member[i] = true);
    let mut total = 0.0;
    let count = for_each_outcome(partition, tau, |z| {
        let theta = z.iter().filter(|&&i| member[i]).count() as f64;
        total += theta * theta;
    })?;
    Ok(total / count as f64)
}

/// Both sides of the sampling identity
/// `E[sum_{i in Z∩J} k(θ, i)] = E[θ/(C xi) * sum_{i in J} k(θ, i)]`, `θ = |Z∩J|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub xi: usize,
}

impl IdentityCheck {
    pub fn holds(&self, tol: f64) -> bool {
        (self.lhs - self.rhs).abs() <= tol * self.lhs.abs().max(1.0)
    }
}

/// Evaluates both sides exactly. `group` must meet every node in the same
/// number `xi >= 1` of blocks.
pub fn verify_sampling_identity(
    partition: &Partition,
    group: &[usize],
    tau: usize,
    kappa: impl Fn(usize, usize) -> f64,
) -> Result<IdentityCheck> {
    let mut per_node = vec![0usize; partition.num_nodes()];
    let mut member = vec![false; partition.num_blocks()];
    for &i in group {
        if member[i] {
            return Err(Error::Parameter(format!("block {i} repeated in group")));
        }
        member[i] = true;
        per_node[partition.owner(i)] += 1;
    }
    let xi = per_node[0];
    if xi == 0 || per_node.iter().any(|&k| k != xi) {
        return Err(Error::Parameter(format!(
            "group meets the nodes unevenly: {per_node:?}"
        )));
    }
    let scale = 1.0 / (partition.num_nodes() * xi) as f64;
    let (mut lhs, mut rhs) = (0.0, 0.0);
    let count = for_each_outcome(partition, tau, |z| {
        let theta = z.iter().filter(|&&i| member[i]).count();
        lhs += z
            .iter()
            .filter(|&&i| member[i])
            .map(|&i| kappa(theta, i))
            .sum::<f64>();
        rhs += theta as f64 * scale * group.iter().map(|&i| kappa(theta, i)).sum::<f64>();
    })?;
    Ok(IdentityCheck {
        lhs: lhs / count as f64,
        rhs: rhs / count as f64,
        xi,
    })
}

/// `f_J(x) = 1/2 ||B x_J - b||^2` for one group `J` of scalar blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTerm {
    pub blocks: Vec<usize>,
    /// Row-major, `rows x blocks.len()`.
    pub matrix: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl QuadraticTerm {
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        self.matrix
            .iter()
            .zip(&self.target)
            .map(|(row, b)| row.iter().zip(&self.blocks).map(|(a, &i)| a * x[i]).sum::<f64>() - b)
            .collect()
    }
}

/// Sum of convex quadratics over scalar blocks; a partially separable test
/// objective with exact block Lipschitz constants.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    n: usize,
    terms: Vec<QuadraticTerm>,
}

impl QuadraticObjective {
    pub fn new(n: usize, terms: Vec<QuadraticTerm>) -> Result<Self> {
        for t in &terms {
            if t.blocks.is_empty() || t.blocks.iter().any(|&i| i >= n) {
                return Err(Error::Parameter("quadratic term has invalid blocks".into()));
            }
            if t.matrix.len() != t.target.len() || t.matrix.iter().any(|r| r.len() != t.blocks.len()) {
                return Err(Error::Parameter("quadratic term has inconsistent shape".into()));
            }
        }
        Ok(Self { n, terms })
    }

    /// Random objective whose groups have at most `max_group` blocks. Every
    /// block is covered by at least one term so all `L_i > 0`.
    pub fn random(n: usize, extra_terms: usize, max_group: usize, rng: &mut impl Rng) -> Self {
        let max_group = max_group.clamp(1, n);
        let mut terms = Vec::new();
        let make = |blocks: Vec<usize>, rng: &mut dyn rand::RngCore| {
            let rows = rng.random_range(1..=3);
            let matrix = (0..rows)
                .map(|_| blocks.iter().map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let target = (0..rows).map(|_| rng.random_range(-1.0..1.0)).collect();
            QuadraticTerm {
                blocks,
                matrix,
                target,
            }
        };
        for i in 0..n {
            terms.push(make(vec![i], rng));
        }
        for _ in 0..extra_terms {
            let size = rng.random_range(1..=max_group);
            let blocks = rand::seq::index::sample(rng, n, size).into_vec();
            terms.push(make(blocks, rng));
        }
        Self { n, terms }
    }

    /// Terms `1/2 (a_i x_i - b_i)^2`, one per block.
    pub fn separable(a: &[f64], b: &[f64]) -> Self {
        let terms = a
            .iter()
            .zip(b)
            .enumerate()
            .map(|(i, (&ai, &bi))| QuadraticTerm {
                blocks: vec![i],
                matrix: vec![vec![ai]],
                target: vec![bi],
            })
            .collect();
        Self { n: a.len(), terms }
    }

    pub fn num_blocks(&self) -> usize {
        self.n
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| 0.5 * t.residual(x).iter().map(|r| r * r).sum::<f64>())
            .sum()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for t in &self.terms {
            let r = t.residual(x);
            for (row, ri) in t.matrix.iter().zip(&r) {
                for (a, &i) in row.iter().zip(&t.blocks) {
                    g[i] += a * ri;
                }
            }
        }
        g
    }

    /// `L_i = sum_J ||column of B_J for block i||^2`.
    pub fn lipschitz(&self) -> Vec<f64> {
        let mut l = vec![0.0; self.n];
        for t in &self.terms {
            for row in &t.matrix {
                for (a, &i) in row.iter().zip(&t.blocks) {
                    l[i] += a * a;
                }
            }
        }
        l
    }

    pub fn structure(&self) -> Result<SeparabilityStructure> {
        SeparabilityStructure::new(self.n, self.terms.iter().map(|t| t.blocks.clone()).collect())
    }
}

/// How the expectation on the left of the ESO inequality is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EsoMode {
    Exhaustive,
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EsoReport {
    /// `E[f(x + h_[Z])]`.
    pub lhs: f64,
    /// `f(x) + E|Z|/n (<grad f(x), h> + beta/2 ||h||_w^2)`.
    pub rhs: f64,
    /// Standard error of `lhs`; zero in exhaustive mode.
    pub std_err: f64,
    pub beta: f64,
    pub holds: bool,
}

/// Checks the ESO inequality at `(x, h)` with `beta` from the closed form
/// and `w = L`.
pub fn verify_eso(
    objective: &QuadraticObjective,
    partition: &Partition,
    tau: usize,
    x: &[f64],
    h: &[f64],
    mode: EsoMode,
) -> Result<EsoReport> {
    let n = objective.num_blocks();
    if partition.num_blocks() != n || x.len() != n || h.len() != n {
        return Err(Error::Parameter("dimension mismatch".into()));
    }
    let layout = BlockLayout::scalar(n)?;
    let structure = objective.structure()?;
    let xi = compute_xi(&structure, partition);
    let beta = compute_beta(xi, tau, partition.group_size(), partition.num_nodes())?;
    let w = WeightVector::new(objective.lipschitz())?;

    let fx = objective.value(x);
    let grad = objective.gradient(x);
    let linear: f64 = grad.iter().zip(h).map(|(g, v)| g * v).sum();
    let expected_size = (partition.num_nodes() * tau) as f64;
    let rhs = fx + expected_size / n as f64 * (linear + 0.5 * beta * weighted_norm_squared(h, &w, &layout));

    let eval = |z: &[usize]| {
        let step = project_onto_sampling(h, z.iter().copied(), &layout);
        let point: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
        objective.value(&point)
    };

    let (lhs, std_err) = match mode {
        EsoMode::Exhaustive => {
            let mut total = 0.0;
            let count = for_each_outcome(partition, tau, |z| total += eval(z))?;
            (total / count as f64, 0.0)
        }
        EsoMode::MonteCarlo { trials, seed } => {
            if trials < 2 {
                return Err(Error::Parameter("Monte-Carlo mode needs at least 2 trials".into()));
            }
            let mut sampler = DistributedSampler::new(partition, tau, seed)?;
            let (mut sum, mut sum_sq) = (0.0, 0.0);
            for _ in 0..trials {
                let z = sampler.sample();
                let buf: Vec<usize> = z.blocks().collect();
                let v = eval(&buf);
                sum += v;
                sum_sq += v * v;
            }
            let t = trials as f64;
            let mean = sum / t;
            let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
            (mean, (var / t).sqrt())
        }
    };
    let tol = (3.0 * std_err).max(1e-9 * rhs.abs().max(1.0));
    Ok(EsoReport {
        lhs,
        rhs,
        std_err,
        beta,
        holds: lhs <= rhs + tol,
    })
}
