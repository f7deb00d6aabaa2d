#![allow(dead_code)]

use dbcd_core::{LassoProblem, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sparse LASSO with entries uniform on [-1, 1]; every column gets at least one nonzero.
pub fn random_lasso(m: usize, n: usize, density: f64, lambda: f64, seed: u64) -> LassoProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::new();
    for c in 0..n {
        let forced = rng.random_range(0..m);
        for r in 0..m {
            if r == forced || rng.random::<f64>() < density {
                let v: f64 = rng.random_range(-1.0..1.0);
                triplets.push((r, c, if v == 0.0 { 0.5 } else { v }));
            }
        }
    }
    let a = SparseMatrix::from_triplets(m, n, triplets).unwrap();
    let y = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    LassoProblem::new(a, y, lambda).unwrap()
}

fn lasso_value(p: &LassoProblem, x: &[f64]) -> f64 {
    let r: Vec<f64> = p.matrix().mul_vec(x).iter().zip(p.targets()).map(|(a, y)| a - y).collect();
    0.5 * r.iter().map(|v| v * v).sum::<f64>() + p.lambda() * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Serial cyclic coordinate descent with exact coordinate minimisation, run
/// until a full sweep moves no coordinate by more than `tol`.
pub fn reference_lasso(p: &LassoProblem, max_sweeps: usize, tol: f64) -> (Vec<f64>, f64) {
    let a = p.matrix();
    let n = a.cols();
    let mut x = vec![0.0; n];
    let mut r: Vec<f64> = p.targets().iter().map(|y| -y).collect();
    for sweep in 0..max_sweeps {
        let mut biggest: f64 = 0.0;
        for i in 0..n {
            let (rows, vals) = a.column(i);
            let l: f64 = vals.iter().map(|v| v * v).sum();
            if l == 0.0 {
                continue;
            }
            let b: f64 = rows.iter().zip(vals).map(|(&j, &v)| v * r[j]).sum();
            let z = x[i] - b / l;
            let new = z.signum() * (z.abs() - p.lambda() / l).max(0.0);
            let delta = new - x[i];
            if delta != 0.0 {
                rows.iter().zip(vals).for_each(|(&j, &v)| r[j] += v * delta);
                x[i] = new;
            }
            biggest = biggest.max(delta.abs());
        }
        if sweep % 50 == 0 {
            r = a.mul_vec(&x).iter().zip(p.targets()).map(|(v, y)| v - y).collect();
        }
        if biggest < tol {
            break;
        }
    }
    let f = lasso_value(p, &x);
    (x, f)
}

/// All `tau`-subsets of `0..s` as bit masks.
pub fn subsets(s: usize, tau: usize) -> Vec<u32> {
    (0u32..1 << s).filter(|m| m.count_ones() as usize == tau).collect()
}

/// Every outcome of a contiguous `(C, tau)` sampling over `C * s` blocks, as
/// one mask per node.
pub fn outcomes(nodes: usize, s: usize, tau: usize) -> Vec<Vec<u32>> {
    let subs = subsets(s, tau);
    let mut all = vec![Vec::new()];
    for _ in 0..nodes {
        all = all
            .into_iter()
            .flat_map(|prefix: Vec<u32>| {
                subs.iter().map(move |&m| {
                    let mut p = prefix.clone();
                    p.push(m);
                    p
                })
            })
            .collect();
    }
    all
}

/// Blocks selected by a per-node mask outcome.
pub fn outcome_blocks(outcome: &[u32], s: usize) -> Vec<usize> {
    outcome
        .iter()
        .enumerate()
        .flat_map(|(c, &m)| (0..s).filter(move |b| m >> b & 1 == 1).map(move |b| c * s + b))
        .collect()
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(1e-300)
}
