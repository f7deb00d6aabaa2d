//! Step-size parameters of the expected separable overapproximation for
//! `(C, tau)`-distributed samplings, and the complexity bounds built on them.
//!
//! Everything here is a closed-form evaluator. The empirical checks of the
//! inequality itself live in [`verify`].

pub mod verify;

use serde::{Deserialize, Serialize};

use crate::block::{compute_xi, Partition, SeparabilityStructure, WeightVector};
use crate::error::{Error, Result};

fn check_sampling_params(xi: usize, tau: usize, s: usize, nodes: usize) -> Result<()> {
    if nodes == 0 {
        return Err(Error::Parameter("node count must be positive".into()));
    }
    if s == 0 || tau == 0 || tau > s {
        return Err(Error::Parameter(format!("tau = {tau} must lie in [1, s = {s}]")));
    }
    if xi == 0 || xi > s {
        return Err(Error::Parameter(format!("xi = {xi} must lie in [1, s = {s}]")));
    }
    Ok(())
}

/// `beta = 1 + (xi-1)(tau-1)/max(1, s-1) + (C-1) xi tau / s`.
pub fn compute_beta(xi: usize, tau: usize, s: usize, nodes: usize) -> Result<f64> {
    check_sampling_params(xi, tau, s, nodes)?;
    let (xi, tau, s, c) = (xi as f64, tau as f64, s as f64, nodes as f64);
    Ok(1.0 + (xi - 1.0) * (tau - 1.0) / (s - 1.0).max(1.0) + (c - 1.0) * xi * tau / s)
}

/// Second moment of `theta = |Z ∩ J|` when every node owns `xi` blocks of `J`.
pub fn expected_theta_squared(xi: usize, tau: usize, s: usize, nodes: usize) -> Result<f64> {
    check_sampling_params(xi, tau, s, nodes)?;
    let (xi, tau, s, c) = (xi as f64, tau as f64, s as f64, nodes as f64);
    let mean = xi * tau / s;
    Ok(c * mean * (1.0 + (xi - 1.0) * (tau - 1.0) / (s - 1.0).max(1.0)) + c * (c - 1.0) * mean * mean)
}

/// Hypergeometric law of `|Z^(c) ∩ J|` on one node: entry `k` is the
/// probability of drawing `k` of the `xi` marked blocks among `tau` of `s`.
///
/// The table has length `min(xi, tau) + 1`.
pub fn theta_pmf_per_node(xi: usize, tau: usize, s: usize) -> Result<Vec<f64>> {
    check_sampling_params(xi, tau, s, 1)?;
    let kmax = xi.min(tau);
    let kmin = tau.saturating_sub(s - xi);
    // ratio p(k+1)/p(k) = (xi-k)(tau-k) / ((k+1)(s-xi-tau+k+1))
    let mut pmf = vec![0.0; kmax + 1];
    pmf[kmin] = 1.0;
    for k in kmin..kmax {
        let num = ((xi - k) * (tau - k)) as f64;
        let den = ((k + 1) * (k + 1 + s - xi - tau)) as f64;
        pmf[k + 1] = pmf[k] * num / den;
    }
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    Ok(pmf)
}

/// Right-hand side of the sublinear bound
/// `n/(n + C tau k) * (beta/2 * ||x0 - x*||_w^2 + F(x0) - F*)`.
pub fn theorem4_bound(
    k: u64,
    n: usize,
    nodes: usize,
    tau: usize,
    beta: f64,
    initial_distance: f64,
    initial_gap: f64,
) -> f64 {
    let n = n as f64;
    let prefactor = n / (n + (nodes * tau) as f64 * k as f64);
    prefactor * (0.5 * beta * initial_distance + initial_gap)
}

/// Inputs of the high-probability iteration bound for strongly convex `F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceBudget {
    pub mu_f: f64,
    pub mu_omega: f64,
    pub epsilon: f64,
    pub rho: f64,
    /// `F(x0) - F*`.
    pub initial_gap: f64,
    /// `||x0 - x*||_w^2`.
    pub initial_distance: f64,
}

impl ConvergenceBudget {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Parameter(format!("rho = {} not in (0, 1)", self.rho)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Parameter("epsilon must be positive".into()));
        }
        if self.epsilon >= self.initial_gap {
            return Err(Error::Parameter(format!(
                "epsilon = {} is not below the initial gap {}",
                self.epsilon, self.initial_gap
            )));
        }
        if self.mu_f < 0.0 || self.mu_omega < 0.0 {
            return Err(Error::Parameter("strong convexity constants must be nonnegative".into()));
        }
        if self.mu_f + self.mu_omega <= 0.0 {
            return Err(Error::StrongConvexity);
        }
        Ok(())
    }
}

/// Unrounded iteration count
/// `n/(C tau) * (beta + mu_Omega)/(mu_f + mu_Omega) * log(gap / (eps rho))`.
pub fn theorem5_iterations_real(
    budget: &ConvergenceBudget,
    n: usize,
    nodes: usize,
    tau: usize,
    beta: f64,
) -> Result<f64> {
    budget.validate()?;
    let ratio = (beta + budget.mu_omega) / (budget.mu_f + budget.mu_omega);
    let log_term = (budget.initial_gap / (budget.epsilon * budget.rho)).ln().max(0.0);
    Ok(n as f64 / (nodes * tau) as f64 * ratio * log_term)
}

/// Smallest integer iteration count satisfying the strongly convex bound.
pub fn theorem5_iterations(
    budget: &ConvergenceBudget,
    n: usize,
    nodes: usize,
    tau: usize,
    beta: f64,
) -> Result<u64> {
    Ok(theorem5_iterations_real(budget, n, nodes, tau, beta)?.ceil() as u64)
}

/// `C tau / beta`; higher is better.
pub fn speedup_factor(xi: usize, tau: usize, s: usize, nodes: usize) -> Result<f64> {
    Ok((nodes * tau) as f64 / compute_beta(xi, tau, s, nodes)?)
}

/// `1/(C tau) + eta (1 - 1/(C tau))`, an upper bound on `beta / (C tau)` when `s >= 2`.
pub fn eta_bound(eta: f64, nodes: usize, tau: usize) -> f64 {
    let ct = (nodes * tau) as f64;
    1.0 / ct + eta * (1.0 - 1.0 / ct)
}

/// `beta` implied by [`eta_bound`]: `1 + eta (C tau - 1)`.
pub fn eta_surrogate_beta(eta: f64, nodes: usize, tau: usize) -> f64 {
    1.0 + eta * ((nodes * tau) as f64 - 1.0)
}

/// Points `(C tau, C tau / beta)` of the speed-up curve for density `eta`,
/// with `beta = 1 + eta (C tau - 1)`.
pub fn speedup_curve(eta: f64, ctau: impl IntoIterator<Item = usize>) -> Vec<(usize, f64)> {
    ctau.into_iter()
        .map(|ct| (ct, ct as f64 / eta_surrogate_beta(eta, ct, 1)))
        .collect()
}

/// Bounds on the iteration-count ratio between `C` nodes updating `tau`
/// blocks each and one node updating `C tau` blocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionCost {
    pub lower: f64,
    pub upper: f64,
    /// `beta` of the single-node configuration.
    pub beta_single: f64,
}

pub fn cost_of_distribution_bounds(
    n: usize,
    omega: usize,
    nodes: usize,
    tau: usize,
) -> Result<DistributionCost> {
    if nodes == 0 || !n.is_multiple_of(nodes) {
        return Err(Error::Parameter(format!("{nodes} nodes do not divide n = {n}")));
    }
    let s = n / nodes;
    if s < 2 {
        return Err(Error::Parameter(format!("s = n/C = {s} must be at least 2")));
    }
    if omega == 0 || omega > n {
        return Err(Error::Parameter(format!("omega = {omega} must lie in [1, {n}]")));
    }
    if tau == 0 || tau > s {
        return Err(Error::Parameter(format!("tau = {tau} must lie in [1, {s}]")));
    }
    let (n, w, c, t) = (n as f64, omega as f64, nodes as f64, tau as f64);
    let beta_single = 1.0 + (w - 1.0) * (c * t - 1.0) / (n - 1.0);
    let lower = (1.0 + (w - c) * (t - 1.0) / (n - c) + (c - 1.0) * w * t / n) / beta_single;
    let upper = (1.0 + (w - 1.0) * (c * t - c) / (n - c) + (c - 1.0) * w * c * t / n) / beta_single;
    Ok(DistributionCost {
        lower,
        upper,
        beta_single,
    })
}

/// Per-iteration virtual times and the work-to-communication ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// Time for one block update.
    pub t1: f64,
    /// Time for one residual exchange.
    pub t2: f64,
    /// Time for one point-to-point message.
    pub t_p2p: f64,
}

impl CostModel {
    pub fn new(t1: f64, t2: f64, t_p2p: f64) -> Result<Self> {
        for (name, v) in [("t1", t1), ("t2", t2), ("tp2p", t_p2p)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self { t1, t2, t_p2p })
    }

    pub fn r12(&self) -> f64 {
        self.t1 / self.t2
    }

    /// Reduce-all time, `ceil(log2 C) * t_p2p`.
    pub fn t_reduce_all(&self, nodes: usize) -> f64 {
        ceil_log2(nodes) as f64 * self.t_p2p
    }
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            t1: 1.0,
            t2: 10.0,
            t_p2p: 10.0,
        }
    }
}

pub(crate) fn ceil_log2(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Run-time model `(s/(xi C) + tau)(r12 + 1/tau)`, up to a constant factor.
pub fn time_model(tau: f64, s: usize, xi: usize, nodes: usize, r12: f64) -> f64 {
    (s as f64 / (xi * nodes) as f64 + tau) * (r12 + 1.0 / tau)
}

/// Real-valued minimiser `sqrt(s / (r12 xi C))` of [`time_model`].
pub fn optimal_tau(s: usize, xi: usize, nodes: usize, r12: f64) -> Result<f64> {
    if s == 0 || xi == 0 || nodes == 0 || !(r12 > 0.0) {
        return Err(Error::Parameter("optimal tau needs positive inputs".into()));
    }
    Ok((s as f64 / (r12 * (xi * nodes) as f64)).sqrt())
}

/// `(beta, w)` together with the scalars that determine them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EsoParameters {
    pub beta: f64,
    pub weights: WeightVector,
    pub nodes: usize,
    pub tau: usize,
    pub s: usize,
    pub xi: usize,
    pub omega: usize,
    pub eta: f64,
}

impl EsoParameters {
    pub fn new(
        structure: &SeparabilityStructure,
        partition: &Partition,
        tau: usize,
        weights: WeightVector,
    ) -> Result<Self> {
        let xi = compute_xi(structure, partition);
        let s = partition.group_size();
        let nodes = partition.num_nodes();
        let beta = compute_beta(xi, tau, s, nodes)?;
        Ok(Self {
            beta,
            weights,
            nodes,
            tau,
            s,
            xi,
            omega: structure.omega(),
            eta: xi as f64 / s as f64,
        })
    }
}
