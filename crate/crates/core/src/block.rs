//! Block structure of the variable space and its distribution over nodes.
//!
//! Blocks are indexed from zero. A [`Partition`] assigns every block to exactly
//! one of `C` nodes, and a [`DistributedSampler`] draws, for every node
//! independently, a uniformly random subset of `tau` of its blocks.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decomposition of `R^N` into `n` consecutive coordinate blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockLayout {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Layout("at least one block is required".into()));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Layout(format!("block {i} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// `n` blocks of size one.
    pub fn scalar(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `N`.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn block_size(&self, i: usize) -> usize {
        self.sizes[i]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Coordinate range of block `i`.
    pub fn range(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Block that contains coordinate `j`.
    pub fn block_of(&self, j: usize) -> Option<usize> {
        if j >= self.dim() {
            return None;
        }
        // offsets is strictly increasing
        match self.offsets.binary_search(&j) {
            Ok(i) => Some(i),
            Err(i) => Some(i - 1),
        }
    }
}

/// How blocks are assigned to nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionScheme {
    /// Node `c` owns blocks `c*s .. (c+1)*s`.
    #[default]
    Contiguous,
    /// Block `i` goes to node `i mod C`.
    Strided,
}

/// Balanced split of the `n` blocks into `C` disjoint groups of size `s = n / C`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    groups: Vec<Vec<usize>>,
    owner: Vec<usize>,
    group_size: usize,
}

impl Partition {
    pub fn balanced(n: usize, nodes: usize, scheme: PartitionScheme) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::Partition("node count must be positive".into()));
        }
        if n == 0 || !n.is_multiple_of(nodes) {
            return Err(Error::Partition(format!(
                "{nodes} nodes do not divide {n} blocks"
            )));
        }
        let s = n / nodes;
        let groups: Vec<Vec<usize>> = match scheme {
            PartitionScheme::Contiguous => (0..nodes).map(|c| (c * s..(c + 1) * s).collect()).collect(),
            PartitionScheme::Strided => (0..nodes)
                .map(|c| (0..s).map(|k| c + k * nodes).collect())
                .collect(),
        };
        Self::from_groups(n, groups)
    }

    /// Builds a partition from explicit groups, validating balance and disjointness.
    pub fn from_groups(n: usize, mut groups: Vec<Vec<usize>>) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Partition("no groups".into()));
        }
        let s = groups[0].len();
        let mut owner = vec![usize::MAX; n];
        for (c, g) in groups.iter_mut().enumerate() {
            if g.len() != s || s == 0 {
                return Err(Error::Partition(format!(
                    "group {c} has {} blocks, expected {s}",
                    g.len()
                )));
            }
            g.sort_unstable();
            for &i in g.iter() {
                if i >= n {
                    return Err(Error::Partition(format!("block {i} out of range")));
                }
                if owner[i] != usize::MAX {
                    return Err(Error::Partition(format!("block {i} assigned twice")));
                }
                owner[i] = c;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(Error::Partition("groups do not cover every block".into()));
        }
        Ok(Self {
            groups,
            owner,
            group_size: s,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.groups.len()
    }

    pub fn num_blocks(&self) -> usize {
        self.owner.len()
    }

    /// `s`, the number of blocks per node.
    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn group(&self, c: usize) -> &[usize] {
        &self.groups[c]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn owner(&self, block: usize) -> usize {
        self.owner[block]
    }
}

/// One draw of a `(C, tau)`-distributed sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistributedSampling {
    per_node: Vec<Vec<usize>>,
    tau: usize,
}

impl DistributedSampling {
    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Blocks sampled by node `c`, in increasing order.
    pub fn node(&self, c: usize) -> &[usize] {
        &self.per_node[c]
    }

    pub fn per_node(&self) -> &[Vec<usize>] {
        &self.per_node
    }

    /// Union over nodes, in node order.
    pub fn blocks(&self) -> impl Iterator<Item = usize> + '_ {
        self.per_node.iter().flatten().copied()
    }

    pub fn len(&self) -> usize {
        self.per_node.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Random stream for node `node`, derived from the master seed.
pub fn node_stream(master_seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(node as u64);
    rng
}

/// Per-node samplers with one dedicated random stream each.
#[derive(Debug, Clone)]
pub struct DistributedSampler {
    streams: Vec<ChaCha8Rng>,
    scratch: Vec<Vec<usize>>,
    tau: usize,
}

impl DistributedSampler {
    pub fn new(partition: &Partition, tau: usize, master_seed: u64) -> Result<Self> {
        let s = partition.group_size();
        if tau == 0 || tau > s {
            return Err(Error::Parameter(format!(
                "tau = {tau} must lie in [1, {s}]"
            )));
        }
        Ok(Self {
            streams: (0..partition.num_nodes())
                .map(|c| node_stream(master_seed, c))
                .collect(),
            scratch: partition.groups().to_vec(),
            tau,
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Draws the per-node subsets for one iteration.
    pub fn sample(&mut self) -> DistributedSampling {
        let tau = self.tau;
        let per_node = self
            .scratch
            .iter_mut()
            .zip(self.streams.iter_mut())
            .map(|(group, rng)| {
                let (chosen, _) = group.partial_shuffle(rng, tau);
                let mut z = chosen.to_vec();
                z.sort_unstable();
                z
            })
            .collect();
        DistributedSampling { per_node, tau }
    }
}

/// Copy of `x` that keeps the blocks in `blocks` and zeroes the rest.
pub fn project_onto_sampling(
    x: &[f64],
    blocks: impl IntoIterator<Item = usize>,
    layout: &BlockLayout,
) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in blocks {
        let r = layout.range(i);
        out[r.clone()].copy_from_slice(&x[r]);
    }
    out
}

/// Strictly positive block weights `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(i) = w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Parameter(format!(
                "weight {i} = {} is not strictly positive",
                w[i]
            )));
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `sum_i w_i ||x^(i)||_2^2`.
pub fn weighted_norm_squared(x: &[f64], w: &WeightVector, layout: &BlockLayout) -> f64 {
    w.as_slice()
        .iter()
        .enumerate()
        .map(|(i, wi)| wi * x[layout.range(i)].iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// The collection of block groups `J` over which `f` splits as `sum_J f_J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparabilityStructure {
    groups: Vec<Vec<usize>>,
    omega: usize,
}

impl SeparabilityStructure {
    /// Groups are sorted and deduplicated; empty groups are rejected.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut out = Vec::with_capacity(groups.len());
        for mut g in groups {
            g.sort_unstable();
            g.dedup();
            if g.is_empty() {
                return Err(Error::Parameter("separability group is empty".into()));
            }
            if let Some(&i) = g.iter().find(|&&i| i >= n) {
                return Err(Error::Parameter(format!("block {i} out of range")));
            }
            out.push(g);
        }
        if out.is_empty() {
            return Err(Error::Parameter("no separability groups".into()));
        }
        let omega = out.iter().map(Vec::len).max().unwrap();
        Ok(Self { groups: out, omega })
    }

    /// Every block in its own group (`omega = 1`).
    pub fn fully_separable(n: usize) -> Result<Self> {
        Self::new(n, (0..n).map(|i| vec![i]).collect())
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Degree of separability.
    pub fn omega(&self) -> usize {
        self.omega
    }
}

/// `xi = max_{c, J} |P^(c) ∩ J|`.
pub fn compute_xi(structure: &SeparabilityStructure, partition: &Partition) -> usize {
    let mut counts = vec![0usize; partition.num_nodes()];
    let mut xi = 0;
    for group in structure.groups() {
        counts.iter_mut().for_each(|v| *v = 0);
        for &i in group {
            let c = partition.owner(i);
            counts[c] += 1;
            xi = xi.max(counts[c]);
        }
    }
    xi
}
