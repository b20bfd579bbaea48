//! Block label assignments for rows or columns of a bipartite network.

use crate::error::{Error, Result};

/// Hard clustering: one block label per node, labels in `0..n_blocks`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clustering {
    labels: Vec<usize>,
    n_blocks: usize,
}

impl Clustering {
    pub fn new(labels: Vec<usize>, n_blocks: usize) -> Result<Self> {
        if n_blocks == 0 {
            return Err(Error::InvalidArgument("n_blocks must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_blocks) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 0..{n_blocks}"
            )));
        }
        Ok(Self { labels, n_blocks })
    }

    /// Every node in the single block 0.
    pub fn trivial(n: usize) -> Self {
        Self { labels: vec![0; n], n_blocks: 1 }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn label(&self, node: usize) -> usize {
        self.labels[node]
    }

    /// Number of nodes per block.
    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_blocks];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Indices of blocks with no member.
    pub fn empty_blocks(&self) -> Vec<usize> {
        self.block_sizes()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0)
            .map(|(k, _)| k)
            .collect()
    }

    /// Apply a block permutation: `perm[old] = new`.
    pub fn relabel(&self, perm: &[usize]) -> Clustering {
        debug_assert_eq!(perm.len(), self.n_blocks);
        Clustering {
            labels: self.labels.iter().map(|&l| perm[l]).collect(),
            n_blocks: self.n_blocks,
        }
    }
}

/// Soft assignment used during variational inference: per-node probability
/// vectors over blocks, each summing to 1.
#[derive(Clone, Debug)]
pub struct SoftAssignment {
    n_nodes: usize,
    n_blocks: usize,
    probs: Vec<f64>, // row-major n_nodes x n_blocks
}

impl SoftAssignment {
    /// One-hot encoding of a hard clustering, floored and renormalized so
    /// every entry stays positive.
    pub fn from_hard(c: &Clustering, floor: f64) -> Self {
        let mut s = Self {
            n_nodes: c.len(),
            n_blocks: c.n_blocks(),
            probs: vec![floor; c.len() * c.n_blocks()],
        };
        for (i, &l) in c.labels().iter().enumerate() {
            s.probs[i * s.n_blocks + l] = 1.0;
        }
        s.normalize(floor);
        s
    }

    pub fn uniform(n_nodes: usize, n_blocks: usize) -> Self {
        Self {
            n_nodes,
            n_blocks,
            probs: vec![1.0 / n_blocks as f64; n_nodes * n_blocks],
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    #[inline]
    pub fn get(&self, node: usize, block: usize) -> f64 {
        self.probs[node * self.n_blocks + block]
    }

    #[inline]
    pub fn set(&mut self, node: usize, block: usize, p: f64) {
        self.probs[node * self.n_blocks + block] = p;
    }

    pub fn row(&self, node: usize) -> &[f64] {
        &self.probs[node * self.n_blocks..(node + 1) * self.n_blocks]
    }

    /// Floor every entry and rescale each node's vector to sum to 1.
    pub fn normalize(&mut self, floor: f64) {
        for i in 0..self.n_nodes {
            let row = &mut self.probs[i * self.n_blocks..(i + 1) * self.n_blocks];
            for p in row.iter_mut() {
                if *p < floor {
                    *p = floor;
                }
            }
            let sum: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
    }

    /// Mean probability per block over nodes.
    pub fn block_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n_blocks];
        for i in 0..self.n_nodes {
            for k in 0..self.n_blocks {
                means[k] += self.get(i, k);
            }
        }
        for m in &mut means {
            *m /= self.n_nodes as f64;
        }
        means
    }

    /// Hard clustering by maximal probability.
    pub fn harden(&self) -> Clustering {
        let labels = (0..self.n_nodes)
            .map(|i| {
                let row = self.row(i);
                row.iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .map(|(k, _)| k)
                    .unwrap()
            })
            .collect();
        Clustering { labels, n_blocks: self.n_blocks }
    }

    /// Max deviation of node sums from 1.
    pub fn normalization_error(&self) -> f64 {
        (0..self.n_nodes)
            .map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
