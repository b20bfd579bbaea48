//! Label alignment and averaging of stochastic EM snapshots.
//!
//! Block labels switch freely between iterations of a stochastic chain;
//! averaging raw snapshots would smear unrelated blocks together. Before a
//! snapshot enters the running mean its blocks are matched to the previous
//! iteration's blocks by maximal label overlap.

use crate::clustering::Clustering;
use crate::params::CoopParams;

/// Node-count overlap between the blocks of two clusterings of the same
/// nodes: `confusion[a][b]` counts nodes with label `a` in `current` and
/// label `b` in `reference`.
pub(crate) fn confusion(current: &Clustering, reference: &Clustering) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0usize; reference.n_blocks()]; current.n_blocks()];
    for i in 0..current.len() {
        table[current.label(i)][reference.label(i)] += 1;
    }
    table
}

/// Permutation `perm[current_block] = reference_block` maximizing the total
/// overlap. Exact by enumeration for up to 8 blocks, greedy beyond.
pub fn best_match_permutation(confusion: &[Vec<usize>]) -> Vec<usize> {
    let q = confusion.len();
    debug_assert!(confusion.iter().all(|row| row.len() == q));
    if q <= 8 {
        exact_assignment(confusion)
    } else {
        greedy_assignment(confusion)
    }
}

fn exact_assignment(confusion: &[Vec<usize>]) -> Vec<usize> {
    let q = confusion.len();
    let mut best_perm: Vec<usize> = (0..q).collect();
    let mut best_total = total_overlap(confusion, &best_perm);
    let mut perm: Vec<usize> = Vec::with_capacity(q);
    let mut used = vec![false; q];
    fn recurse(
        confusion: &[Vec<usize>],
        perm: &mut Vec<usize>,
        used: &mut Vec<bool>,
        acc: usize,
        best_total: &mut usize,
        best_perm: &mut Vec<usize>,
    ) {
        let k = perm.len();
        if k == confusion.len() {
            if acc > *best_total {
                *best_total = acc;
                best_perm.clone_from(perm);
            }
            return;
        }
        for target in 0..confusion.len() {
            if !used[target] {
                used[target] = true;
                perm.push(target);
                recurse(confusion, perm, used, acc + confusion[k][target], best_total, best_perm);
                perm.pop();
                used[target] = false;
            }
        }
    }
    recurse(confusion, &mut perm, &mut used, 0, &mut best_total, &mut best_perm);
    best_perm
}

fn greedy_assignment(confusion: &[Vec<usize>]) -> Vec<usize> {
    let q = confusion.len();
    let mut perm = vec![usize::MAX; q];
    let mut taken = vec![false; q];
    let mut entries: Vec<(usize, usize, usize)> = (0..q)
        .flat_map(|k| (0..q).map(move |l| (k, l, 0)))
        .map(|(k, l, _)| (k, l, confusion[k][l]))
        .collect();
    entries.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    for (k, l, _) in entries {
        if perm[k] == usize::MAX && !taken[l] {
            perm[k] = l;
            taken[l] = true;
        }
    }
    for k in 0..q {
        if perm[k] == usize::MAX {
            perm[k] = taken.iter().position(|&t| !t).expect("free slot");
            taken[perm[k]] = true;
        }
    }
    perm
}

fn total_overlap(confusion: &[Vec<usize>], perm: &[usize]) -> usize {
    perm.iter().enumerate().map(|(k, &l)| confusion[k][l]).sum()
}

/// Permute the block dimensions of a parameter vector:
/// `perm1[old_row_block] = new_row_block`, same for columns.
pub fn permute_params(params: &CoopParams, perm1: &[usize], perm2: &[usize]) -> CoopParams {
    let q1 = params.q1();
    let q2 = params.q2();
    let mut alpha = vec![0.0; q1];
    let mut beta = vec![0.0; q2];
    let mut pi = vec![vec![0.0; q2]; q1];
    for k in 0..q1 {
        alpha[perm1[k]] = params.alpha[k];
    }
    for l in 0..q2 {
        beta[perm2[l]] = params.beta[l];
    }
    for k in 0..q1 {
        for l in 0..q2 {
            pi[perm1[k]][perm2[l]] = params.pi[k][l];
        }
    }
    CoopParams {
        alpha,
        beta,
        pi,
        lambda: params.lambda.clone(),
        mu: params.mu.clone(),
        g: params.g,
    }
}

/// Running mean of label-aligned parameter snapshots plus majority votes
/// for the final hard clustering.
pub struct AlignedAverage {
    reference_z1: Option<Clustering>,
    reference_z2: Option<Clustering>,
    sum: Vec<f64>,
    count: usize,
    prev_mean: Option<Vec<f64>>,
    row_votes: Vec<Vec<usize>>,
    col_votes: Vec<Vec<usize>>,
}

impl AlignedAverage {
    pub fn new(n1: usize, n2: usize, q1: usize, q2: usize) -> Self {
        Self {
            reference_z1: None,
            reference_z2: None,
            sum: Vec::new(),
            count: 0,
            prev_mean: None,
            row_votes: vec![vec![0; q1]; n1],
            col_votes: vec![vec![0; q2]; n2],
        }
    }

    /// Align a snapshot to the previous one, fold it into the mean and the
    /// majority votes, and return the L2 movement of the running mean
    /// (infinite for the first snapshot).
    pub fn add(&mut self, z1: &Clustering, z2: &Clustering, params: &CoopParams) -> f64 {
        let (aligned_z1, aligned_z2, aligned_params) = match (&self.reference_z1, &self.reference_z2) {
            (Some(r1), Some(r2)) => {
                let perm1 = best_match_permutation(&confusion(z1, r1));
                let perm2 = best_match_permutation(&confusion(z2, r2));
                (
                    z1.relabel(&perm1),
                    z2.relabel(&perm2),
                    permute_params(params, &perm1, &perm2),
                )
            }
            _ => (z1.clone(), z2.clone(), params.clone()),
        };

        for (i, &l) in aligned_z1.labels().iter().enumerate() {
            self.row_votes[i][l] += 1;
        }
        for (j, &l) in aligned_z2.labels().iter().enumerate() {
            self.col_votes[j][l] += 1;
        }

        let theta = aligned_params.to_vector();
        if self.sum.is_empty() {
            self.sum = vec![0.0; theta.len()];
        }
        for (s, t) in self.sum.iter_mut().zip(&theta) {
            *s += t;
        }
        self.count += 1;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.count as f64).collect();
        let delta = match &self.prev_mean {
            Some(prev) => mean
                .iter()
                .zip(prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            None => f64::INFINITY,
        };
        self.prev_mean = Some(mean);
        self.reference_z1 = Some(aligned_z1);
        self.reference_z2 = Some(aligned_z2);
        delta
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Averaged parameters with the effort normalization restored.
    pub fn mean_params(&self, q1: usize, q2: usize, n1: usize, n2: usize) -> CoopParams {
        let mean: Vec<f64> = self.sum.iter().map(|s| s / self.count as f64).collect();
        let mut params = CoopParams::from_vector(&mean, q1, q2, n1, n2);
        params.renormalize_efforts();
        params
    }

    /// Hard clusterings by per-node majority over the aligned labels.
    pub fn majority(&self, q1: usize, q2: usize) -> (Clustering, Clustering) {
        let pick = |votes: &Vec<Vec<usize>>, q: usize| {
            let labels = votes
                .iter()
                .map(|v| v.iter().enumerate().max_by_key(|&(k, &c)| (c, std::cmp::Reverse(k))).unwrap().0)
                .collect();
            Clustering::new(labels, q).expect("vote labels in range")
        };
        (pick(&self.row_votes, q1), pick(&self.col_votes, q2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_matching_recovers_permutation() {
        // block 0 mostly maps to 2, 1 to 0, 2 to 1
        let confusion = vec![vec![1, 2, 10], vec![9, 0, 1], vec![2, 8, 0]];
        assert_eq!(best_match_permutation(&confusion), vec![2, 0, 1]);
    }

    #[test]
    fn greedy_matches_exact_on_dominant_diagonal() {
        let confusion = vec![vec![10, 1, 0], vec![0, 12, 1], vec![1, 0, 9]];
        assert_eq!(exact_assignment(&confusion), greedy_assignment(&confusion));
    }

    fn snapshot(z_labels: Vec<usize>, pi00: f64) -> (Clustering, Clustering, CoopParams) {
        let z1 = Clustering::new(z_labels.clone(), 2).unwrap();
        let z2 = Clustering::new(z_labels, 2).unwrap();
        let params = CoopParams {
            alpha: vec![0.75, 0.25],
            beta: vec![0.75, 0.25],
            pi: vec![vec![pi00, 0.2], vec![0.2, 0.6]],
            lambda: vec![1.0, 0.5, 0.5, 0.5],
            mu: vec![1.0, 0.5, 0.5, 0.5],
            g: 5.0,
        };
        (z1, z2, params)
    }

    fn swap_blocks(z1: &Clustering, z2: &Clustering, params: &CoopParams) -> (Clustering, Clustering, CoopParams) {
        let perm = vec![1usize, 0];
        (z1.relabel(&perm), z2.relabel(&perm), permute_params(params, &perm, &perm))
    }

    #[test]
    fn averaged_pi_invariant_under_consistent_relabeling() {
        let snapshots = vec![
            snapshot(vec![0, 0, 0, 1], 0.9),
            snapshot(vec![0, 0, 1, 1], 0.8),
            snapshot(vec![0, 0, 0, 1], 0.85),
        ];

        let mut plain = AlignedAverage::new(4, 4, 2, 2);
        for (z1, z2, p) in &snapshots {
            plain.add(z1, z2, p);
        }
        let mean_plain = plain.mean_params(2, 2, 4, 4);

        // the same chain with every snapshot relabeled by one fixed swap
        let mut swapped = AlignedAverage::new(4, 4, 2, 2);
        for (z1, z2, p) in &snapshots {
            let (z1s, z2s, ps) = swap_blocks(z1, z2, p);
            swapped.add(&z1s, &z2s, &ps);
        }
        let mean_swapped = swapped.mean_params(2, 2, 4, 4);

        // identical up to the same swap
        for k in 0..2 {
            for l in 0..2 {
                assert!(
                    (mean_plain.pi[k][l] - mean_swapped.pi[1 - k][1 - l]).abs() < 1e-9,
                    "pi[{k}][{l}]"
                );
            }
        }
        let (maj_plain, _) = plain.majority(2, 2);
        let (maj_swapped, _) = swapped.majority(2, 2);
        assert_eq!(
            crate::metrics::ari(&maj_plain, &maj_swapped).unwrap(),
            1.0,
            "majority clusterings agree up to relabeling"
        );
    }

    #[test]
    fn label_switch_mid_chain_is_undone() {
        // identical snapshots, one of them arrives with swapped labels:
        // alignment folds it back, so the mean equals the common value
        let (z1, z2, params) = snapshot(vec![0, 0, 0, 1], 0.9);
        let (z1s, z2s, ps) = swap_blocks(&z1, &z2, &params);
        let mut avg = AlignedAverage::new(4, 4, 2, 2);
        avg.add(&z1, &z2, &params);
        avg.add(&z1s, &z2s, &ps);
        avg.add(&z1, &z2, &params);
        let mean = avg.mean_params(2, 2, 4, 4);
        for k in 0..2 {
            for l in 0..2 {
                assert!((mean.pi[k][l] - params.pi[k][l]).abs() < 1e-12);
            }
        }
        assert_eq!(avg.count(), 3);
    }
}
