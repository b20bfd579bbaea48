//! Evaluation and network-description metrics.
//!
//! Partition agreement (adjusted Rand index), ranking quality (ROC AUC by
//! the rank statistic), sample-coverage and connectivity estimators,
//! NODF nestedness, Barber bipartite modularity with a label-propagation
//! optimizer, matrix completion schemes and RMSE.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, CountMatrix};
use crate::params::FitResult;
use crate::rng::rng_from_seed;
use rand::seq::SliceRandom;
use rand::Rng;

/// Adjusted Rand index between two partitions of the same node set.
///
/// 1 for identical partitions up to relabeling, about 0 for independent
/// ones.
pub fn ari(a: &Clustering, b: &Clustering) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "partitions cover {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut contingency = vec![vec![0u64; b.n_blocks()]; a.n_blocks()];
    for i in 0..n {
        contingency[a.label(i)][b.label(i)] += 1;
    }
    let choose2 = |x: u64| -> f64 { (x * x.saturating_sub(1)) as f64 / 2.0 };
    let sum_cells: f64 = contingency.iter().flatten().map(|&c| choose2(c)).sum();
    let sum_a: f64 = contingency
        .iter()
        .map(|row| choose2(row.iter().sum()))
        .sum();
    let sum_b: f64 = (0..b.n_blocks())
        .map(|l| choose2(contingency.iter().map(|row| row[l]).sum()))
        .sum();
    let total_pairs = choose2(n as u64);
    let expected = sum_a * sum_b / total_pairs;
    let max_index = 0.5 * (sum_a + sum_b);
    let denom = max_index - expected;
    if denom == 0.0 {
        // both partitions degenerate (all singletons or a single block):
        // they are identical up to relabeling
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / denom)
}

/// Area under the ROC curve via the rank statistic with average-rank tie
/// handling: the probability that a random positive outranks a random
/// negative.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| scores[x].total_cmp(&scores[y]));

    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && scores[order[end + 1]] == scores[order[start]] {
            end += 1;
        }
        let avg_rank = (start + end) as f64 / 2.0 + 1.0;
        for &idx in &order[start..=end] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        start = end + 1;
    }
    let n_pos = n_pos as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg as f64))
}

/// Sample-coverage estimate from singleton and doubleton counts:
/// `1 - f1/n * f1(n-1) / (f1(n-1) + 2(f2+1))`.
pub fn chao_coverage(r: &CountMatrix) -> Result<f64> {
    let n = r.total();
    if n == 0 {
        return Err(Error::EmptyMatrix);
    }
    let f1 = r.iter_cells().filter(|&(_, _, c)| c == 1).count() as f64;
    let f2 = r.iter_cells().filter(|&(_, _, c)| c == 2).count() as f64;
    let n = n as f64;
    Ok(1.0 - f1 / n * (f1 * (n - 1.0)) / (f1 * (n - 1.0) + 2.0 * (f2 + 1.0)))
}

/// Connectivity of the completed network from the observed support and a
/// coverage estimate: `sum(V) / (n1 * n2 * c_hat)`. Can exceed 1 when the
/// coverage estimate undershoots the density; reported as is.
pub fn connectivity_chao(v: &BinaryMatrix, c_hat: f64) -> Result<f64> {
    if !(c_hat > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "coverage estimate must be positive, got {c_hat}"
        )));
    }
    Ok(v.count_ones() as f64 / (v.n_rows() as f64 * v.n_cols() as f64 * c_hat))
}

/// Model-based connectivity: mean over cells of `P(M=1 | R)`, which is 1 on
/// observed cells and the estimated missing probability elsewhere.
pub fn connectivity_coop(result: &FitResult, r: &CountMatrix) -> Result<f64> {
    let grid = match &result.missing_prob {
        Some(grid) => grid.clone(),
        None => crate::sem::coop_missing_prob(result, r)?,
    };
    if grid.len() != r.n_rows() || grid.iter().any(|row| row.len() != r.n_cols()) {
        return Err(Error::Dimension("missing-probability grid does not match the matrix".into()));
    }
    let sum: f64 = grid.iter().flatten().sum();
    Ok(sum / (r.n_rows() as f64 * r.n_cols() as f64))
}

/// NODF nestedness on `[0,1]`.
///
/// Average paired-overlap percentage over all row pairs and column pairs;
/// a pair contributes only when its marginal totals strictly decrease, the
/// overlap being the fraction of the poorer line's ones contained in the
/// richer line's ones. Pairs with equal totals contribute 0.
pub fn nodf(v: &BinaryMatrix) -> Result<f64> {
    if v.n_rows() < 2 || v.n_cols() < 2 {
        return Err(Error::InvalidArgument("nestedness needs at least a 2 x 2 matrix".into()));
    }
    if v.count_ones() == 0 {
        return Ok(0.0);
    }
    let row_fills = v.row_fills();
    let col_fills = v.col_fills();

    let mut overlap_sum = 0.0;
    for i in 0..v.n_rows() {
        for j in 0..v.n_rows() {
            if i == j || row_fills[i] <= row_fills[j] || row_fills[j] == 0 {
                continue;
            }
            // row j is the poorer line
            let shared = (0..v.n_cols())
                .filter(|&c| v.get(i, c) == 1 && v.get(j, c) == 1)
                .count();
            overlap_sum += shared as f64 / row_fills[j] as f64;
        }
    }
    for i in 0..v.n_cols() {
        for j in 0..v.n_cols() {
            if i == j || col_fills[i] <= col_fills[j] || col_fills[j] == 0 {
                continue;
            }
            let shared = (0..v.n_rows())
                .filter(|&r| v.get(r, i) == 1 && v.get(r, j) == 1)
                .count();
            overlap_sum += shared as f64 / col_fills[j] as f64;
        }
    }
    let n1 = v.n_rows() as f64;
    let n2 = v.n_cols() as f64;
    let total_pairs = n1 * (n1 - 1.0) / 2.0 + n2 * (n2 - 1.0) / 2.0;
    Ok(overlap_sum / total_pairs)
}

/// Module assignment of a bipartite network: one module id per row and per
/// column, ids shared across the two sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleAssignment {
    pub row_modules: Vec<usize>,
    pub col_modules: Vec<usize>,
}

impl ModuleAssignment {
    fn single(n1: usize, n2: usize) -> Self {
        Self { row_modules: vec![0; n1], col_modules: vec![0; n2] }
    }

    pub fn n_modules(&self) -> usize {
        self.row_modules
            .iter()
            .chain(self.col_modules.iter())
            .max()
            .map_or(0, |&m| m + 1)
    }

    /// Renumber modules to 0..k in first-appearance order.
    fn compact(&mut self) {
        let mut map = std::collections::HashMap::new();
        let mut next = 0usize;
        for m in self.row_modules.iter_mut().chain(self.col_modules.iter_mut()) {
            let id = *map.entry(*m).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            });
            *m = id;
        }
    }
}

/// Barber bipartite modularity of an assignment:
/// `(1/m) * sum_ij (V_ij - k_i d_j / m) * [module(i) == module(j)]`.
pub fn barber_modularity(v: &BinaryMatrix, assignment: &ModuleAssignment) -> Result<f64> {
    let m = v.count_ones() as f64;
    if m == 0.0 {
        return Err(Error::NoEdges);
    }
    let k = v.row_fills();
    let d = v.col_fills();
    let mut q = 0.0;
    for i in 0..v.n_rows() {
        for j in 0..v.n_cols() {
            if assignment.row_modules[i] == assignment.col_modules[j] {
                q += f64::from(v.get(i, j)) - k[i] as f64 * d[j] as f64 / m;
            }
        }
    }
    Ok(q / m)
}

/// Maximize Barber modularity by label propagation with agglomerative
/// merges, over `restarts` seeded restarts. Returns the best score and its
/// assignment; never worse than the single-module partition (score 0).
pub fn bipartite_modularity(
    v: &BinaryMatrix,
    restarts: usize,
    seed: u64,
) -> Result<(f64, ModuleAssignment)> {
    let m = v.count_ones() as f64;
    if m == 0.0 {
        return Err(Error::NoEdges);
    }
    let (n1, n2) = (v.n_rows(), v.n_cols());
    let k = v.row_fills();
    let d = v.col_fills();
    let b: Vec<f64> = (0..n1)
        .flat_map(|i| {
            let d = &d;
            let k = &k;
            (0..n2).map(move |j| f64::from(v.get(i, j)) - k[i] as f64 * d[j] as f64 / m)
        })
        .collect();

    let mut rng = rng_from_seed(seed);
    let mut best: Option<(f64, ModuleAssignment)> = None;
    for restart in 0..restarts.max(1) {
        let row_modules: Vec<usize> = if restart == 0 {
            (0..n1).collect()
        } else {
            let groups = rng.random_range(1..=n1);
            (0..n1).map(|_| rng.random_range(0..groups)).collect()
        };
        let assignment = propagate_and_merge(n1, n2, &b, row_modules);
        let q = barber_modularity(v, &assignment)?;
        if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
            best = Some((q, assignment));
        }
    }
    let (q, mut assignment) = best.expect("at least one restart");
    if q <= 0.0 {
        // the single-module split scores exactly 0, which is never worse
        return Ok((0.0, ModuleAssignment::single(n1, n2)));
    }
    assignment.compact();
    Ok((q, assignment))
}

/// Alternate greedy label moves between the two sides until stable, then
/// merge module pairs while that improves the score.
fn propagate_and_merge(n1: usize, n2: usize, b: &[f64], row_init: Vec<usize>) -> ModuleAssignment {
    let n_labels = n1 + n2; // enough labels for every node to sit alone
    let mut rows = row_init;
    let mut cols = vec![usize::MAX; n2];
    let mut fresh = rows.iter().max().map_or(0, |&m| m + 1);

    let mut scores = vec![0.0f64; n_labels];
    loop {
        let mut changed = false;
        // columns adopt the best row-side label
        for j in 0..n2 {
            scores[..fresh].fill(0.0);
            for i in 0..n1 {
                scores[rows[i]] += b[i * n2 + j];
            }
            let (mut best_label, mut best_score) = (usize::MAX, 0.0f64);
            for (label, &s) in scores[..fresh].iter().enumerate() {
                if s > best_score {
                    best_score = s;
                    best_label = label;
                }
            }
            let target = if best_label == usize::MAX {
                // nothing positive: sit alone
                if cols[j] < fresh && rows.iter().all(|&r| r != cols[j]) {
                    cols[j] // already alone on a column-only label
                } else {
                    let t = fresh;
                    fresh += 1;
                    t
                }
            } else {
                best_label
            };
            if cols[j] != target {
                cols[j] = target;
                changed = true;
            }
        }
        // rows adopt the best column-side label
        for i in 0..n1 {
            scores[..fresh].fill(0.0);
            for j in 0..n2 {
                if cols[j] != usize::MAX {
                    scores[cols[j]] += b[i * n2 + j];
                }
            }
            let (mut best_label, mut best_score) = (usize::MAX, 0.0f64);
            for (label, &s) in scores[..fresh].iter().enumerate() {
                if s > best_score {
                    best_score = s;
                    best_label = label;
                }
            }
            let target = if best_label == usize::MAX {
                if rows[i] < fresh && cols.iter().all(|&c| c != rows[i]) {
                    rows[i]
                } else {
                    let t = fresh;
                    fresh += 1;
                    t
                }
            } else {
                best_label
            };
            if rows[i] != target {
                rows[i] = target;
                changed = true;
            }
            if fresh == n_labels {
                // compact labels to keep the scratch space bounded
                let mut asg = ModuleAssignment { row_modules: rows, col_modules: cols };
                asg.compact();
                rows = asg.row_modules;
                cols = asg.col_modules;
                fresh = rows.iter().chain(cols.iter()).max().map_or(0, |&m| m + 1);
            }
        }
        if !changed {
            break;
        }
    }

    let mut assignment = ModuleAssignment { row_modules: rows, col_modules: cols };
    assignment.compact();

    // agglomeration: merge the module pair with the largest positive gain
    loop {
        let l = assignment.n_modules();
        if l < 2 {
            break;
        }
        // cross[a][b] = sum of b over rows in module a and columns in module b
        let mut cross = vec![vec![0.0f64; l]; l];
        for i in 0..n1 {
            for j in 0..n2 {
                cross[assignment.row_modules[i]][assignment.col_modules[j]] += b[i * n2 + j];
            }
        }
        let mut best_gain = 0.0f64;
        let mut best_pair = None;
        for a in 0..l {
            for c in (a + 1)..l {
                let gain = cross[a][c] + cross[c][a];
                if gain > best_gain {
                    best_gain = gain;
                    best_pair = Some((a, c));
                }
            }
        }
        match best_pair {
            Some((a, c)) if best_gain > 1e-12 => {
                for x in assignment
                    .row_modules
                    .iter_mut()
                    .chain(assignment.col_modules.iter_mut())
                {
                    if *x == c {
                        *x = a;
                    }
                }
                assignment.compact();
            }
            _ => break,
        }
    }
    assignment
}

/// How to fill in unobserved interactions of a support matrix.
#[derive(Clone, Debug)]
pub enum CompletionMethod {
    /// Turn on `n_miss` zero cells drawn without replacement with
    /// probability proportional to the baseline block probability.
    LbmOracle { n_miss: usize, seed: u64 },
    /// Turn on each zero cell independently with its estimated missing
    /// probability.
    CoopBernoulli { seed: u64 },
    /// Turn on `n_miss` uniformly drawn zero cells.
    Uniform { n_miss: usize, seed: u64 },
}

/// Complete a support matrix by one of the three schemes. Never flips an
/// observed 1 back to 0.
pub fn complete_matrix(
    v: &BinaryMatrix,
    method: &CompletionMethod,
    fit: &FitResult,
) -> Result<BinaryMatrix> {
    let zero_cells: Vec<(usize, usize)> = (0..v.n_rows())
        .flat_map(|i| (0..v.n_cols()).map(move |j| (i, j)))
        .filter(|&(i, j)| v.get(i, j) == 0)
        .collect();
    let mut out = v.clone();
    match method {
        CompletionMethod::LbmOracle { n_miss, seed } => {
            let params = fit.params.as_lbm().ok_or_else(|| {
                Error::InvalidArgument("the block-probability completion needs a baseline fit".into())
            })?;
            check_n_miss(*n_miss, zero_cells.len())?;
            let mut rng = rng_from_seed(*seed);
            // weighted sampling without replacement by the exponential race
            let mut keyed: Vec<(f64, (usize, usize))> = zero_cells
                .iter()
                .map(|&(i, j)| {
                    let w = params.pi[fit.row_clustering.label(i)][fit.col_clustering.label(j)]
                        .max(f64::MIN_POSITIVE);
                    let u: f64 = rng.random();
                    (-u.ln() / w, (i, j))
                })
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            for &(_, (i, j)) in keyed.iter().take(*n_miss) {
                out.set(i, j, 1);
            }
        }
        CompletionMethod::CoopBernoulli { seed } => {
            let grid = fit.missing_prob.as_ref().ok_or_else(|| {
                Error::InvalidArgument("the Bernoulli completion needs missing probabilities".into())
            })?;
            if fit.params.as_coop().is_none() {
                return Err(Error::InvalidArgument(
                    "the Bernoulli completion needs a corrected-model fit".into(),
                ));
            }
            if grid.len() != v.n_rows() || grid.iter().any(|row| row.len() != v.n_cols()) {
                return Err(Error::Dimension("missing-probability grid does not match".into()));
            }
            let mut rng = rng_from_seed(*seed);
            for &(i, j) in &zero_cells {
                if rng.random::<f64>() < grid[i][j] {
                    out.set(i, j, 1);
                }
            }
        }
        CompletionMethod::Uniform { n_miss, seed } => {
            check_n_miss(*n_miss, zero_cells.len())?;
            let mut rng = rng_from_seed(*seed);
            let mut cells = zero_cells;
            cells.shuffle(&mut rng);
            for &(i, j) in cells.iter().take(*n_miss) {
                out.set(i, j, 1);
            }
        }
    }
    Ok(out)
}

fn check_n_miss(n_miss: usize, available: usize) -> Result<()> {
    if n_miss > available {
        return Err(Error::InvalidArgument(format!(
            "n_miss = {n_miss} exceeds the {available} unobserved cells"
        )));
    }
    Ok(())
}

/// Root mean squared error between two vectors.
pub fn rmse(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::Dimension(format!(
            "vectors of length {} and {}",
            truth.len(),
            estimate.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::InvalidArgument("empty vectors".into()));
    }
    let sum_sq: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (t - e) * (t - e))
        .sum();
    Ok((sum_sq / truth.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ari_identical_is_one() {
        let a = Clustering::new(vec![0, 0, 1, 2, 1], 3).unwrap();
        assert_eq!(ari(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ari_single_block_vs_singletons_is_zero() {
        let a = Clustering::trivial(5);
        let b = Clustering::new((0..5).collect(), 5).unwrap();
        assert_eq!(ari(&a, &b).unwrap(), 0.0);
    }

    /// Pair-counting oracle for the adjusted Rand index.
    fn ari_pair_oracle(a: &Clustering, b: &Clustering) -> f64 {
        let n = a.len();
        let (mut n11, mut n00, mut n10, mut n01) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                let same_a = a.label(i) == a.label(j);
                let same_b = b.label(i) == b.label(j);
                match (same_a, same_b) {
                    (true, true) => n11 += 1.0,
                    (false, false) => n00 += 1.0,
                    (true, false) => n10 += 1.0,
                    (false, true) => n01 += 1.0,
                }
            }
        }
        let total = n11 + n00 + n10 + n01;
        let expected = (n11 + n10) * (n11 + n01) / total;
        let max_index = 0.5 * ((n11 + n10) + (n11 + n01));
        (n11 - expected) / (max_index - expected)
    }

    #[test]
    fn ari_matches_pair_counting_oracle() {
        let a = Clustering::new(vec![0, 0, 1, 1], 2).unwrap();
        let b = Clustering::new(vec![0, 1, 1, 1], 2).unwrap();
        assert_relative_eq!(ari(&a, &b).unwrap(), ari_pair_oracle(&a, &b), epsilon = 1e-12);

        let c = Clustering::new(vec![0, 1, 2, 0, 1, 2, 0], 3).unwrap();
        let d = Clustering::new(vec![0, 0, 1, 1, 2, 2, 0], 3).unwrap();
        assert_relative_eq!(ari(&c, &d).unwrap(), ari_pair_oracle(&c, &d), epsilon = 1e-12);
    }

    #[test]
    fn ari_symmetric_and_relabel_invariant() {
        let a = Clustering::new(vec![0, 1, 1, 2, 0], 3).unwrap();
        let b = Clustering::new(vec![1, 1, 0, 0, 2], 3).unwrap();
        assert_relative_eq!(ari(&a, &b).unwrap(), ari(&b, &a).unwrap(), epsilon = 1e-15);
        let relabeled = a.relabel(&[2, 0, 1]);
        assert_relative_eq!(
            ari(&a, &b).unwrap(),
            ari(&relabeled, &b).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ari_length_mismatch_errors() {
        let a = Clustering::trivial(3);
        let b = Clustering::trivial(4);
        assert!(ari(&a, &b).is_err());
    }

    #[test]
    fn auc_perfect_separation() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let labels = [true, true, false, false];
        assert_eq!(auc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn auc_all_ties_is_half() {
        let scores = [0.3; 6];
        let labels = [true, false, true, false, false, true];
        assert_eq!(auc(&scores, &labels).unwrap(), 0.5);
    }

    #[test]
    fn auc_concordant_pair_example() {
        let scores = [0.9, 0.8, 0.4, 0.3];
        let labels = [true, false, true, false];
        assert_relative_eq!(auc(&scores, &labels).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn auc_single_class_errors() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_score_negation_complements() {
        let scores = [0.9, 0.1, 0.5, 0.3, 0.7];
        let labels = [true, false, true, false, false];
        let negated: Vec<f64> = scores.iter().map(|s| -s).collect();
        let total = auc(&scores, &labels).unwrap() + auc(&negated, &labels).unwrap();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn chao_no_singletons_is_full_coverage() {
        let r = CountMatrix::from_rows(vec![vec![3, 0], vec![5, 4]]).unwrap();
        assert_eq!(chao_coverage(&r).unwrap(), 1.0);
    }

    #[test]
    fn chao_hand_value() {
        // n = 10, f1 = 2, f2 = 1: 1 - 0.2 * 18/22
        let r = CountMatrix::from_rows(vec![vec![1, 1, 2], vec![6, 0, 0]]).unwrap();
        assert_relative_eq!(chao_coverage(&r).unwrap(), 1.0 - 0.2 * (18.0 / 22.0), epsilon = 1e-12);
        assert_relative_eq!(chao_coverage(&r).unwrap(), 0.8363636363636364, epsilon = 1e-12);
    }

    #[test]
    fn chao_two_singletons_only() {
        let r = CountMatrix::from_rows(vec![vec![1, 1]]).unwrap();
        assert_relative_eq!(chao_coverage(&r).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn connectivity_chao_full_coverage_is_density() {
        let v = BinaryMatrix::from_rows(vec![vec![1, 0], vec![1, 1]]).unwrap();
        assert_relative_eq!(connectivity_chao(&v, 1.0).unwrap(), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn connectivity_chao_inflates_with_low_coverage() {
        let v = BinaryMatrix::from_rows(vec![vec![1, 0], vec![1, 0]]).unwrap();
        assert_relative_eq!(connectivity_chao(&v, 0.5).unwrap(), 1.0, epsilon = 1e-12);
        // coverage below the density pushes the estimate past 1; reported as is
        assert!(connectivity_chao(&v, 0.25).unwrap() > 1.0);
        assert!(connectivity_chao(&v, 0.0).is_err());
    }

    #[test]
    fn nodf_perfect_staircase() {
        let v = BinaryMatrix::from_rows(vec![
            vec![1, 0, 0],
            vec![1, 1, 0],
            vec![1, 1, 1],
        ])
        .unwrap();
        assert_relative_eq!(nodf(&v).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn nodf_identity_matrix_is_zero() {
        let v = BinaryMatrix::from_rows(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(nodf(&v).unwrap(), 0.0);
    }

    /// Direct enumeration of the NODF definition.
    fn nodf_oracle(v: &BinaryMatrix) -> f64 {
        let rf = v.row_fills();
        let cf = v.col_fills();
        let mut sum = 0.0;
        let mut pairs = 0.0;
        for i in 0..v.n_rows() {
            for j in (i + 1)..v.n_rows() {
                pairs += 1.0;
                let (rich, poor) = if rf[i] > rf[j] { (i, j) } else { (j, i) };
                if rf[rich] > rf[poor] && rf[poor] > 0 {
                    let shared = (0..v.n_cols())
                        .filter(|&c| v.get(rich, c) == 1 && v.get(poor, c) == 1)
                        .count();
                    sum += shared as f64 / rf[poor] as f64;
                }
            }
        }
        for i in 0..v.n_cols() {
            for j in (i + 1)..v.n_cols() {
                pairs += 1.0;
                let (rich, poor) = if cf[i] > cf[j] { (i, j) } else { (j, i) };
                if cf[rich] > cf[poor] && cf[poor] > 0 {
                    let shared = (0..v.n_rows())
                        .filter(|&r| v.get(r, rich) == 1 && v.get(r, poor) == 1)
                        .count();
                    sum += shared as f64 / cf[poor] as f64;
                }
            }
        }
        sum / pairs
    }

    #[test]
    fn nodf_matches_enumeration_oracle() {
        let v = BinaryMatrix::from_rows(vec![
            vec![1, 1, 1],
            vec![1, 1, 0],
            vec![0, 1, 0],
        ])
        .unwrap();
        assert_relative_eq!(nodf(&v).unwrap(), nodf_oracle(&v), epsilon = 1e-12);

        let w = BinaryMatrix::from_rows(vec![
            vec![1, 1, 0, 1],
            vec![0, 1, 1, 0],
            vec![1, 0, 0, 0],
            vec![1, 1, 1, 1],
        ])
        .unwrap();
        assert_relative_eq!(nodf(&w).unwrap(), nodf_oracle(&w), epsilon = 1e-12);
    }

    #[test]
    fn nodf_permutation_invariant() {
        let v = BinaryMatrix::from_rows(vec![
            vec![1, 1, 1, 0],
            vec![1, 1, 0, 0],
            vec![1, 0, 0, 1],
        ])
        .unwrap();
        let permuted = BinaryMatrix::from_rows(vec![
            vec![0, 0, 1, 1], // row 2 with columns shuffled (3,2,0,1)
            vec![1, 0, 1, 1], // row 3
            vec![0, 1, 1, 1], // row 1
        ])
        .unwrap();
        assert_relative_eq!(nodf(&v).unwrap(), nodf(&permuted).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn modularity_complete_graph_is_zero() {
        let v = BinaryMatrix::from_rows(vec![vec![1; 4]; 3]).unwrap();
        let (q, asg) = bipartite_modularity(&v, 3, 1).unwrap();
        assert_eq!(q, 0.0);
        assert_eq!(asg.n_modules(), 1);
    }

    #[test]
    fn modularity_two_components_score_half() {
        // two disconnected complete blocks of equal size
        let mut rows = Vec::new();
        for i in 0..6 {
            rows.push((0..6).map(|j| u64::from((i < 3) == (j < 3)) as u8).collect());
        }
        let v = BinaryMatrix::from_rows(rows).unwrap();
        let (q, asg) = bipartite_modularity(&v, 5, 3).unwrap();
        assert_relative_eq!(q, 0.5, epsilon = 1e-12);
        assert_eq!(asg.n_modules(), 2);
        assert_eq!(asg.row_modules[0], asg.col_modules[0]);
        assert_ne!(asg.row_modules[0], asg.row_modules[5]);
    }

    #[test]
    fn modularity_reported_score_matches_definition() {
        let v = BinaryMatrix::from_rows(vec![
            vec![1, 1, 0, 0, 1],
            vec![1, 1, 0, 0, 0],
            vec![0, 0, 1, 1, 0],
            vec![0, 1, 1, 1, 0],
        ])
        .unwrap();
        let (q, asg) = bipartite_modularity(&v, 8, 11).unwrap();
        assert_relative_eq!(q, barber_modularity(&v, &asg).unwrap(), epsilon = 1e-10);
        assert!(q >= 0.0);
        // reproducible given the seed
        let (q2, asg2) = bipartite_modularity(&v, 8, 11).unwrap();
        assert_eq!(q, q2);
        assert_eq!(asg, asg2);
    }

    /// Exhaustive search over assignments with up to `max_modules` modules.
    fn modularity_oracle(v: &BinaryMatrix, max_modules: usize) -> f64 {
        let n1 = v.n_rows();
        let n2 = v.n_cols();
        let n = n1 + n2;
        let mut best = f64::NEG_INFINITY;
        let mut assignment = vec![0usize; n];
        loop {
            let asg = ModuleAssignment {
                row_modules: assignment[..n1].to_vec(),
                col_modules: assignment[n1..].to_vec(),
            };
            let q = barber_modularity(v, &asg).unwrap();
            if q > best {
                best = q;
            }
            // odometer increment
            let mut pos = 0;
            loop {
                if pos == n {
                    return best;
                }
                assignment[pos] += 1;
                if assignment[pos] < max_modules {
                    break;
                }
                assignment[pos] = 0;
                pos += 1;
            }
        }
    }

    #[test]
    fn modularity_matches_exhaustive_oracle_on_small_instances() {
        let instances = vec![
            BinaryMatrix::from_rows(vec![
                vec![1, 1, 0, 0],
                vec![1, 1, 0, 0],
                vec![0, 0, 1, 1],
                vec![0, 1, 1, 1],
            ])
            .unwrap(),
            BinaryMatrix::from_rows(vec![
                vec![1, 0, 0],
                vec![1, 1, 0],
                vec![0, 1, 1],
                vec![0, 0, 1],
            ])
            .unwrap(),
            BinaryMatrix::from_rows(vec![
                vec![1, 1, 1],
                vec![1, 0, 1],
                vec![1, 1, 0],
            ])
            .unwrap(),
        ];
        for v in instances {
            let oracle = modularity_oracle(&v, 3);
            let (q, _) = bipartite_modularity(&v, 20, 5).unwrap();
            assert_relative_eq!(q, oracle.max(0.0), epsilon = 1e-10);
        }
    }

    fn lbm_fit_for_completion() -> FitResult {
        use crate::params::{LbmParams, ModelParams};
        FitResult {
            params: ModelParams::Lbm(LbmParams {
                alpha: vec![0.5, 0.5],
                beta: vec![1.0],
                pi: vec![vec![0.8], vec![0.1]],
            }),
            row_clustering: Clustering::new(vec![0, 0, 1, 1], 2).unwrap(),
            col_clustering: Clustering::trivial(3),
            icl: 0.0,
            trace: Vec::new(),
            missing_prob: None,
            seed: 0,
            m_tilde: None,
            warnings: Vec::new(),
        }
    }

    #[test]
    fn completion_zero_nmiss_is_identity() {
        let v = BinaryMatrix::from_rows(vec![vec![1, 0, 0]; 4]).unwrap();
        let fit = lbm_fit_for_completion();
        for method in [
            CompletionMethod::LbmOracle { n_miss: 0, seed: 1 },
            CompletionMethod::Uniform { n_miss: 0, seed: 1 },
        ] {
            assert_eq!(complete_matrix(&v, &method, &fit).unwrap(), v);
        }
    }

    #[test]
    fn completion_never_unsets_ones() {
        let v = BinaryMatrix::from_rows(vec![
            vec![1, 0, 1],
            vec![0, 0, 0],
            vec![1, 1, 0],
            vec![0, 0, 1],
        ])
        .unwrap();
        let fit = lbm_fit_for_completion();
        let out = complete_matrix(&v, &CompletionMethod::LbmOracle { n_miss: 3, seed: 7 }, &fit).unwrap();
        assert!(out.dominates(&v));
        assert_eq!(out.count_ones(), v.count_ones() + 3);
    }

    #[test]
    fn completion_nmiss_bounds_checked() {
        let v = BinaryMatrix::from_rows(vec![vec![1, 0]]).unwrap();
        let fit = lbm_fit_for_completion();
        assert!(complete_matrix(
            &v,
            &CompletionMethod::Uniform { n_miss: 2, seed: 0 },
            &fit
        )
        .is_err());
    }

    #[test]
    fn bernoulli_completion_matches_expected_additions() {
        use crate::params::{CoopParams, ModelParams};
        let v = BinaryMatrix::from_rows(vec![vec![0, 0], vec![1, 0]]).unwrap();
        let probs = vec![vec![0.8, 0.2], vec![1.0, 0.5]];
        let fit = FitResult {
            params: ModelParams::Coop(CoopParams {
                alpha: vec![1.0],
                beta: vec![1.0],
                pi: vec![vec![0.5]],
                lambda: vec![1.0, 1.0],
                mu: vec![1.0, 1.0],
                g: 1.0,
            }),
            row_clustering: Clustering::trivial(2),
            col_clustering: Clustering::trivial(2),
            icl: 0.0,
            trace: Vec::new(),
            missing_prob: Some(probs),
            seed: 0,
            m_tilde: None,
            warnings: Vec::new(),
        };
        let expected_added = 0.8 + 0.2 + 0.5;
        let reps = 500;
        let mut added = 0.0;
        for seed in 0..reps {
            let out =
                complete_matrix(&v, &CompletionMethod::CoopBernoulli { seed }, &fit).unwrap();
            assert!(out.dominates(&v));
            added += (out.count_ones() - v.count_ones()) as f64;
        }
        let mean = added / reps as f64;
        let var = 0.8 * 0.2 + 0.2 * 0.8 + 0.5 * 0.5;
        let se = (var / reps as f64).sqrt();
        assert!((mean - expected_added).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn rmse_values() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_relative_eq!(
            rmse(&[1.0, 0.5], &[1.0, 0.3]).unwrap(),
            0.02f64.sqrt(),
            epsilon = 1e-12
        );
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
