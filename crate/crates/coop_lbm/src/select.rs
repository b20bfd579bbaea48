//! Block-count selection: ICL scoring and exploration of the (Q1, Q2) grid
//! with split-merge deepening.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::init::{init_clustering, InitMethod};
use crate::lbm::{vem_fit, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::likelihood::complete_loglik;
use crate::matrix::{observed_support, CountMatrix};
use crate::params::{CoopParams, FitResult, ModelKind};
use crate::rng::{rng_from_seed, stream_seed};
use crate::sem::{fit_sampling_effort, mstep_pi, run_sem_with_init, SemConfig};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// Penalty of the corrected-model ICL: the effort vectors count as
/// parameters alongside the block grid and mixing proportions.
pub fn coop_icl_penalty(q1: usize, q2: usize, n1: usize, n2: usize) -> f64 {
    let (q1, q2, n1, n2) = (q1 as f64, q2 as f64, n1 as f64, n2 as f64);
    (q1 - 1.0) / 2.0 * n1.ln()
        + (q2 - 1.0) / 2.0 * n2.ln()
        + (q1 * q2 + n1 + n2 - 1.0) / 2.0 * (n1 * n2).ln()
}

/// ICL of a corrected fit: the completed-data log-likelihood maximized over
/// the parameters at the hard clusterings, minus the penalty.
///
/// The maximization is one exact M-step given the hard labels: mixing
/// proportions from label counts, connection probabilities from block means
/// of the final imputed support, efforts from the fixed point.
pub fn coop_icl(result: &FitResult, r: &CountMatrix) -> Result<f64> {
    let m_tilde = result
        .m_tilde
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("ICL needs the final imputed support of the fit".into()))?;
    let z1 = &result.row_clustering;
    let z2 = &result.col_clustering;
    let (q1, q2) = (z1.n_blocks(), z2.n_blocks());
    let (n1, n2) = (r.n_rows(), r.n_cols());

    let alpha: Vec<f64> = z1.block_sizes().iter().map(|&s| s as f64 / n1 as f64).collect();
    let beta: Vec<f64> = z2.block_sizes().iter().map(|&s| s as f64 / n2 as f64).collect();
    let (pi, _) = mstep_pi(m_tilde, z1, z2, None);
    let effort = fit_sampling_effort(r, m_tilde, 1e-8, 100)?;
    let params = CoopParams {
        alpha,
        beta,
        pi,
        lambda: effort.lambda,
        mu: effort.mu,
        g: effort.g,
    };
    let cll = complete_loglik(r, z1, z2, &params)?;
    Ok(cll - coop_icl_penalty(q1, q2, n1, n2))
}

/// What prompted a visit during exploration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExploreTrigger {
    Initial,
    Forward,
    Split,
    Merge,
}

impl std::fmt::Display for ExploreTrigger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExploreTrigger::Initial => "initial",
            ExploreTrigger::Forward => "forward",
            ExploreTrigger::Split => "split",
            ExploreTrigger::Merge => "merge",
        };
        write!(f, "{s}")
    }
}

/// One visited cell of the exploration.
#[derive(Clone, Debug)]
pub struct ExploreStep {
    pub q1: usize,
    pub q2: usize,
    pub icl: f64,
    pub trigger: ExploreTrigger,
    pub accepted: bool,
}

/// Outcome of a grid exploration.
pub struct SelectionReport {
    pub model: ModelKind,
    /// Best fit found per visited cell.
    pub grid: BTreeMap<(usize, usize), FitResult>,
    pub best: (usize, usize),
    pub exploration_log: Vec<ExploreStep>,
}

impl SelectionReport {
    pub fn best_fit(&self) -> &FitResult {
        &self.grid[&self.best]
    }

    /// `(q1, q2, icl)` triples in grid order.
    pub fn icl_table(&self) -> Vec<(usize, usize, f64)> {
        self.grid.iter().map(|(&(q1, q2), fit)| (q1, q2, fit.icl)).collect()
    }
}

/// Explore block counts: forward steps from (1,1) until the ICL stops
/// improving in both directions, then split-merge deepening. Any refit that
/// improves the ICL is kept.
pub fn explore(
    r: &CountMatrix,
    model: ModelKind,
    q_max: usize,
    config: &SemConfig,
) -> Result<SelectionReport> {
    if q_max == 0 {
        return Err(Error::InvalidArgument("q_max must be positive".into()));
    }
    const PATIENCE: usize = 2;
    const MAX_DEEPENING_ROUNDS: usize = 10;
    let q1_cap = q_max.min(r.n_rows());
    let q2_cap = q_max.min(r.n_cols());

    let mut grid: BTreeMap<(usize, usize), FitResult> = BTreeMap::new();
    let mut log: Vec<ExploreStep> = Vec::new();

    let fit_cell = |q1: usize, q2: usize, init: Option<(Clustering, Clustering)>, salt: u64| {
        fit_one(r, model, q1, q2, config, init, salt)
    };

    let first = fit_cell(1, 1, None, 0)?;
    log.push(ExploreStep { q1: 1, q2: 1, icl: first.icl, trigger: ExploreTrigger::Initial, accepted: true });
    grid.insert((1, 1), first);
    let mut best = (1, 1);

    // forward steps with per-direction patience
    let mut patience = [0usize; 2];
    while patience[0] < PATIENCE || patience[1] < PATIENCE {
        let mut progressed = false;
        for dir in 0..2 {
            if patience[dir] >= PATIENCE {
                continue;
            }
            let cand = if dir == 0 { (best.0 + 1, best.1) } else { (best.0, best.1 + 1) };
            if cand.0 > q1_cap || cand.1 > q2_cap {
                patience[dir] = PATIENCE;
                continue;
            }
            if !grid.contains_key(&cand) {
                let fit = fit_cell(cand.0, cand.1, None, 0)?;
                log.push(ExploreStep {
                    q1: cand.0,
                    q2: cand.1,
                    icl: fit.icl,
                    trigger: ExploreTrigger::Forward,
                    accepted: fit.icl > grid[&best].icl,
                });
                grid.insert(cand, fit);
            }
            if grid[&cand].icl > grid[&best].icl {
                best = cand;
                patience = [0, 0];
                progressed = true;
            } else {
                patience[dir] += 1;
            }
        }
        if !progressed && patience[0] >= PATIENCE && patience[1] >= PATIENCE {
            break;
        }
    }

    // split-merge deepening around the current best
    for round in 0..MAX_DEEPENING_ROUNDS {
        let mut improved = false;
        for (proposal, rows_side) in [
            (ExploreTrigger::Split, true),
            (ExploreTrigger::Split, false),
            (ExploreTrigger::Merge, true),
            (ExploreTrigger::Merge, false),
        ] {
            let base = &grid[&best];
            let cand = match proposal {
                ExploreTrigger::Split => propose_split(r, base, rows_side, q1_cap, q2_cap, config.seed),
                ExploreTrigger::Merge => propose_merge(base, rows_side),
                _ => unreachable!(),
            };
            let Some((q1, q2, init)) = cand else { continue };
            let salt = 1 + round as u64 * 8 + if rows_side { 0 } else { 4 } + if proposal == ExploreTrigger::Merge { 2 } else { 0 };
            let fit = fit_cell(q1, q2, Some(init), salt)?;
            let accepted = fit.icl > grid[&best].icl;
            log.push(ExploreStep { q1, q2, icl: fit.icl, trigger: proposal, accepted });
            let entry = grid.entry((q1, q2));
            match entry {
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    if fit.icl > e.get().icl {
                        e.insert(fit);
                    }
                }
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(fit);
                }
            }
            if accepted {
                best = (q1, q2);
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }

    // the reported best is the exact argmax over everything fitted
    let best = grid
        .iter()
        .max_by(|a, b| a.1.icl.partial_cmp(&b.1.icl).unwrap().then(b.0.cmp(a.0)))
        .map(|(&cell, _)| cell)
        .expect("grid holds at least one cell");

    Ok(SelectionReport { model, grid, best, exploration_log: log })
}

fn fit_one(
    r: &CountMatrix,
    model: ModelKind,
    q1: usize,
    q2: usize,
    config: &SemConfig,
    init: Option<(Clustering, Clustering)>,
    salt: u64,
) -> Result<FitResult> {
    let cell_seed = stream_seed(config.seed, (q1 as u64) << 32 | (q2 as u64) << 8 | salt);
    match model {
        ModelKind::Coop => {
            let cell_config = SemConfig { seed: cell_seed, ..config.clone() };
            run_sem_with_init(r, q1, q2, &cell_config, init)
        }
        ModelKind::Lbm => {
            let v = observed_support(r);
            let methods = [InitMethod::Hierarchical, InitMethod::Spectral, InitMethod::KMeans];
            let fits: Vec<Result<FitResult>> = (0..config.restarts.max(1))
                .into_par_iter()
                .map(|restart| {
                    let start = match &init {
                        Some(pair) => pair.clone(),
                        None => init_clustering(
                            r,
                            q1,
                            q2,
                            methods[restart % methods.len()],
                            stream_seed(cell_seed, restart as u64),
                        )?,
                    };
                    let mut fit = vem_fit(&v, q1, q2, &start.0, &start.1, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
                    fit.seed = cell_seed;
                    Ok(fit)
                })
                .collect();
            let mut best: Option<FitResult> = None;
            for fit in fits {
                let fit = fit?;
                if best.as_ref().is_none_or(|b| fit.icl > b.icl) {
                    best = Some(fit);
                }
            }
            Ok(best.expect("at least one restart"))
        }
    }
}

/// Split the largest block of the best clustering in two by 2-means on
/// mean-count profiles over the opposite side's blocks.
fn propose_split(
    r: &CountMatrix,
    base: &FitResult,
    rows_side: bool,
    q1_cap: usize,
    q2_cap: usize,
    seed: u64,
) -> Option<(usize, usize, (Clustering, Clustering))> {
    let (target, other) = if rows_side {
        (&base.row_clustering, &base.col_clustering)
    } else {
        (&base.col_clustering, &base.row_clustering)
    };
    let q = target.n_blocks();
    let cap = if rows_side { q1_cap } else { q2_cap };
    if q + 1 > cap {
        return None;
    }
    let sizes = target.block_sizes();
    let (largest, &size) = sizes.iter().enumerate().max_by_key(|&(k, &s)| (s, std::cmp::Reverse(k)))?;
    if size < 2 {
        return None;
    }

    let members: Vec<usize> = (0..target.len()).filter(|&i| target.label(i) == largest).collect();
    let q_other = other.n_blocks();
    // mean raw count towards each block of the other side
    let profiles: Vec<Vec<f64>> = members
        .iter()
        .map(|&node| {
            let mut sums = vec![0.0f64; q_other];
            let mut counts = vec![0.0f64; q_other];
            for opp in 0..other.len() {
                let l = other.label(opp);
                let c = if rows_side { r.get(node, opp) } else { r.get(opp, node) };
                sums[l] += c as f64;
                counts[l] += 1.0;
            }
            sums.iter().zip(&counts).map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 }).collect()
        })
        .collect();
    let halves = two_means(&profiles, &mut rng_from_seed(stream_seed(seed, 0x5017)));

    let mut labels = target.labels().to_vec();
    for (idx, &node) in members.iter().enumerate() {
        if halves[idx] == 1 {
            labels[node] = q; // fresh block index
        }
    }
    let split = Clustering::new(labels, q + 1).ok()?;
    Some(if rows_side {
        (q + 1, other.n_blocks(), (split, other.clone()))
    } else {
        (other.n_blocks(), q + 1, (other.clone(), split))
    })
}

fn two_means(points: &[Vec<f64>], rng: &mut rand_chacha::ChaCha8Rng) -> Vec<usize> {
    use rand::Rng;
    let n = points.len();
    if n < 2 {
        return vec![0; n];
    }
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    };
    // seed with the first point and the farthest point from it
    let c0 = rng.random_range(0..n);
    let c1 = (0..n)
        .max_by(|&a, &b| dist(&points[a], &points[c0]).partial_cmp(&dist(&points[b], &points[c0])).unwrap())
        .unwrap();
    let mut centers = [points[c0].clone(), points[c1].clone()];
    let mut labels = vec![0usize; n];
    for _ in 0..50 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let l = usize::from(dist(p, &centers[1]) < dist(p, &centers[0]));
            if labels[i] != l {
                labels[i] = l;
                changed = true;
            }
        }
        for side in 0..2 {
            let member_count = labels.iter().filter(|&&l| l == side).count();
            if member_count == 0 {
                continue;
            }
            let dim = points[0].len();
            let mut mean = vec![0.0; dim];
            for (i, p) in points.iter().enumerate() {
                if labels[i] == side {
                    for (m, &x) in mean.iter_mut().zip(p) {
                        *m += x;
                    }
                }
            }
            for m in &mut mean {
                *m /= member_count as f64;
            }
            centers[side] = mean;
        }
        if !changed {
            break;
        }
    }
    labels
}

/// Merge the pair of blocks with the closest connection-probability
/// profiles (L1 distance over the other side's blocks).
fn propose_merge(base: &FitResult, rows_side: bool) -> Option<(usize, usize, (Clustering, Clustering))> {
    let (target, other) = if rows_side {
        (&base.row_clustering, &base.col_clustering)
    } else {
        (&base.col_clustering, &base.row_clustering)
    };
    let q = target.n_blocks();
    if q < 2 {
        return None;
    }
    let pi = base.params.pi();
    let profile = |k: usize| -> Vec<f64> {
        if rows_side {
            pi[k].clone()
        } else {
            pi.iter().map(|row| row[k]).collect()
        }
    };
    let mut best_pair = (0, 1);
    let mut best_dist = f64::INFINITY;
    for a in 0..q {
        let pa = profile(a);
        for b in (a + 1)..q {
            let d: f64 = profile(b).iter().zip(&pa).map(|(x, y)| (x - y).abs()).sum();
            if d < best_dist {
                best_dist = d;
                best_pair = (a, b);
            }
        }
    }
    let (a, b) = best_pair;
    let labels: Vec<usize> = target
        .labels()
        .iter()
        .map(|&l| {
            let l = if l == b { a } else { l };
            if l > b {
                l - 1
            } else {
                l
            }
        })
        .collect();
    let merged = Clustering::new(labels, q - 1).ok()?;
    Some(if rows_side {
        (q - 1, other.n_blocks(), (merged, other.clone()))
    } else {
        (other.n_blocks(), q - 1, (other.clone(), merged))
    })
}
