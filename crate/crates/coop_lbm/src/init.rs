//! Initial clusterings for the inference algorithms.
//!
//! All three methods work on the observed support: hierarchical clustering
//! with Ward linkage on Manhattan distances between binary profiles,
//! spectral clustering on singular vectors of the degree-normalized support,
//! and seeded k-means++ on the raw binary profiles.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::matrix::{observed_support, CountMatrix};
use crate::rng::rng_from_seed;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitMethod {
    Hierarchical,
    Spectral,
    KMeans,
}

impl std::str::FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hierarchical" => Ok(InitMethod::Hierarchical),
            "spectral" => Ok(InitMethod::Spectral),
            "kmeans" => Ok(InitMethod::KMeans),
            other => Err(Error::InvalidArgument(format!("unknown init method '{other}'"))),
        }
    }
}

/// Cluster the rows of the observed support into `q1` groups and the
/// columns into `q2` groups.
pub fn init_clustering(
    r: &CountMatrix,
    q1: usize,
    q2: usize,
    method: InitMethod,
    seed: u64,
) -> Result<(Clustering, Clustering)> {
    if q1 == 0 || q2 == 0 {
        return Err(Error::InvalidArgument("block counts must be positive".into()));
    }
    if q1 > r.n_rows() || q2 > r.n_cols() {
        return Err(Error::InvalidArgument(format!(
            "block counts ({q1}, {q2}) exceed matrix dimensions ({}, {})",
            r.n_rows(),
            r.n_cols()
        )));
    }
    let v = observed_support(r);
    let row_profiles: Vec<Vec<f64>> = (0..v.n_rows())
        .map(|i| (0..v.n_cols()).map(|j| f64::from(v.get(i, j))).collect())
        .collect();
    let col_profiles: Vec<Vec<f64>> = (0..v.n_cols())
        .map(|j| (0..v.n_rows()).map(|i| f64::from(v.get(i, j))).collect())
        .collect();

    let (row_labels, col_labels) = match method {
        InitMethod::Hierarchical => (
            ward_labels(&row_profiles, q1),
            ward_labels(&col_profiles, q2),
        ),
        InitMethod::KMeans => (
            kmeans(&row_profiles, q1, &mut rng_from_seed(seed)),
            kmeans(&col_profiles, q2, &mut rng_from_seed(seed.wrapping_add(1))),
        ),
        InitMethod::Spectral => {
            let (row_feat, col_feat) = spectral_features(r, q1.max(q2));
            (
                kmeans(&truncate(&row_feat, q1), q1, &mut rng_from_seed(seed)),
                kmeans(&truncate(&col_feat, q2), q2, &mut rng_from_seed(seed.wrapping_add(1))),
            )
        }
    };
    Ok((Clustering::new(row_labels, q1)?, Clustering::new(col_labels, q2)?))
}

fn truncate(features: &[Vec<f64>], dims: usize) -> Vec<Vec<f64>> {
    features
        .iter()
        .map(|f| f.iter().take(dims.max(1)).copied().collect())
        .collect()
}

/// Leading singular vectors of `Dr^{-1/2} V Dc^{-1/2}`.
fn spectral_features(r: &CountMatrix, dims: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let v = observed_support(r);
    let (n1, n2) = (v.n_rows(), v.n_cols());
    let row_deg: Vec<f64> = v.row_fills().iter().map(|&d| (d as f64).max(1.0)).collect();
    let col_deg: Vec<f64> = v.col_fills().iter().map(|&d| (d as f64).max(1.0)).collect();
    let a = DMatrix::from_fn(n1, n2, |i, j| {
        f64::from(v.get(i, j)) / (row_deg[i] * col_deg[j]).sqrt()
    });
    let d = dims.min(n1.min(n2));
    let svd = a.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let rows = (0..n1)
        .map(|i| (0..d).map(|k| u[(i, k)]).collect())
        .collect();
    let cols = (0..n2)
        .map(|j| (0..d).map(|k| vt[(k, j)]).collect())
        .collect();
    (rows, cols)
}

fn manhattan(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn sq_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Agglomerative clustering with the Ward update applied to Manhattan
/// distances, merging until `q` clusters remain. Deterministic: ties break
/// towards the smallest indices.
fn ward_labels(points: &[Vec<f64>], q: usize) -> Vec<usize> {
    let n = points.len();
    if q == 1 {
        return vec![0; n];
    }
    if q >= n {
        return (0..n).collect();
    }

    let mut dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = manhattan(&points[i], &points[j]);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<f64> = vec![1.0; n];
    // members[c] lists the original points merged into cluster c
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut n_active = n;

    while n_active > q {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in (i + 1)..n {
                if active[j] && dist[i][j] < best.0 {
                    best = (dist[i][j], i, j);
                }
            }
        }
        let (_, i, j) = best;
        // Lance-Williams coefficients for the Ward criterion
        let (ni, nj) = (size[i], size[j]);
        for k in 0..n {
            if !active[k] || k == i || k == j {
                continue;
            }
            let nk = size[k];
            let denom = ni + nj + nk;
            let d = ((ni + nk) * dist[i][k] + (nj + nk) * dist[j][k] - nk * dist[i][j]) / denom;
            dist[i][k] = d;
            dist[k][i] = d;
        }
        size[i] += size[j];
        active[j] = false;
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        n_active -= 1;
    }

    let mut labels = vec![0usize; n];
    let mut next = 0;
    for c in 0..n {
        if active[c] {
            for &p in &members[c] {
                labels[p] = next;
            }
            next += 1;
        }
    }
    labels
}

/// Lloyd iterations with k-means++ seeding. Empty clusters are re-seeded
/// with the point farthest from its center.
fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    if k == 1 {
        return vec![0; n];
    }
    if k >= n {
        return (0..n).collect();
    }
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points[rng.random_range(0..n)].clone());
    let mut min_d2: Vec<f64> = points.iter().map(|p| sq_euclidean(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = min_d2.iter().sum();
        let next = if total <= 0.0 {
            // all points coincide with a center already; any point works
            rng.random_range(0..n)
        } else {
            let mut u: f64 = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (idx, &d) in min_d2.iter().enumerate() {
                u -= d;
                if u <= 0.0 {
                    chosen = idx;
                    break;
                }
            }
            chosen
        };
        centers.push(points[next].clone());
        for (idx, p) in points.iter().enumerate() {
            let d = sq_euclidean(p, centers.last().unwrap());
            if d < min_d2[idx] {
                min_d2[idx] = d;
            }
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..100 {
        let mut changed = false;
        for (idx, p) in points.iter().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_euclidean(p, center);
                if d < best.0 {
                    best = (d, c);
                }
            }
            if labels[idx] != best.1 {
                labels[idx] = best.1;
                changed = true;
            }
        }
        // recompute centers
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (idx, p) in points.iter().enumerate() {
            counts[labels[idx]] += 1;
            for (s, &x) in sums[labels[idx]].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // take the point farthest from its current center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_euclidean(&points[a], &centers[labels[a]])
                            .partial_cmp(&sq_euclidean(&points[b], &centers[labels[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[c] = points[far].clone();
                labels[far] = c;
                changed = true;
            } else {
                for (d, s) in centers[c].iter_mut().zip(&sums[c]) {
                    *d = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    labels
}
