//! Variational EM for the binary latent block model, fitted on the observed
//! support. This is the baseline every corrected fit is compared against.

use crate::clustering::{Clustering, SoftAssignment};
use crate::error::{Error, Result};
use crate::init::{init_clustering, InitMethod};
use crate::matrix::{observed_support, BinaryMatrix, CountMatrix};
use crate::params::{clamp_pi, FitResult, LbmParams, ModelParams, TraceEntry, RESP_FLOOR};

/// Default cap on VEM iterations.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Default relative tolerance on the evidence lower bound.
pub const DEFAULT_TOL: f64 = 1e-6;

/// Fit the baseline on the observed support of `r`, restarting from the
/// three initialization methods in turn and keeping the best ICL.
pub fn fit_lbm(r: &CountMatrix, q1: usize, q2: usize, seed: u64, restarts: usize) -> Result<FitResult> {
    let v = observed_support(r);
    let methods = [InitMethod::Hierarchical, InitMethod::Spectral, InitMethod::KMeans];
    let mut best: Option<FitResult> = None;
    for restart in 0..restarts.max(1) {
        let method = methods[restart % methods.len()];
        let init = init_clustering(r, q1, q2, method, crate::rng::stream_seed(seed, restart as u64))?;
        let mut fit = vem_fit(&v, q1, q2, &init.0, &init.1, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
        fit.seed = seed;
        if best.as_ref().is_none_or(|b| fit.icl > b.icl) {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Variational EM from a given initial clustering pair.
///
/// Alternates mean-field updates of the row and column responsibilities
/// with closed-form parameter updates, stopping when the evidence lower
/// bound stalls. Every step maximizes the bound over its coordinate
/// (responsibility floors and probability clamps are handled as constraint
/// sets), so the bound never decreases.
pub fn vem_fit(
    v: &BinaryMatrix,
    q1: usize,
    q2: usize,
    init_rows: &Clustering,
    init_cols: &Clustering,
    max_iter: usize,
    tol: f64,
) -> Result<FitResult> {
    let (n1, n2) = (v.n_rows(), v.n_cols());
    if q1 == 0 || q2 == 0 || q1 > n1 || q2 > n2 {
        return Err(Error::InvalidArgument(format!(
            "block counts ({q1}, {q2}) must lie in 1..=({n1}, {n2})"
        )));
    }
    if init_rows.len() != n1 || init_cols.len() != n2 {
        return Err(Error::Dimension("initial clusterings do not match the matrix".into()));
    }
    if init_rows.n_blocks() != q1 || init_cols.n_blocks() != q2 {
        return Err(Error::Dimension("initial clusterings do not match the block counts".into()));
    }

    let mut tau1 = SoftAssignment::from_hard(init_rows, RESP_FLOOR);
    let mut tau2 = SoftAssignment::from_hard(init_cols, RESP_FLOOR);
    let mut params = m_step(v, &tau1, &tau2);

    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut prev_elbo = f64::NEG_INFINITY;
    for iter in 0..max_iter {
        e_step_rows(v, &mut tau1, &tau2, &params);
        e_step_cols(v, &tau1, &mut tau2, &params);
        params = m_step(v, &tau1, &tau2);

        let bound = elbo(v, &tau1, &tau2, &params);
        trace.push(TraceEntry {
            iter,
            objective: bound,
            params: ModelParams::Lbm(params.clone()),
        });
        if iter > 0 && (bound - prev_elbo).abs() / prev_elbo.abs().max(1.0) < tol {
            break;
        }
        prev_elbo = bound;
    }

    let row_clustering = tau1.harden();
    let col_clustering = tau2.harden();
    let mut warnings = Vec::new();
    for k in row_clustering.empty_blocks() {
        warnings.push(format!("row block {} is empty after hard assignment", k + 1));
    }
    for l in col_clustering.empty_blocks() {
        warnings.push(format!("column block {} is empty after hard assignment", l + 1));
    }

    let mut result = FitResult {
        params: ModelParams::Lbm(params),
        row_clustering,
        col_clustering,
        icl: 0.0,
        trace,
        missing_prob: None,
        seed: 0,
        m_tilde: None,
        warnings,
    };
    result.icl = lbm_icl(&result, v)?;
    result.missing_prob = Some(lbm_missing_prob(&result, v)?);
    Ok(result)
}

/// Mean-field update of the row responsibilities given the column side.
fn e_step_rows(v: &BinaryMatrix, tau1: &mut SoftAssignment, tau2: &SoftAssignment, params: &LbmParams) {
    let (n1, n2) = (v.n_rows(), v.n_cols());
    let (q1, q2) = (params.q1(), params.q2());
    let ln_alpha: Vec<f64> = params.alpha.iter().map(|&a| a.ln()).collect();
    let ln_pi: Vec<Vec<f64>> = params.pi.iter().map(|row| row.iter().map(|&p| p.ln()).collect()).collect();
    let ln_1m_pi: Vec<Vec<f64>> =
        params.pi.iter().map(|row| row.iter().map(|&p| (1.0 - p).ln()).collect()).collect();

    // column-side mass per block, and mass restricted to the ones of a row
    let total_mass: Vec<f64> = (0..q2).map(|l| (0..n2).map(|j| tau2.get(j, l)).sum()).collect();
    let mut log_w = vec![0.0f64; q1];
    for i in 0..n1 {
        let mut ones_mass = vec![0.0f64; q2];
        for j in 0..n2 {
            if v.get(i, j) == 1 {
                for (l, m) in ones_mass.iter_mut().enumerate() {
                    *m += tau2.get(j, l);
                }
            }
        }
        for (k, w) in log_w.iter_mut().enumerate() {
            let mut acc = ln_alpha[k];
            for l in 0..q2 {
                acc += ones_mass[l] * ln_pi[k][l] + (total_mass[l] - ones_mass[l]) * ln_1m_pi[k][l];
            }
            *w = acc;
        }
        let probs = floored_softmax(&log_w, RESP_FLOOR);
        for (k, &p) in probs.iter().enumerate() {
            tau1.set(i, k, p);
        }
    }
}

fn e_step_cols(v: &BinaryMatrix, tau1: &SoftAssignment, tau2: &mut SoftAssignment, params: &LbmParams) {
    let (n1, n2) = (v.n_rows(), v.n_cols());
    let (q1, q2) = (params.q1(), params.q2());
    let ln_beta: Vec<f64> = params.beta.iter().map(|&b| b.ln()).collect();
    let ln_pi: Vec<Vec<f64>> = params.pi.iter().map(|row| row.iter().map(|&p| p.ln()).collect()).collect();
    let ln_1m_pi: Vec<Vec<f64>> =
        params.pi.iter().map(|row| row.iter().map(|&p| (1.0 - p).ln()).collect()).collect();

    let total_mass: Vec<f64> = (0..q1).map(|k| (0..n1).map(|i| tau1.get(i, k)).sum()).collect();
    let mut log_w = vec![0.0f64; q2];
    for j in 0..n2 {
        let mut ones_mass = vec![0.0f64; q1];
        for i in 0..n1 {
            if v.get(i, j) == 1 {
                for (k, m) in ones_mass.iter_mut().enumerate() {
                    *m += tau1.get(i, k);
                }
            }
        }
        for (l, w) in log_w.iter_mut().enumerate() {
            let mut acc = ln_beta[l];
            for k in 0..q1 {
                acc += ones_mass[k] * ln_pi[k][l] + (total_mass[k] - ones_mass[k]) * ln_1m_pi[k][l];
            }
            *w = acc;
        }
        let probs = floored_softmax(&log_w, RESP_FLOOR);
        for (l, &p) in probs.iter().enumerate() {
            tau2.set(j, l, p);
        }
    }
}

/// Exact maximizer of `sum_k p_k (w_k - ln p_k)` over the simplex cut by
/// `p_k >= floor`: a softmax with the small coordinates pinned at the floor.
fn floored_softmax(log_w: &[f64], floor: f64) -> Vec<f64> {
    let q = log_w.len();
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_w.iter().map(|&w| (w - max).exp()).collect();
    let mut pinned = vec![false; q];
    loop {
        let free_weight: f64 = weights.iter().zip(&pinned).filter(|(_, &p)| !p).map(|(w, _)| w).sum();
        let pinned_count = pinned.iter().filter(|&&p| p).count();
        let free_mass = 1.0 - floor * pinned_count as f64;
        let scale = free_mass / free_weight;
        let mut changed = false;
        let mut out = vec![0.0; q];
        for k in 0..q {
            if pinned[k] {
                out[k] = floor;
            } else {
                let p = weights[k] * scale;
                if p < floor {
                    pinned[k] = true;
                    changed = true;
                } else {
                    out[k] = p;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

/// Closed-form parameter update given the responsibilities.
fn m_step(v: &BinaryMatrix, tau1: &SoftAssignment, tau2: &SoftAssignment) -> LbmParams {
    let alpha = tau1.block_means();
    let beta = tau2.block_means();
    let (q1, q2) = (tau1.n_blocks(), tau2.n_blocks());
    let (n1, n2) = (v.n_rows(), v.n_cols());

    // ones[k][l] = sum over observed cells of tau1_ik tau2_jl
    let mut ones = vec![vec![0.0f64; q2]; q1];
    for i in 0..n1 {
        for j in 0..n2 {
            if v.get(i, j) == 1 {
                for k in 0..q1 {
                    let t1 = tau1.get(i, k);
                    for l in 0..q2 {
                        ones[k][l] += t1 * tau2.get(j, l);
                    }
                }
            }
        }
    }
    let mass1: Vec<f64> = (0..q1).map(|k| (0..n1).map(|i| tau1.get(i, k)).sum()).collect();
    let mass2: Vec<f64> = (0..q2).map(|l| (0..n2).map(|j| tau2.get(j, l)).sum()).collect();
    let pi = (0..q1)
        .map(|k| {
            (0..q2)
                .map(|l| clamp_pi(ones[k][l] / (mass1[k] * mass2[l])))
                .collect()
        })
        .collect();
    LbmParams { alpha, beta, pi }
}

/// Evidence lower bound at the current variational state.
fn elbo(v: &BinaryMatrix, tau1: &SoftAssignment, tau2: &SoftAssignment, params: &LbmParams) -> f64 {
    let (n1, n2) = (v.n_rows(), v.n_cols());
    let (q1, q2) = (params.q1(), params.q2());
    let mut bound = 0.0;
    for i in 0..n1 {
        for k in 0..q1 {
            let t = tau1.get(i, k);
            bound += t * (params.alpha[k].ln() - t.ln());
        }
    }
    for j in 0..n2 {
        for l in 0..q2 {
            let t = tau2.get(j, l);
            bound += t * (params.beta[l].ln() - t.ln());
        }
    }
    let mut ones = vec![vec![0.0f64; q2]; q1];
    for i in 0..n1 {
        for j in 0..n2 {
            if v.get(i, j) == 1 {
                for k in 0..q1 {
                    let t1 = tau1.get(i, k);
                    for l in 0..q2 {
                        ones[k][l] += t1 * tau2.get(j, l);
                    }
                }
            }
        }
    }
    let mass1: Vec<f64> = (0..q1).map(|k| (0..n1).map(|i| tau1.get(i, k)).sum()).collect();
    let mass2: Vec<f64> = (0..q2).map(|l| (0..n2).map(|j| tau2.get(j, l)).sum()).collect();
    for k in 0..q1 {
        for l in 0..q2 {
            let total = mass1[k] * mass2[l];
            bound += ones[k][l] * params.pi[k][l].ln()
                + (total - ones[k][l]) * (1.0 - params.pi[k][l]).ln();
        }
    }
    bound
}

/// Penalty term of the baseline ICL criterion.
pub fn lbm_icl_penalty(q1: usize, q2: usize, n1: usize, n2: usize) -> f64 {
    let (q1, q2, n1, n2) = (q1 as f64, q2 as f64, n1 as f64, n2 as f64);
    (q1 - 1.0) / 2.0 * n1.ln() + (q2 - 1.0) / 2.0 * n2.ln() + q1 * q2 / 2.0 * (n1 * n2).ln()
}

/// ICL of a baseline fit: completed-data log-likelihood maximized at the
/// hard clusterings, minus the penalty.
pub fn lbm_icl(result: &FitResult, v: &BinaryMatrix) -> Result<f64> {
    let z1 = &result.row_clustering;
    let z2 = &result.col_clustering;
    if z1.len() != v.n_rows() || z2.len() != v.n_cols() {
        return Err(Error::Dimension("clusterings do not match the support".into()));
    }
    let (q1, q2) = (z1.n_blocks(), z2.n_blocks());
    let sizes1 = z1.block_sizes();
    let sizes2 = z2.block_sizes();
    let (n1, n2) = (v.n_rows() as f64, v.n_cols() as f64);

    let mut cll = 0.0;
    for &s in &sizes1 {
        if s > 0 {
            cll += s as f64 * (s as f64 / n1).ln();
        }
    }
    for &s in &sizes2 {
        if s > 0 {
            cll += s as f64 * (s as f64 / n2).ln();
        }
    }
    // exact M-step for pi at the hard labels
    let mut ones = vec![vec![0.0f64; q2]; q1];
    let mut cells = vec![vec![0.0f64; q2]; q1];
    for i in 0..v.n_rows() {
        for j in 0..v.n_cols() {
            let (k, l) = (z1.label(i), z2.label(j));
            cells[k][l] += 1.0;
            ones[k][l] += f64::from(v.get(i, j));
        }
    }
    for k in 0..q1 {
        for l in 0..q2 {
            if cells[k][l] > 0.0 {
                let pi = clamp_pi(ones[k][l] / cells[k][l]);
                cll += ones[k][l] * pi.ln() + (cells[k][l] - ones[k][l]) * (1.0 - pi).ln();
            }
        }
    }
    Ok(cll - lbm_icl_penalty(q1, q2, v.n_rows(), v.n_cols()))
}

/// Missing-interaction surrogate of the baseline: unobserved cells carry the
/// block probability of their cell, observed cells carry 1.
pub fn lbm_missing_prob(result: &FitResult, v: &BinaryMatrix) -> Result<Vec<Vec<f64>>> {
    let params = result
        .params
        .as_lbm()
        .ok_or_else(|| Error::InvalidArgument("expected a baseline fit".into()))?;
    let z1 = &result.row_clustering;
    let z2 = &result.col_clustering;
    if z1.len() != v.n_rows() || z2.len() != v.n_cols() {
        return Err(Error::Dimension("clusterings do not match the support".into()));
    }
    let grid = (0..v.n_rows())
        .map(|i| {
            (0..v.n_cols())
                .map(|j| {
                    if v.get(i, j) == 1 {
                        1.0
                    } else {
                        params.pi[z1.label(i)][z2.label(j)]
                    }
                })
                .collect()
        })
        .collect();
    Ok(grid)
}
