//! Likelihood evaluation for the corrected-observation model.
//!
//! A count `R[i][j]` is the product of a latent Bernoulli support cell and an
//! independent Poisson draw with rate `lambda[i] * mu[j] * g`, so
//!
//! ```text
//! P(R = r) = pi * rate^r * exp(-rate) / r!          for r > 0
//! P(R = 0) = 1 - pi * (1 - exp(-rate))
//! ```

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::matrix::CountMatrix;
use crate::params::CoopParams;
use statrs::function::gamma::ln_gamma;

/// `ln(r!)` via the log-gamma function; exact enough for any count size.
#[inline]
pub fn ln_factorial(r: u64) -> f64 {
    ln_gamma(r as f64 + 1.0)
}

/// Probability of observing count `r` in a cell of a block with connection
/// probability `pi_kl` and Poisson rate `rate`.
///
/// The positive branch is evaluated in log space.
pub fn conditional_obs_prob(r: u64, pi_kl: f64, rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&pi_kl) {
        return Err(Error::InvalidArgument(format!("pi must lie in [0,1], got {pi_kl}")));
    }
    if !(rate >= 0.0) {
        return Err(Error::InvalidArgument(format!("rate must be non-negative, got {rate}")));
    }
    if r == 0 {
        Ok(1.0 - pi_kl * (1.0 - (-rate).exp()))
    } else if pi_kl == 0.0 || rate == 0.0 {
        Ok(0.0)
    } else {
        let log_p = pi_kl.ln() + r as f64 * rate.ln() - rate - ln_factorial(r);
        Ok(log_p.exp())
    }
}

/// Log-probability of count `r` given block probability and rate; `-inf`
/// when the parameters forbid the observation.
#[inline]
pub(crate) fn cell_loglik(r: u64, pi_kl: f64, rate: f64) -> f64 {
    if r == 0 {
        (1.0 - pi_kl * (1.0 - (-rate).exp())).ln()
    } else if pi_kl == 0.0 || rate == 0.0 {
        f64::NEG_INFINITY
    } else {
        pi_kl.ln() + r as f64 * rate.ln() - rate - ln_factorial(r)
    }
}

/// Complete-data log-likelihood `log L(Z1) + log L(Z2) + log L(R | Z1, Z2)`.
///
/// Contradictions between a degenerate `pi` and the data return `-inf`
/// rather than an error.
pub fn complete_loglik(
    r: &CountMatrix,
    z1: &Clustering,
    z2: &Clustering,
    params: &CoopParams,
) -> Result<f64> {
    check_dims(r, z1, z2, params.q1(), params.q2())?;
    if params.lambda.len() != r.n_rows() || params.mu.len() != r.n_cols() {
        return Err(Error::Dimension("effort vectors must match matrix dimensions".into()));
    }

    let mut ll = 0.0;
    for &l in z1.labels() {
        ll += params.alpha[l].ln();
    }
    for &l in z2.labels() {
        ll += params.beta[l].ln();
    }
    for (i, j, count) in r.iter_cells() {
        let pi_kl = params.pi[z1.label(i)][z2.label(j)];
        ll += cell_loglik(count, pi_kl, params.rate(i, j));
        if ll == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
    }
    Ok(ll)
}

pub(crate) fn check_dims(
    r: &CountMatrix,
    z1: &Clustering,
    z2: &Clustering,
    q1: usize,
    q2: usize,
) -> Result<()> {
    if z1.len() != r.n_rows() || z2.len() != r.n_cols() {
        return Err(Error::Dimension(format!(
            "clusterings ({}, {}) do not match matrix ({}, {})",
            z1.len(),
            z2.len(),
            r.n_rows(),
            r.n_cols()
        )));
    }
    if z1.n_blocks() != q1 || z2.n_blocks() != q2 {
        return Err(Error::Dimension(format!(
            "clustering blocks ({}, {}) do not match parameters ({}, {})",
            z1.n_blocks(),
            z2.n_blocks(),
            q1,
            q2
        )));
    }
    Ok(())
}
