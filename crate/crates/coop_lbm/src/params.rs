//! Model parameter vectors and fit results.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

/// Connection probabilities are clamped into `[PI_CLAMP, 1 - PI_CLAMP]`
/// after every estimate so the imputation probability never divides by zero.
pub const PI_CLAMP: f64 = 1e-6;

/// Floor applied to mixing proportions estimated from hard labels.
pub const MIXING_FLOOR: f64 = 1e-6;

/// Floor applied to variational responsibilities.
pub const RESP_FLOOR: f64 = 1e-10;

/// Clamp a connection probability away from 0 and 1.
#[inline]
pub fn clamp_pi(p: f64) -> f64 {
    p.clamp(PI_CLAMP, 1.0 - PI_CLAMP)
}

/// Full parameter vector of the corrected-observation model:
/// mixing proportions, block connection probabilities and sampling efforts.
#[derive(Clone, Debug, PartialEq)]
pub struct CoopParams {
    /// Row mixing proportions, length Q1, simplex.
    pub alpha: Vec<f64>,
    /// Column mixing proportions, length Q2, simplex.
    pub beta: Vec<f64>,
    /// Block connection probabilities, Q1 x Q2.
    pub pi: Vec<Vec<f64>>,
    /// Row sampling efforts in (0,1], max exactly 1.
    pub lambda: Vec<f64>,
    /// Column sampling efforts in (0,1], max exactly 1.
    pub mu: Vec<f64>,
    /// Global sampling effort, positive.
    pub g: f64,
}

impl CoopParams {
    pub fn q1(&self) -> usize {
        self.alpha.len()
    }

    pub fn q2(&self) -> usize {
        self.beta.len()
    }

    /// Poisson rate of cell (i, j).
    #[inline]
    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.lambda[i] * self.mu[j] * self.g
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex("alpha", &self.alpha)?;
        check_simplex("beta", &self.beta)?;
        if self.pi.len() != self.q1() || self.pi.iter().any(|row| row.len() != self.q2()) {
            return Err(Error::Dimension("pi grid must be Q1 x Q2".into()));
        }
        for row in &self.pi {
            for &p in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidArgument(format!("pi entry {p} outside [0,1]")));
                }
            }
        }
        check_effort("lambda", &self.lambda)?;
        check_effort("mu", &self.mu)?;
        if !(self.g > 0.0) {
            return Err(Error::InvalidArgument(format!("g must be positive, got {}", self.g)));
        }
        Ok(())
    }

    /// Flatten to (alpha, beta, vec pi, lambda, mu, g) for running means and
    /// convergence norms.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(
            self.alpha.len() + self.beta.len() + self.q1() * self.q2()
                + self.lambda.len() + self.mu.len() + 1,
        );
        v.extend_from_slice(&self.alpha);
        v.extend_from_slice(&self.beta);
        for row in &self.pi {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.lambda);
        v.extend_from_slice(&self.mu);
        v.push(self.g);
        v
    }

    /// Inverse of [`to_vector`](Self::to_vector) given the dimensions.
    pub fn from_vector(v: &[f64], q1: usize, q2: usize, n1: usize, n2: usize) -> Self {
        let mut it = v.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { (0..n).map(|_| it.next().unwrap()).collect() };
        let alpha = take(q1);
        let beta = take(q2);
        let pi = (0..q1).map(|_| take(q2)).collect();
        let lambda = take(n1);
        let mu = take(n2);
        let g = it.next().unwrap();
        Self { alpha, beta, pi, lambda, mu, g }
    }

    /// Restore the `max = 1` convention on lambda and mu, folding the scale
    /// into `g` so every Poisson rate is unchanged.
    pub fn renormalize_efforts(&mut self) {
        let lmax = self.lambda.iter().cloned().fold(f64::MIN, f64::max);
        let mmax = self.mu.iter().cloned().fold(f64::MIN, f64::max);
        if lmax > 0.0 && mmax > 0.0 {
            for l in &mut self.lambda {
                *l /= lmax;
            }
            for m in &mut self.mu {
                *m /= mmax;
            }
            self.g *= lmax * mmax;
        }
    }
}

/// Parameters of the plain binary latent block model baseline.
#[derive(Clone, Debug, PartialEq)]
pub struct LbmParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
}

impl LbmParams {
    pub fn q1(&self) -> usize {
        self.alpha.len()
    }

    pub fn q2(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        check_simplex("alpha", &self.alpha)?;
        check_simplex("beta", &self.beta)?;
        if self.pi.len() != self.q1() || self.pi.iter().any(|row| row.len() != self.q2()) {
            return Err(Error::Dimension("pi grid must be Q1 x Q2".into()));
        }
        Ok(())
    }
}

fn check_simplex(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} is empty")));
    }
    if v.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidArgument(format!("{name} has a non-positive entry")));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("{name} sums to {sum}, expected 1")));
    }
    Ok(())
}

fn check_effort(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidArgument(format!("{name} is empty")));
    }
    if v.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::InvalidArgument(format!("{name} has an entry outside (0,1]")));
    }
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    if max != 1.0 {
        return Err(Error::InvalidArgument(format!("max({name}) = {max}, expected exactly 1")));
    }
    Ok(())
}

/// Which model produced a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Lbm,
    Coop,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::Lbm => write!(f, "lbm"),
            ModelKind::Coop => write!(f, "coop"),
        }
    }
}

/// Parameter set of either model.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelParams {
    Lbm(LbmParams),
    Coop(CoopParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Lbm(_) => ModelKind::Lbm,
            ModelParams::Coop(_) => ModelKind::Coop,
        }
    }

    pub fn alpha(&self) -> &[f64] {
        match self {
            ModelParams::Lbm(p) => &p.alpha,
            ModelParams::Coop(p) => &p.alpha,
        }
    }

    pub fn beta(&self) -> &[f64] {
        match self {
            ModelParams::Lbm(p) => &p.beta,
            ModelParams::Coop(p) => &p.beta,
        }
    }

    pub fn pi(&self) -> &[Vec<f64>] {
        match self {
            ModelParams::Lbm(p) => &p.pi,
            ModelParams::Coop(p) => &p.pi,
        }
    }

    pub fn as_coop(&self) -> Option<&CoopParams> {
        match self {
            ModelParams::Coop(p) => Some(p),
            ModelParams::Lbm(_) => None,
        }
    }

    pub fn as_lbm(&self) -> Option<&LbmParams> {
        match self {
            ModelParams::Lbm(p) => Some(p),
            ModelParams::Coop(_) => None,
        }
    }
}

/// One recorded iteration of a fit: parameters and the objective value
/// (complete-data log-likelihood for the stochastic fit, evidence lower
/// bound for the variational baseline).
#[derive(Clone, Debug)]
pub struct TraceEntry {
    pub iter: usize,
    pub objective: f64,
    pub params: ModelParams,
}

/// Outcome of a model fit.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub params: ModelParams,
    pub row_clustering: Clustering,
    pub col_clustering: Clustering,
    pub icl: f64,
    pub trace: Vec<TraceEntry>,
    /// P(M=1 | R) per cell: exactly 1 where the count is positive.
    /// The baseline stores its block-probability surrogate on zero cells.
    pub missing_prob: Option<Vec<Vec<f64>>>,
    pub seed: u64,
    /// Final imputed support of a stochastic fit; absent for the baseline.
    pub m_tilde: Option<BinaryMatrix>,
    /// Non-fatal conditions hit during fitting (empty blocks, fixed-point
    /// iteration cap).
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }
}
