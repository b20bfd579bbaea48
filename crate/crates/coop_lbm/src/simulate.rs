//! Synthetic network generation and sub-sampling schemes.
//!
//! `simulate_coop` draws a network from the generative process: block labels
//! from the mixing proportions, a Bernoulli support given the labels, and
//! Poisson counts with factorized sampling efforts on top. Sub-sampling
//! helpers thin an existing count matrix either multinomially (fixed total)
//! or by independent binomial thinning per cell.

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::matrix::{drop_empty, BinaryMatrix, CountMatrix};
use crate::rng::rng_from_seed;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};

/// How per-row and per-column sampling efforts are produced.
#[derive(Clone, Debug)]
pub enum EffortLaw {
    /// I.i.d. Beta(a, b) draws, normalized by their maximum.
    Beta { a: f64, b: f64 },
    /// Fixed vectors, normalized by their maximum.
    Explicit { lambda: Vec<f64>, mu: Vec<f64> },
}

/// Configuration of one synthetic draw.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n1: usize,
    pub n2: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    pub g: f64,
    pub effort_law: EffortLaw,
    pub seed: u64,
}

/// Attempts before a degenerate (all-zero) simulation is reported as an
/// error.
const RETRY_BUDGET: usize = 100;

impl SimConfig {
    /// Three balanced blocks on each side with a graded connection grid and
    /// strongly skewed Beta(0.3, 1.5) sampling efforts. This is the standard
    /// structured benchmark setting used throughout the test harness.
    pub fn three_block_benchmark(n1: usize, n2: usize, g: f64, seed: u64) -> Self {
        let third = 1.0 / 3.0;
        SimConfig {
            n1,
            n2,
            alpha: vec![third; 3],
            beta: vec![third; 3],
            pi: vec![
                vec![0.95, 0.75, 0.50],
                vec![0.75, 0.50, 0.50],
                vec![0.50, 0.50, 0.05],
            ],
            g,
            effort_law: EffortLaw::Beta { a: 0.3, b: 1.5 },
            seed,
        }
    }

    /// Unstructured truth: a single block with constant connection
    /// probability, uneven efforts. Sub-sampling such a network is what
    /// makes a support-only fit hallucinate structure.
    pub fn flat_benchmark(n1: usize, n2: usize, pi: f64, g: f64, seed: u64) -> Self {
        SimConfig {
            n1,
            n2,
            alpha: vec![1.0],
            beta: vec![1.0],
            pi: vec![vec![pi]],
            g,
            effort_law: EffortLaw::Beta { a: 0.3, b: 1.5 },
            seed,
        }
    }

    pub fn q1(&self) -> usize {
        self.alpha.len()
    }

    pub fn q2(&self) -> usize {
        self.beta.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::InvalidArgument("network dimensions must be positive".into()));
        }
        check_simplex("alpha", &self.alpha)?;
        check_simplex("beta", &self.beta)?;
        if self.pi.len() != self.q1() || self.pi.iter().any(|row| row.len() != self.q2()) {
            return Err(Error::Dimension("pi grid must be Q1 x Q2".into()));
        }
        if self.pi.iter().flatten().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidArgument("pi entries must lie in [0,1]".into()));
        }
        if !(self.g > 0.0) {
            return Err(Error::InvalidArgument("g must be positive".into()));
        }
        match &self.effort_law {
            EffortLaw::Beta { a, b } => {
                if !(*a > 0.0 && *b > 0.0) {
                    return Err(Error::InvalidArgument("beta-law shapes must be positive".into()));
                }
            }
            EffortLaw::Explicit { lambda, mu } => {
                if lambda.len() != self.n1 || mu.len() != self.n2 {
                    return Err(Error::Dimension("explicit effort vectors must match n1/n2".into()));
                }
                if lambda.iter().chain(mu.iter()).any(|&x| !(x > 0.0)) {
                    return Err(Error::InvalidArgument("efforts must be positive".into()));
                }
            }
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

/// One synthetic network, restricted to the rows and columns that kept at
/// least one observation.
#[derive(Clone, Debug)]
pub struct SimOutput {
    /// Latent support on the kept grid.
    pub m: BinaryMatrix,
    /// Poisson draws on the kept grid.
    pub n: Vec<Vec<u64>>,
    /// Observed counts, `r = m .* n`, empties dropped.
    pub r: CountMatrix,
    pub true_z1: Clustering,
    pub true_z2: Clustering,
    /// Efforts on the kept grid, renormalized to max 1.
    pub true_lambda: Vec<f64>,
    pub true_mu: Vec<f64>,
    /// Global effort after folding in the renormalization of the kept
    /// efforts.
    pub true_g: f64,
    /// 0-based original indices of kept rows/columns.
    pub kept_rows: Vec<usize>,
    pub kept_cols: Vec<usize>,
}

impl SimOutput {
    /// Fraction of the latent support missing from the observed support.
    pub fn missing_support_fraction(&self) -> f64 {
        let m_total = self.m.count_ones() as f64;
        let v_total = crate::matrix::observed_support(&self.r).count_ones() as f64;
        1.0 - v_total / m_total
    }
}

fn sample_categorical(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn draw_efforts(rng: &mut ChaCha8Rng, law: &EffortLaw, n1: usize, n2: usize) -> (Vec<f64>, Vec<f64>) {
    match law {
        EffortLaw::Beta { a, b } => {
            // ratio-of-gammas construction of a Beta(a, b) draw
            let ga = Gamma::new(*a, 1.0).expect("validated shape");
            let gb = Gamma::new(*b, 1.0).expect("validated shape");
            let draw_beta = |rng: &mut ChaCha8Rng| -> f64 {
                let x: f64 = ga.sample(rng);
                let y: f64 = gb.sample(rng);
                let v = x / (x + y);
                v.max(f64::MIN_POSITIVE)
            };
            let lambda: Vec<f64> = (0..n1).map(|_| draw_beta(rng)).collect();
            let mu: Vec<f64> = (0..n2).map(|_| draw_beta(rng)).collect();
            (normalize_max(lambda), normalize_max(mu))
        }
        EffortLaw::Explicit { lambda, mu } => {
            (normalize_max(lambda.clone()), normalize_max(mu.clone()))
        }
    }
}

fn normalize_max(mut v: Vec<f64>) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::MIN, f64::max);
    for x in &mut v {
        *x /= max;
    }
    v
}

/// Draw one network from the generative process and drop empty rows and
/// columns. All outputs are restricted to the kept grid; the effort vectors
/// are renormalized there with the scale folded into `true_g`, so every
/// Poisson rate is unchanged.
pub fn simulate_coop(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);

    for _attempt in 0..RETRY_BUDGET {
        let z1: Vec<usize> = (0..config.n1).map(|_| sample_categorical(&mut rng, &config.alpha)).collect();
        let z2: Vec<usize> = (0..config.n2).map(|_| sample_categorical(&mut rng, &config.beta)).collect();
        let (lambda, mu) = draw_efforts(&mut rng, &config.effort_law, config.n1, config.n2);

        let mut m = BinaryMatrix::zeros(config.n1, config.n2);
        for i in 0..config.n1 {
            for j in 0..config.n2 {
                let p = config.pi[z1[i]][z2[j]];
                if rng.random::<f64>() < p {
                    m.set(i, j, 1);
                }
            }
        }

        let mut n_grid = vec![vec![0u64; config.n2]; config.n1];
        let mut counts = vec![vec![0u64; config.n2]; config.n1];
        for i in 0..config.n1 {
            for j in 0..config.n2 {
                let rate = lambda[i] * mu[j] * config.g;
                let draw = Poisson::new(rate)
                    .map_err(|e| Error::Simulation(format!("invalid Poisson rate {rate}: {e}")))?
                    .sample(&mut rng) as u64;
                n_grid[i][j] = draw;
                counts[i][j] = u64::from(m.get(i, j)) * draw;
            }
        }

        let full = CountMatrix::from_rows(counts)?;
        let (r, kept_rows, kept_cols) = match drop_empty(&full) {
            Ok(out) => out,
            Err(Error::EmptyMatrix) => continue,
            Err(e) => return Err(e),
        };

        let mut m_kept = BinaryMatrix::zeros(kept_rows.len(), kept_cols.len());
        let mut n_kept = vec![vec![0u64; kept_cols.len()]; kept_rows.len()];
        for (a, &i) in kept_rows.iter().enumerate() {
            for (b, &j) in kept_cols.iter().enumerate() {
                m_kept.set(a, b, m.get(i, j));
                n_kept[a][b] = n_grid[i][j];
            }
        }
        let lambda_kept: Vec<f64> = kept_rows.iter().map(|&i| lambda[i]).collect();
        let mu_kept: Vec<f64> = kept_cols.iter().map(|&j| mu[j]).collect();
        let lmax = lambda_kept.iter().cloned().fold(f64::MIN, f64::max);
        let mmax = mu_kept.iter().cloned().fold(f64::MIN, f64::max);

        let q1 = config.q1();
        let q2 = config.q2();
        return Ok(SimOutput {
            m: m_kept,
            n: n_kept,
            r,
            true_z1: Clustering::new(kept_rows.iter().map(|&i| z1[i]).collect(), q1)?,
            true_z2: Clustering::new(kept_cols.iter().map(|&j| z2[j]).collect(), q2)?,
            true_lambda: normalize_max(lambda_kept),
            true_mu: normalize_max(mu_kept),
            true_g: config.g * lmax * mmax,
            kept_rows,
            kept_cols,
        });
    }
    Err(Error::Simulation(format!(
        "all {RETRY_BUDGET} attempts produced an all-zero matrix"
    )))
}

/// Redraw a fixed number of observations from the empirical interaction
/// frequencies: `round(keep_fraction * total)` draws from a multinomial with
/// cell probabilities `R[i][j] / total`. Dimensions are kept; empties are
/// not dropped.
pub fn subsample_multinomial(r: &CountMatrix, keep_fraction: f64, seed: u64) -> Result<CountMatrix> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep_fraction must lie in (0,1], got {keep_fraction}"
        )));
    }
    let total = r.total();
    if total == 0 {
        return Err(Error::EmptyMatrix);
    }
    let mut rng = rng_from_seed(seed);
    let n_draw = (keep_fraction * total as f64).round() as u64;

    // conditional binomial scheme: exact multinomial, cell by cell
    let mut remaining = n_draw;
    let mut mass_left = total;
    let mut out = vec![vec![0u64; r.n_cols()]; r.n_rows()];
    'outer: for i in 0..r.n_rows() {
        for j in 0..r.n_cols() {
            if remaining == 0 {
                break 'outer;
            }
            let w = r.get(i, j);
            if w == 0 {
                continue;
            }
            let x = if w == mass_left {
                remaining
            } else {
                let p = w as f64 / mass_left as f64;
                Binomial::new(remaining, p)
                    .map_err(|e| Error::Simulation(e.to_string()))?
                    .sample(&mut rng)
            };
            out[i][j] = x;
            remaining -= x;
            mass_left -= w;
        }
    }
    CountMatrix::new(out, r.row_names().to_vec(), r.col_names().to_vec())
}

/// Thin every cell independently: each count is replaced by a
/// `Binomial(R[i][j], p)` draw. Dimensions are kept.
pub fn subsample_binomial(r: &CountMatrix, p: f64, seed: u64) -> Result<CountMatrix> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0,1], got {p}")));
    }
    if p == 1.0 {
        return Ok(r.clone());
    }
    let mut rng = rng_from_seed(seed);
    let mut out = vec![vec![0u64; r.n_cols()]; r.n_rows()];
    for i in 0..r.n_rows() {
        for j in 0..r.n_cols() {
            let c = r.get(i, j);
            if c > 0 {
                out[i][j] = Binomial::new(c, p)
                    .map_err(|e| Error::Simulation(e.to_string()))?
                    .sample(&mut rng);
            }
        }
    }
    CountMatrix::new(out, r.row_names().to_vec(), r.col_names().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::observed_support;

    #[test]
    fn saturated_network_has_no_empty_cell() {
        let config = SimConfig {
            n1: 8,
            n2: 8,
            alpha: vec![1.0],
            beta: vec![1.0],
            pi: vec![vec![1.0]],
            g: 1e4,
            effort_law: EffortLaw::Explicit { lambda: vec![1.0; 8], mu: vec![1.0; 8] },
            seed: 11,
        };
        let out = simulate_coop(&config).unwrap();
        assert_eq!(out.r.n_rows(), 8);
        assert_eq!(out.r.n_cols(), 8);
        assert!(out.r.iter_cells().all(|(_, _, c)| c > 0));
    }

    #[test]
    fn impossible_network_errors_after_retries() {
        let config = SimConfig {
            n1: 4,
            n2: 4,
            alpha: vec![1.0],
            beta: vec![1.0],
            pi: vec![vec![0.0]],
            g: 5.0,
            effort_law: EffortLaw::Explicit { lambda: vec![1.0; 4], mu: vec![1.0; 4] },
            seed: 3,
        };
        assert!(matches!(simulate_coop(&config), Err(Error::Simulation(_))));
    }

    #[test]
    fn benchmark_config_hides_most_of_the_support_at_low_effort() {
        // at global effort 25 the skewed efforts hide at least 2/3 of the
        // latent support on average
        let mut fractions = Vec::new();
        for seed in 0..10 {
            let out = simulate_coop(&SimConfig::three_block_benchmark(100, 100, 25.0, seed)).unwrap();
            fractions.push(out.missing_support_fraction());
        }
        let mean = fractions.iter().sum::<f64>() / fractions.len() as f64;
        assert!(mean >= 2.0 / 3.0, "mean missing fraction {mean}");
    }

    #[test]
    fn same_seed_reproduces_bitwise() {
        let config = SimConfig::three_block_benchmark(40, 40, 100.0, 7);
        let a = simulate_coop(&config).unwrap();
        let b = simulate_coop(&config).unwrap();
        assert_eq!(a.r, b.r);
        assert_eq!(a.m, b.m);
        assert_eq!(a.true_z1, b.true_z1);
        assert_eq!(a.true_lambda, b.true_lambda);
        assert_eq!(a.true_g, b.true_g);
    }

    #[test]
    fn positive_count_implies_latent_support() {
        for seed in 0..5 {
            let out = simulate_coop(&SimConfig::three_block_benchmark(30, 30, 50.0, seed)).unwrap();
            for (i, j, c) in out.r.iter_cells() {
                if c > 0 {
                    assert_eq!(out.m.get(i, j), 1);
                }
                assert_eq!(c, u64::from(out.m.get(i, j)) * out.n[i][j]);
            }
            let lmax = out.true_lambda.iter().cloned().fold(f64::MIN, f64::max);
            let mmax = out.true_mu.iter().cloned().fold(f64::MIN, f64::max);
            assert_eq!(lmax, 1.0);
            assert_eq!(mmax, 1.0);
        }
    }

    #[test]
    fn block_proportions_match_mixing_law() {
        // chi-squared goodness of fit at the 1% level, df = 2
        let config = SimConfig {
            n1: 10_000,
            n2: 2,
            alpha: vec![1.0 / 3.0; 3],
            beta: vec![1.0],
            pi: vec![vec![1.0], vec![1.0], vec![1.0]],
            g: 50.0,
            effort_law: EffortLaw::Explicit { lambda: vec![1.0; 10_000], mu: vec![1.0; 2] },
            seed: 5,
        };
        let out = simulate_coop(&config).unwrap();
        assert_eq!(out.true_z1.len(), 10_000, "saturated draw keeps all rows");
        let sizes = out.true_z1.block_sizes();
        let expected = 10_000.0 / 3.0;
        let chi2: f64 = sizes.iter().map(|&s| (s as f64 - expected).powi(2) / expected).sum();
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let critical = ChiSquared::new(2.0).unwrap().inverse_cdf(0.99);
        assert!(chi2 < critical, "chi2 {chi2} exceeds the 1% critical value {critical}");
    }

    #[test]
    fn multinomial_forces_single_cell_allocation() {
        let r = CountMatrix::from_rows(vec![vec![10]]).unwrap();
        let out = subsample_multinomial(&r, 0.6, 1).unwrap();
        assert_eq!(out.get(0, 0), 6);
    }

    #[test]
    fn multinomial_preserves_total() {
        let r = CountMatrix::from_rows(vec![vec![3, 9], vec![0, 8]]).unwrap();
        for seed in 0..20 {
            let out = subsample_multinomial(&r, 1.0, seed).unwrap();
            assert_eq!(out.total(), 20);
            assert_eq!(out.get(1, 0), 0, "zero cells never gain mass");
        }
    }

    #[test]
    fn multinomial_cell_means_match_expectation() {
        let r = CountMatrix::from_rows(vec![vec![40, 10], vec![20, 30]]).unwrap();
        let keep = 0.5;
        let reps = 200;
        let mut sums = [[0.0f64; 2]; 2];
        for seed in 0..reps {
            let out = subsample_multinomial(&r, keep, seed).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    sums[i][j] += out.get(i, j) as f64;
                }
            }
        }
        let n_draw = (keep * 100.0).round();
        for i in 0..2 {
            for j in 0..2 {
                let p = r.get(i, j) as f64 / 100.0;
                let expected = keep * r.get(i, j) as f64;
                let var = n_draw * p * (1.0 - p);
                let se = (var / reps as f64).sqrt();
                let mean = sums[i][j] / reps as f64;
                assert!(
                    (mean - expected).abs() <= 3.0 * se,
                    "cell ({i},{j}): mean {mean}, expected {expected}, se {se}"
                );
            }
        }
    }

    #[test]
    fn multinomial_rejects_bad_fraction() {
        let r = CountMatrix::from_rows(vec![vec![5]]).unwrap();
        assert!(subsample_multinomial(&r, 0.0, 1).is_err());
        assert!(subsample_multinomial(&r, 1.2, 1).is_err());
    }

    #[test]
    fn binomial_keep_all_is_identity() {
        let r = CountMatrix::from_rows(vec![vec![4, 0], vec![7, 2]]).unwrap();
        assert_eq!(subsample_binomial(&r, 1.0, 9).unwrap(), r);
    }

    #[test]
    fn binomial_zero_cells_stay_zero() {
        let r = CountMatrix::from_rows(vec![vec![0, 0], vec![0, 5]]).unwrap();
        let out = subsample_binomial(&r, 0.4, 2).unwrap();
        assert_eq!(out.get(0, 0), 0);
        assert_eq!(out.get(0, 1), 0);
        assert_eq!(out.get(1, 0), 0);
    }

    #[test]
    fn binomial_mean_matches_thinning_rate() {
        let r = CountMatrix::from_rows(vec![vec![20]]).unwrap();
        let reps = 500;
        let mut sum = 0.0;
        for seed in 0..reps {
            sum += subsample_binomial(&r, 0.5, seed).unwrap().get(0, 0) as f64;
        }
        let mean = sum / reps as f64;
        let se = (20.0 * 0.25 / reps as f64).sqrt();
        assert!((mean - 10.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn binomial_thinning_composes_in_distribution() {
        // thinning by p then p' matches one pass at p * p' in cell means
        let r = CountMatrix::from_rows(vec![vec![30, 12], vec![8, 25]]).unwrap();
        let (p1, p2) = (0.8, 0.5);
        let reps = 500u64;
        let mut two_pass = 0.0;
        let mut one_pass = 0.0;
        for seed in 0..reps {
            let a = subsample_binomial(&r, p1, seed).unwrap();
            let b = subsample_binomial(&a, p2, seed + 10_000).unwrap();
            two_pass += b.total() as f64;
            one_pass += subsample_binomial(&r, p1 * p2, seed + 20_000).unwrap().total() as f64;
        }
        let total = r.total() as f64;
        let expected = p1 * p2 * total;
        // variance of a sum of independent binomial cells, bounded by n*p
        let se = (total * p1 * p2 / reps as f64).sqrt();
        assert!((two_pass / reps as f64 - expected).abs() <= 3.0 * se);
        assert!((one_pass / reps as f64 - expected).abs() <= 3.0 * se);
    }
}
