//! Benchmark harness: simulation studies over a grid of sampling efforts
//! and the two sub-sampling validation protocols, emitting plot-ready CSV.

use crate::error::{Error, Result};
use crate::lbm::{fit_lbm, lbm_missing_prob};
use crate::matrix::{drop_empty, observed_support, BinaryMatrix, CountMatrix};
use crate::metrics::{
    auc, bipartite_modularity, chao_coverage, connectivity_chao, connectivity_coop, nodf, rmse,
    CompletionMethod, complete_matrix, ari,
};
use crate::rng::{rng_from_seed, stream_seed};
use crate::sem::{coop_missing_prob, observed_missing_prob, run_sem, SemConfig};
use crate::simulate::{simulate_coop, subsample_binomial, subsample_multinomial, SimConfig};
use rand::Rng;
use rayon::prelude::*;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Which benchmark to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    AriCurve,
    AucCurve,
    ConnectivityCurve,
    NestednessModularity,
    SubsampleMultinomial,
    SubsampleBinomial,
}

impl Experiment {
    pub const SIMULATION_STUDY: [Experiment; 4] = [
        Experiment::AriCurve,
        Experiment::AucCurve,
        Experiment::ConnectivityCurve,
        Experiment::NestednessModularity,
    ];

    pub fn file_stem(self) -> &'static str {
        match self {
            Experiment::AriCurve => "ari_curve",
            Experiment::AucCurve => "auc_curve",
            Experiment::ConnectivityCurve => "connectivity_curve",
            Experiment::NestednessModularity => "nestedness_modularity",
            Experiment::SubsampleMultinomial => "subsample_multinomial",
            Experiment::SubsampleBinomial => "subsample_binomial",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ari_curve" => Ok(Experiment::AriCurve),
            "auc_curve" => Ok(Experiment::AucCurve),
            "connectivity_curve" => Ok(Experiment::ConnectivityCurve),
            "nestedness_modularity" => Ok(Experiment::NestednessModularity),
            "subsample_multinomial" => Ok(Experiment::SubsampleMultinomial),
            "subsample_binomial" => Ok(Experiment::SubsampleBinomial),
            other => Err(Error::InvalidArgument(format!("unknown experiment '{other}'"))),
        }
    }
}

/// Configuration of the simulation-study benchmarks.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub experiments: Vec<Experiment>,
    pub g_grid: Vec<f64>,
    pub replicates: usize,
    pub scale: (usize, usize),
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Fixed block counts for the fits.
    pub q1: usize,
    pub q2: usize,
}

impl BenchConfig {
    /// Desk-scale defaults: 60 x 60 networks, five replicates, three effort
    /// levels. The full study scale (100 x 100, ten replicates, eight
    /// levels) sits behind the CLI `--full` flag.
    pub fn desk_scale(output_dir: PathBuf, seed: u64) -> Self {
        Self {
            experiments: Experiment::SIMULATION_STUDY.to_vec(),
            g_grid: vec![100.0, 300.0, 600.0],
            replicates: 5,
            scale: (60, 60),
            seed,
            output_dir,
            q1: 3,
            q2: 3,
        }
    }

    pub fn full_scale(output_dir: PathBuf, seed: u64) -> Self {
        Self {
            g_grid: vec![25.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0],
            replicates: 10,
            scale: (100, 100),
            ..Self::desk_scale(output_dir, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidArgument("replicates must be at least 1".into()));
        }
        if self.g_grid.is_empty() {
            return Err(Error::InvalidArgument("the effort grid must not be empty".into()));
        }
        if self.g_grid.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidArgument("efforts must be positive".into()));
        }
        Ok(())
    }
}

/// Everything measured on one simulated replicate.
#[derive(Clone, Debug)]
pub struct StudyRow {
    pub g: f64,
    pub replicate: usize,
    pub seed: u64,
    pub ari_row_coop: f64,
    pub ari_col_coop: f64,
    pub ari_row_lbm: f64,
    pub ari_col_lbm: f64,
    pub auc_coop: f64,
    pub auc_lbm: f64,
    pub rmse_lambda: f64,
    pub rmse_mu: f64,
    pub density_m: f64,
    pub conn_chao: f64,
    pub conn_coop: f64,
    pub coverage_chao: f64,
    pub nodf_m: f64,
    pub nodf_v: f64,
    pub nodf_lbm_oracle: f64,
    pub nodf_coop: f64,
    pub nodf_uniform: f64,
    pub mod_m: f64,
    pub mod_v: f64,
    pub mod_lbm_oracle: f64,
    pub mod_coop: f64,
    pub mod_uniform: f64,
}

/// Simulate, fit both models and measure one replicate.
pub fn study_replicate(
    scale: (usize, usize),
    g: f64,
    q1: usize,
    q2: usize,
    seed: u64,
    replicate: usize,
) -> Result<StudyRow> {
    let sim = simulate_coop(&SimConfig::three_block_benchmark(scale.0, scale.1, g, seed))?;
    let r = &sim.r;
    let v = observed_support(r);

    let coop = run_sem(r, q1, q2, &SemConfig::with_seed(stream_seed(seed, 1)))?;
    let lbm = fit_lbm(r, q1, q2, stream_seed(seed, 2), 3)?;

    let coop_params = coop.params.as_coop().expect("corrected fit");
    let (pred_scores, truth_labels) = missing_cells_scores(r, &sim.m, coop.missing_prob.as_ref().unwrap());
    let (lbm_scores, _) = missing_cells_scores(r, &sim.m, &lbm_missing_prob(&lbm, &v)?);
    let auc_coop = auc(&pred_scores, &truth_labels).unwrap_or(f64::NAN);
    let auc_lbm = auc(&lbm_scores, &truth_labels).unwrap_or(f64::NAN);

    let n_miss = (sim.m.count_ones() - v.count_ones()) as usize;
    let completed_lbm = complete_matrix(
        &v,
        &CompletionMethod::LbmOracle { n_miss, seed: stream_seed(seed, 3) },
        &lbm,
    )?;
    let completed_coop = complete_matrix(
        &v,
        &CompletionMethod::CoopBernoulli { seed: stream_seed(seed, 4) },
        &coop,
    )?;
    let completed_uniform = complete_matrix(
        &v,
        &CompletionMethod::Uniform { n_miss, seed: stream_seed(seed, 5) },
        &lbm,
    )?;

    let modularity = |m: &BinaryMatrix, tag: u64| -> f64 {
        bipartite_modularity(m, 5, stream_seed(seed, 100 + tag))
            .map(|(q, _)| q)
            .unwrap_or(f64::NAN)
    };

    Ok(StudyRow {
        g,
        replicate,
        seed,
        ari_row_coop: ari(&coop.row_clustering, &sim.true_z1)?,
        ari_col_coop: ari(&coop.col_clustering, &sim.true_z2)?,
        ari_row_lbm: ari(&lbm.row_clustering, &sim.true_z1)?,
        ari_col_lbm: ari(&lbm.col_clustering, &sim.true_z2)?,
        auc_coop,
        auc_lbm,
        rmse_lambda: rmse(&sim.true_lambda, &coop_params.lambda)?,
        rmse_mu: rmse(&sim.true_mu, &coop_params.mu)?,
        density_m: sim.m.density(),
        conn_chao: connectivity_chao(&v, chao_coverage(r)?)?,
        conn_coop: connectivity_coop(&coop, r)?,
        coverage_chao: chao_coverage(r)?,
        nodf_m: nodf(&sim.m)?,
        nodf_v: nodf(&v)?,
        nodf_lbm_oracle: nodf(&completed_lbm)?,
        nodf_coop: nodf(&completed_coop)?,
        nodf_uniform: nodf(&completed_uniform)?,
        mod_m: modularity(&sim.m, 0),
        mod_v: modularity(&v, 1),
        mod_lbm_oracle: modularity(&completed_lbm, 2),
        mod_coop: modularity(&completed_coop, 3),
        mod_uniform: modularity(&completed_uniform, 4),
    })
}

/// Scores and labels over the zero cells: positives are present-but-missed
/// interactions, negatives are truly absent ones.
fn missing_cells_scores(
    r: &CountMatrix,
    m: &BinaryMatrix,
    prob: &[Vec<f64>],
) -> (Vec<f64>, Vec<bool>) {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (i, j, c) in r.iter_cells() {
        if c == 0 {
            scores.push(prob[i][j]);
            labels.push(m.get(i, j) == 1);
        }
    }
    (scores, labels)
}

/// Run the full simulation study and return the rows in deterministic
/// (g, replicate) order.
pub fn run_simulation_study(config: &BenchConfig) -> Result<Vec<StudyRow>> {
    config.validate()?;
    let cells: Vec<(usize, usize)> = (0..config.g_grid.len())
        .flat_map(|gi| (0..config.replicates).map(move |rep| (gi, rep)))
        .collect();
    let mut rows: Vec<(usize, usize, StudyRow)> = cells
        .into_par_iter()
        .map(|(gi, rep)| {
            let g = config.g_grid[gi];
            let seed = stream_seed(config.seed, (gi as u64) * 1_000_003 + rep as u64);
            study_replicate(config.scale, g, config.q1, config.q2, seed, rep).map(|row| (gi, rep, row))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|&(gi, rep, _)| (gi, rep));
    Ok(rows.into_iter().map(|(_, _, row)| row).collect())
}

/// Run the study and write one CSV per requested experiment. Returns the
/// written paths.
pub fn bench_simulation_study(config: &BenchConfig) -> Result<Vec<PathBuf>> {
    let rows = run_simulation_study(config)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let mut written = Vec::new();
    for &experiment in &config.experiments {
        let path = config.output_dir.join(format!("{}.csv", experiment.file_stem()));
        let mut w = BufWriter::new(File::create(&path)?);
        match experiment {
            Experiment::AriCurve => {
                writeln!(w, "experiment,g,replicate,seed,ari_row_coop,ari_col_coop,ari_row_lbm,ari_col_lbm")?;
                for row in &rows {
                    writeln!(
                        w,
                        "ari_curve,{},{},{},{},{},{},{}",
                        fmt(row.g), row.replicate, row.seed,
                        fmt(row.ari_row_coop), fmt(row.ari_col_coop),
                        fmt(row.ari_row_lbm), fmt(row.ari_col_lbm)
                    )?;
                }
            }
            Experiment::AucCurve => {
                writeln!(w, "experiment,g,replicate,seed,auc_coop,auc_lbm,rmse_lambda,rmse_mu")?;
                for row in &rows {
                    writeln!(
                        w,
                        "auc_curve,{},{},{},{},{},{},{}",
                        fmt(row.g), row.replicate, row.seed,
                        fmt(row.auc_coop), fmt(row.auc_lbm),
                        fmt(row.rmse_lambda), fmt(row.rmse_mu)
                    )?;
                }
            }
            Experiment::ConnectivityCurve => {
                writeln!(w, "experiment,g,replicate,seed,density_m,conn_chao,conn_coop,coverage_chao")?;
                for row in &rows {
                    writeln!(
                        w,
                        "connectivity_curve,{},{},{},{},{},{},{}",
                        fmt(row.g), row.replicate, row.seed,
                        fmt(row.density_m), fmt(row.conn_chao),
                        fmt(row.conn_coop), fmt(row.coverage_chao)
                    )?;
                }
            }
            Experiment::NestednessModularity => {
                writeln!(
                    w,
                    "experiment,g,replicate,seed,nodf_m,nodf_v,nodf_lbm_oracle,nodf_coop,nodf_uniform,mod_m,mod_v,mod_lbm_oracle,mod_coop,mod_uniform"
                )?;
                for row in &rows {
                    writeln!(
                        w,
                        "nestedness_modularity,{},{},{},{},{},{},{},{},{},{},{},{},{}",
                        fmt(row.g), row.replicate, row.seed,
                        fmt(row.nodf_m), fmt(row.nodf_v), fmt(row.nodf_lbm_oracle),
                        fmt(row.nodf_coop), fmt(row.nodf_uniform),
                        fmt(row.mod_m), fmt(row.mod_v), fmt(row.mod_lbm_oracle),
                        fmt(row.mod_coop), fmt(row.mod_uniform)
                    )?;
                }
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "{} is not part of the simulation study",
                    experiment.file_stem()
                )))
            }
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.12}")
    }
}

/// One replicate of the paired binomial sub-sampling protocol.
#[derive(Clone, Debug)]
pub struct BinomialSubsampleRow {
    pub replicate: usize,
    pub seed: u64,
    pub auc_coop: f64,
    pub auc_lbm: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Paired binomial sub-sampling: draw two independent thinnings A and B,
/// fit both models on A, and score how well each predicts which unobserved
/// cells of A show up in B. Replicates without positives are skipped and
/// reported in the log.
pub fn bench_subsample_binomial(
    r: &CountMatrix,
    p: f64,
    q1: usize,
    q2: usize,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<BinomialSubsampleRow>, Vec<String>)> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "thinning probability must lie strictly inside (0,1), got {p}"
        )));
    }
    let mut rows = Vec::new();
    let mut log = Vec::new();
    for rep in 0..replicates {
        let rep_seed = stream_seed(seed, rep as u64);
        let a = subsample_binomial(r, p, stream_seed(rep_seed, 1))?;
        let b = subsample_binomial(r, p, stream_seed(rep_seed, 2))?;
        match score_binomial_pair(r, &a, &b, q1, q2, rep_seed) {
            Ok(Some((auc_coop, auc_lbm, n_pos, n_neg))) => rows.push(BinomialSubsampleRow {
                replicate: rep,
                seed: rep_seed,
                auc_coop,
                auc_lbm,
                n_pos,
                n_neg,
            }),
            Ok(None) => log.push(format!("replicate {rep}: no scoreable cells, skipped")),
            Err(e) => log.push(format!("replicate {rep}: {e}, skipped")),
        }
    }
    Ok((rows, log))
}

fn score_binomial_pair(
    r: &CountMatrix,
    a: &CountMatrix,
    b: &CountMatrix,
    q1: usize,
    q2: usize,
    seed: u64,
) -> Result<Option<(f64, f64, usize, usize)>> {
    let (a_kept, kept_rows, kept_cols) = match drop_empty(a) {
        Ok(out) => out,
        Err(Error::EmptyMatrix) => return Ok(None),
        Err(e) => return Err(e),
    };
    if q1 > a_kept.n_rows() || q2 > a_kept.n_cols() {
        return Ok(None);
    }
    let coop = run_sem(&a_kept, q1, q2, &SemConfig::with_seed(stream_seed(seed, 3)))?;
    let lbm = fit_lbm(&a_kept, q1, q2, stream_seed(seed, 4), 3)?;

    let coop_scores = observed_missing_prob(&coop)?;
    let v_a = observed_support(&a_kept);
    let lbm_scores = lbm_missing_prob(&lbm, &v_a)?;

    // zero cells of A (on its kept grid), scored against B
    let mut scores_coop = Vec::new();
    let mut scores_lbm = Vec::new();
    let mut labels = Vec::new();
    for (ai, &oi) in kept_rows.iter().enumerate() {
        for (aj, &oj) in kept_cols.iter().enumerate() {
            if a_kept.get(ai, aj) == 0 {
                scores_coop.push(coop_scores[ai][aj]);
                scores_lbm.push(lbm_scores[ai][aj]);
                labels.push(b.get(oi, oj) > 0);
            }
        }
    }
    let _ = r;
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Ok(None);
    }
    Ok(Some((
        auc(&scores_coop, &labels)?,
        auc(&scores_lbm, &labels)?,
        n_pos,
        n_neg,
    )))
}

/// One replicate of the multinomial sub-sampling protocol.
#[derive(Clone, Debug)]
pub struct MultinomialSubsampleRow {
    pub replicate: usize,
    pub seed: u64,
    pub keep_fraction: f64,
    pub auc_coop: f64,
    pub auc_lbm: f64,
    pub coverage_chao: f64,
    pub mean_row_coverage_coop: f64,
}

/// Multinomial sub-sampling: redraw a fraction of the observations from the
/// empirical frequencies, fit both models and score predicted missing cells
/// against the original support. The keep fraction is drawn uniformly in
/// `keep_range` per replicate.
pub fn bench_subsample_multinomial(
    r: &CountMatrix,
    keep_range: (f64, f64),
    q1: usize,
    q2: usize,
    replicates: usize,
    seed: u64,
) -> Result<(Vec<MultinomialSubsampleRow>, Vec<String>)> {
    let (lo, hi) = keep_range;
    if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "keep range ({lo}, {hi}) must satisfy 0 < lo <= hi <= 1"
        )));
    }
    let mut rng = rng_from_seed(stream_seed(seed, 0xfeed));
    let mut rows = Vec::new();
    let mut log = Vec::new();
    for rep in 0..replicates {
        let keep = if lo == hi { lo } else { rng.random_range(lo..hi) };
        let rep_seed = stream_seed(seed, 1000 + rep as u64);
        let sub = subsample_multinomial(r, keep, rep_seed)?;
        match score_multinomial(r, &sub, q1, q2, rep_seed) {
            Ok(Some(row)) => rows.push(MultinomialSubsampleRow {
                replicate: rep,
                seed: rep_seed,
                keep_fraction: keep,
                auc_coop: row.0,
                auc_lbm: row.1,
                coverage_chao: row.2,
                mean_row_coverage_coop: row.3,
            }),
            Ok(None) => log.push(format!("replicate {rep}: no missing cells to score, skipped")),
            Err(e) => log.push(format!("replicate {rep}: {e}, skipped")),
        }
    }
    Ok((rows, log))
}

fn score_multinomial(
    r: &CountMatrix,
    sub: &CountMatrix,
    q1: usize,
    q2: usize,
    seed: u64,
) -> Result<Option<(f64, f64, f64, f64)>> {
    let (kept, kept_rows, kept_cols) = match drop_empty(sub) {
        Ok(out) => out,
        Err(Error::EmptyMatrix) => return Ok(None),
        Err(e) => return Err(e),
    };
    if q1 > kept.n_rows() || q2 > kept.n_cols() {
        return Ok(None);
    }
    let coop = run_sem(&kept, q1, q2, &SemConfig::with_seed(stream_seed(seed, 5)))?;
    let lbm = fit_lbm(&kept, q1, q2, stream_seed(seed, 6), 3)?;
    let v = observed_support(&kept);

    let coop_grid = coop_missing_prob(&coop, &kept)?;
    let lbm_grid = lbm_missing_prob(&lbm, &v)?;

    let mut scores_coop = Vec::new();
    let mut scores_lbm = Vec::new();
    let mut labels = Vec::new();
    for (si, &oi) in kept_rows.iter().enumerate() {
        for (sj, &oj) in kept_cols.iter().enumerate() {
            if kept.get(si, sj) == 0 {
                scores_coop.push(coop_grid[si][sj]);
                scores_lbm.push(lbm_grid[si][sj]);
                labels.push(r.get(oi, oj) > 0);
            }
        }
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == labels.len() || labels.is_empty() {
        return Ok(None);
    }

    // per-row sampling completeness: observed degree over expected degree
    let mut coverages = Vec::new();
    for i in 0..kept.n_rows() {
        let observed: f64 = (0..kept.n_cols()).map(|j| f64::from(v.get(i, j))).sum();
        let expected: f64 = coop_grid[i].iter().sum();
        if expected > 0.0 {
            coverages.push(observed / expected);
        }
    }
    let mean_cov = coverages.iter().sum::<f64>() / coverages.len() as f64;
    Ok(Some((
        auc(&scores_coop, &labels)?,
        auc(&scores_lbm, &labels)?,
        chao_coverage(&kept)?,
        mean_cov,
    )))
}

/// Write the binomial sub-sampling rows as CSV.
pub fn write_binomial_csv(rows: &[BinomialSubsampleRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "experiment,replicate,seed,auc_coop,auc_lbm,n_pos,n_neg")?;
    for row in rows {
        writeln!(
            w,
            "subsample_binomial,{},{},{},{},{},{}",
            row.replicate, row.seed, fmt(row.auc_coop), fmt(row.auc_lbm), row.n_pos, row.n_neg
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Write the multinomial sub-sampling rows as CSV.
pub fn write_multinomial_csv(rows: &[MultinomialSubsampleRow], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(
        w,
        "experiment,replicate,seed,keep_fraction,auc_coop,auc_lbm,coverage_chao,mean_row_coverage_coop"
    )?;
    for row in rows {
        writeln!(
            w,
            "subsample_multinomial,{},{},{},{},{},{},{}",
            row.replicate,
            row.seed,
            fmt(row.keep_fraction),
            fmt(row.auc_coop),
            fmt(row.auc_lbm),
            fmt(row.coverage_chao),
            fmt(row.mean_row_coverage_coop)
        )?;
    }
    w.flush()?;
    Ok(())
}
