//! Command-line interface: simulate networks, fit and select models,
//! compute metrics, complete matrices, sub-sample, and run benchmarks.

use clap::{Args, Parser, Subcommand};
use coop_lbm::bench::{
    bench_simulation_study, bench_subsample_binomial, bench_subsample_multinomial, write_binomial_csv,
    write_multinomial_csv, BenchConfig, Experiment,
};
use coop_lbm::error::{Error, Result};
use coop_lbm::io;
use coop_lbm::lbm::fit_lbm;
use coop_lbm::matrix::{drop_empty, observed_support};
use coop_lbm::metrics::{
    auc, bipartite_modularity, chao_coverage, complete_matrix, connectivity_chao, connectivity_coop,
    nodf, CompletionMethod,
};
use coop_lbm::params::ModelKind;
use coop_lbm::select::explore;
use coop_lbm::sem::{run_sem, SemConfig};
use coop_lbm::simulate::{simulate_coop, subsample_binomial, subsample_multinomial, SimConfig};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "coop-lbm", version, about = "Latent block models for weighted bipartite networks with sampling-effort correction")]
struct Cli {
    /// Master RNG seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic network and write it with a truth sidecar.
    Simulate(SimulateArgs),
    /// Fit one model at fixed block counts.
    Fit(FitArgs),
    /// Explore block counts and select the best ICL.
    Select(SelectArgs),
    /// Compute metrics of a matrix and an optional fit.
    Metrics(MetricsArgs),
    /// Complete the observed support by one of the three schemes.
    Complete(CompleteArgs),
    /// Thin a count matrix multinomially or binomially.
    Subsample(SubsampleArgs),
    /// Run the benchmark suites and emit plot-ready CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    n1: usize,
    #[arg(long, default_value_t = 100)]
    n2: usize,
    /// Global sampling effort.
    #[arg(long, default_value_t = 600.0)]
    g: f64,
    /// Use a single-block truth with this connection probability instead of
    /// the three-block benchmark grid.
    #[arg(long)]
    flat_pi: Option<f64>,
    /// Where the count matrix CSV goes.
    #[arg(long, short = 'o')]
    output: PathBuf,
    /// Truth sidecar path (defaults to the output with a .truth.json suffix).
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long, default_value_t = 3)]
    q1: usize,
    #[arg(long, default_value_t = 3)]
    q2: usize,
    /// Burn-in iterations of the stochastic fit.
    #[arg(long, default_value_t = 50)]
    burn_in: usize,
    /// Averaged iterations after burn-in.
    #[arg(long, default_value_t = 50)]
    iters: usize,
    /// Stop once the running parameter mean moves less than this.
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long, default_value_t = 10)]
    q_max: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// Report document path.
    #[arg(long, short = 'o')]
    output: PathBuf,
    /// Grid CSV path (defaults to the output with a .csv suffix).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Where to write the best fit (defaults to the output with a
    /// .best.json suffix).
    #[arg(long)]
    best_fit: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Fit document; needed for ari, auc and the corrected connectivity.
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Truth sidecar; needed for ari and auc.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated list from: ari, auc, chao, connectivity, nodf,
    /// modularity.
    #[arg(long, default_value = "chao,connectivity,nodf,modularity")]
    which: String,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    #[arg(long)]
    fit: PathBuf,
    /// 1 = block-probability draw without replacement, 2 = independent
    /// Bernoulli with the estimated missing probabilities, 3 = uniform.
    #[arg(long)]
    method: u8,
    /// Number of cells to add (methods 1 and 3).
    #[arg(long)]
    n_miss: Option<usize>,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct SubsampleArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// multinomial or binomial.
    #[arg(long)]
    scheme: String,
    /// Fraction of the total observations to keep (multinomial).
    #[arg(long)]
    keep: Option<f64>,
    /// Per-observation keep probability (binomial).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// One of ari_curve, auc_curve, connectivity_curve,
    /// nestedness_modularity, subsample_multinomial, subsample_binomial, or
    /// `all` for the whole simulation study.
    #[arg(long, default_value = "all")]
    experiment: String,
    /// Comma-separated global efforts for the simulation study.
    #[arg(long, default_value = "100,300,600")]
    g_grid: String,
    #[arg(long, default_value_t = 5)]
    replicates: usize,
    /// Network side length (n1 = n2).
    #[arg(long, default_value_t = 60)]
    scale: usize,
    /// Paper-scale study: 100 x 100, 10 replicates, the full effort grid.
    #[arg(long, default_value_t = false)]
    full: bool,
    #[arg(long, default_value_t = 3)]
    q1: usize,
    #[arg(long, default_value_t = 3)]
    q2: usize,
    /// Input matrix for the sub-sampling experiments; a synthetic stand-in
    /// is simulated when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Thinning probability for subsample_binomial.
    #[arg(long, default_value_t = 0.7)]
    p: f64,
    /// Keep-fraction range for subsample_multinomial.
    #[arg(long, default_value_t = 0.6)]
    keep_lo: f64,
    #[arg(long, default_value_t = 0.9)]
    keep_hi: f64,
    #[arg(long, short = 'o')]
    output_dir: PathBuf,
}

fn parse_model(s: &str) -> std::result::Result<ModelKind, String> {
    match s {
        "lbm" => Ok(ModelKind::Lbm),
        "coop" => Ok(ModelKind::Coop),
        other => Err(format!("unknown model '{other}', expected lbm or coop")),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args, seed),
        Command::Fit(args) => cmd_fit(args, seed),
        Command::Select(args) => cmd_select(args, seed),
        Command::Metrics(args) => cmd_metrics(args, seed),
        Command::Complete(args) => cmd_complete(args, seed),
        Command::Subsample(args) => cmd_subsample(args, seed),
        Command::Bench(args) => cmd_bench(args, seed),
    }
}

fn cmd_simulate(args: SimulateArgs, seed: u64) -> Result<()> {
    let config = match args.flat_pi {
        Some(pi) => SimConfig::flat_benchmark(args.n1, args.n2, pi, args.g, seed),
        None => SimConfig::three_block_benchmark(args.n1, args.n2, args.g, seed),
    };
    let sim = simulate_coop(&config)?;
    io::write_count_matrix(&sim.r, &args.output)?;
    let truth_path = args
        .truth
        .unwrap_or_else(|| args.output.with_extension("truth.json"));
    let truth = io::TruthDocument {
        m: (0..sim.m.n_rows())
            .map(|i| (0..sim.m.n_cols()).map(|j| sim.m.get(i, j)).collect())
            .collect(),
        z1: sim.true_z1.labels().iter().map(|&l| l + 1).collect(),
        z2: sim.true_z2.labels().iter().map(|&l| l + 1).collect(),
        lambda: sim.true_lambda.clone(),
        mu: sim.true_mu.clone(),
        g: sim.true_g,
        seed,
        kept_rows: sim.kept_rows.iter().map(|&i| i + 1).collect(),
        kept_cols: sim.kept_cols.iter().map(|&j| j + 1).collect(),
    };
    io::write_truth(&truth, &truth_path)?;
    println!(
        "wrote {} ({} x {}) and {}",
        args.output.display(),
        sim.r.n_rows(),
        sim.r.n_cols(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_fit(args: FitArgs, seed: u64) -> Result<()> {
    let raw = io::read_count_matrix(&args.input)?;
    let (r, _, _) = drop_empty(&raw)?;
    let fit = match args.model {
        ModelKind::Coop => {
            let config = SemConfig {
                burn_in: args.burn_in,
                post_iter: args.iters,
                eps: args.eps,
                seed,
                restarts: args.restarts,
                ..SemConfig::default()
            };
            run_sem(&r, args.q1, args.q2, &config)?
        }
        ModelKind::Lbm => fit_lbm(&r, args.q1, args.q2, seed, args.restarts)?,
    };
    io::write_fit(&fit, &args.output)?;
    for w in &fit.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} (icl {:.4})", args.output.display(), fit.icl);
    Ok(())
}

fn cmd_select(args: SelectArgs, seed: u64) -> Result<()> {
    let raw = io::read_count_matrix(&args.input)?;
    let (r, _, _) = drop_empty(&raw)?;
    let config = SemConfig { seed, restarts: args.restarts, ..SemConfig::default() };
    let report = explore(&r, args.model, args.q_max, &config)?;

    let doc = serde_json::json!({
        "model": report.model.to_string(),
        "best": {"q1": report.best.0, "q2": report.best.1},
        "grid": report
            .icl_table()
            .iter()
            .map(|&(q1, q2, icl)| serde_json::json!({"q1": q1, "q2": q2, "icl": icl}))
            .collect::<Vec<_>>(),
        "exploration": report
            .exploration_log
            .iter()
            .map(|s| {
                serde_json::json!({
                    "q1": s.q1, "q2": s.q2, "icl": s.icl,
                    "trigger": s.trigger.to_string(), "accepted": s.accepted,
                })
            })
            .collect::<Vec<_>>(),
    });
    let mut w = BufWriter::new(File::create(&args.output)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    w.write_all(b"\n")?;
    w.flush()?;

    let csv_path = args.csv.unwrap_or_else(|| args.output.with_extension("csv"));
    let mut w = BufWriter::new(File::create(&csv_path)?);
    writeln!(w, "q1,q2,icl")?;
    for (q1, q2, icl) in report.icl_table() {
        writeln!(w, "{q1},{q2},{icl:.12}")?;
    }
    w.flush()?;

    let best_path = args
        .best_fit
        .unwrap_or_else(|| args.output.with_extension("best.json"));
    io::write_fit(report.best_fit(), &best_path)?;
    println!(
        "best ({}, {}) icl {:.4}; wrote {}, {} and {}",
        report.best.0,
        report.best.1,
        report.best_fit().icl,
        args.output.display(),
        csv_path.display(),
        best_path.display()
    );
    Ok(())
}

fn cmd_metrics(args: MetricsArgs, seed: u64) -> Result<()> {
    let r = io::read_count_matrix(&args.input)?;
    let v = observed_support(&r);
    let fit = args.fit.as_deref().map(io::read_fit).transpose()?;
    let truth = args.truth.as_deref().map(io::read_truth).transpose()?;

    let mut out: Vec<(String, f64)> = Vec::new();
    for which in args.which.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match which {
            "ari" => {
                let fit = fit.as_ref().ok_or_else(|| need("ari", "--fit"))?;
                let truth = truth.as_ref().ok_or_else(|| need("ari", "--truth"))?;
                out.push(("ari_rows".into(), coop_lbm::metrics::ari(&fit.row_clustering, &truth.row_clustering()?)?));
                out.push(("ari_cols".into(), coop_lbm::metrics::ari(&fit.col_clustering, &truth.col_clustering()?)?));
            }
            "auc" => {
                let fit = fit.as_ref().ok_or_else(|| need("auc", "--fit"))?;
                let truth = truth.as_ref().ok_or_else(|| need("auc", "--truth"))?;
                let grid = fit
                    .missing_prob
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("fit document lacks missing probabilities".into()))?;
                let m = truth.support()?;
                let mut scores = Vec::new();
                let mut labels = Vec::new();
                for (i, j, c) in r.iter_cells() {
                    if c == 0 {
                        scores.push(grid[i][j]);
                        labels.push(m.get(i, j) == 1);
                    }
                }
                out.push(("auc_missing".into(), auc(&scores, &labels)?));
            }
            "chao" => out.push(("chao_coverage".into(), chao_coverage(&r)?)),
            "connectivity" => {
                out.push(("connectivity_observed".into(), v.density()));
                out.push(("connectivity_chao".into(), connectivity_chao(&v, chao_coverage(&r)?)?));
                if let Some(fit) = fit.as_ref().filter(|f| f.params.as_coop().is_some()) {
                    out.push(("connectivity_coop".into(), connectivity_coop(fit, &r)?));
                }
            }
            "nodf" => out.push(("nodf".into(), nodf(&v)?)),
            "modularity" => {
                let (q, _) = bipartite_modularity(&v, 10, seed)?;
                out.push(("modularity".into(), q));
            }
            other => {
                return Err(Error::InvalidArgument(format!("unknown metric '{other}'")));
            }
        }
    }
    let mut w = BufWriter::new(File::create(&args.output)?);
    writeln!(w, "metric,value")?;
    for (name, value) in &out {
        writeln!(w, "{name},{value:.12}")?;
    }
    w.flush()?;
    println!("wrote {} ({} metrics)", args.output.display(), out.len());
    Ok(())
}

fn need(metric: &str, flag: &str) -> Error {
    Error::InvalidArgument(format!("metric '{metric}' needs {flag}"))
}

fn cmd_complete(args: CompleteArgs, seed: u64) -> Result<()> {
    let r = io::read_count_matrix(&args.input)?;
    let v = observed_support(&r);
    let fit = io::read_fit(&args.fit)?;
    let n_miss = || {
        args.n_miss
            .ok_or_else(|| Error::InvalidArgument("methods 1 and 3 need --n-miss".into()))
    };
    let method = match args.method {
        1 => CompletionMethod::LbmOracle { n_miss: n_miss()?, seed },
        2 => CompletionMethod::CoopBernoulli { seed },
        3 => CompletionMethod::Uniform { n_miss: n_miss()?, seed },
        other => {
            return Err(Error::InvalidArgument(format!("method must be 1, 2 or 3, got {other}")))
        }
    };
    let completed = complete_matrix(&v, &method, &fit)?;
    io::write_binary_matrix(&completed, r.row_names(), r.col_names(), &args.output)?;
    println!(
        "wrote {} ({} ones, was {})",
        args.output.display(),
        completed.count_ones(),
        v.count_ones()
    );
    Ok(())
}

fn cmd_subsample(args: SubsampleArgs, seed: u64) -> Result<()> {
    let r = io::read_count_matrix(&args.input)?;
    let out = match args.scheme.as_str() {
        "multinomial" => {
            let keep = args
                .keep
                .ok_or_else(|| Error::InvalidArgument("multinomial needs --keep".into()))?;
            subsample_multinomial(&r, keep, seed)?
        }
        "binomial" => {
            let p = args.p.ok_or_else(|| Error::InvalidArgument("binomial needs --p".into()))?;
            subsample_binomial(&r, p, seed)?
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown scheme '{other}', expected multinomial or binomial"
            )))
        }
    };
    io::write_count_matrix(&out, &args.output)?;
    println!("wrote {} (total {} of {})", args.output.display(), out.total(), r.total());
    Ok(())
}

fn cmd_bench(args: BenchArgs, seed: u64) -> Result<()> {
    std::fs::create_dir_all(&args.output_dir)?;
    let g_grid: Vec<f64> = args
        .g_grid
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad effort value '{s}'")))
        })
        .collect::<Result<_>>()?;

    let experiments: Vec<Experiment> = if args.experiment == "all" {
        Experiment::SIMULATION_STUDY.to_vec()
    } else {
        vec![args.experiment.parse()?]
    };

    let sim_study: Vec<Experiment> = experiments
        .iter()
        .copied()
        .filter(|e| Experiment::SIMULATION_STUDY.contains(e))
        .collect();
    if !sim_study.is_empty() {
        let mut config = if args.full {
            BenchConfig::full_scale(args.output_dir.clone(), seed)
        } else {
            BenchConfig::desk_scale(args.output_dir.clone(), seed)
        };
        config.experiments = sim_study;
        if !args.full {
            config.g_grid = g_grid.clone();
            config.replicates = args.replicates;
            config.scale = (args.scale, args.scale);
        }
        config.q1 = args.q1;
        config.q2 = args.q2;
        for path in bench_simulation_study(&config)? {
            println!("wrote {}", path.display());
        }
    }

    // sub-sampling experiments need a reference network
    let needs_input = experiments
        .iter()
        .any(|e| matches!(e, Experiment::SubsampleBinomial | Experiment::SubsampleMultinomial));
    if needs_input {
        let r = match &args.input {
            Some(path) => io::read_count_matrix(path)?,
            None => {
                let g = g_grid.iter().cloned().fold(f64::MIN, f64::max);
                simulate_coop(&SimConfig::three_block_benchmark(args.scale, args.scale, g, seed))?.r
            }
        };
        for experiment in &experiments {
            match experiment {
                Experiment::SubsampleBinomial => {
                    let (rows, log) =
                        bench_subsample_binomial(&r, args.p, args.q1, args.q2, args.replicates, seed)?;
                    for line in &log {
                        eprintln!("note: {line}");
                    }
                    let path = args.output_dir.join("subsample_binomial.csv");
                    write_binomial_csv(&rows, &path)?;
                    println!("wrote {}", path.display());
                }
                Experiment::SubsampleMultinomial => {
                    let (rows, log) = bench_subsample_multinomial(
                        &r,
                        (args.keep_lo, args.keep_hi),
                        args.q1,
                        args.q2,
                        args.replicates,
                        seed,
                    )?;
                    for line in &log {
                        eprintln!("note: {line}");
                    }
                    let path = args.output_dir.join("subsample_multinomial.csv");
                    write_multinomial_csv(&rows, &path)?;
                    println!("wrote {}", path.display());
                }
                _ => {}
            }
        }
    }
    Ok(())
}
