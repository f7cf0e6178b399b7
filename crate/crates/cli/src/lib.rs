//! Command implementations for the `zico` binary: simulate, fit, eval, and
//! benchmark, tying the core pipeline to files on disk.

use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use zico_core::acyclicity::AcyclicityMode;
use zico_core::error::Error;
use zico_core::experiment::{
    rows_to_csv, run_benchmark, simulate_cell, BenchmarkSpec, CellSpec, Coupling, GraphKind,
};
use zico_core::graph::{DagGraph, Digraph};
use zico_core::io;
use zico_core::metrics::{combine_scores, evaluate};
use zico_core::model::Family;
use zico_core::simulate::{SignConfig, SimOptions};
use zico_core::train::{binarize, fit, AlignNorm, TrainConfig};
use zico_core::Result;

/// Exit codes: 0 success, 1 usage, 2 i/o, 3 numerical failure.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Param(_) => 1,
        Error::Data(_) | Error::Io(_) | Error::Serde(_) => 2,
        Error::Domain(_) | Error::Aborted(_) => 3,
    }
}

fn default_out() -> PathBuf {
    std::env::var_os("ZICO_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("zico-out"))
}

#[derive(Parser, Debug)]
#[command(
    name = "zico",
    about = "DAG structure learning from zero-inflated count data",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate replicate datasets from a random DAG.
    Simulate(SimulateArgs),
    /// Fit a model to a count dataset.
    Fit(FitArgs),
    /// Evaluate fitted weight matrices against a truth graph.
    Eval(EvalArgs),
    /// Run a simulate -> fit -> eval grid and emit results.csv.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Graph model: er or ba.
    #[arg(long, default_value = "er")]
    pub graph: String,
    #[arg(long, default_value_t = 20)]
    pub d: usize,
    /// ER edge probability.
    #[arg(long, default_value_t = 0.25)]
    pub p: f64,
    /// BA attachments per new node.
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sign configuration: ++, --, +-, -+.
    #[arg(long, default_value = "+-")]
    pub sign: String,
    /// Generation family: zinb or zip.
    #[arg(long, default_value = "zinb")]
    pub family: String,
    /// Support-overlap fraction; omit for a single shared support.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Also emit data_dropout.csv.
    #[arg(long, default_value_t = false)]
    pub dropout: bool,
    /// Dropout logistic slope.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Dropout percentile threshold.
    #[arg(long, default_value_t = 65.0)]
    pub q: f64,
    #[arg(long, default_value_t = 1.5)]
    pub gamma_mean: f64,
    #[arg(long, default_value_t = 0.2)]
    pub gamma_sd: f64,
    #[arg(long, default_value_t = 1.5)]
    pub delta_mean: f64,
    #[arg(long, default_value_t = 0.2)]
    pub delta_sd: f64,
    #[arg(long, default_value_t = 5.0)]
    pub dispersion: f64,
    #[arg(long, default_value_t = 0.5)]
    pub w0_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub w0_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub w1_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub w1_max: f64,
    /// Output directory (env ZICO_OUT overrides the default).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    fn sim_options(&self) -> Result<SimOptions> {
        Ok(SimOptions {
            sign_config: SignConfig::parse(&self.sign)?,
            w0_magnitude: (self.w0_min, self.w0_max),
            w1_magnitude: (self.w1_min, self.w1_max),
            gamma_mean: self.gamma_mean,
            gamma_sd: self.gamma_sd,
            delta_mean: self.delta_mean,
            delta_sd: self.delta_sd,
            dispersion: self.dispersion,
            family: Family::parse(&self.family)?,
        })
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.reps < 1 {
        return Err(Error::param("need at least one replicate"));
    }
    let out = args.out.clone().unwrap_or_else(default_out);
    let graph = GraphKind::parse(&args.graph)?;
    let sim = args.sim_options()?;
    if sim.family.has_zero_component() {
        // sample_params re-checks; surface the usage error before any i/o
    }
    for rep in 0..args.reps {
        let seed = args.seed + rep as u64;
        let cell = CellSpec {
            graph,
            d: args.d,
            n: args.n,
            er_p: args.p,
            ba_m: args.m,
            sign: sim.sign_config,
            rho: args.rho,
            family: sim.family,
            train: TrainConfig::default(),
            sim: sim.clone(),
            dropout: args.dropout.then_some((args.alpha, args.q)),
            seed,
        };
        let simulated = simulate_cell(&cell)?;
        let dir = out.join(format!("rep{rep}"));
        std::fs::create_dir_all(&dir)?;
        io::atomic_write(&dir.join("graph.edges"), &simulated.truth.to_edges_string())?;
        io::write_matrix_csv(&dir.join("truth_w0.csv"), &simulated.params.w0)?;
        io::write_matrix_csv(&dir.join("truth_w1.csv"), &simulated.params.w1)?;
        io::write_dataset_csv(&dir.join("data.csv"), &simulated.clean.data)?;
        if let Some(perturbed) = &simulated.perturbed {
            io::write_dataset_csv(&dir.join("data_dropout.csv"), perturbed)?;
        }
        let summary = serde_json::json!({
            "graph": graph.as_str(),
            "d": args.d,
            "n": args.n,
            "er_p": args.p,
            "ba_m": args.m,
            "rho": args.rho,
            "seed": seed,
            "edges": simulated.truth.num_edges(),
            "clamp_events": simulated.clean.clamp_events,
            "dropout": args.dropout.then_some(serde_json::json!({
                "slope": args.alpha,
                "percentile": args.q,
            })),
            "options": sim,
            "gamma": simulated.params.gamma.to_vec(),
            "delta": simulated.params.delta.to_vec(),
        });
        io::atomic_write(
            &dir.join("sim.json"),
            &serde_json::to_string_pretty(&summary)?,
        )?;
        println!(
            "rep{rep}: d={} edges={} n={} -> {}",
            args.d,
            simulated.truth.num_edges(),
            args.n,
            dir.display()
        );
    }
    Ok(())
}

#[derive(Args, Debug, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Central-path decay factor.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub mu0: Option<f64>,
    #[arg(long)]
    pub decay_interval: Option<usize>,
    #[arg(long)]
    pub lambda_group: Option<f64>,
    #[arg(long)]
    pub warm: Option<usize>,
    #[arg(long)]
    pub lambda_align: Option<f64>,
    /// Alignment norm: frobenius, l1, or none.
    #[arg(long)]
    pub align: Option<String>,
    /// Acyclicity mode: separate or coupled.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl TrainFlags {
    /// Apply explicit flags over a base config (file-provided or default).
    pub fn apply(&self, mut cfg: TrainConfig) -> Result<TrainConfig> {
        if let Some(epochs) = self.epochs {
            // re-derive schedule lengths unless explicitly pinned
            let derived = TrainConfig::for_epochs(epochs);
            cfg.epochs = epochs;
            cfg.decay_interval = derived.decay_interval;
            cfg.warm = derived.warm;
        }
        if let Some(v) = self.alpha {
            cfg.alpha = v;
        }
        if let Some(v) = self.mu0 {
            cfg.mu0 = v;
        }
        if let Some(v) = self.decay_interval {
            cfg.decay_interval = v;
        }
        if let Some(v) = self.lambda_group {
            cfg.lambda_group = v;
        }
        if let Some(v) = self.warm {
            cfg.warm = v;
        }
        if let Some(v) = self.lambda_align {
            cfg.lambda_align = v;
        }
        if let Some(v) = &self.align {
            cfg.align_norm = AlignNorm::parse(v)?;
        }
        if let Some(v) = &self.mode {
            cfg.acyclicity_mode = AcyclicityMode::parse(v)?;
        }
        if let Some(v) = self.s {
            cfg.s = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.weight_decay {
            cfg.weight_decay = v;
        }
        if let Some(v) = self.clip_norm {
            cfg.clip_norm = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        Ok(cfg)
    }
}

pub fn load_train_config(config: Option<&Path>, flags: &TrainFlags) -> Result<TrainConfig> {
    let base = match config {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => TrainConfig::default(),
    };
    let cfg = flags.apply(base)?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Input count CSV.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "zinb")]
    pub family: String,
    /// JSON file with a TrainConfig; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let family = Family::parse(&args.family)?;
    let cfg = load_train_config(args.config.as_deref(), &args.train)?;
    let data = io::read_dataset_csv(&args.data)?;
    let out = args.out.clone().unwrap_or_else(default_out);
    let result = fit(&data, family, &cfg)?;
    io::write_fit_outputs(&out, &result)?;
    let (h0, h1) = result.h_trace.last().copied().unwrap_or((f64::NAN, f64::NAN));
    println!(
        "nll={} h0={:e} h1={:e} seconds={:.3}",
        result.nll_trace.last().copied().unwrap_or(f64::NAN),
        h0,
        h1,
        result.elapsed_seconds
    );
    if let Some(reason) = &result.aborted {
        // trace files are already on disk for diagnosis
        return Err(Error::Aborted(reason.clone()));
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Directory containing w0.csv and w1.csv from a fit.
    #[arg(long)]
    pub fit: PathBuf,
    /// Truth graph in edge-list format.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let truth = DagGraph::from_edges_str(&std::fs::read_to_string(&args.truth)?)?;
    let w0 = io::read_matrix_csv(&args.fit.join("w0.csv"))?;
    let w1 = io::read_matrix_csv(&args.fit.join("w1.csv"))?;
    if args.threshold < 0.0 {
        return Err(Error::param("threshold must be >= 0"));
    }
    let scores = combine_scores(&w0, &w1)?;
    let pred = binarize(&scores, args.threshold);
    let report = evaluate(&pred, &scores, &Digraph::from(&truth))?;
    let out = args.out.clone().unwrap_or_else(default_out);
    io::write_eval_outputs(&out, &report)?;
    let mut adjacency = ndarray::Array2::zeros((pred.d, pred.d));
    for &(k, j) in &pred.edges {
        adjacency[(k, j)] = 1.0;
    }
    let acyclic = zico_core::graph::is_acyclic(&adjacency, 0.0)?;
    println!(
        "shd={} tpr={} fdr={} auprc={} auprc_ratio={} acyclic={}",
        report.shd, report.tpr, report.fdr, report.auprc, report.auprc_ratio, acyclic
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Comma-separated graph models (er, ba).
    #[arg(long, default_value = "er")]
    pub graphs: String,
    #[arg(long, default_value_t = 20)]
    pub d: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub p: f64,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    /// Comma-separated families (zinb, zip, nb, poisson).
    #[arg(long, default_value = "zinb")]
    pub families: String,
    /// Comma-separated sign configurations (++, --, +-, -+).
    #[arg(long, default_value = "+-")]
    pub signs: String,
    /// Comma-separated group-penalty weights.
    #[arg(long, default_value = "0.001")]
    pub lambda_groups: String,
    /// Comma-separated couplings: l1:<w>, frobenius:<w>, none, coupled.
    #[arg(long, default_value = "l1:0.1")]
    pub couplings: String,
    /// Comma-separated overlap fractions; `full` keeps the shared support.
    #[arg(long, default_value = "full")]
    pub rhos: String,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit on dropout-perturbed data.
    #[arg(long, default_value_t = false)]
    pub dropout: bool,
    #[arg(long, default_value_t = 1.0)]
    pub alpha_dropout: f64,
    #[arg(long, default_value_t = 65.0)]
    pub q: f64,
    #[arg(long, default_value_t = 1.5)]
    pub gamma_mean: f64,
    #[arg(long, default_value_t = 1.5)]
    pub delta_mean: f64,
    /// Concurrent grid cells (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Write 0 in the seconds column so repeated runs are byte-identical.
    #[arg(long, default_value_t = false)]
    pub no_timing: bool,
    #[command(flatten)]
    pub train: TrainFlags,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_list<T, F>(text: &str, what: &str, parse: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    let items: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(Error::param(format!("empty {what} list")));
    }
    items.into_iter().map(parse).collect()
}

fn parse_coupling(text: &str) -> Result<Coupling> {
    if text == "coupled" {
        return Ok(Coupling::coupled());
    }
    if text == "none" {
        return Ok(Coupling::separate(AlignNorm::None, 0.0));
    }
    let (norm, weight) = text
        .split_once(':')
        .ok_or_else(|| Error::param(format!("coupling `{text}` must be norm:weight, none, or coupled")))?;
    let weight: f64 = weight
        .parse()
        .map_err(|e| Error::param(format!("bad coupling weight in `{text}`: {e}")))?;
    Ok(Coupling::separate(AlignNorm::parse(norm)?, weight))
}

pub fn benchmark_spec(args: &BenchmarkArgs) -> Result<BenchmarkSpec> {
    let base_train = args.train.apply(TrainConfig::default())?;
    base_train.validate()?;
    let rhos = parse_list(&args.rhos, "rho", |s| {
        if s == "full" || s == "none" {
            Ok(None)
        } else {
            s.parse::<f64>()
                .map(Some)
                .map_err(|e| Error::param(format!("bad rho `{s}`: {e}")))
        }
    })?;
    Ok(BenchmarkSpec {
        graphs: parse_list(&args.graphs, "graph", GraphKind::parse)?,
        d: args.d,
        n: args.n,
        er_p: args.p,
        ba_m: args.m,
        families: parse_list(&args.families, "family", Family::parse)?,
        signs: parse_list(&args.signs, "sign", SignConfig::parse)?,
        lambda_groups: parse_list(&args.lambda_groups, "lambda_group", |s| {
            s.parse::<f64>()
                .map_err(|e| Error::param(format!("bad lambda_group `{s}`: {e}")))
        })?,
        couplings: parse_list(&args.couplings, "coupling", parse_coupling)?,
        rhos,
        replicates: args.reps,
        seed_base: args.seed,
        base_train,
        base_sim: SimOptions {
            gamma_mean: args.gamma_mean,
            delta_mean: args.delta_mean,
            ..SimOptions::default()
        },
        dropout: args.dropout.then_some((args.alpha_dropout, args.q)),
        jobs: args.jobs,
        record_timing: !args.no_timing,
    })
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    let spec = benchmark_spec(args)?;
    let rows = run_benchmark(&spec)?;
    for row in &rows {
        if let Some(err) = &row.error {
            eprintln!("{} rep{}: {err}", row.config_id, row.replicate);
        }
    }
    let out = args.out.clone().unwrap_or_else(default_out);
    std::fs::create_dir_all(&out)?;
    io::atomic_write(&out.join("results.csv"), &rows_to_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.report.is_none()).count();
    println!(
        "benchmark: {} rows ({} failed) -> {}",
        rows.len(),
        failed,
        out.join("results.csv").display()
    );
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Benchmark(args) => cmd_benchmark(args),
    }
}
