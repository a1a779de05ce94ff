//! The `dose` command-line pipeline: fit, score, eval and bench.
//!
//! Every command computes all of its outputs in memory first and only then
//! writes them, so a failing command leaves no partial files behind.

pub mod bench;
pub mod config;
pub mod output;
pub mod pipeline;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dose_core::model::DoseModel;
use dose_core::scores::read_scores;
use dose_core::synthetic::InjectMode;
use dose_core::{read_stat_table, DoseError};
use serde::Serialize;

use bench::BenchParams;
use config::PipelineConfig;
use output::Artifacts;

#[derive(Debug, Parser)]
#[command(name = "dose", version, about = "Density-of-states OOD detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a DoSE estimator on a training table.
    Fit(FitArgs),
    /// Score a statistics table with a fitted model.
    Score(ScoreArgs),
    /// AUROC, ECE and threshold report for score files.
    Eval(EvalArgs),
    /// Synthetic benchmarks.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub holdout_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Output stem; defaults to the table's file stem.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub in_scores: PathBuf,
    #[arg(long)]
    pub ood_scores: PathBuf,
    #[arg(long)]
    pub train_scores: Option<PathBuf>,
    #[arg(long)]
    pub val_scores: Option<PathBuf>,
    #[arg(long)]
    pub discard_fraction: Option<f64>,
    #[arg(long)]
    pub ece_bins: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    Gaussian,
    FlowToy,
    Degrade,
    Bound,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Uninformative,
    Obfuscatory,
    Both,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub which: BenchKind,
    /// JSON file of benchmark parameters; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Gaussian: points drawn. Flow toy and degrade: points per class.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub kde_n: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
    #[arg(long)]
    pub n_mc: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
}

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad input or violated contract: exit 2.
    Input(DoseError),
    /// Anything else, including failures while writing outputs: exit 1.
    Internal(DoseError),
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: String,
}

impl Failure {
    fn classify(e: DoseError) -> Self {
        if e.is_input_error() {
            Failure::Input(e)
        } else {
            Failure::Internal(e)
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => 2,
            Failure::Internal(_) => 1,
        }
    }

    pub fn error(&self) -> &DoseError {
        match self {
            Failure::Input(e) | Failure::Internal(e) => e,
        }
    }

    pub fn to_json(&self) -> String {
        let e = self.error();
        serde_json::to_string(&ErrorJson {
            error: e.kind(),
            message: e.to_string(),
        })
        .expect("error JSON serializes")
    }
}

impl From<DoseError> for Failure {
    fn from(e: DoseError) -> Self {
        Failure::classify(e)
    }
}

fn finish(artifacts: Artifacts, out: &Path) -> Result<Vec<PathBuf>, Failure> {
    artifacts.write(out).map_err(Failure::Internal)
}

fn fit_config(args: &FitArgs) -> Result<PipelineConfig, DoseError> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(p) = &args.train {
        cfg.train = Some(p.clone());
    }
    if let Some(p) = &args.val {
        cfg.val = Some(p.clone());
    }
    if let Some(f) = args.holdout_fraction {
        cfg.holdout_fraction = f;
    }
    Ok(cfg)
}

fn eval_config(args: &EvalArgs) -> Result<PipelineConfig, DoseError> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(f) = args.discard_fraction {
        cfg.discard_fraction = f;
    }
    if let Some(b) = args.ece_bins {
        cfg.ece_bins = b;
    }
    Ok(cfg)
}

pub fn bench_params(args: &BenchArgs) -> Result<BenchParams, DoseError> {
    let mut p = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| DoseError::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text)?
        }
        None => BenchParams::default(),
    };
    macro_rules! set {
        ($($f:ident => $t:ident),*) => {$(
            if let Some(v) = args.$f.clone() {
                p.$t = v;
            }
        )*};
    }
    set!(seed => seed, dim => dim, bins => bins, kde_n => kde_n, delta => delta, sigma => sigma,
         nu => nu, grid => grid, k => ks, n_mc => n_mc, s => s_values, epsilon => epsilons);
    if args.n.is_some() {
        p.n = args.n;
    }
    if let Some(m) = args.mode {
        p.modes = match m {
            ModeArg::Uninformative => vec![InjectMode::Uninformative],
            ModeArg::Obfuscatory => vec![InjectMode::Obfuscatory],
            ModeArg::Both => vec![InjectMode::Uninformative, InjectMode::Obfuscatory],
        };
    }
    Ok(p)
}

/// Run one command, returning the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>, Failure> {
    match &cli.command {
        Command::Fit(args) => {
            let cfg = fit_config(args)?;
            let fitted = pipeline::fit(&cfg)?;
            finish(fitted.artifacts()?, &args.out)
        }
        Command::Score(args) => {
            let model = DoseModel::load(&args.model)?;
            let table = read_stat_table(&args.table, None)?;
            let scores = pipeline::score(&model, &table)?;
            let stem = match &args.name {
                Some(n) => n.clone(),
                None => args
                    .table
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "table".into()),
            };
            let mut a = Artifacts::default();
            a.scores(&format!("{stem}.scores.csv"), scores);
            finish(a, &args.out)
        }
        Command::Eval(args) => {
            let cfg = eval_config(args)?;
            let load = |p: &Option<PathBuf>| p.as_deref().map(read_scores).transpose();
            let ins = read_scores(&args.in_scores)?;
            let outs = read_scores(&args.ood_scores)?;
            let train = load(&args.train_scores)?;
            let val = load(&args.val_scores)?;
            let report = pipeline::eval(
                &cfg,
                &pipeline::EvalInputs {
                    in_scores: &ins,
                    ood_scores: &outs,
                    train_scores: train.as_ref(),
                    val_scores: val.as_ref(),
                },
            )?;
            finish(report.artifacts()?, &args.out)
        }
        Command::Bench(args) => {
            let p = bench_params(args)?;
            let a = match args.which {
                BenchKind::Gaussian => bench::gaussian(&p)?.artifacts()?,
                BenchKind::FlowToy => bench::flow_toy(&p)?.artifacts()?,
                BenchKind::Degrade => bench::degrade(&p)?.artifacts()?,
                BenchKind::Bound => bench::bound(&p)?.artifacts()?,
            };
            finish(a, &args.out)
        }
    }
}
