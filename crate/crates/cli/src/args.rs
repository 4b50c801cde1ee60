use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcfw_core::kv::parse_flat;
use mcfw_core::par::Execution;
use mcfw_core::solvers::{parse_gamma, StepRule};

use crate::failure::Failure;

#[derive(Debug, Parser)]
#[command(name = "mcfw", version, about = "Low-rank matrix completion over the nuclear-norm ball")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a planted low-rank instance and save it to a directory.
    Generate(GenerateArgs),
    /// Run one solver on one instance.
    Solve(SolveArgs),
    /// Choose the radius on a held-out part of the observations.
    SelectDelta(SelectDeltaArgs),
    /// Run a roster of solvers on a paired stream of instances.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExecArg {
    Sequential,
    Parallel,
}

impl From<ExecArg> for Execution {
    fn from(e: ExecArg) -> Self {
        match e {
            ExecArg::Sequential => Execution::Sequential,
            ExecArg::Parallel => Execution::Parallel,
        }
    }
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct GenerateArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Planted rank.
    #[arg(long)]
    pub r: usize,
    #[arg(long)]
    pub snr: f64,
    /// Probability that an entry is observed.
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Radius stored with the instance.
    #[arg(long, conflicts_with = "delta_rel")]
    pub delta: Option<f64>,
    /// Radius as a multiple of the norm of the observed entries.
    #[arg(long)]
    pub delta_rel: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// key=value file supplying defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Instance directory written by `generate`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Triplet file, one `i j value` per line, 1-based.
    #[arg(long)]
    pub triplets: Option<PathBuf>,
    /// Dimensions for --triplets, as MxN.
    #[arg(long, value_parser = parse_dims)]
    pub dims: Option<(usize, usize)>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// fw, if, if-opt, if-rank, away or away-atomic.
    #[arg(long, default_value = "fw")]
    pub method: String,
    #[arg(long, default_value = "0", value_parser = parse_gamma)]
    pub gamma1: f64,
    /// A number or `inf`.
    #[arg(long, default_value = "inf", value_parser = parse_gamma)]
    pub gamma2: f64,
    #[arg(long, conflicts_with = "delta_rel")]
    pub delta: Option<f64>,
    #[arg(long)]
    pub delta_rel: Option<f64>,
    /// Target relative optimality gap.
    #[arg(long, default_value_t = 10f64.powf(-2.5))]
    pub gap: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    #[arg(long, default_value = "inf")]
    pub max_seconds: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// exact or quad.
    #[arg(long, default_value = "exact")]
    pub step: StepRule,
    #[arg(long, value_enum, default_value = "parallel")]
    pub execution: ExecArg,
    /// Trace CSV destination.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct SelectDeltaArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 10)]
    pub grid_points: usize,
    /// Iterations per radius.
    #[arg(long, default_value_t = 400)]
    pub budget: usize,
    /// Stop after this many consecutive worse radii; 0 sweeps the whole grid.
    #[arg(long, default_value_t = 2)]
    pub patience: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Save a copy of the instance with the chosen radius.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true, allow_negative_numbers = true)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 200)]
    pub m: usize,
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub r: usize,
    #[arg(long, default_value_t = 5.0)]
    pub snr: f64,
    #[arg(long, default_value_t = 0.1)]
    pub rho: f64,
    /// Sample i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Saved instance directories, comma separated, used instead of generation.
    #[arg(long, value_delimiter = ',')]
    pub inputs: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    /// Comma-separated roster, e.g. `fw,if-(0,inf),away-atomic`.
    #[arg(long, default_value = "fw,if-(0,inf)")]
    pub methods: String,
    #[arg(long, conflicts_with = "delta_rel")]
    pub delta: Option<f64>,
    /// Without --delta or --delta-rel the radius is selected per sample.
    #[arg(long)]
    pub delta_rel: Option<f64>,
    #[arg(long, default_value_t = 10f64.powf(-2.5))]
    pub gap: f64,
    #[arg(long, default_value_t = 100_000)]
    pub max_iters: usize,
    /// Runs stopped by this limit are censored.
    #[arg(long, default_value = "inf")]
    pub max_seconds: f64,
    #[arg(long, default_value = "exact")]
    pub step: StepRule,
    #[arg(long, value_enum, default_value = "parallel")]
    pub execution: ExecArg,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let (m, n) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected MxN, got `{s}`"))?;
    let m = m.trim().parse().map_err(|_| format!("bad row count in `{s}`"))?;
    let n = n.trim().parse().map_err(|_| format!("bad column count in `{s}`"))?;
    Ok((m, n))
}

/// Splits on commas outside parentheses, so `if-(0,inf)` stays whole.
pub fn split_methods(list: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in list.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out.into_iter().map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn config_path(argv: &[String]) -> Option<String> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

/// Parses argv. Keys from a `--config` file are spliced in ahead of the
/// explicit flags, so the flags win.
pub fn parse(argv: &[String]) -> Result<Cli, Failure> {
    let mut full = argv.to_vec();
    if let Some(path) = config_path(argv) {
        let text = fs::read_to_string(&path).map_err(|e| Failure::user(format!("{path}: {e}")))?;
        let map = parse_flat(&text).map_err(|e| Failure::user(format!("{path}: {e}")))?;
        let at = 2.min(full.len());
        let injected = map
            .into_iter()
            .filter(|(k, _)| k != "config")
            .flat_map(|(k, v)| [format!("--{}", k.replace('_', "-")), v]);
        full.splice(at..at, injected);
    }
    Cli::try_parse_from(full).map_err(Failure::Usage)
}
