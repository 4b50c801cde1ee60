//! Batched, paired trials: every method in the roster solves the same seeded
//! instance stream, and the per-method averages are folded in a fixed order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::par::{self, Execution};
use crate::problem::{
    generate_instance, load_instance_dir, select_delta, DataError, DeltaSelection, GenSpec, Instance, ObservedMatrix,
    ProblemError,
};
use crate::solvers::{solve, SolverConfig, SolverError};
use crate::trace::{export_trace, RunSummary, RunTrace, StopReason, TraceError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("sample {sample}, {method}: {source}")]
    Solver {
        sample: usize,
        method: String,
        source: SolverError,
    },
    #[error("sample {sample}: {method} saw a different instance")]
    Pairing { sample: usize, method: String },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub enum InstanceSource {
    /// Sample `i` uses the spec with seed `spec.seed + i`.
    Generated(GenSpec),
    /// One saved instance directory per sample.
    Directories(Vec<PathBuf>),
}

#[derive(Debug, Clone)]
pub enum DeltaPolicy {
    Fixed(f64),
    /// `δ = c · ‖X_Ω‖_F`: the radius `c` for data rescaled to `‖X_Ω‖_F = 1`.
    Relative(f64),
    Selected(DeltaSelection),
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub source: InstanceSource,
    /// Each entry carries its method and options; its stop rule is replaced by
    /// `gap_target` and `max_seconds`.
    pub roster: Vec<SolverConfig>,
    pub samples: usize,
    pub gap_target: f64,
    /// Runs stopped by this limit are censored.
    pub max_seconds: f64,
    pub max_iters: usize,
    pub delta: DeltaPolicy,
    /// Runs fan out over a worker pool under `Parallel`.
    pub execution: Execution,
}

impl ExperimentSpec {
    pub fn new(source: InstanceSource, roster: Vec<SolverConfig>, samples: usize, delta: DeltaPolicy) -> Self {
        Self {
            source,
            roster,
            samples,
            gap_target: 10f64.powf(-2.5),
            max_seconds: f64::INFINITY,
            max_iters: 100_000,
            delta,
            execution: Execution::Sequential,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Invalid(m));
        if self.samples == 0 {
            return bad("samples must be at least 1".into());
        }
        if self.roster.is_empty() {
            return bad("the method roster is empty".into());
        }
        if let InstanceSource::Directories(dirs) = &self.source {
            if dirs.len() < self.samples {
                return bad(format!("{} samples requested but only {} instance directories given", self.samples, dirs.len()));
            }
        }
        if !(self.gap_target > 0.0) {
            return bad(format!("gap target must be positive, got {}", self.gap_target));
        }
        match self.delta {
            DeltaPolicy::Fixed(d) | DeltaPolicy::Relative(d) if !(d > 0.0 && d.is_finite()) => {
                bad(format!("nuclear-norm radius must be positive, got {d}"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SampleInfo {
    pub index: usize,
    pub seed: Option<u64>,
    pub fingerprint: u64,
    pub delta: f64,
    /// Time spent choosing `δ`; not part of any run time.
    pub delta_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub sample: usize,
    pub method: String,
    pub fingerprint: u64,
    pub censored: bool,
    pub trace: RunTrace,
}

impl RunRecord {
    pub fn summary(&self) -> &RunSummary {
        self.trace.summary.as_ref().expect("finished runs carry a summary")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodAggregate {
    pub method: String,
    pub runs: usize,
    pub censored: usize,
    pub mean_final_rank: f64,
    pub mean_max_rank: f64,
    /// Over uncensored runs; NaN when every run was censored.
    pub mean_seconds: f64,
    pub violations: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub samples: Vec<SampleInfo>,
    pub aggregates: Vec<MethodAggregate>,
    /// Ordered by (sample, roster position).
    pub runs: Vec<RunRecord>,
}

fn load_sample(source: &InstanceSource, index: usize) -> Result<(ObservedMatrix, Option<u64>), ExperimentError> {
    match source {
        InstanceSource::Generated(spec) => {
            let seed = spec.seed.wrapping_add(index as u64);
            let g = generate_instance(&GenSpec { seed, ..spec.clone() })?;
            Ok((g.observed, Some(seed)))
        }
        InstanceSource::Directories(dirs) => {
            let (obs, meta) = load_instance_dir(&dirs[index])?;
            Ok((obs, meta.seed))
        }
    }
}

fn choose_delta(policy: &DeltaPolicy, observed: &ObservedMatrix) -> Result<(f64, f64), ExperimentError> {
    Ok(match policy {
        DeltaPolicy::Fixed(d) => (*d, 0.0),
        DeltaPolicy::Relative(c) => (c * observed.frobenius_norm(), 0.0),
        DeltaPolicy::Selected(sel) => {
            let start = Instant::now();
            let choice = select_delta(observed, sel)?;
            (choice.delta, start.elapsed().as_secs_f64())
        }
    })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Solves every (sample, method) pair and aggregates per method.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let mut instances = Vec::with_capacity(spec.samples);
    let mut samples = Vec::with_capacity(spec.samples);
    for index in 0..spec.samples {
        let (observed, seed) = load_sample(&spec.source, index)?;
        let (delta, delta_seconds) = choose_delta(&spec.delta, &observed)?;
        let mut instance = Instance::new(observed, delta)?;
        instance.seed = seed;
        samples.push(SampleInfo { index, seed, fingerprint: instance.observed().fingerprint(), delta, delta_seconds });
        instances.push(instance);
    }
    let jobs: Vec<(usize, usize)> =
        (0..spec.samples).flat_map(|s| (0..spec.roster.len()).map(move |m| (s, m))).collect();
    let results = par::map_ordered(spec.execution, &jobs, |&(s, m)| {
        let instance = &instances[s];
        let mut config = spec.roster[m].clone();
        config.stop.gap_target = spec.gap_target;
        config.stop.max_seconds = spec.max_seconds;
        config.stop.max_iters = spec.max_iters;
        let method = config.method.to_string();
        let fingerprint = instance.observed().fingerprint();
        solve(instance, &config)
            .map(|out| {
                let censored = out.summary().reason != StopReason::GapReached && out.summary().reason != StopReason::Optimal;
                RunRecord { sample: s, method: method.clone(), fingerprint, censored, trace: out.trace }
            })
            .map_err(|source| ExperimentError::Solver { sample: s, method, source })
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        let run = r?;
        if run.fingerprint != samples[run.sample].fingerprint {
            return Err(ExperimentError::Pairing { sample: run.sample, method: run.method });
        }
        runs.push(run);
    }
    let aggregates = (0..spec.roster.len())
        .map(|m| {
            let mine: Vec<&RunRecord> = runs.iter().skip(m).step_by(spec.roster.len()).collect();
            MethodAggregate {
                method: mine[0].method.clone(),
                runs: mine.len(),
                censored: mine.iter().filter(|r| r.censored).count(),
                mean_final_rank: mean(mine.iter().map(|r| r.summary().final_rank as f64)),
                mean_max_rank: mean(mine.iter().map(|r| r.summary().max_rank as f64)),
                mean_seconds: mean(mine.iter().filter(|r| !r.censored).map(|r| r.summary().seconds)),
                violations: mine.iter().map(|r| r.summary().violations).sum(),
            }
        })
        .collect();
    Ok(ExperimentReport { samples, aggregates, runs })
}

fn file_label(method: &str) -> String {
    method.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

impl ExperimentReport {
    /// Flat `key=value` lines, one per statistic.
    pub fn to_text(&self) -> String {
        let mut kv = BTreeMap::new();
        kv.insert("samples".to_string(), self.samples.len().to_string());
        kv.insert("gap".to_string(), "relative: (f - B) / B for B > 0, else f - B".to_string());
        for s in &self.samples {
            let p = format!("sample.{}", s.index);
            kv.insert(format!("{p}.delta"), format!("{:.6e}", s.delta));
            kv.insert(format!("{p}.delta_seconds"), format!("{:.3}", s.delta_seconds));
            kv.insert(format!("{p}.fingerprint"), format!("{:016x}", s.fingerprint));
            if let Some(seed) = s.seed {
                kv.insert(format!("{p}.seed"), seed.to_string());
            }
        }
        for a in &self.aggregates {
            let p = format!("method.{}", a.method);
            kv.insert(format!("{p}.runs"), a.runs.to_string());
            kv.insert(format!("{p}.censored"), a.censored.to_string());
            kv.insert(format!("{p}.mean_final_rank"), format!("{:.2}", a.mean_final_rank));
            kv.insert(format!("{p}.mean_max_rank"), format!("{:.2}", a.mean_max_rank));
            kv.insert(format!("{p}.mean_seconds"), format!("{:.3}", a.mean_seconds));
            kv.insert(format!("{p}.violations"), a.violations.to_string());
        }
        for r in &self.runs {
            let s = r.summary();
            let p = format!("run.{}.{}", r.sample, r.method);
            kv.insert(format!("{p}.reason"), s.reason.label().to_string());
            kv.insert(format!("{p}.iterations"), s.iterations.to_string());
            kv.insert(format!("{p}.final_rank"), s.final_rank.to_string());
            kv.insert(format!("{p}.max_rank"), s.max_rank.to_string());
            kv.insert(format!("{p}.seconds"), format!("{:.3}", s.seconds));
            kv.insert(format!("{p}.final_gap"), format!("{:.3e}", s.final_gap));
        }
        let mut out = String::new();
        for (k, v) in kv {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    /// Writes `report.txt` and one trace CSV per run into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), ExperimentError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| ExperimentError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let report = dir.join("report.txt");
        std::fs::write(&report, self.to_text()).map_err(io(&report))?;
        for r in &self.runs {
            let path = dir.join(format!("trace-{}-{}.csv", r.sample, file_label(&r.method)));
            export_trace(&r.trace, &path)?;
        }
        Ok(())
    }
}
