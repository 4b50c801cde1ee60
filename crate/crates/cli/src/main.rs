//! `mcfw`: generate instances, pick a radius, run single solves and paired
//! benchmarks.

mod args;
mod failure;

use std::path::Path;
use std::process::ExitCode;

use mcfw_core::experiment::{run_experiment, DeltaPolicy, ExperimentSpec, InstanceSource};
use mcfw_core::problem::{
    generate_instance, load_instance_dir, load_triplets, save_instance_dir, select_delta, DeltaSelection, GenSpec,
    Instance, InstanceMetadata, ObservedMatrix,
};
use mcfw_core::solvers::{solve, SolverConfig};
use mcfw_core::trace::export_trace;

use args::{BenchArgs, Cli, Command, GenerateArgs, InputArgs, SelectDeltaArgs, SolveArgs};
use failure::Failure;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match args::parse(&argv) {
        Ok(cli) => cli,
        Err(Failure::Usage(e)) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
        Err(f) => return report(f),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}

fn report(f: Failure) -> ExitCode {
    eprintln!("error: {f}");
    ExitCode::from(f.exit_code())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Solve(a) => solve_cmd(a),
        Command::SelectDelta(a) => select_delta_cmd(a),
        Command::Bench(a) => bench(a),
    }
}

fn positive(name: &str, v: Option<f64>) -> Result<Option<f64>, Failure> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(Failure::user(format!("--{name} must be positive, got {x}"))),
        _ => Ok(v),
    }
}

fn generate(a: GenerateArgs) -> Result<(), Failure> {
    positive("delta", a.delta)?;
    positive("delta-rel", a.delta_rel)?;
    let spec = GenSpec { m: a.m, n: a.n, rank: a.r, snr: a.snr, rho: a.rho, seed: a.seed };
    spec.validate()?;
    let g = generate_instance(&spec)?;
    let delta = a.delta.or(a.delta_rel.map(|c| c * g.observed.frobenius_norm()));
    let meta = InstanceMetadata::describe(&g.observed, delta, Some(a.seed));
    save_instance_dir(&a.out, &g.observed, &meta)?;
    println!(
        "wrote {}: m={} n={} omega={} delta={}",
        a.out.display(),
        meta.m,
        meta.n,
        meta.nnz,
        delta.map_or("none".to_string(), |d| d.to_string())
    );
    Ok(())
}

fn load(input: &InputArgs) -> Result<(ObservedMatrix, Option<f64>), Failure> {
    match (&input.input, &input.triplets) {
        (Some(dir), None) => {
            let (obs, meta) = load_instance_dir(dir)?;
            Ok((obs, meta.delta))
        }
        (None, Some(file)) => Ok((load_triplets(file, input.dims)?, None)),
        (None, None) => Err(Failure::user("no data: pass --input DIR or --triplets FILE")),
        (Some(_), Some(_)) => Err(Failure::user("pass only one of --input and --triplets")),
    }
}

fn solve_cmd(a: SolveArgs) -> Result<(), Failure> {
    positive("delta", a.delta)?;
    positive("delta-rel", a.delta_rel)?;
    let config = a.solver_config()?;
    config.validate_options()?;
    let (obs, stored) = load(&a.input)?;
    let delta = a
        .delta
        .or(a.delta_rel.map(|c| c * obs.frobenius_norm()))
        .or(stored)
        .ok_or_else(|| Failure::user("no radius: pass --delta or --delta-rel, or run select-delta first"))?;
    let instance = Instance::new(obs, delta)?;
    let outcome = solve(&instance, &config)?;
    if let Some(path) = &a.out {
        export_trace(&outcome.trace, path)?;
    }
    let s = outcome.summary();
    println!(
        "method={} reason={} iterations={} f={:.10e} B={:.10e} gap={:.6e} rank={} max_rank={} seconds={:.3}",
        s.method,
        s.reason.label(),
        s.iterations,
        s.final_f,
        s.final_bound,
        s.final_gap,
        s.final_rank,
        s.max_rank,
        s.seconds
    );
    if s.violations > 0 {
        eprintln!("warning: {} guarantee checks failed during the run", s.violations);
    }
    Ok(())
}

fn selection(a: &SelectDeltaArgs) -> DeltaSelection {
    DeltaSelection {
        holdout_fraction: a.holdout,
        grid_points: a.grid_points,
        budget_per_delta: a.budget,
        patience: if a.patience == 0 { None } else { Some(a.patience) },
        seed: a.seed,
        ..DeltaSelection::default()
    }
}

fn select_delta_cmd(a: SelectDeltaArgs) -> Result<(), Failure> {
    let (obs, _) = load(&a.input)?;
    let choice = select_delta(&obs, &selection(&a))?;
    for (d, err) in choice.grid.iter().zip(&choice.holdout_errors) {
        println!("delta={d:.6e} holdout_mse={err:.6e}");
    }
    println!(
        "selected delta={} train={} holdout={} seconds={:.3}",
        choice.delta, choice.train_size, choice.holdout_size, choice.seconds
    );
    if let Some(dir) = &a.out {
        let meta = InstanceMetadata::describe(&obs, Some(choice.delta), None);
        save_instance_dir(dir, &obs, &meta)?;
    }
    Ok(())
}

fn bench(a: BenchArgs) -> Result<(), Failure> {
    positive("delta", a.delta)?;
    positive("delta-rel", a.delta_rel)?;
    let roster = a.roster()?;
    for cfg in &roster {
        cfg.validate_options()?;
    }
    let source = if a.inputs.is_empty() {
        let spec = GenSpec { m: a.m, n: a.n, rank: a.r, snr: a.snr, rho: a.rho, seed: a.seed };
        spec.validate()?;
        InstanceSource::Generated(spec)
    } else {
        for dir in &a.inputs {
            require_dir(dir)?;
        }
        InstanceSource::Directories(a.inputs.clone())
    };
    let delta = match (a.delta, a.delta_rel) {
        (Some(d), _) => DeltaPolicy::Fixed(d),
        (None, Some(c)) => DeltaPolicy::Relative(c),
        (None, None) => DeltaPolicy::Selected(DeltaSelection { seed: a.seed, ..DeltaSelection::default() }),
    };
    let mut spec = ExperimentSpec::new(source, roster, a.samples, delta);
    spec.gap_target = a.gap;
    spec.max_seconds = a.max_seconds;
    spec.max_iters = a.max_iters;
    spec.execution = a.execution.into();
    spec.validate()?;
    let report = run_experiment(&spec)?;
    report.write_to(&a.out)?;
    for agg in &report.aggregates {
        println!(
            "method={} runs={} censored={} mean_final_rank={:.2} mean_max_rank={:.2} mean_seconds={:.3} violations={}",
            agg.method, agg.runs, agg.censored, agg.mean_final_rank, agg.mean_max_rank, agg.mean_seconds, agg.violations
        );
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn require_dir(dir: &Path) -> Result<(), Failure> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Failure::user(format!("{}: no such instance directory", dir.display())))
    }
}

impl SolveArgs {
    fn solver_config(&self) -> Result<SolverConfig, Failure> {
        let method = mcfw_core::solvers::Method::from_name(&self.method, self.gamma1, self.gamma2)
            .map_err(Failure::user)?;
        let mut cfg = SolverConfig::new(method);
        cfg.step_rule = self.step;
        cfg.seed = self.seed;
        cfg.stop.gap_target = self.gap;
        cfg.stop.max_iters = self.max_iters;
        cfg.stop.max_seconds = self.max_seconds;
        cfg.execution = self.execution.into();
        Ok(cfg)
    }
}

impl BenchArgs {
    fn roster(&self) -> Result<Vec<SolverConfig>, Failure> {
        args::split_methods(&self.methods)
            .iter()
            .map(|name| {
                let method = name.parse().map_err(Failure::user)?;
                let mut cfg = SolverConfig::new(method);
                cfg.step_rule = self.step;
                cfg.seed = self.seed;
                Ok(cfg)
            })
            .collect()
    }
}
