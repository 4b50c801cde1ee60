//! Acceptance suite. One test drives every criterion in sequence so the timed
//! criteria are not disturbed by sibling tests. One line per criterion goes
//! straight to stderr, past the harness capture, and the test fails if any
//! line failed.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mcfw_core::experiment::{run_experiment, DeltaPolicy, ExperimentSpec, InstanceSource};
use mcfw_core::face::{away_alpha_stop, general_alpha_stop};
use mcfw_core::linalg::{SymmetricSmall, ThinSvd};
use mcfw_core::par::Execution;
use mcfw_core::problem::{generate_instance, select_delta, DeltaSelection, GenSpec, Instance};
use mcfw_core::solvers::{solve, Method, SolverConfig, StepRule};
use mcfw_core::trace::{RunTrace, StepKind};

const IF_0_INF: Method = Method::InFace { gamma1: 0.0, gamma2: f64::INFINITY };

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

struct Run {
    label: String,
    method: Method,
    step_rule: StepRule,
    delta: f64,
    scale: f64,
    trace: RunTrace,
    violations: usize,
}

fn config(method: Method, step_rule: StepRule, gap: f64, max_iters: usize) -> SolverConfig {
    let mut cfg = SolverConfig::new(method);
    cfg.step_rule = step_rule;
    cfg.stop.gap_target = gap;
    cfg.stop.max_iters = max_iters;
    cfg
}

fn run(label: String, inst: &Instance, cfg: &SolverConfig) -> Run {
    let out = solve(inst, cfg).unwrap_or_else(|e| panic!("{label}: {e}"));
    Run {
        label,
        method: cfg.method,
        step_rule: cfg.step_rule,
        delta: inst.delta(),
        scale: inst.scale(),
        violations: out.violations.len(),
        trace: out.trace,
    }
}

/// `2 L̄ D̄²` with `L̄ = scale` and `D̄ = 2δ`.
fn curvature(r: &Run) -> f64 {
    8.0 * r.delta * r.delta * r.scale
}

fn gaps_ok(r: &Run) -> Result<(), String> {
    let c = curvature(r);
    let tol = |x: f64| x * 1e-9 + 1e-12;
    for rec in &r.trace.records {
        let gap = rec.f - rec.bound;
        let limit = match r.method {
            Method::FrankWolfe if rec.k >= 1 => c / rec.k as f64,
            Method::InFace { gamma1, gamma2 } if gamma1.is_finite() && gamma2.is_finite() => {
                let n = &rec.counters;
                let weight = gamma1 * n.a as f64 + gamma2 * n.b as f64 + n.c as f64;
                c / (4.0 + weight)
            }
            Method::InFaceOptimization => c / (4.0 + rec.counters.c as f64),
            _ => continue,
        };
        if gap > limit + tol(limit) {
            return Err(format!("{} k={} gap {gap:.3e} > {limit:.3e}", r.label, rec.k));
        }
    }
    Ok(())
}

/// `1/(f_{k+1} − B_k) ≥ 1/(f_k − B_k) + 1/(2 L̄ D̄²)` on every regular step;
/// record `k+1` carries the bound computed at iterate `k`.
fn reciprocal_ok(r: &Run) -> Result<usize, String> {
    let c = curvature(r);
    let mut checked = 0;
    for w in r.trace.records.windows(2) {
        let (prev, next) = (&w[0], &w[1]);
        if next.step != StepKind::FrankWolfe {
            continue;
        }
        let b = next.bound;
        let (g0, g1) = (prev.f - b, next.f - b);
        if g0 <= 0.0 {
            continue;
        }
        checked += 1;
        let lhs = 1.0 / g1;
        let rhs = 1.0 / g0 + 1.0 / c;
        if g1 > 0.0 && lhs < rhs * (1.0 - 1e-9) {
            return Err(format!("{} k={} 1/gap {lhs:.6e} < {rhs:.6e}", r.label, next.k));
        }
    }
    Ok(checked)
}

fn rank_ok(r: &Run) -> Result<(), String> {
    for rec in &r.trace.records {
        let n = &rec.counters;
        let limit = rec.k as i64 + 1 - 2 * n.a as i64 - n.b as i64;
        if rec.rank as i64 > limit {
            return Err(format!("{} k={} rank {} > {limit}", r.label, rec.k, rec.rank));
        }
    }
    Ok(())
}

fn bound_ok(label: &str, trace: &RunTrace) -> Result<(), String> {
    let f_final = trace.records.last().map(|r| r.f).unwrap_or(f64::INFINITY);
    let mut prev = f64::NEG_INFINITY;
    for rec in &trace.records {
        if rec.bound < prev {
            return Err(format!("{label} k={} B decreased {prev:.12e} -> {:.12e}", rec.k, rec.bound));
        }
        if rec.bound > f_final + 1e-10 {
            return Err(format!("{label} k={} B {:.12e} above final f {f_final:.12e}", rec.k, rec.bound));
        }
        prev = rec.bound;
    }
    Ok(())
}

fn suite_instances() -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20)
        .map(|i| {
            let m = rng.gen_range(30..=200);
            let n = rng.gen_range(30..=200);
            let spec = GenSpec {
                m,
                n,
                rank: rng.gen_range(1..=8),
                snr: rng.gen_range(1.0..6.0),
                rho: if i % 2 == 0 { 0.1 } else { 0.3 },
                seed: 100 + i as u64,
            };
            let g = generate_instance(&spec).unwrap();
            let delta = rng.gen_range(0.5..4.0) * g.observed.frobenius_norm();
            Instance::new(g.observed, delta).unwrap()
        })
        .collect()
}

fn suite_roster() -> Vec<(Method, StepRule)> {
    vec![
        (Method::FrankWolfe, StepRule::ExactLineSearch),
        (Method::FrankWolfe, StepRule::QuadraticApprox),
        (Method::InFace { gamma1: 0.0, gamma2: 1.0 }, StepRule::ExactLineSearch),
        (Method::InFace { gamma1: 1.0, gamma2: 1.0 }, StepRule::QuadraticApprox),
        (Method::InFaceOptimization, StepRule::ExactLineSearch),
        (IF_0_INF, StepRule::QuadraticApprox),
        (Method::InFaceRankStrategy, StepRule::ExactLineSearch),
        (Method::AwayNatural, StepRule::ExactLineSearch),
        (Method::AwayAtomic, StepRule::QuadraticApprox),
    ]
}

fn rule_label(r: StepRule) -> &'static str {
    match r {
        StepRule::ExactLineSearch => "exact",
        StepRule::QuadraticApprox => "quad",
    }
}

fn guarantee_suite(runs: &mut Vec<Run>) -> Vec<Verdict> {
    let start = Instant::now();
    for (i, inst) in suite_instances().iter().enumerate() {
        for (method, rule) in suite_roster() {
            let cfg = config(method, rule, 1e-3, 200);
            runs.push(run(format!("suite{i}/{method}/{}", rule_label(rule)), inst, &cfg));
        }
    }
    let seconds = start.elapsed().as_secs_f64();

    let guaranteed = |r: &&Run| match r.method {
        Method::FrankWolfe | Method::InFaceOptimization => true,
        Method::InFace { gamma1, gamma2 } => gamma1.is_finite() && gamma2.is_finite(),
        _ => false,
    };
    let mut errors: Vec<String> = runs.iter().filter(guaranteed).filter_map(|r| gaps_ok(r).err()).collect();
    let internal: usize = runs.iter().map(|r| r.violations).sum();
    if internal > 0 {
        errors.push(format!("{internal} violations flagged by the solvers"));
    }
    let checked = runs.iter().filter(guaranteed).count();
    let c1 = Verdict {
        id: 1,
        title: "sublinear guarantees on 20 random instances",
        pass: errors.is_empty() && seconds < 120.0,
        detail: match errors.first() {
            None => format!("{checked} guaranteed runs, {} runs total, {seconds:.1}s", runs.len()),
            Some(e) => format!("{} failures, first: {e}; {seconds:.1}s", errors.len()),
        },
    };

    let mut steps = 0;
    let mut errors = Vec::new();
    for r in runs.iter().filter(|r| r.step_rule == StepRule::QuadraticApprox) {
        match reciprocal_ok(r) {
            Ok(n) => steps += n,
            Err(e) => errors.push(e),
        }
    }
    let c2 = Verdict {
        id: 2,
        title: "reciprocal gap growth at quadratic-rule FW steps",
        pass: errors.is_empty() && steps > 0,
        detail: match errors.first() {
            None => format!("{steps} steps checked"),
            Some(e) => format!("{} failures, first: {e}", errors.len()),
        },
    };

    let errors: Vec<String> = runs.iter().filter_map(|r| rank_ok(r).err()).collect();
    let iterations: usize = runs.iter().map(|r| r.trace.records.len()).sum();
    let c3 = Verdict {
        id: 3,
        title: "rank accounting on every iteration",
        pass: errors.is_empty(),
        detail: match errors.first() {
            None => format!("{iterations} iterates over {} runs", runs.len()),
            Some(e) => format!("{} failures, first: {e}", errors.len()),
        },
    };
    vec![c1, c2, c3]
}

fn svd_maintenance(runs: &mut Vec<Run>) -> Verdict {
    let g = generate_instance(&GenSpec { m: 50, n: 40, rank: 5, snr: 3.0, rho: 0.3, seed: 11 }).unwrap();
    let delta = 2.0 * g.observed.frobenius_norm();
    let inst = Instance::new(g.observed, delta).unwrap();
    let mut cfg = config(Method::InFace { gamma1: 0.0, gamma2: 1.0 }, StepRule::ExactLineSearch, 0.0, 200);
    cfg.shadow = true;
    cfg.track_drift = true;
    let out = solve(&inst, &cfg).unwrap();
    let iters = out.trace.records.len() - 1;
    let shadow = out.max_shadow_error.unwrap_or(f64::INFINITY);
    let drift = out.max_drift.unwrap_or(f64::INFINITY);
    let dense = out.iterate.materialize();
    let oracle: f64 = dense.clone().svd(false, false).singular_values.iter().sum();
    let nuclear_err = (oracle - out.iterate.nuclear_norm()).abs() / delta;
    runs.push(Run {
        label: "svd-oracle".into(),
        method: cfg.method,
        step_rule: cfg.step_rule,
        delta,
        scale: inst.scale(),
        violations: out.violations.len(),
        trace: out.trace,
    });
    Verdict {
        id: 4,
        title: "thin SVD tracks a dense shadow iterate",
        pass: iters == 200 && shadow <= 1e-8 && drift <= 1e-8 && nuclear_err <= 1e-10,
        detail: format!("{iters} iterations, shadow {shadow:.2e}, drift {drift:.2e}, nuclear {nuclear_err:.1e}"),
    }
}

fn lambda_min(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone()).eigenvalues.min()
}

/// Root of `λ_min(D + αΔ)` by bisection on Cholesky success; `None` if it stays PSD.
fn bisect_stop(d: &DMatrix<f64>, step: &DMatrix<f64>) -> Option<f64> {
    let pd = |a: f64| (d + step * a).cholesky().is_some();
    let mut hi = 1.0;
    while pd(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pd(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

fn random_spectrum(rng: &mut ChaCha8Rng, r: usize, delta: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..r).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| delta * x / total).collect()
}

fn unit(rng: &mut ChaCha8Rng, r: usize) -> DVector<f64> {
    let q = DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal));
    q.normalize()
}

fn alpha_stop_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_rel: f64 = 0.0;
    let mut worst_lambda: f64 = 0.0;
    let mut failures = 0;
    for case in 0..100 {
        let r = rng.gen_range(2..=6);
        let delta = rng.gen_range(0.5..10.0);
        let sigma = random_spectrum(&mut rng, r, delta);
        let d = DMatrix::from_diagonal(&DVector::from_vec(sigma.clone()));
        let q = unit(&mut rng, r);
        let (step, formula) = match case % 3 {
            0 => {
                let step = &d - &q * q.transpose() * delta;
                (step, away_alpha_stop(&sigma, &q, delta))
            }
            1 => {
                let step = &q * q.transpose() * delta - &d;
                let s = SymmetricSmall::from_dense(&step);
                (step, general_alpha_stop(&sigma, &s))
            }
            _ => {
                let mut a = DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(StandardNormal));
                a = (&a + a.transpose()) * 0.5;
                let shift = a.trace() / r as f64;
                for i in 0..r {
                    a[(i, i)] -= shift;
                }
                let s = SymmetricSmall::from_dense(&a);
                (a, general_alpha_stop(&sigma, &s))
            }
        };
        let Some(oracle) = bisect_stop(&d, &step) else {
            if formula.is_finite() {
                failures += 1;
            }
            continue;
        };
        let rel = (formula - oracle).abs() / oracle;
        let lam = lambda_min(&(&d + &step * formula)).abs() / delta;
        worst_rel = worst_rel.max(rel);
        worst_lambda = worst_lambda.max(lam);
        if !(rel <= 1e-8 && lam <= 1e-9) {
            failures += 1;
        }
    }
    Verdict {
        id: 5,
        title: "closed-form step limits match bisection",
        pass: failures == 0,
        detail: format!("{failures} failures, max rel err {worst_rel:.2e}, max |λ_min|/δ {worst_lambda:.2e}"),
    }
}

fn orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn face_geometry() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let r = rng.gen_range(1..=6);
        let m = rng.gen_range(r..=30);
        let n = rng.gen_range(r..=30);
        let delta = rng.gen_range(0.5..10.0);
        let u = orthonormal(&mut rng, m, r);
        let v = orthonormal(&mut rng, n, r);
        let sigma = random_spectrum(&mut rng, r, delta);
        let base = ThinSvd::from_parts(u, sigma, v).unwrap();
        // random point of the spectrahedron: W Wᵀ scaled to trace δ
        let w = DMatrix::from_fn(r, rng.gen_range(1..=r), |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut mm = &w * w.transpose();
        mm *= delta / mm.trace();
        let dense = base.u() * &mm * base.v().transpose();
        let oracle: f64 = dense.clone().svd(false, false).singular_values.iter().sum();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(base.sigma()));
        let shift = SymmetricSmall::from_dense(&(&mm - d));
        let moved = base.inface_update(&shift, 1e-12).unwrap();
        let err = ((oracle - delta).abs()).max((moved.nuclear_norm() - delta).abs()) / delta;
        let rebuilt = (moved.materialize() - &dense).norm() / dense.norm();
        worst = worst.max(err).max(rebuilt);
    }
    Verdict {
        id: 6,
        title: "face points keep nuclear norm δ",
        pass: worst <= 1e-9,
        detail: format!("max relative deviation {worst:.2e}"),
    }
}

fn table_reproduction(traces: &mut Vec<(String, RunTrace)>) -> Verdict {
    let spec = GenSpec { m: 200, n: 400, rank: 10, snr: 5.0, rho: 0.10, seed: 1 };
    let roster = [IF_0_INF, Method::FrankWolfe, Method::AwayAtomic].map(SolverConfig::new).to_vec();
    let mut exp = ExperimentSpec::new(InstanceSource::Generated(spec), roster, 5, DeltaPolicy::Relative(3.75));
    exp.execution = Execution::Sequential;
    let start = Instant::now();
    let report = run_experiment(&exp).expect("experiment runs");
    let seconds = start.elapsed().as_secs_f64();
    let rank = |label: &str| report.aggregates.iter().find(|a| a.method == label).map(|a| a.mean_final_rank).unwrap();
    let (r_if, r_fw, r_aa) = (rank("if-(0,inf)"), rank("fw"), rank("away-atomic"));
    let mut faster = 0;
    for s in 0..5 {
        let secs = |label: &str| {
            let run = report.runs.iter().find(|r| r.sample == s && r.method == label).unwrap();
            run.summary().seconds
        };
        if secs("if-(0,inf)") < secs("fw") {
            faster += 1;
        }
    }
    let censored: usize = report.aggregates.iter().map(|a| a.censored).sum();
    let violations: usize = report.aggregates.iter().map(|a| a.violations).sum();
    for r in &report.runs {
        traces.push((format!("table/{}/{}", r.sample, r.method), r.trace.clone()));
    }
    Verdict {
        id: 7,
        title: "paired low-rank reproduction at the 200x400 scale",
        pass: r_if <= 30.0 && r_fw >= 60.0 && r_aa >= 60.0 && faster >= 4 && censored == 0 && seconds <= 900.0,
        detail: format!(
            "mean final rank IF {r_if:.1}, FW {r_fw:.1}, AA {r_aa:.1}; IF faster on {faster}/5; \
             {censored} censored, {violations} violations; {seconds:.0}s"
        ),
    }
}

fn rank_profiles(runs: &mut Vec<Run>) -> Verdict {
    let g = generate_instance(&GenSpec { m: 500, n: 625, rank: 10, snr: 4.0, rho: 0.04, seed: 8 }).unwrap();
    let choice = select_delta(&g.observed, &DeltaSelection { seed: 8, ..DeltaSelection::default() }).unwrap();
    let inst = Instance::new(g.observed, choice.delta).unwrap();
    let mut summary = Vec::new();
    for method in [Method::InFaceRankStrategy, IF_0_INF] {
        let cfg = config(method, StepRule::ExactLineSearch, 10f64.powf(-2.5), 2000);
        let r = run(format!("profile/{method}"), &inst, &cfg);
        let s = r.trace.summary.clone().unwrap();
        summary.push((s.final_rank, s.max_rank, s.reason));
        runs.push(r);
    }
    let (rank_final, rank_max, _) = summary[0];
    let (if_final, if_max, _) = summary[1];
    Verdict {
        id: 8,
        title: "build-up/refine vs stay-low rank profiles",
        pass: rank_max as f64 >= 2.0 * rank_final as f64 && if_max as f64 <= 1.3 * if_final as f64,
        detail: format!(
            "delta {:.3}; rank strategy max {rank_max} final {rank_final} ({:?}); IF-(0,inf) max {if_max} final {if_final} ({:?})",
            choice.delta, summary[0].2, summary[1].2
        ),
    }
}

#[test]
fn acceptance() {
    let mut runs = Vec::new();
    let mut verdicts = guarantee_suite(&mut runs);
    verdicts.push(svd_maintenance(&mut runs));
    verdicts.push(alpha_stop_oracle());
    verdicts.push(face_geometry());
    let mut traces = Vec::new();
    verdicts.push(table_reproduction(&mut traces));
    verdicts.push(rank_profiles(&mut runs));

    traces.extend(runs.iter().map(|r| (r.label.clone(), r.trace.clone())));
    let errors: Vec<String> = traces.iter().filter_map(|(l, t)| bound_ok(l, t).err()).collect();
    verdicts.push(Verdict {
        id: 9,
        title: "lower bound nondecreasing and below the final objective",
        pass: errors.is_empty(),
        detail: match errors.first() {
            None => format!("{} runs", traces.len()),
            Some(e) => format!("{} failures, first: {e}", errors.len()),
        },
    });

    verdicts.sort_by_key(|v| v.id);
    let mut err = std::io::stderr().lock();
    for v in &verdicts {
        let _ = writeln!(err, "[{}] criterion {}: {} ({})", if v.pass { "PASS" } else { "FAIL" }, v.id, v.title, v.detail);
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
