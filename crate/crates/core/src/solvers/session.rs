use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::steps::{linear_subproblem, quadratic_step, wolfe_lower_bound, LinearSubproblem};
use super::{SolveOutcome, SolverConfig, SolverError, StepRule, Violation, ViolationKind};
use crate::face::{classify, Face, FaceError};
use crate::linalg::{LinalgError, Rank1Path, SparseMatrix, SymmetricSmall, ThinSvd};
use crate::problem::{exact_linesearch, gradient, objective_value, Instance};
use crate::trace::{relative_gap, IterationRecord, RunSummary, RunTrace, StepCounters, StepKind, StopReason};

/// Feasibility band on the nuclear norm.
const FEAS_TOL: f64 = 1e-9;
const MONOTONE_TOL: f64 = 1e-12;
const BOUND_TOL: f64 = 1e-12;
/// Relative slack on the guarantee checks.
const GUARANTEE_SLACK: f64 = 1e-9;
const SHADOW_TOL: f64 = 1e-8;
const DRIFT_TOL: f64 = 1e-8;

/// The current point: factors, its entries on `Ω`, gradient and objective.
#[derive(Debug, Clone)]
pub struct Iterate {
    pub svd: ThinSvd,
    pub z_omega: Vec<f64>,
    pub grad: SparseMatrix,
    pub f: f64,
    /// Produced by a step known to end on the boundary.
    pub on_boundary: bool,
    pub(crate) shadow: Option<DMatrix<f64>>,
}

impl Iterate {
    pub fn new(mut svd: ThinSvd, instance: &Instance, on_boundary: bool, session_exec: crate::par::Execution) -> Self {
        if on_boundary {
            svd.renormalize_nuclear(instance.delta());
        }
        let z_omega = svd.sample_pattern_with(session_exec, instance.pattern());
        let f = objective_value(&z_omega, instance);
        let grad = gradient(&z_omega, instance);
        Self { svd, z_omega, grad, f, on_boundary, shadow: None }
    }

    /// Rank counted at the reporting threshold.
    pub fn rank(&self) -> usize {
        self.svd.numerical_rank()
    }

    pub fn face(&self, delta: f64) -> Result<Face, FaceError> {
        classify(&self.svd, delta, self.on_boundary)
    }
}

/// An update of the factored iterate.
pub(crate) enum Move<'m> {
    /// `Z ← c Z + s a bᵀ`.
    Rank1 { c: f64, s: f64, a: &'m DVector<f64>, b: &'m DVector<f64> },
    /// `Z ← U (D + Δ) Vᵀ`.
    Face { delta: SymmetricSmall },
}

/// State shared by every solver loop: bounds, counters, records and checks.
pub(crate) struct Session<'a> {
    pub inst: &'a Instance,
    pub cfg: &'a SolverConfig,
    start: Instant,
    pub l_bar: f64,
    pub d_bar: f64,
    bound: f64,
    counters: StepCounters,
    progress: f64,
    inv_gap0: f64,
    closed_form: bool,
    check_sublinear: bool,
    records: Vec<IterationRecord>,
    violations: Vec<Violation>,
    warm_v: Option<DVector<f64>>,
    inexact: usize,
    pub face_fallbacks: usize,
    prev_f: Option<f64>,
    max_shadow: Option<f64>,
    max_drift: Option<f64>,
}

impl<'a> Session<'a> {
    pub fn new(inst: &'a Instance, cfg: &'a SolverConfig, check_sublinear: bool) -> Result<Self, SolverError> {
        cfg.validate(inst)?;
        Ok(Self {
            inst,
            cfg,
            start: Instant::now(),
            l_bar: cfg.l_bar.unwrap_or(inst.lipschitz()),
            d_bar: cfg.d_bar.unwrap_or(inst.diameter()),
            bound: 0.0,
            counters: StepCounters::default(),
            progress: 0.0,
            inv_gap0: 0.0,
            closed_form: true,
            check_sublinear,
            records: Vec::new(),
            violations: Vec::new(),
            warm_v: None,
            inexact: 0,
            face_fallbacks: 0,
            prev_f: None,
            max_shadow: cfg.shadow.then_some(0.0),
            max_drift: cfg.track_drift.then_some(0.0),
        })
    }

    /// `2 L̄ D̄²`.
    pub fn c(&self) -> f64 {
        2.0 * self.l_bar * self.d_bar * self.d_bar
    }

    pub fn delta(&self) -> f64 {
        self.inst.delta()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn make(&self, svd: ThinSvd, on_boundary: bool) -> Iterate {
        Iterate::new(svd, self.inst, on_boundary, self.cfg.execution)
    }

    /// `Z⁰ = −δ u₀ v₀ᵀ` from the gradient at the origin, or the given start.
    pub fn initialize(&mut self, start: Option<ThinSvd>) -> Result<Iterate, SolverError> {
        let (it, b) = match start {
            Some(svd) => {
                let it = self.make(svd, false);
                it.face(self.delta())?;
                self.closed_form = false;
                (it, 0.0)
            }
            None => {
                let zero = vec![0.0; self.inst.observed().nnz()];
                let g0 = gradient(&zero, self.inst);
                let lmo = self.solve_lmo(&g0)?.expect("observations are not all zero");
                let f0 = objective_value(&zero, self.inst);
                let b = (f0 + lmo.atom_inner()).max(0.0);
                (self.make(lmo.atom(), true), b)
            }
        };
        let mut it = it;
        if self.cfg.shadow {
            it.shadow = Some(it.svd.materialize());
        }
        self.bound = b;
        let gap0 = it.f - b;
        self.inv_gap0 = if gap0 > 0.0 { 1.0 / gap0 } else { f64::INFINITY };
        Ok(it)
    }

    fn solve_lmo(&mut self, grad: &SparseMatrix) -> Result<Option<LinearSubproblem>, SolverError> {
        let mut opts = self.cfg.power_options();
        opts.warm_start = self.warm_v.take();
        let lmo = match linear_subproblem(grad, self.delta(), &opts) {
            Ok(l) => l,
            Err(LinalgError::InexactOracle { best, .. }) => {
                self.inexact += 1;
                Some(LinearSubproblem { triplet: best, delta: self.delta() })
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(l) = &lmo {
            self.warm_v = Some(l.triplet.v.clone());
        }
        Ok(lmo)
    }

    /// Linear subproblem at `it`, merging its Wolfe bound into `B`.
    /// `None` means the gradient vanished and `it` is optimal.
    pub fn lmo(&mut self, it: &Iterate) -> Result<Option<LinearSubproblem>, SolverError> {
        let lmo = self.solve_lmo(&it.grad)?;
        match &lmo {
            Some(l) => self.bound = self.bound.max(wolfe_lower_bound(it.f, &it.grad, &it.z_omega, l)),
            None => self.bound = self.bound.max(it.f),
        }
        Ok(lmo)
    }

    /// Step size on `[0, cap]` under the configured rule.
    pub fn step_size(&self, grad: &SparseMatrix, d_omega: &[f64], cap: f64) -> f64 {
        match self.cfg.step_rule {
            StepRule::ExactLineSearch => exact_linesearch(grad, d_omega, self.inst, cap),
            StepRule::QuadraticApprox => {
                let slope = grad.dot_values(d_omega);
                if slope < 0.0 {
                    quadratic_step(grad, d_omega, self.l_bar, cap)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn advance(&self, it: &Iterate, mv: Move<'_>, on_boundary: bool) -> Result<Iterate, SolverError> {
        let svd = match &mv {
            Move::Rank1 { c, s, a, b } => Rank1Path::new(&it.svd, a, b).apply(*c, *s),
            Move::Face { delta } => it.svd.inface_update(delta, 1e-8 * self.delta())?,
        };
        let mut next = self.make(svd, on_boundary);
        if let Some(z) = &it.shadow {
            let mut z = z.clone();
            match &mv {
                Move::Rank1 { c, s, a, b } => {
                    z *= *c;
                    z.ger(*s, a, b, 1.0);
                }
                Move::Face { delta } => {
                    z += it.svd.u() * delta.to_dense() * it.svd.v().transpose();
                }
            }
            next.shadow = Some(z);
        }
        Ok(next)
    }

    /// Regular Frank-Wolfe step toward the atom of `lmo`; returns the new
    /// iterate and the step size.
    pub fn fw_step(&self, it: &Iterate, lmo: &LinearSubproblem) -> Result<(Iterate, f64), SolverError> {
        let atom = lmo.atom_on_pattern(&it.grad);
        let d: Vec<f64> = atom.iter().zip(&it.z_omega).map(|(a, z)| a - z).collect();
        let alpha = self.step_size(&it.grad, &d, 1.0);
        if alpha <= 0.0 {
            return Ok((it.clone(), 0.0));
        }
        let t = &lmo.triplet;
        let mv = Move::Rank1 { c: 1.0 - alpha, s: -alpha * self.delta(), a: &t.u, b: &t.v };
        Ok((self.advance(it, mv, alpha >= 1.0)?, alpha))
    }

    /// Credits a step with its weight in the accumulated-progress bound.
    pub fn credit(&mut self, weight: f64) {
        self.progress += weight;
    }

    /// Checks `1/(f_next − B) ≥ 1/(f_prev − B) + weight/c`.
    pub fn check_step(&mut self, f_prev: f64, bound: f64, f_next: f64, weight: f64) {
        let gap = f_prev - bound;
        if gap <= 0.0 {
            return;
        }
        let limit = 1.0 / (1.0 / gap + weight / self.c());
        let observed = f_next - bound;
        if observed > limit * (1.0 + GUARANTEE_SLACK) + BOUND_TOL {
            let k = self.records.len();
            self.violations.push(Violation { k, kind: ViolationKind::Reciprocal, observed, limit });
        }
    }

    fn violate(&mut self, kind: ViolationKind, observed: f64, limit: f64) {
        let k = self.records.len();
        self.violations.push(Violation { k, kind, observed, limit });
    }

    /// Appends the record for `it`, produced by a step of `kind` and size
    /// `alpha`, runs the per-iterate checks, and reports whether to stop.
    pub fn record(&mut self, it: &Iterate, kind: StepKind, alpha: f64) -> Option<StopReason> {
        self.counters.count(kind);
        let delta = self.delta();
        let k = self.records.len();
        let nuclear = it.svd.nuclear_norm();
        if nuclear > delta * (1.0 + FEAS_TOL) {
            self.violate(ViolationKind::Infeasible, nuclear, delta);
        }
        if let Some(prev) = self.prev_f {
            if it.f > prev + MONOTONE_TOL {
                self.violate(ViolationKind::Monotone, it.f, prev);
            }
        }
        if self.bound > it.f + BOUND_TOL {
            self.violate(ViolationKind::BoundAboveObjective, self.bound, it.f);
        }
        let rank_limit = self.counters.rank_bound();
        if it.rank() as i64 > rank_limit {
            self.violate(ViolationKind::RankBound, it.rank() as f64, rank_limit as f64);
        }
        let gap = it.f - self.bound;
        if self.check_sublinear {
            let limit = 1.0 / (self.inv_gap0 + self.progress / self.c());
            if gap > limit * (1.0 + GUARANTEE_SLACK) + BOUND_TOL {
                self.violate(ViolationKind::Sublinear, gap, limit);
            }
            if self.closed_form {
                let closed = self.c() / (4.0 + self.progress);
                if gap > closed * (1.0 + GUARANTEE_SLACK) + BOUND_TOL {
                    self.violate(ViolationKind::Sublinear, gap, closed);
                }
            }
        }
        if let Some(z) = &it.shadow {
            let err = (it.svd.materialize() - z).norm() / z.norm().max(f64::MIN_POSITIVE);
            self.max_shadow = Some(self.max_shadow.unwrap_or(0.0).max(err));
            if err > SHADOW_TOL {
                self.violate(ViolationKind::Shadow, err, SHADOW_TOL);
            }
        }
        if self.cfg.track_drift {
            let drift = it.svd.orthonormality_drift();
            self.max_drift = Some(self.max_drift.unwrap_or(0.0).max(drift));
            if drift > DRIFT_TOL {
                self.violate(ViolationKind::Drift, drift, DRIFT_TOL);
            }
        }
        self.prev_f = Some(it.f);
        let rel = relative_gap(it.f, self.bound);
        let seconds = self.start.elapsed().as_secs_f64();
        self.records.push(IterationRecord {
            k,
            seconds,
            f: it.f,
            bound: self.bound,
            gap: rel,
            rank: it.rank(),
            step: kind,
            alpha,
            counters: self.counters,
        });
        let stop = &self.cfg.stop;
        if rel <= stop.gap_target {
            Some(StopReason::GapReached)
        } else if k >= stop.max_iters {
            Some(StopReason::MaxIterations)
        } else if seconds >= stop.max_seconds {
            Some(StopReason::TimeLimit)
        } else {
            None
        }
    }

    /// Records `it` as optimal (vanishing gradient) and finishes.
    pub fn optimal(mut self, it: Iterate, kind: StepKind, alpha: f64) -> SolveOutcome {
        self.bound = self.bound.max(it.f);
        self.record(&it, kind, alpha);
        self.finish(StopReason::Optimal, it)
    }

    pub fn finish(self, reason: StopReason, it: Iterate) -> SolveOutcome {
        let last = self.records.last().expect("at least the initial record");
        let summary = RunSummary {
            method: self.cfg.method.to_string(),
            reason,
            iterations: last.k,
            final_rank: last.rank,
            max_rank: self.records.iter().map(|r| r.rank).max().unwrap_or(0),
            seconds: last.seconds,
            final_f: last.f,
            final_bound: last.bound,
            final_gap: last.gap,
            violations: self.violations.len(),
            inexact_oracles: self.inexact,
            face_opt_fallbacks: self.face_fallbacks,
        };
        SolveOutcome {
            trace: RunTrace { records: self.records, summary: Some(summary) },
            iterate: it.svd,
            violations: self.violations,
            counters: self.counters,
            max_shadow_error: self.max_shadow,
            max_drift: self.max_drift,
        }
    }
}
