//! Frank-Wolfe, away-step and in-face extended solvers with their bound and
//! counter bookkeeping.

mod atomic;
mod away;
mod fw;
mod inface;
mod session;
mod steps;

pub use atomic::{run_away_atomic, run_away_atomic_with_state, AtomicState};
pub use away::run_away_natural;
pub use fw::{run_frank_wolfe, run_frank_wolfe_from};
pub use inface::{run_inface, run_inface_optimization};
pub use session::Iterate;
pub use steps::{linear_subproblem, quadratic_step, step_decision, wolfe_lower_bound, Choice, LinearSubproblem};

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::face::{FaceError, FaceOptOptions};
use crate::linalg::{LinalgError, PowerOptions, ThinSvd};
use crate::par::Execution;
use crate::problem::Instance;
use crate::trace::{RunTrace, StepCounters};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Face(#[from] FaceError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    FrankWolfe,
    /// In-face extended method with acceptance constants `γ1 ≤ γ2`
    /// (either may be infinite).
    InFace { gamma1: f64, gamma2: f64 },
    /// Full optimization over the current face, then a Frank-Wolfe step.
    InFaceOptimization,
    /// Frank-Wolfe until the rank stalls, then in-face with `γ1 = γ2 = 1`.
    InFaceRankStrategy,
    AwayNatural,
    AwayAtomic,
}

fn gamma_label(g: f64) -> String {
    if g.is_infinite() {
        "inf".to_string()
    } else {
        g.to_string()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::FrankWolfe => f.write_str("fw"),
            Method::InFace { gamma1, gamma2 } => write!(f, "if-({},{})", gamma_label(*gamma1), gamma_label(*gamma2)),
            Method::InFaceOptimization => f.write_str("if-opt"),
            Method::InFaceRankStrategy => f.write_str("if-rank"),
            Method::AwayNatural => f.write_str("away"),
            Method::AwayAtomic => f.write_str("away-atomic"),
        }
    }
}

/// Parses an acceptance constant: a nonnegative number or `inf`.
pub fn parse_gamma(s: &str) -> Result<f64, String> {
    let t = s.trim();
    let g = match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "∞" => f64::INFINITY,
        _ => t.parse::<f64>().map_err(|_| format!("invalid gamma `{t}`"))?,
    };
    if g.is_nan() || g < 0.0 {
        return Err(format!("gamma must be nonnegative, got `{t}`"));
    }
    Ok(g)
}

impl Method {
    /// Builds a method from a short name; `if` takes the two constants, the
    /// others ignore them.
    pub fn from_name(name: &str, gamma1: f64, gamma2: f64) -> Result<Method, String> {
        match name.trim().to_ascii_lowercase().as_str() {
            "if" | "inface" | "in-face" => Ok(Method::InFace { gamma1, gamma2 }),
            other => other.parse(),
        }
    }
}

impl FromStr for Method {
    type Err = String;

    /// Accepts the labels produced by `Display`, e.g. `if-(0,inf)`, and the
    /// shorthand `if-0-inf`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "fw" | "frank-wolfe" => return Ok(Method::FrankWolfe),
            "if-opt" => return Ok(Method::InFaceOptimization),
            "if-rank" => return Ok(Method::InFaceRankStrategy),
            "away" => return Ok(Method::AwayNatural),
            "away-atomic" => return Ok(Method::AwayAtomic),
            _ => {}
        }
        let rest = t
            .strip_prefix("if-")
            .ok_or_else(|| format!("unknown method `{s}`"))?;
        let inner = rest
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .unwrap_or(rest);
        let (a, b) = inner
            .split_once(',')
            .or_else(|| inner.split_once('-'))
            .ok_or_else(|| format!("unknown method `{s}`"))?;
        let gamma1 = parse_gamma(a)?;
        let gamma2 = parse_gamma(b)?;
        Ok(Method::InFace { gamma1, gamma2 })
    }
}

/// Which in-face direction the in-face extended method uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InFaceStrategy {
    #[default]
    Away,
    InFaceFrankWolfe,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    #[default]
    ExactLineSearch,
    /// `min(−⟨∇f, d⟩ / (L̄ ‖d_Ω‖²), cap)`.
    QuadraticApprox,
}

impl FromStr for StepRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(StepRule::ExactLineSearch),
            "quad" => Ok(StepRule::QuadraticApprox),
            _ => Err(format!("unknown step rule `{s}` (expected exact or quad)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StopRule {
    /// Target for the relative gap, see [`crate::trace::relative_gap`].
    pub gap_target: f64,
    pub max_iters: usize,
    pub max_seconds: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { gap_target: 10f64.powf(-2.5), max_iters: 100_000, max_seconds: f64::INFINITY }
    }
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub method: Method,
    pub strategy: InFaceStrategy,
    pub step_rule: StepRule,
    /// Smoothness bound; defaults to the instance's own constant.
    pub l_bar: Option<f64>,
    /// Diameter bound; defaults to `2δ`.
    pub d_bar: Option<f64>,
    pub stop: StopRule,
    pub seed: u64,
    pub power_tol: f64,
    pub power_max_iters: Option<usize>,
    pub dense_fallback_dim: usize,
    pub face_opt: FaceOptOptions,
    /// Consecutive non-increasing-rank iterations before the rank strategy
    /// switches phase.
    pub rank_patience: usize,
    /// Carry a dense copy of the iterate and compare it every iteration.
    pub shadow: bool,
    /// Record the orthonormality drift of the factors every iteration.
    pub track_drift: bool,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let power = PowerOptions::default();
        Self {
            method: Method::FrankWolfe,
            strategy: InFaceStrategy::default(),
            step_rule: StepRule::default(),
            l_bar: None,
            d_bar: None,
            stop: StopRule::default(),
            seed: 0,
            power_tol: power.tol,
            power_max_iters: power.max_iters,
            dense_fallback_dim: power.dense_fallback_dim,
            face_opt: FaceOptOptions::default(),
            rank_patience: 5,
            shadow: false,
            track_drift: false,
            execution: Execution::default(),
        }
    }
}

impl SolverConfig {
    pub fn new(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    /// Checks that do not depend on the instance.
    pub fn validate_options(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if let Method::InFace { gamma1, gamma2 } = self.method {
            if gamma1.is_nan() || gamma2.is_nan() || gamma1 < 0.0 || gamma2 < 0.0 {
                return bad(format!("gamma1 and gamma2 must be nonnegative, got {gamma1} and {gamma2}"));
            }
            if gamma1 > gamma2 {
                return bad(format!("gamma1 must not exceed gamma2, got gamma1 = {gamma1} > gamma2 = {gamma2}"));
            }
        }
        if !(self.stop.gap_target >= 0.0) {
            return bad(format!("gap target must be nonnegative, got {}", self.stop.gap_target));
        }
        if !(self.stop.max_seconds > 0.0) {
            return bad(format!("time limit must be positive, got {}", self.stop.max_seconds));
        }
        if !(self.power_tol > 0.0) {
            return bad(format!("singular-triplet tolerance must be positive, got {}", self.power_tol));
        }
        Ok(())
    }

    pub fn validate(&self, instance: &Instance) -> Result<(), SolverError> {
        self.validate_options()?;
        let bad = |m: String| Err(SolverError::InvalidConfig(m));
        if let Some(l) = self.l_bar {
            if !(l >= instance.lipschitz()) {
                return bad(format!("L-bar {l} is below the smoothness constant {}", instance.lipschitz()));
            }
        }
        if let Some(d) = self.d_bar {
            if !(d >= instance.diameter()) {
                return bad(format!("D-bar {d} is below the diameter {}", instance.diameter()));
            }
        }
        Ok(())
    }

    pub(crate) fn power_options(&self) -> PowerOptions {
        PowerOptions {
            tol: self.power_tol,
            max_iters: self.power_max_iters,
            seed: self.seed,
            warm_start: None,
            dense_fallback_dim: self.dense_fallback_dim,
            execution: self.execution,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// `f − B` above the accumulated-progress bound.
    Sublinear,
    /// A step did not grow the reciprocal gap by the required amount.
    Reciprocal,
    RankBound,
    Monotone,
    /// `B` above the current objective.
    BoundAboveObjective,
    Infeasible,
    Shadow,
    Drift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub k: usize,
    pub kind: ViolationKind,
    pub observed: f64,
    pub limit: f64,
}

/// A finished run: trace, final iterate and diagnostics.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub trace: RunTrace,
    pub iterate: ThinSvd,
    pub violations: Vec<Violation>,
    pub counters: StepCounters,
    pub max_shadow_error: Option<f64>,
    pub max_drift: Option<f64>,
}

impl SolveOutcome {
    pub fn summary(&self) -> &crate::trace::RunSummary {
        self.trace.summary.as_ref().expect("finished runs carry a summary")
    }
}

/// Runs the configured method.
pub fn solve(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    match config.method {
        Method::FrankWolfe => run_frank_wolfe(instance, config),
        Method::InFace { .. } | Method::InFaceRankStrategy => run_inface(instance, config),
        Method::InFaceOptimization => run_inface_optimization(instance, config),
        Method::AwayNatural => run_away_natural(instance, config),
        Method::AwayAtomic => run_away_atomic(instance, config),
    }
}
