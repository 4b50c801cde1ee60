use super::session::Session;
use super::{SolveOutcome, SolverConfig, SolverError};
use crate::linalg::ThinSvd;
use crate::problem::Instance;
use crate::trace::StepKind;

/// Plain Frank-Wolfe from `Z⁰ = −δ u₀ v₀ᵀ`.
pub fn run_frank_wolfe(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    run_frank_wolfe_from(instance, config, None)
}

/// Plain Frank-Wolfe, optionally warm-started from a feasible point.
pub fn run_frank_wolfe_from(
    instance: &Instance,
    config: &SolverConfig,
    start: Option<ThinSvd>,
) -> Result<SolveOutcome, SolverError> {
    let mut s = Session::new(instance, config, true)?;
    let mut it = s.initialize(start)?;
    let (mut kind, mut alpha) = (StepKind::Init, 0.0);
    loop {
        let Some(lmo) = s.lmo(&it)? else {
            return Ok(s.optimal(it, kind, alpha));
        };
        if let Some(reason) = s.record(&it, kind, alpha) {
            return Ok(s.finish(reason, it));
        }
        let bound = s.bound();
        let (next, a) = s.fw_step(&it, &lmo)?;
        s.credit(1.0);
        s.check_step(it.f, bound, next.f, 1.0);
        it = next;
        kind = StepKind::FrankWolfe;
        alpha = a;
    }
}
