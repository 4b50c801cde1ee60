use super::inface::direction_move;
use super::session::Session;
use super::{SolveOutcome, SolverConfig, SolverError};
use crate::face::{alpha_stop, away_direction};
use crate::problem::Instance;
use crate::trace::StepKind;

/// Frank-Wolfe with away steps taken inside the minimal face.
pub fn run_away_natural(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    let mut s = Session::new(instance, config, false)?;
    let delta = instance.delta();
    let mut it = s.initialize(None)?;
    let (mut kind, mut alpha) = (StepKind::Init, 0.0);
    loop {
        let Some(lmo) = s.lmo(&it)? else {
            return Ok(s.optimal(it, kind, alpha));
        };
        if let Some(reason) = s.record(&it, kind, alpha) {
            return Ok(s.finish(reason, it));
        }
        let bound = s.bound();
        let face = it.face(delta)?;
        let toward_slope = lmo.atom_inner() - it.grad.dot_values(&it.z_omega);
        let away = away_direction(face, &it.grad, &it.svd, &it.z_omega, delta, Some(&lmo.triplet))
            .filter(|d| d.slope() < toward_slope);
        let mut stepped = None;
        if let Some(dir) = away {
            let stop = alpha_stop(face, &it.svd, &dir, delta);
            let d = dir.on_pattern(&it.svd, &it.z_omega, instance, config.execution);
            let beta = s.step_size(&it.grad, &d, stop);
            if beta > 0.0 && beta.is_finite() {
                let full = beta >= stop;
                let k2 = if !face.is_boundary() {
                    StepKind::Interior
                } else if full {
                    StepKind::FaceDrop
                } else {
                    StepKind::FaceStay
                };
                let next = s.advance(&it, direction_move(&dir, beta), face.is_boundary() || full)?;
                stepped = Some((next, k2, beta));
            }
        }
        let (next, k2, a) = match stepped {
            Some(t) => t,
            None => {
                let (next, a) = s.fw_step(&it, &lmo)?;
                s.check_step(it.f, bound, next.f, 1.0);
                (next, StepKind::FrankWolfe, a)
            }
        };
        it = next;
        kind = k2;
        alpha = a;
    }
}
