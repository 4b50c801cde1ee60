use super::session::{Iterate, Move, Session};
use super::steps::{step_decision, Choice};
use super::{InFaceStrategy, Method, SolveOutcome, SolverConfig, SolverError};
use crate::face::{alpha_stop, away_direction, face_optimize, inface_fw_direction, Face, InFaceDirection};
use crate::linalg::SymmetricSmall;
use crate::problem::Instance;
use crate::trace::StepKind;

pub(crate) fn direction_move(dir: &InFaceDirection, step: f64) -> Move<'_> {
    match dir {
        InFaceDirection::FaceDelta { delta, .. } => Move::Face { delta: delta.scaled(step) },
        InFaceDirection::FullSpace { scale_z, a, b, weight, .. } => {
            Move::Rank1 { c: 1.0 + step * scale_z, s: step * weight, a, b }
        }
    }
}

/// In-face extended Frank-Wolfe, for `IF(γ1, γ2)` and the rank strategy.
pub fn run_inface(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    let (mut g1, mut g2, rank_strategy) = match config.method {
        Method::InFace { gamma1, gamma2 } => (gamma1, gamma2, false),
        Method::InFaceRankStrategy => (f64::INFINITY, f64::INFINITY, true),
        other => return Err(SolverError::InvalidConfig(format!("run_inface cannot run {other}"))),
    };
    let mut s = Session::new(instance, config, true)?;
    let delta = instance.delta();
    let exec = config.execution;
    let mut it = s.initialize(None)?;
    let (mut kind, mut alpha) = (StepKind::Init, 0.0);
    let mut streak = 0usize;
    loop {
        if let Some(reason) = s.record(&it, kind, alpha) {
            return Ok(s.finish(reason, it));
        }
        let f_k = it.f;
        let face = it.face(delta)?;
        let mut lmo = None;
        let mut taken: Option<(Iterate, StepKind, f64, f64, f64)> = None;
        if !(g1.is_infinite() && g2.is_infinite()) {
            if face == Face::Interior {
                lmo = s.lmo(&it)?;
                if lmo.is_none() {
                    return Ok(s.optimal(it, kind, alpha));
                }
            }
            let top = lmo.as_ref().map(|l| &l.triplet);
            let dir = match config.strategy {
                InFaceStrategy::Away => away_direction(face, &it.grad, &it.svd, &it.z_omega, delta, top),
                InFaceStrategy::InFaceFrankWolfe => inface_fw_direction(face, &it.grad, &it.svd, &it.z_omega, delta, top),
            };
            if let Some(dir) = dir {
                let d = dir.on_pattern(&it.svd, &it.z_omega, instance, exec);
                let slope = it.grad.dot_values(&d);
                if slope < 0.0 {
                    let bound = s.bound();
                    let stop = alpha_stop(face, &it.svd, &dir, delta);
                    let curv = instance.scale() * d.iter().map(|x| x * x).sum::<f64>();
                    let predict = |a: f64| f_k + a * slope + 0.5 * a * a * curv;
                    let f_b = (stop.is_finite() && stop > 0.0).then(|| predict(stop));
                    let beta = s.step_size(&it.grad, &d, stop);
                    let f_a = (beta > 0.0 && beta.is_finite()).then(|| predict(beta));
                    let pick = match step_decision(f_b, f_a, f_k, bound, g1, g2, s.l_bar, s.d_bar) {
                        Choice::LowerFace => Some((stop, g1, StepKind::FaceDrop, true)),
                        Choice::StayFace => Some((beta, g2, StepKind::FaceStay, beta >= stop)),
                        Choice::RegularFw => None,
                    };
                    if let Some((step, weight, boundary_kind, hits)) = pick {
                        let (kind, on_boundary) =
                            if face.is_boundary() { (boundary_kind, true) } else { (StepKind::Interior, hits) };
                        let next = s.advance(&it, direction_move(&dir, step), on_boundary)?;
                        taken = Some((next, kind, step, weight, bound));
                    }
                }
            }
        }
        let next = match taken {
            Some((next, k2, step, weight, bound)) => {
                s.credit(weight);
                s.check_step(f_k, bound, next.f, weight);
                kind = k2;
                alpha = step;
                next
            }
            None => {
                let lmo = match lmo {
                    Some(l) => l,
                    None => match s.lmo(&it)? {
                        Some(l) => l,
                        None => return Ok(s.optimal(it, kind, alpha)),
                    },
                };
                let bound = s.bound();
                let (next, a) = s.fw_step(&it, &lmo)?;
                s.credit(1.0);
                s.check_step(f_k, bound, next.f, 1.0);
                kind = StepKind::FrankWolfe;
                alpha = a;
                next
            }
        };
        if rank_strategy && g1.is_infinite() {
            streak = if next.rank() <= it.rank() { streak + 1 } else { 0 };
            if streak >= config.rank_patience {
                g1 = 1.0;
                g2 = 1.0;
            }
        }
        it = next;
    }
}

/// Alternates a full optimization over the current face with a regular
/// Frank-Wolfe step.
pub fn run_inface_optimization(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    let mut s = Session::new(instance, config, true)?;
    let delta = instance.delta();
    let mut it = s.initialize(None)?;
    let (mut kind, mut alpha) = (StepKind::Init, 0.0);
    loop {
        if let Some(reason) = s.record(&it, kind, alpha) {
            return Ok(s.finish(reason, it));
        }
        let f_k = it.f;
        let y = match it.face(delta)? {
            Face::Boundary { rank } if rank >= 2 => {
                let opt = face_optimize(&it.svd, instance, &config.face_opt);
                if opt.fallback {
                    s.face_fallbacks += 1;
                    None
                } else {
                    let step = opt.m.add_scaled(-1.0, &SymmetricSmall::diagonal(it.svd.sigma()));
                    let cand = s.advance(&it, Move::Face { delta: step }, true)?;
                    (cand.f <= it.f).then_some(cand)
                }
            }
            _ => None,
        };
        let y = y.unwrap_or_else(|| it.clone());
        let Some(lmo) = s.lmo(&y)? else {
            return Ok(s.optimal(y, StepKind::FaceOptFw, 0.0));
        };
        let bound = s.bound();
        let (next, a) = s.fw_step(&y, &lmo)?;
        s.credit(1.0);
        s.check_step(f_k, bound, next.f, 1.0);
        it = next;
        kind = StepKind::FaceOptFw;
        alpha = a;
    }
}
