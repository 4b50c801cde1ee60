//! Faces of the nuclear-norm ball and the moves that stay inside them.
//!
//! A point `Z = U D Vᵀ` with `Σσ = δ` lies in the face
//! `{ U M Vᵀ : M ⪰ 0, tr M = δ }`, a linear image of the `r x r`
//! spectrahedron. Points with `Σσ < δ` have the whole ball as minimal face.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{
    sample_product, sym_eig, sym_eig_extreme, EigSense, LinalgError, Rank1Path, SingularTriplet, SparseMatrix,
    SymmetricSmall, ThinSvd,
};
use crate::par::Execution;
use crate::problem::{gradient, objective_value, Instance};

/// Relative band around `δ` within which `Σσ` counts as on the boundary.
pub const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FaceError {
    #[error("iterate has nuclear norm {nuclear} outside the ball of radius {delta}")]
    Infeasible { nuclear: f64, delta: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Minimal face of an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    Interior,
    Boundary { rank: usize },
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self, Face::Boundary { .. })
    }

    /// Dimension of the face, `r(r+1)/2 − 1` on the boundary.
    pub fn dimension(&self, nrows: usize, ncols: usize) -> usize {
        match *self {
            Face::Interior => nrows * ncols,
            Face::Boundary { rank } => rank * (rank + 1) / 2 - 1,
        }
    }
}

pub fn minimal_face(svd: &ThinSvd, delta: f64) -> Result<Face, FaceError> {
    classify(svd, delta, false)
}

/// Like [`minimal_face`], but `on_boundary` forces the boundary label for
/// iterates produced by boundary-hitting steps.
pub fn classify(svd: &ThinSvd, delta: f64, on_boundary: bool) -> Result<Face, FaceError> {
    let nuclear = svd.nuclear_norm();
    if nuclear > delta * (1.0 + BOUNDARY_TOL) {
        return Err(FaceError::Infeasible { nuclear, delta });
    }
    if svd.rank() > 0 && (on_boundary || nuclear >= delta * (1.0 - BOUNDARY_TOL)) {
        Ok(Face::Boundary { rank: svd.rank() })
    } else {
        Ok(Face::Interior)
    }
}

/// `G = ½ (Vᵀ gᵀ U + Uᵀ g V)`, so that `⟨g, U M Vᵀ⟩ = ⟨G, M⟩` for symmetric `M`.
pub fn reduced_gradient(grad: &SparseMatrix, u: &DMatrix<f64>, v: &DMatrix<f64>) -> SymmetricSmall {
    let gv = grad.mul_dense(v);
    SymmetricSmall::from_dense(&u.tr_mul(&gv))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaceMove {
    /// `Δ = D − δ q qᵀ`.
    Away { q: DVector<f64> },
    /// `Δ = δ q qᵀ − D`.
    Toward { q: DVector<f64> },
    Other,
}

/// Descent direction inside the minimal face, with its slope `⟨∇f, d⟩`.
#[derive(Debug, Clone)]
pub enum InFaceDirection {
    /// `d = U Δ Vᵀ` with `tr Δ = 0`.
    FaceDelta { delta: SymmetricSmall, kind: FaceMove, slope: f64 },
    /// `d = scale_z · Z + weight · a bᵀ`.
    FullSpace { scale_z: f64, a: DVector<f64>, b: DVector<f64>, weight: f64, slope: f64 },
}

impl InFaceDirection {
    pub fn slope(&self) -> f64 {
        match self {
            InFaceDirection::FaceDelta { slope, .. } | InFaceDirection::FullSpace { slope, .. } => *slope,
        }
    }

    /// Entries of `d` on the observation pattern, given those of `Z`.
    pub fn on_pattern(&self, iterate: &ThinSvd, z_omega: &[f64], instance: &Instance, exec: Execution) -> Vec<f64> {
        let pattern = instance.pattern();
        match self {
            InFaceDirection::FaceDelta { delta, .. } => {
                sample_product(exec, &(iterate.u() * delta.to_dense()), iterate.v(), pattern)
            }
            InFaceDirection::FullSpace { scale_z, a, b, weight, .. } => pattern
                .coords()
                .zip(z_omega)
                .map(|((i, j), z)| scale_z * z + weight * a[i] * b[j])
                .collect(),
        }
    }

    /// Thin SVD of `Z + α d`.
    pub fn apply(&self, iterate: &ThinSvd, alpha: f64, psd_floor: f64) -> Result<ThinSvd, LinalgError> {
        match self {
            InFaceDirection::FaceDelta { delta, .. } => iterate.inface_update(&delta.scaled(alpha), psd_floor),
            InFaceDirection::FullSpace { scale_z, a, b, weight, .. } => {
                Ok(Rank1Path::new(iterate, a, b).apply(1.0 + alpha * scale_z, alpha * weight))
            }
        }
    }
}

fn face_delta(iterate: &ThinSvd, g: &SymmetricSmall, q: DVector<f64>, delta: f64, away: bool) -> Option<InFaceDirection> {
    let d = SymmetricSmall::diagonal(iterate.sigma());
    let qq = SymmetricSmall::outer(&q, delta);
    let step = if away { d.add_scaled(-1.0, &qq) } else { qq.add_scaled(-1.0, &d) };
    let slope = g.inner(&step);
    if !(slope < 0.0) {
        return None;
    }
    let kind = if away { FaceMove::Away { q } } else { FaceMove::Toward { q } };
    Some(InFaceDirection::FaceDelta { delta: step, kind, slope })
}

/// `⟨g, a bᵀ⟩` for dense vectors.
fn bilinear(grad: &SparseMatrix, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    grad.iter().map(|(i, j, g)| g * a[i] * b[j]).sum()
}

/// Direction `Z − Ẑ` away from the face point maximizing `⟨∇f, ·⟩`.
///
/// `top` is the leading singular triplet of `grad`; it is only used for
/// interior iterates. Returns `None` when no descent direction exists.
pub fn away_direction(
    face: Face,
    grad: &SparseMatrix,
    iterate: &ThinSvd,
    z_omega: &[f64],
    delta: f64,
    top: Option<&SingularTriplet>,
) -> Option<InFaceDirection> {
    match face {
        Face::Boundary { rank } if rank <= 1 => None,
        Face::Boundary { .. } => {
            let g = reduced_gradient(grad, iterate.u(), iterate.v());
            let (_, q) = sym_eig_extreme(&g, EigSense::Largest);
            face_delta(iterate, &g, q, delta, true)
        }
        Face::Interior => {
            let t = top?;
            let slope = grad.dot_values(z_omega) - delta * bilinear(grad, &t.u, &t.v);
            (slope < 0.0).then(|| InFaceDirection::FullSpace {
                scale_z: 1.0,
                a: t.u.clone(),
                b: t.v.clone(),
                weight: -delta,
                slope,
            })
        }
    }
}

/// Frank-Wolfe direction restricted to the face: `Z̃ − Z` with `Z̃` the face
/// point minimizing `⟨∇f, ·⟩`.
pub fn inface_fw_direction(
    face: Face,
    grad: &SparseMatrix,
    iterate: &ThinSvd,
    z_omega: &[f64],
    delta: f64,
    top: Option<&SingularTriplet>,
) -> Option<InFaceDirection> {
    match face {
        Face::Boundary { rank } if rank <= 1 => None,
        Face::Boundary { .. } => {
            let g = reduced_gradient(grad, iterate.u(), iterate.v());
            let (_, q) = sym_eig_extreme(&g, EigSense::Smallest);
            face_delta(iterate, &g, q, delta, false)
        }
        Face::Interior => {
            let t = top?;
            let slope = -delta * bilinear(grad, &t.u, &t.v) - grad.dot_values(z_omega);
            (slope < 0.0).then(|| InFaceDirection::FullSpace {
                scale_z: -1.0,
                a: t.u.clone(),
                b: t.v.clone(),
                weight: -delta,
                slope,
            })
        }
    }
}

/// `(δ qᵀ D⁻¹ q − 1)⁻¹`, infinite when the bracket is not positive.
pub fn away_alpha_stop(sigma: &[f64], q: &DVector<f64>, delta: f64) -> f64 {
    let s = delta * sigma.iter().zip(q.iter()).map(|(d, qi)| qi * qi / d).sum::<f64>() - 1.0;
    if s > 0.0 {
        1.0 / s
    } else {
        f64::INFINITY
    }
}

/// `−1 / λ_min(D^{-1/2} Δ D^{-1/2})`, infinite when that matrix is PSD.
pub fn general_alpha_stop(sigma: &[f64], step: &SymmetricSmall) -> f64 {
    let r = sigma.len();
    let mut w = SymmetricSmall::zeros(r);
    for i in 0..r {
        for j in i..r {
            w.set(i, j, step.get(i, j) / (sigma[i] * sigma[j]).sqrt());
        }
    }
    let (lmin, _) = sym_eig_extreme(&w, EigSense::Smallest);
    if lmin < 0.0 {
        -1.0 / lmin
    } else {
        f64::INFINITY
    }
}

const CROSSING_ITERS: usize = 60;

/// Largest `α` with `norm(α) ≤ δ`, for a convex `norm` with `norm(0) ≤ δ`.
///
/// Brackets by doubling, then narrows with the Illinois variant of regula
/// falsi; the returned end of the bracket is always feasible.
pub fn boundary_crossing(norm: impl Fn(f64) -> f64, delta: f64) -> f64 {
    let g = |a: f64| norm(a) - delta;
    let (mut lo, mut glo) = (0.0, g(0.0));
    if glo >= 0.0 {
        return 0.0;
    }
    let mut hi = 1.0;
    let mut ghi = g(hi);
    let mut doublings = 0;
    while ghi <= 0.0 {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        ghi = g(hi);
        doublings += 1;
        if doublings > 200 {
            return f64::INFINITY;
        }
    }
    let (mut wlo, mut whi) = (glo, ghi);
    let mut side = 0i8;
    for _ in 0..CROSSING_ITERS {
        if hi - lo <= 1e-15 * hi || -glo <= 1e-12 * delta {
            break;
        }
        let mut x = (lo * whi - hi * wlo) / (whi - wlo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x);
        if gx <= 0.0 {
            lo = x;
            glo = gx;
            wlo = gx;
            if side == -1 {
                whi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            whi = gx;
            if side == 1 {
                wlo *= 0.5;
            }
            side = 1;
        }
    }
    lo
}

/// Largest step keeping `Z + α d` in the current face (boundary) or in the
/// ball (interior). `f64::INFINITY` means the direction never leaves it.
pub fn alpha_stop(face: Face, iterate: &ThinSvd, dir: &InFaceDirection, delta: f64) -> f64 {
    match dir {
        InFaceDirection::FaceDelta { delta: step, kind, slope } => {
            assert!(*slope < 0.0, "alpha_stop needs a descent direction");
            debug_assert!(face.is_boundary());
            match kind {
                FaceMove::Away { q } => away_alpha_stop(iterate.sigma(), q, delta),
                _ => general_alpha_stop(iterate.sigma(), step),
            }
        }
        InFaceDirection::FullSpace { scale_z, a, b, weight, slope } => {
            assert!(*slope < 0.0, "alpha_stop needs a descent direction");
            let path = Rank1Path::new(iterate, a, b);
            boundary_crossing(|al| path.nuclear_norm(1.0 + al * scale_z, al * weight), delta)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FaceOptOptions {
    pub budget: usize,
    /// Relative objective change below which the inner method stops.
    pub tol: f64,
    pub execution: Execution,
}

impl Default for FaceOptOptions {
    fn default() -> Self {
        Self { budget: 50, tol: 1e-6, execution: Execution::default() }
    }
}

/// Result of minimizing `f(U M Vᵀ)` over the spectrahedron of trace `δ`.
#[derive(Debug, Clone)]
pub struct FaceOptimum {
    pub m: SymmetricSmall,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
    /// No improving step was accepted; `m` is the starting `D`.
    pub fallback: bool,
}

fn spectral_map(m: &SymmetricSmall, f: impl Fn(f64) -> f64) -> SymmetricSmall {
    let eig = sym_eig(m);
    let r = m.order();
    let mut out = SymmetricSmall::zeros(r);
    for t in 0..r {
        let q = eig.vectors.column(t).into_owned();
        out = out.add_scaled(1.0, &SymmetricSmall::outer(&q, f(eig.values[t])));
    }
    out
}

/// `δ · exp(L − λ_max) / tr(·)`, the normalized matrix exponential.
fn normalized_exp(l: &SymmetricSmall, delta: f64) -> SymmetricSmall {
    let eig = sym_eig(l);
    let top = eig.values[0];
    let r = l.order();
    let weights: Vec<f64> = eig.values.iter().map(|v| (v - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut out = SymmetricSmall::zeros(r);
    for t in 0..r {
        let q = eig.vectors.column(t).into_owned();
        out = out.add_scaled(1.0, &SymmetricSmall::outer(&q, delta * weights[t] / total));
    }
    out
}

/// Entropic mirror descent for `min f(U M Vᵀ)` over `M ⪰ 0, tr M = δ`,
/// started at `M = D` and accepting only decreasing steps.
pub fn face_optimize(iterate: &ThinSvd, instance: &Instance, opts: &FaceOptOptions) -> FaceOptimum {
    let delta = instance.delta();
    let r = iterate.rank();
    let pattern = instance.pattern();
    let (u, v) = (iterate.u(), iterate.v());
    let phi = |m: &SymmetricSmall| -> (f64, Vec<f64>) {
        let z = sample_product(opts.execution, &(u * m.to_dense()), v, pattern);
        (objective_value(&z, instance), z)
    };
    let mut m = SymmetricSmall::diagonal(iterate.sigma());
    if r <= 1 {
        let m1 = SymmetricSmall::diagonal(&vec![delta; r]);
        let (f, _) = phi(&m1);
        return FaceOptimum { m: m1, f, iterations: 0, converged: true, fallback: false };
    }
    m = m.scaled(delta / m.trace());
    let (mut f, mut z) = phi(&m);
    let mut eta = 1.0 / (instance.scale() * delta);
    let mut accepted = 0usize;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.budget {
        iterations += 1;
        let g = reduced_gradient(&gradient(&z, instance), u, v);
        let log_m = spectral_map(&m, |x| x.max(1e-300).ln());
        let mut improved = None;
        for _ in 0..40 {
            let cand = normalized_exp(&log_m.add_scaled(-eta, &g), delta);
            let decrease = g.inner(&cand.add_scaled(-1.0, &m));
            let (fc, zc) = phi(&cand);
            if fc <= f + 1e-4 * decrease && fc <= f {
                improved = Some((cand, fc, zc));
                break;
            }
            eta *= 0.5;
        }
        let Some((cand, fc, zc)) = improved else {
            converged = true;
            break;
        };
        let change = (f - fc).abs();
        m = cand;
        z = zc;
        let prev = f;
        f = fc;
        accepted += 1;
        eta *= 2.0;
        if change <= opts.tol * prev.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    FaceOptimum { m, f, iterations, converged, fallback: accepted == 0 }
}
