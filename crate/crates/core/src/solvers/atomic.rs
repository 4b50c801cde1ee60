use nalgebra::{DMatrix, DVector};

use super::session::{Move, Session};
use super::{SolveOutcome, SolverConfig, SolverError};
use crate::linalg::SparseMatrix;
use crate::problem::Instance;
use crate::trace::StepKind;

const MERGE_TOL: f64 = 1e-10;
const PURGE_TOL: f64 = 1e-12;

/// Convex weights over rank-one atoms `−δ u vᵀ`.
#[derive(Debug, Clone)]
pub struct AtomicState {
    delta: f64,
    atoms: Vec<(DVector<f64>, DVector<f64>)>,
    weights: Vec<f64>,
}

impl AtomicState {
    pub fn new(delta: f64, u: DVector<f64>, v: DVector<f64>) -> Self {
        Self { delta, atoms: vec![(u, v)], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(DVector<f64>, DVector<f64>)] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `Σ λ_j (−δ u_j v_jᵀ)`.
    pub fn materialize(&self) -> DMatrix<f64> {
        let (m, n) = (self.atoms[0].0.len(), self.atoms[0].1.len());
        let mut z = DMatrix::zeros(m, n);
        for ((u, v), w) in self.atoms.iter().zip(&self.weights) {
            z.ger(-self.delta * w, u, v, 1.0);
        }
        z
    }

    fn find(&self, u: &DVector<f64>, v: &DVector<f64>) -> Option<usize> {
        self.atoms.iter().position(|(a, b)| {
            ((a - u).norm() <= MERGE_TOL && (b - v).norm() <= MERGE_TOL)
                || ((a + u).norm() <= MERGE_TOL && (b + v).norm() <= MERGE_TOL)
        })
    }

    /// `λ ← (1 − α) λ + α e_new`.
    pub fn toward(&mut self, alpha: f64, u: &DVector<f64>, v: &DVector<f64>) {
        self.weights.iter_mut().for_each(|w| *w *= 1.0 - alpha);
        match self.find(u, v) {
            Some(j) => self.weights[j] += alpha,
            None => {
                self.atoms.push((u.clone(), v.clone()));
                self.weights.push(alpha);
            }
        }
        self.purge();
    }

    /// `λ ← (1 + α) λ − α e_j`.
    pub fn away(&mut self, j: usize, alpha: f64, full: bool) {
        self.weights.iter_mut().for_each(|w| *w *= 1.0 + alpha);
        self.weights[j] = if full { 0.0 } else { (self.weights[j] - alpha).max(0.0) };
        self.purge();
    }

    fn purge(&mut self) {
        let mut k = 0;
        while k < self.atoms.len() {
            if self.weights[k] < PURGE_TOL && self.atoms.len() > 1 {
                self.atoms.swap_remove(k);
                self.weights.swap_remove(k);
            } else {
                k += 1;
            }
        }
    }

    /// Active atom maximizing `⟨∇f, atom⟩`, with that inner product.
    pub fn away_vertex(&self, grad: &SparseMatrix) -> (usize, f64) {
        let mut best = (0, f64::NEG_INFINITY);
        for (j, (u, v)) in self.atoms.iter().enumerate() {
            let gv = grad.mul_vec(v.as_slice());
            let inner = -self.delta * u.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>();
            if inner > best.1 {
                best = (j, inner);
            }
        }
        best
    }
}

/// Away-step Frank-Wolfe over the convex weights of the generated atoms.
pub fn run_away_atomic(instance: &Instance, config: &SolverConfig) -> Result<SolveOutcome, SolverError> {
    run_away_atomic_with_state(instance, config).map(|(out, _)| out)
}

/// Like [`run_away_atomic`], also returning the final atomic weights.
pub fn run_away_atomic_with_state(
    instance: &Instance,
    config: &SolverConfig,
) -> Result<(SolveOutcome, AtomicState), SolverError> {
    let mut s = Session::new(instance, config, false)?;
    let delta = instance.delta();
    let mut it = s.initialize(None)?;
    let (u0, v0) = (it.svd.u().column(0).into_owned(), it.svd.v().column(0).into_owned());
    // Z⁰ = σ u vᵀ with σ = δ is the atom −δ (−u) vᵀ
    let mut state = AtomicState::new(delta, -u0, v0);
    let (mut kind, mut alpha) = (StepKind::Init, 0.0);
    loop {
        let Some(lmo) = s.lmo(&it)? else {
            return Ok((s.optimal(it, kind, alpha), state));
        };
        if let Some(reason) = s.record(&it, kind, alpha) {
            return Ok((s.finish(reason, it), state));
        }
        let bound = s.bound();
        let gz = it.grad.dot_values(&it.z_omega);
        let toward_slope = lmo.atom_inner() - gz;
        let mut stepped = None;
        if state.len() > 1 {
            let (j, inner) = state.away_vertex(&it.grad);
            let away_slope = gz - inner;
            let lambda = state.weights()[j];
            if away_slope < toward_slope && lambda < 1.0 {
                let stop = lambda / (1.0 - lambda);
                let (u, v) = state.atoms()[j].clone();
                let d: Vec<f64> = instance
                    .pattern()
                    .coords()
                    .zip(&it.z_omega)
                    .map(|((r, c), z)| z + delta * u[r] * v[c])
                    .collect();
                let beta = s.step_size(&it.grad, &d, stop);
                if beta > 0.0 {
                    let next = s.advance(&it, Move::Rank1 { c: 1.0 + beta, s: beta * delta, a: &u, b: &v }, false)?;
                    state.away(j, beta, beta >= stop);
                    stepped = Some((next, beta));
                }
            }
        }
        let (next, k2, a) = match stepped {
            Some((next, beta)) => (next, StepKind::AtomAway, beta),
            None => {
                let (next, a) = s.fw_step(&it, &lmo)?;
                if a > 0.0 {
                    state.toward(a, &lmo.triplet.u, &lmo.triplet.v);
                }
                s.check_step(it.f, bound, next.f, 1.0);
                (next, StepKind::FrankWolfe, a)
            }
        };
        it = next;
        kind = k2;
        alpha = a;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_stay_in_simplex() {
        let e = |n: usize, i: usize| DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
        let mut st = AtomicState::new(1.0, e(3, 0), e(3, 0));
        st.toward(0.25, &e(3, 1), &e(3, 1));
        st.toward(0.5, &e(3, 0), &e(3, 0));
        assert_eq!(st.len(), 2);
        st.away(1, 0.1, false);
        let total: f64 = st.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(st.weights().iter().all(|w| *w >= 0.0));
        let j = 1;
        let l = st.weights()[j];
        st.away(j, l / (1.0 - l), true);
        assert_eq!(st.len(), 1);
        assert!((st.weights()[0] - 1.0).abs() < 1e-12);
    }
}
