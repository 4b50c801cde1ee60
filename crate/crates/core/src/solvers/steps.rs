use crate::linalg::{top_singular_triplet, LinalgError, PowerOptions, SingularTriplet, SparseMatrix, ThinSvd};

/// Minimizer `−δ u vᵀ` of `⟨∇f, Z⟩` over the ball, from the top singular
/// triplet of the gradient.
#[derive(Debug, Clone)]
pub struct LinearSubproblem {
    pub triplet: SingularTriplet,
    pub delta: f64,
}

impl LinearSubproblem {
    pub fn atom(&self) -> ThinSvd {
        ThinSvd::rank_one(-self.delta, &self.triplet.u, &self.triplet.v)
    }

    /// `⟨∇f, atom⟩ = −δσ₁`.
    pub fn atom_inner(&self) -> f64 {
        -self.delta * self.triplet.sigma
    }

    /// Entries of the atom on `grad`'s pattern.
    pub fn atom_on_pattern(&self, grad: &SparseMatrix) -> Vec<f64> {
        let (u, v) = (&self.triplet.u, &self.triplet.v);
        grad.pattern().coords().map(|(i, j)| -self.delta * u[i] * v[j]).collect()
    }
}

/// Solves the linear subproblem; `Ok(None)` means the gradient vanished.
pub fn linear_subproblem(grad: &SparseMatrix, delta: f64, opts: &PowerOptions) -> Result<Option<LinearSubproblem>, LinalgError> {
    match top_singular_triplet(grad, opts) {
        Ok(triplet) => Ok(Some(LinearSubproblem { triplet, delta })),
        Err(LinalgError::ZeroMatrix) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `f + ⟨∇f, atom − Z⟩`.
pub fn wolfe_lower_bound(f: f64, grad: &SparseMatrix, z_omega: &[f64], lmo: &LinearSubproblem) -> f64 {
    f + lmo.atom_inner() - grad.dot_values(z_omega)
}

/// `min(−⟨∇f, d⟩ / (L̄ ‖d_Ω‖²), cap)`.
///
/// Panics unless `d` is a descent direction with nonzero entries on `Ω`.
pub fn quadratic_step(grad: &SparseMatrix, d_omega: &[f64], l_bar: f64, cap: f64) -> f64 {
    let slope = grad.dot_values(d_omega);
    let sq: f64 = d_omega.iter().map(|d| d * d).sum();
    assert!(slope < 0.0, "quadratic_step needs a descent direction");
    assert!(sq > 0.0, "quadratic_step needs a nonzero direction");
    (-slope / (l_bar * sq)).min(cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Choice {
    LowerFace,
    StayFace,
    RegularFw,
}

/// `1/(f_new − B) ≥ 1/(f − B) + γ/c`; a closed gap always qualifies and an
/// infinite `γ` accepts nothing else.
pub(crate) fn reciprocal_gain(f_new: f64, f: f64, bound: f64, gamma: f64, c: f64) -> bool {
    let gap_new = f_new - bound;
    if gap_new <= 0.0 {
        return true;
    }
    if gamma.is_infinite() {
        return false;
    }
    let gap = f - bound;
    1.0 / gap_new >= 1.0 / gap + gamma / c
}

/// Chooses between the partial-face candidates `f_b` (boundary of the face)
/// and `f_a` (within it), or a regular step.
#[allow(clippy::too_many_arguments)]
pub fn step_decision(
    f_b: Option<f64>,
    f_a: Option<f64>,
    f_k: f64,
    b_k: f64,
    gamma1: f64,
    gamma2: f64,
    l_bar: f64,
    d_bar: f64,
) -> Choice {
    let c = 2.0 * l_bar * d_bar * d_bar;
    if f_b.is_some_and(|fb| reciprocal_gain(fb, f_k, b_k, gamma1, c)) {
        Choice::LowerFace
    } else if f_a.is_some_and(|fa| reciprocal_gain(fa, f_k, b_k, gamma2, c)) {
        Choice::StayFace
    } else {
        Choice::RegularFw
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_gradient_atom() {
        let g = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0)]).unwrap();
        let lmo = linear_subproblem(&g, 2.0, &PowerOptions::default()).unwrap().unwrap();
        let atom = lmo.atom().materialize();
        assert!((atom[(0, 0)] + 2.0).abs() < 1e-14);
        assert!((atom.norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_gradient_certifies_optimality() {
        let g = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 0.0)]).unwrap();
        assert!(linear_subproblem(&g, 1.0, &PowerOptions::default()).unwrap().is_none());
    }

    #[test]
    fn gamma_zero_is_non_increase() {
        assert_eq!(step_decision(Some(0.5), None, 0.5, 0.1, 0.0, 1.0, 1.0, 1.0), Choice::LowerFace);
        assert_eq!(step_decision(Some(0.51), None, 0.5, 0.1, 0.0, 1.0, 1.0, 1.0), Choice::RegularFw);
    }

    #[test]
    fn infinite_gamma_never_stays() {
        let d = step_decision(None, Some(0.2), 0.5, 0.1, 0.0, f64::INFINITY, 1.0, 1.0);
        assert_eq!(d, Choice::RegularFw);
        let closed = step_decision(None, Some(0.1), 0.5, 0.1, 0.0, f64::INFINITY, 1.0, 1.0);
        assert_eq!(closed, Choice::StayFace);
    }

    #[test]
    #[should_panic(expected = "descent")]
    fn quadratic_step_rejects_ascent() {
        let g = SparseMatrix::from_triplets(1, 1, vec![(0, 0, 1.0)]).unwrap();
        quadratic_step(&g, &[1.0], 1.0, 1.0);
    }
}
