//! The least-squares completion objective over the nuclear-norm ball, plus
//! instance generation, triplet ingestion and radius selection.

mod delta;
mod generate;
mod io;

pub use delta::{default_delta_grid, select_delta, DeltaChoice, DeltaSelection};
pub use generate::{generate_instance, GenSpec, GeneratedInstance};
pub use io::{
    load_instance_dir, load_triplets, read_triplets, save_instance_dir, write_triplets, InstanceMetadata, DataError,
    META_FILE, TRIPLETS_FILE,
};

use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::linalg::{SparseMatrix, SparsityPattern};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("nuclear-norm radius must be positive, got {0}")]
    NonPositiveDelta(f64),
    #[error("observation set is empty")]
    EmptyObservations,
    #[error("all observed values are zero; the objective cannot be normalized")]
    ZeroObservations,
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("invalid radius selection: {0}")]
    InvalidSelection(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] Box<crate::solvers::SolverError>),
}

/// The observed entries `X_Ω` on their pattern `Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedMatrix(SparseMatrix);

impl ObservedMatrix {
    pub fn new(matrix: SparseMatrix) -> Self {
        Self(matrix)
    }

    pub fn from_triplets(nrows: usize, ncols: usize, triplets: Vec<(usize, usize, f64)>) -> Result<Self, DataError> {
        Ok(Self(SparseMatrix::from_triplets(nrows, ncols, triplets)?))
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        self.0.pattern()
    }

    pub fn values(&self) -> &[f64] {
        self.0.values()
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn nnz(&self) -> usize {
        self.0.nnz()
    }

    /// `‖X_Ω‖_F`.
    pub fn frobenius_norm(&self) -> f64 {
        self.values().iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Content hash over dimensions, coordinates and value bits; used to check
    /// that paired runs saw the same data.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        (self.nrows(), self.ncols()).hash(&mut h);
        for (i, j, v) in self.0.iter() {
            (i, j, v.to_bits()).hash(&mut h);
        }
        h.finish()
    }
}

/// A completion problem: observations, radius `delta`, and the objective
/// normalization `scale = 1 / Σ_Ω X²`, which makes `f(0) = 0.5`.
#[derive(Debug, Clone)]
pub struct Instance {
    observed: ObservedMatrix,
    delta: f64,
    scale: f64,
    pub seed: Option<u64>,
}

impl Instance {
    pub fn new(observed: ObservedMatrix, delta: f64) -> Result<Self, ProblemError> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(ProblemError::NonPositiveDelta(delta));
        }
        if observed.nnz() == 0 {
            return Err(ProblemError::EmptyObservations);
        }
        let sq: f64 = observed.values().iter().map(|x| x * x).sum();
        if sq == 0.0 {
            return Err(ProblemError::ZeroObservations);
        }
        Ok(Self { observed, delta, scale: 1.0 / sq, seed: None })
    }

    /// Same observations with a different radius.
    pub fn with_delta(&self, delta: f64) -> Result<Self, ProblemError> {
        let mut next = Self::new(self.observed.clone(), delta)?;
        next.seed = self.seed;
        Ok(next)
    }

    pub fn observed(&self) -> &ObservedMatrix {
        &self.observed
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        self.observed.pattern()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn nrows(&self) -> usize {
        self.observed.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.observed.ncols()
    }

    /// Smoothness constant of the objective with respect to the nuclear norm.
    pub fn lipschitz(&self) -> f64 {
        self.scale
    }

    /// Nuclear-norm diameter of the feasible ball.
    pub fn diameter(&self) -> f64 {
        2.0 * self.delta
    }
}

/// `f(Z) = scale/2 · Σ_Ω (Z_ij − X_ij)²` from the entries of `Z` on `Ω`.
///
/// Panics if `z_omega` is not aligned with the observation pattern.
pub fn objective_value(z_omega: &[f64], instance: &Instance) -> f64 {
    let x = instance.observed.values();
    assert_eq!(z_omega.len(), x.len(), "z_omega must align with the observations");
    0.5 * instance.scale * z_omega.iter().zip(x).map(|(z, x)| (z - x) * (z - x)).sum::<f64>()
}

/// `∇f(Z) = scale · (Z − X)_Ω`.
pub fn gradient(z_omega: &[f64], instance: &Instance) -> SparseMatrix {
    let x = instance.observed.values();
    assert_eq!(z_omega.len(), x.len(), "z_omega must align with the observations");
    let values = z_omega.iter().zip(x).map(|(z, x)| instance.scale * (z - x)).collect();
    SparseMatrix::new(instance.pattern().clone(), values)
}

/// Minimizer of `f(Z + α D)` over `α ∈ [0, alpha_max]`; the quadratic has
/// slope `⟨∇f, D⟩` and curvature `scale · ‖D_Ω‖²`.
pub fn exact_linesearch(grad: &SparseMatrix, d_omega: &[f64], instance: &Instance, alpha_max: f64) -> f64 {
    assert!(alpha_max >= 0.0, "alpha_max must be nonnegative");
    let slope = grad.dot_values(d_omega);
    let curvature = instance.scale * d_omega.iter().map(|d| d * d).sum::<f64>();
    if slope >= 0.0 {
        return 0.0;
    }
    if curvature <= 0.0 {
        return alpha_max;
    }
    (-slope / curvature).clamp(0.0, alpha_max)
}
