//! Numerical kernels: sparse products on the observation pattern, small dense
//! symmetric eigenproblems, the top singular triplet of a sparse matrix, and
//! thin-SVD maintenance under scaled rank-one and in-face updates.

mod dense;
mod power;
mod sparse;
mod svd;
mod sym;

pub use power::{top_singular_triplet, PowerOptions, SingularTriplet};
pub use sparse::{SparseMatrix, SparsityPattern};
pub use svd::{sample_lowrank_entries, sample_product, Rank1Path, ThinSvd};
pub use sym::{sym_eig, sym_eig_extreme, sym_eig_full, EigSense, SymEig, SymmetricSmall};

use thiserror::Error;

/// Singular values at or below this are treated as zero when counting rank.
pub const RANK_TOLERANCE: f64 = 1e-6;

/// Singular values at or below this fraction of the largest one are
/// truncated from every thin SVD.
pub const TRUNCATION_TOLERANCE: f64 = 1e-12;

/// Orthonormality drift above which a thin SVD is re-orthogonalized.
pub const REORTH_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("top singular triplet stopped after {iterations} products with relative residual {residual:.3e}")]
    InexactOracle {
        best: SingularTriplet,
        residual: f64,
        iterations: usize,
    },
    #[error("matrix has no nonzero entries")]
    ZeroMatrix,
    #[error("matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e} below -{floor:.3e}")]
    NotPsd { min_eigenvalue: f64, floor: f64 },
    #[error("coordinate ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    OutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("duplicate coordinate ({row}, {col})")]
    DuplicateCoordinate { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Flips `primary` (and `secondary` with it) so that the first component of
/// `primary` with magnitude above a relative floor is positive.
pub(crate) fn fix_sign(primary: &mut [f64], secondary: Option<&mut [f64]>) {
    let scale = primary.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return;
    }
    let floor = scale * 1e-12;
    if let Some(first) = primary.iter().find(|x| x.abs() > floor) {
        if *first < 0.0 {
            primary.iter_mut().for_each(|x| *x = -*x);
            if let Some(s) = secondary {
                s.iter_mut().for_each(|x| *x = -*x);
            }
        }
    }
}
