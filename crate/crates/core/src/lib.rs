//! Frank-Wolfe solvers for nuclear-norm constrained matrix completion.
//!
//! The feasible set is the nuclear-norm ball of radius `delta`, and every
//! iterate is carried as a thin SVD. Besides plain Frank-Wolfe the crate
//! provides away-step variants (natural and atomic) and the in-face extended
//! method, which moves inside the minimal face of the current iterate to keep
//! its rank low.

pub mod experiment;
pub mod face;
pub mod kv;
pub mod linalg;
pub mod par;
pub mod problem;
pub mod solvers;
pub mod trace;
