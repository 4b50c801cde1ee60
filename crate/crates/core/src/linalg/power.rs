use nalgebra::{DMatrix, DVector, SVD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{dense, fix_sign, LinalgError, SparseMatrix};
use crate::par::Execution;

/// Leading singular value with unit left/right singular vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularTriplet {
    pub sigma: f64,
    pub u: DVector<f64>,
    pub v: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct PowerOptions {
    /// Stop once `‖Av − σu‖` and `‖Aᵀu − σv‖` are at most `tol·σ`.
    pub tol: f64,
    /// Defaults to `10 * max(m, n)` when `None`.
    pub max_iters: Option<usize>,
    pub seed: u64,
    /// Starting right vector; a seeded Gaussian vector otherwise.
    pub warm_start: Option<DVector<f64>>,
    /// Problems with `min(m, n)` at or below this use a dense SVD instead.
    pub dense_fallback_dim: usize,
    pub execution: Execution,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iters: None,
            seed: 0,
            warm_start: None,
            dense_fallback_dim: 64,
            execution: Execution::default(),
        }
    }
}

fn normalize(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        x.iter_mut().for_each(|v| *v /= n);
    }
    n
}

fn finish(sigma: f64, mut u: Vec<f64>, mut v: Vec<f64>) -> SingularTriplet {
    fix_sign(&mut u, Some(&mut v));
    SingularTriplet { sigma, u: DVector::from_vec(u), v: DVector::from_vec(v) }
}

fn dense_top(a: &SparseMatrix) -> SingularTriplet {
    let svd = SVD::new(a.to_dense(), true, true);
    let k = svd.singular_values.imax();
    let u = svd.u.as_ref().expect("left vectors").column(k).iter().copied().collect();
    let v = svd.v_t.as_ref().expect("right vectors").row(k).iter().copied().collect();
    finish(svd.singular_values[k], u, v)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Two passes of classical Gram-Schmidt against `basis`.
fn orthogonalize(x: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(x, q);
            x.iter_mut().zip(q).for_each(|(xi, qi)| *xi -= c * qi);
        }
    }
}

/// Unit-normalized `Σ_i c_i basis_i`.
fn combine(basis: &[Vec<f64>], coeff: impl Iterator<Item = f64>, len: usize) -> Vec<f64> {
    let mut x = vec![0.0; len];
    for (b, c) in basis.iter().zip(coeff) {
        x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += c * bi);
    }
    normalize(&mut x);
    x
}

/// `max(‖A v − σ u‖, ‖Aᵀ u − σ v‖) / σ`.
fn true_residual(a: &SparseMatrix, exec: Execution, sigma: f64, u: &[f64], v: &[f64]) -> f64 {
    let av = a.mul_vec_with(exec, v);
    let atu = a.tr_mul_vec_with(exec, u);
    let r1 = av.iter().zip(u).map(|(x, y)| (x - sigma * y).powi(2)).sum::<f64>().sqrt();
    let r2 = atu.iter().zip(v).map(|(x, y)| (x - sigma * y).powi(2)).sum::<f64>().sqrt();
    r1.max(r2) / sigma
}

/// Largest Krylov basis before a restart.
const CYCLE: usize = 40;
/// Ritz vectors kept across a restart.
const KEEP: usize = 8;

/// Top singular triplet of a sparse matrix by Golub-Kahan-Lanczos
/// bidiagonalization with full reorthogonalization and thick restarts.
///
/// `max_iters` counts products with `A`. Deterministic for a given seed (or
/// warm start). On a budget overrun the best pair found is returned inside
/// [`LinalgError::InexactOracle`].
pub fn top_singular_triplet(a: &SparseMatrix, opts: &PowerOptions) -> Result<SingularTriplet, LinalgError> {
    if a.is_zero() {
        return Err(LinalgError::ZeroMatrix);
    }
    let (m, n) = (a.nrows(), a.ncols());
    if m.min(n) <= opts.dense_fallback_dim {
        return Ok(dense_top(a));
    }
    let exec = opts.execution;
    let fresh = |salt: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(salt));
        let mut x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        normalize(&mut x);
        x
    };
    let mut next = match &opts.warm_start {
        Some(w) if w.len() == n && w.norm() > 0.0 => {
            let mut x: Vec<f64> = w.iter().copied().collect();
            normalize(&mut x);
            x
        }
        _ => fresh(0),
    };
    let max_iters = opts.max_iters.unwrap_or(10 * m.max(n)).max(1);
    let cycle = CYCLE.min(m.min(n));
    // A V = U B with B upper triangular; `next` is the unit vector extending V.
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut b = DMatrix::<f64>::zeros(cycle, cycle);
    let mut used = 0usize;
    let mut salt = 0u64;
    let mut best: Option<(f64, f64, Vec<f64>, Vec<f64>)> = None;
    while used < max_iters {
        let j = us.len();
        vs.push(next);
        let mut p = a.mul_vec_with(exec, &vs[j]);
        used += 1;
        for (i, ui) in us.iter().enumerate() {
            b[(i, j)] = dot(&p, ui);
        }
        orthogonalize(&mut p, &us);
        let alpha = normalize(&mut p);
        let scale = b[(0, 0)].max(alpha);
        if alpha <= 1e3 * f64::EPSILON * scale {
            // A v lies in span(U): drop v and continue from a fresh direction
            vs.pop();
            salt += 1;
            let mut x = fresh(salt);
            orthogonalize(&mut x, &vs);
            normalize(&mut x);
            next = x;
            if j == 0 && salt > 8 {
                break;
            }
            continue;
        }
        b[(j, j)] = alpha;
        us.push(p);
        let mut w = a.tr_mul_vec_with(exec, &us[j]);
        orthogonalize(&mut w, &vs);
        let beta = normalize(&mut w);
        let k = j + 1;
        let full = k >= cycle;
        if full || used >= max_iters || k % 4 == 0 || beta <= f64::EPSILON * scale {
            let (pu, sig, qv) = dense::svd(&b.view((0, 0), (k, k)).into_owned());
            let residual = (beta * pu[(k - 1, 0)]).abs() / sig[0];
            let converged = residual <= opts.tol || beta <= f64::EPSILON * scale;
            if converged || full || used >= max_iters {
                let u = combine(&us, pu.column(0).iter().copied(), m);
                let v = combine(&vs, qv.column(0).iter().copied(), n);
                let residual = if converged { true_residual(a, exec, sig[0], &u, &v) } else { residual };
                if residual <= opts.tol {
                    return Ok(finish(sig[0], u, v));
                }
                if best.as_ref().map_or(true, |bst| residual < bst.1) {
                    best = Some((sig[0], residual, u, v));
                }
                if full {
                    let keep = KEEP.min(k - 1).max(1);
                    let nu: Vec<Vec<f64>> = (0..keep).map(|t| combine(&us, pu.column(t).iter().copied(), m)).collect();
                    let nv: Vec<Vec<f64>> = (0..keep).map(|t| combine(&vs, qv.column(t).iter().copied(), n)).collect();
                    us = nu;
                    vs = nv;
                    b.fill(0.0);
                    for t in 0..keep {
                        b[(t, t)] = sig[t];
                    }
                }
            }
        }
        next = w;
    }
    let Some((sigma, residual, u, v)) = best else {
        return Ok(dense_top(a));
    };
    Err(LinalgError::InexactOracle { best: finish(sigma, u, v), residual, iterations: max_iters })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_is_exact() {
        let a = SparseMatrix::from_triplets(4, 3, vec![(0, 0, 3.0)]).unwrap();
        let t = top_singular_triplet(&a, &PowerOptions::default()).unwrap();
        assert!((t.sigma - 3.0).abs() < 1e-14);
        assert!((t.u[0] - 1.0).abs() < 1e-14 && (t.v[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_is_rejected() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 0.0)]).unwrap();
        assert!(matches!(top_singular_triplet(&a, &PowerOptions::default()), Err(LinalgError::ZeroMatrix)));
    }

    #[test]
    fn budget_overrun_reports_best_pair() {
        // a dense cluster of singular values forces slow convergence
        let n = 80;
        let trip: Vec<_> = (0..n).map(|i| (i, i, 1.0 / (1.0 + 1e-3 * i as f64))).collect();
        let a = SparseMatrix::from_triplets(n, n, trip).unwrap();
        let opts = PowerOptions { max_iters: Some(3), tol: 1e-14, ..Default::default() };
        match top_singular_triplet(&a, &opts) {
            Err(LinalgError::InexactOracle { best, iterations, .. }) => {
                assert_eq!(iterations, 3);
                assert!((best.u.norm() - 1.0).abs() < 1e-12);
            }
            other => panic!("expected inexact oracle, got {other:?}"),
        }
    }
}
