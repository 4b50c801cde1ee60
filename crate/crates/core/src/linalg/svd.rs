use nalgebra::{DMatrix, DVector};

use super::{dense, sym_eig_full, LinalgError, SparsityPattern, SymmetricSmall, RANK_TOLERANCE, REORTH_THRESHOLD, TRUNCATION_TOLERANCE};
use crate::par::{self, Execution};

/// Updates between orthonormality checks.
const DRIFT_CHECK_EVERY: u32 = 8;

/// Thin SVD `U diag(sigma) Vᵀ` with `sigma` descending and strictly above
/// [`TRUNCATION_TOLERANCE`] times the largest value.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    u: DMatrix<f64>,
    sigma: Vec<f64>,
    v: DMatrix<f64>,
    since_check: u32,
}

impl ThinSvd {
    /// Assembles factors, sorting singular values and dropping negligible
    /// ones. Orthonormality of `u`, `v` is the caller's
    /// responsibility.
    pub fn from_parts(u: DMatrix<f64>, sigma: Vec<f64>, v: DMatrix<f64>) -> Result<Self, LinalgError> {
        if u.ncols() != sigma.len() || v.ncols() != sigma.len() {
            return Err(LinalgError::Dimension(format!(
                "factor widths {} / {} do not match {} singular values",
                u.ncols(),
                v.ncols(),
                sigma.len()
            )));
        }
        let keep: Vec<usize> = sorted_keep(&sigma);
        Ok(Self {
            u: select_columns(&u, &keep),
            sigma: keep.iter().map(|&k| sigma[k]).collect(),
            v: select_columns(&v, &keep),
            since_check: 0,
        })
    }

    pub fn zero(nrows: usize, ncols: usize) -> Self {
        Self { u: DMatrix::zeros(nrows, 0), sigma: Vec::new(), v: DMatrix::zeros(ncols, 0), since_check: 0 }
    }

    /// `sigma · u vᵀ` for unit `u`, `v`; a negative `sigma` flips `u`.
    pub fn rank_one(sigma: f64, u: &DVector<f64>, v: &DVector<f64>) -> Self {
        let (s, uu) = if sigma < 0.0 { (-sigma, -u) } else { (sigma, u.clone()) };
        Self::from_parts(
            DMatrix::from_column_slice(uu.len(), 1, uu.as_slice()),
            vec![s],
            DMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        )
        .expect("consistent rank-one factors")
    }

    /// Exact thin SVD of a dense matrix.
    pub fn from_dense(z: &DMatrix<f64>) -> Self {
        let (u, s, v) = dense::svd(z);
        Self::from_parts(u, s, v).expect("consistent SVD shapes")
    }

    pub fn nrows(&self) -> usize {
        self.u.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.v.nrows()
    }

    /// Number of stored singular triplets.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Number of singular values above [`RANK_TOLERANCE`].
    pub fn numerical_rank(&self) -> usize {
        self.sigma.iter().filter(|&&s| s > RANK_TOLERANCE).count()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn nuclear_norm(&self) -> f64 {
        self.sigma.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// Rescales the singular values so they sum to `target`.
    pub fn renormalize_nuclear(&mut self, target: f64) {
        let total = self.nuclear_norm();
        if total > 0.0 {
            let f = target / total;
            self.sigma.iter_mut().for_each(|s| *s *= f);
        }
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (t, s) in self.sigma.iter().enumerate() {
            us.column_mut(t).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// `max(‖UᵀU − I‖_F, ‖VᵀV − I‖_F)`.
    pub fn orthonormality_drift(&self) -> f64 {
        let r = self.rank();
        let eye = DMatrix::<f64>::identity(r, r);
        let du = (dense::gram(&self.u) - &eye).norm();
        let dv = (dense::gram(&self.v) - &eye).norm();
        du.max(dv)
    }

    /// Restores exact orthonormality by refactoring through QR of both blocks.
    pub fn reorthogonalize(&mut self) {
        if self.rank() == 0 {
            return;
        }
        let qu = self.u.clone().qr();
        let qv = self.v.clone().qr();
        let mut core = qu.r();
        for (t, s) in self.sigma.iter().enumerate() {
            core.column_mut(t).scale_mut(*s);
        }
        let core = core * qv.r().transpose();
        let (su, ss, sv) = dense::svd(&core);
        let keep = sorted_keep(&ss);
        self.u = qu.q() * select_columns(&su, &keep);
        self.v = qv.q() * select_columns(&sv, &keep);
        self.sigma = keep.iter().map(|&k| ss[k]).collect();
        self.since_check = 0;
    }

    fn after_update(mut self) -> Self {
        self.since_check += 1;
        if self.since_check >= DRIFT_CHECK_EVERY {
            if self.orthonormality_drift() > REORTH_THRESHOLD {
                self.reorthogonalize();
            }
            self.since_check = 0;
        }
        self
    }

    /// Thin SVD of `c · U D Vᵀ + a bᵀ`.
    pub fn scale_plus_rank1(&self, c: f64, a: &DVector<f64>, b: &DVector<f64>) -> Self {
        Rank1Path::new(self, a, b).apply(c, 1.0)
    }

    /// Thin SVD of `U (D + Δ) Vᵀ` for `D + Δ` numerically PSD.
    pub fn inface_update(&self, delta: &SymmetricSmall, psd_floor: f64) -> Result<Self, LinalgError> {
        let r = self.rank();
        if delta.order() != r {
            return Err(LinalgError::Dimension(format!("Δ has order {} but the iterate has rank {r}", delta.order())));
        }
        let target = SymmetricSmall::diagonal(&self.sigma).add_scaled(1.0, delta);
        let eig = sym_eig_full(&target, psd_floor)?;
        let floor = cutoff(eig.values.iter().copied());
        let keep: Vec<usize> = (0..r).filter(|&k| eig.values[k] > floor).collect();
        let rot = select_columns(&eig.vectors, &keep);
        let next = Self {
            u: &self.u * &rot,
            sigma: keep.iter().map(|&k| eig.values[k]).collect(),
            v: &self.v * &rot,
            since_check: self.since_check,
        };
        Ok(next.after_update())
    }

    /// Entries of the represented matrix on `pattern`, in pattern order.
    pub fn sample_pattern(&self, pattern: &SparsityPattern) -> Vec<f64> {
        self.sample_pattern_with(Execution::default(), pattern)
    }

    pub fn sample_pattern_with(&self, exec: Execution, pattern: &SparsityPattern) -> Vec<f64> {
        let (left, right) = self.row_factors();
        let r = self.rank();
        let mut out = vec![0.0; pattern.nnz()];
        par::fill_indexed(exec, pattern.nnz() * r.max(1), &mut out, |k| {
            let (i, j) = (pattern.row(k), pattern.col(k));
            dot(&left[i * r..(i + 1) * r], &right[j * r..(j + 1) * r])
        });
        out
    }

    /// Row-major copies of `U diag(σ)` and `V` for cache-friendly sampling.
    fn row_factors(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.rank();
        let mut left = vec![0.0; self.nrows() * r];
        for t in 0..r {
            for i in 0..self.nrows() {
                left[i * r + t] = self.u[(i, t)] * self.sigma[t];
            }
        }
        let mut right = vec![0.0; self.ncols() * r];
        for t in 0..r {
            for j in 0..self.ncols() {
                right[j * r + t] = self.v[(j, t)];
            }
        }
        (left, right)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cutoff(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, f64::max) * TRUNCATION_TOLERANCE
}

/// Indices of values above the truncation cutoff, largest first.
fn sorted_keep(values: &[f64]) -> Vec<usize> {
    let floor = cutoff(values.iter().copied());
    let mut idx: Vec<usize> = (0..values.len()).filter(|&k| values[k] > floor).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

fn select_columns(m: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), keep.len());
    for (dst, &src) in keep.iter().enumerate() {
        out.column_mut(dst).copy_from(&m.column(src));
    }
    out
}

/// Splits `a` into its coefficients on the orthonormal block `basis` and a unit
/// residual direction. Gram-Schmidt is repeated until the residual stops
/// shrinking by more than half.
fn project(basis: &DMatrix<f64>, a: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
    let a_norm = a.norm();
    let mut coeff = DVector::zeros(basis.ncols());
    let mut resid = a.clone();
    let mut prev = a_norm;
    for _ in 0..4 {
        if basis.ncols() == 0 {
            break;
        }
        let c = basis.tr_mul(&resid);
        resid -= basis * &c;
        coeff += c;
        let now = resid.norm();
        if now >= 0.5 * prev {
            break;
        }
        prev = now;
    }
    let mut rho = resid.norm();
    if rho <= 1e-14 * a_norm || rho == 0.0 {
        return (coeff, DVector::zeros(a.len()), 0.0);
    }
    resid /= rho;
    // a nearly inside the span leaves a residual dominated by rounding
    for _ in 0..2 {
        if basis.ncols() == 0 {
            break;
        }
        let c = basis.tr_mul(&resid);
        if c.amax() <= 1e-15 {
            break;
        }
        resid -= basis * &c;
        coeff += c * rho;
        let n = resid.norm();
        resid /= n;
        rho *= n;
    }
    (coeff, resid, rho)
}

/// The family `c · U D Vᵀ + s · a bᵀ` in a fixed augmented basis, so that its
/// singular values can be evaluated for many `(c, s)` at `O(r³)` each.
pub struct Rank1Path<'a> {
    base: &'a ThinSvd,
    a_coeff: DVector<f64>,
    a_resid: DVector<f64>,
    a_rho: f64,
    b_coeff: DVector<f64>,
    b_resid: DVector<f64>,
    b_rho: f64,
}

impl<'a> Rank1Path<'a> {
    pub fn new(base: &'a ThinSvd, a: &DVector<f64>, b: &DVector<f64>) -> Self {
        assert_eq!(a.len(), base.nrows());
        assert_eq!(b.len(), base.ncols());
        let (a_coeff, a_resid, a_rho) = project(&base.u, a);
        let (b_coeff, b_resid, b_rho) = project(&base.v, b);
        Self { base, a_coeff, a_resid, a_rho, b_coeff, b_resid, b_rho }
    }

    fn core(&self, c: f64, s: f64) -> DMatrix<f64> {
        let r = self.base.rank();
        let mut k = DMatrix::zeros(r + 1, r + 1);
        for t in 0..r {
            k[(t, t)] = c * self.base.sigma[t];
        }
        let av = self.a_coeff.iter().copied().chain(std::iter::once(self.a_rho));
        let bv: Vec<f64> = self.b_coeff.iter().copied().chain(std::iter::once(self.b_rho)).collect();
        for (i, ai) in av.enumerate() {
            for (j, bj) in bv.iter().enumerate() {
                k[(i, j)] += s * ai * bj;
            }
        }
        k
    }

    pub fn singular_values(&self, c: f64, s: f64) -> Vec<f64> {
        dense::singular_values(&self.core(c, s))
    }

    pub fn nuclear_norm(&self, c: f64, s: f64) -> f64 {
        self.singular_values(c, s).iter().sum()
    }

    /// Thin SVD of `c · U D Vᵀ + s · a bᵀ`.
    pub fn apply(&self, c: f64, s: f64) -> ThinSvd {
        let r = self.base.rank();
        let (su, ss, sv) = dense::svd(&self.core(c, s));
        let keep = sorted_keep(&ss);
        let p = select_columns(&su, &keep);
        let q = select_columns(&sv, &keep);
        let mut u = &self.base.u * p.rows(0, r);
        u.ger(1.0, &self.a_resid, &p.row(r).transpose(), 1.0);
        let mut v = &self.base.v * q.rows(0, r);
        v.ger(1.0, &self.b_resid, &q.row(r).transpose(), 1.0);
        let next = ThinSvd {
            u,
            sigma: keep.iter().map(|&k| ss[k]).collect(),
            v,
            since_check: self.base.since_check,
        };
        next.after_update()
    }
}

/// Entries of `left · rightᵀ` on `pattern`, in pattern order.
pub fn sample_product(exec: Execution, left: &DMatrix<f64>, right: &DMatrix<f64>, pattern: &SparsityPattern) -> Vec<f64> {
    assert_eq!(left.ncols(), right.ncols(), "factor widths differ");
    let r = left.ncols();
    let l = left.transpose();
    let rt = right.transpose();
    let (l, rt) = (l.as_slice(), rt.as_slice());
    let mut out = vec![0.0; pattern.nnz()];
    par::fill_indexed(exec, pattern.nnz() * r.max(1), &mut out, |k| {
        let (i, j) = (pattern.row(k), pattern.col(k));
        dot(&l[i * r..(i + 1) * r], &rt[j * r..(j + 1) * r])
    });
    out
}

/// Entries `Σ_t U_it σ_t V_jt` at the requested coordinates.
pub fn sample_lowrank_entries(svd: &ThinSvd, coords: &[(usize, usize)]) -> Vec<f64> {
    let (left, right) = svd.row_factors();
    let r = svd.rank();
    coords
        .iter()
        .map(|&(i, j)| {
            assert!(i < svd.nrows() && j < svd.ncols(), "coordinate ({i}, {j}) out of range");
            dot(&left[i * r..(i + 1) * r], &right[j * r..(j + 1) * r])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, k: usize) -> DVector<f64> {
        let mut e = DVector::zeros(n);
        e[k] = 1.0;
        e
    }

    #[test]
    fn identity_update_leaves_input_unchanged() {
        let base = ThinSvd::from_dense(&DMatrix::from_fn(6, 5, |i, j| ((i * 5 + j) as f64).cos()));
        let out = base.scale_plus_rank1(1.0, &DVector::zeros(6), &unit(5, 0));
        assert_eq!(out.rank(), base.rank());
        for (a, b) in out.sigma().iter().zip(base.sigma()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!((out.materialize() - base.materialize()).norm() < 1e-13);
    }

    #[test]
    fn zero_scale_gives_the_rank_one_term() {
        let base = ThinSvd::from_dense(&DMatrix::from_fn(6, 5, |i, j| ((i + 2 * j) as f64).sin()));
        let a = unit(6, 2);
        let b = unit(5, 4);
        let out = base.scale_plus_rank1(0.0, &a, &b);
        assert_eq!(out.rank(), 1);
        assert!((out.sigma()[0] - 1.0).abs() < 1e-13);
        assert!((out.materialize() - &a * b.transpose()).norm() < 1e-13);
    }

    #[test]
    fn boundary_hit_drops_rank() {
        let base = ThinSvd::from_parts(
            DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            vec![2.0, 1.0],
            DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]),
        )
        .unwrap();
        let out = base.inface_update(&SymmetricSmall::diagonal(&[-2.0, 1.0]), 1e-12).unwrap();
        assert_eq!(out.rank(), 1);
        assert!((out.sigma()[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_delta_keeps_singular_values() {
        let base = ThinSvd::from_dense(&DMatrix::from_fn(7, 4, |i, j| 1.0 / (1.0 + i as f64 + 2.0 * j as f64)));
        let out = base.inface_update(&SymmetricSmall::zeros(base.rank()), 1e-12).unwrap();
        assert!(out.sigma().iter().zip(base.sigma()).all(|(a, b)| (a - b).abs() <= 1e-14 * b.max(1.0)));
        assert!((out.materialize() - base.materialize()).norm() < 1e-13);
    }

    #[test]
    fn rank_one_sampling() {
        let u = DVector::from_vec(vec![0.6, 0.8]);
        let v = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        let svd = ThinSvd::rank_one(2.5, &u, &v);
        assert_eq!(sample_lowrank_entries(&svd, &[(1, 1)]), vec![2.5 * 0.8]);
        assert!(sample_lowrank_entries(&svd, &[]).is_empty());
    }

    #[test]
    fn reorthogonalize_preserves_matrix() {
        let z = DMatrix::from_fn(9, 6, |i, j| ((i * 3 + j * 7) % 5) as f64 - 2.0);
        let mut svd = ThinSvd::from_dense(&z);
        let before = svd.materialize();
        svd.reorthogonalize();
        assert!((svd.materialize() - before).norm() < 1e-12);
        assert!(svd.orthonormality_drift() < 1e-13);
    }
}
