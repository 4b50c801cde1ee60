use nalgebra::{DMatrix, DVector};

use super::{fix_sign, LinalgError};

/// Dense symmetric `r x r` matrix holding only its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSmall {
    order: usize,
    packed: Vec<f64>,
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
    hi * (hi + 1) / 2 + lo
}

impl SymmetricSmall {
    pub fn zeros(order: usize) -> Self {
        Self { order, packed: vec![0.0; order * (order + 1) / 2] }
    }

    pub fn identity(order: usize) -> Self {
        Self::diagonal(&vec![1.0; order])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut s = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            s.set(i, i, d);
        }
        s
    }

    /// Symmetric part `(A + Aᵀ)/2` of a square matrix.
    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        assert_eq!(a.nrows(), a.ncols(), "square matrix required");
        let mut s = Self::zeros(a.nrows());
        for j in 0..a.ncols() {
            for i in 0..=j {
                s.set(i, j, 0.5 * (a[(i, j)] + a[(j, i)]));
            }
        }
        s
    }

    /// `scale * q qᵀ`.
    pub fn outer(q: &DVector<f64>, scale: f64) -> Self {
        let mut s = Self::zeros(q.len());
        for j in 0..q.len() {
            for i in 0..=j {
                s.set(i, j, scale * q[i] * q[j]);
            }
        }
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.packed[packed_index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.packed[packed_index(i, j)] = value;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.order, self.order, |i, j| self.get(i, j))
    }

    pub fn trace(&self) -> f64 {
        (0..self.order).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &Self) -> f64 {
        assert_eq!(self.order, other.order);
        let mut acc = 0.0;
        for j in 0..self.order {
            for i in 0..=j {
                let w = if i == j { 1.0 } else { 2.0 };
                acc += w * self.get(i, j) * other.get(i, j);
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `self + alpha * other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.order, other.order);
        let packed = self.packed.iter().zip(&other.packed).map(|(a, b)| a + alpha * b).collect();
        Self { order: self.order, packed }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { order: self.order, packed: self.packed.iter().map(|a| alpha * a).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigSense {
    Largest,
    Smallest,
}

/// Eigendecomposition `S = R diag(values) Rᵀ` with values descending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
}

fn sorted_eigen(s: &SymmetricSmall) -> SymEig {
    let r = s.order();
    if r == 0 {
        return SymEig { vectors: DMatrix::zeros(0, 0), values: DVector::zeros(0) };
    }
    let (eigenvalues, eigenvectors) = super::dense::sym_eigen(&s.to_dense());
    let mut idx: Vec<usize> = (0..r).collect();
    idx.sort_by(|&a, &b| eigenvalues[b].total_cmp(&eigenvalues[a]));
    let values = DVector::from_iterator(r, idx.iter().map(|&k| eigenvalues[k]));
    let mut vectors = DMatrix::zeros(r, r);
    for (dst, &src) in idx.iter().enumerate() {
        let mut col: Vec<f64> = eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col, None);
        vectors.column_mut(dst).copy_from_slice(&col);
    }
    SymEig { vectors, values }
}

/// Full eigendecomposition, values descending.
pub fn sym_eig(s: &SymmetricSmall) -> SymEig {
    sorted_eigen(s)
}

/// Extreme eigenpair of a symmetric matrix; the eigenvector's first nonzero
/// component is positive.
pub fn sym_eig_extreme(s: &SymmetricSmall, sense: EigSense) -> (f64, DVector<f64>) {
    assert!(s.order() >= 1, "order must be at least 1");
    let eig = sorted_eigen(s);
    let k = match sense {
        EigSense::Largest => 0,
        EigSense::Smallest => s.order() - 1,
    };
    (eig.values[k], eig.vectors.column(k).into_owned())
}

/// Full eigendecomposition of a numerically PSD matrix. Eigenvalues in
/// `[-psd_floor, 0)` are clamped to zero.
pub fn sym_eig_full(s: &SymmetricSmall, psd_floor: f64) -> Result<SymEig, LinalgError> {
    let mut eig = sorted_eigen(s);
    if let Some(&min) = eig.values.as_slice().last() {
        if min < -psd_floor {
            return Err(LinalgError::NotPsd { min_eigenvalue: min, floor: psd_floor });
        }
    }
    eig.values.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(eig)
}
