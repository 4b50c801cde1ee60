use nalgebra::{DMatrix, SVD};

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(a: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Thin SVD `a = U diag(s) Vᵀ` with values descending.
pub(crate) fn svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    match to_faer(a).thin_svd() {
        Ok(f) => {
            let s = f.S().column_vector().iter().copied().collect();
            (from_faer(f.U()), s, from_faer(f.V()))
        }
        Err(_) => {
            let f = SVD::new(a.clone(), true, true);
            let mut idx: Vec<usize> = (0..f.singular_values.len()).collect();
            idx.sort_by(|&x, &y| f.singular_values[y].total_cmp(&f.singular_values[x]));
            let u = f.u.expect("left vectors");
            let v = f.v_t.expect("right vectors").transpose();
            (
                DMatrix::from_fn(u.nrows(), idx.len(), |i, j| u[(i, idx[j])]),
                idx.iter().map(|&k| f.singular_values[k]).collect(),
                DMatrix::from_fn(v.nrows(), idx.len(), |i, j| v[(i, idx[j])]),
            )
        }
    }
}

/// Singular values, descending.
pub(crate) fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    to_faer(a).singular_values().unwrap_or_else(|_| {
        let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
        s.sort_by(|x, y| y.total_cmp(x));
        s
    })
}

/// Eigenvalues and eigenvectors of a symmetric matrix, in faer's order
/// (ascending).
pub(crate) fn sym_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    match to_faer(a).self_adjoint_eigen(faer::Side::Lower) {
        Ok(e) => (e.S().column_vector().iter().copied().collect(), from_faer(e.U())),
        Err(_) => {
            let e = nalgebra::SymmetricEigen::new(a.clone());
            (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
        }
    }
}

/// `aᵀ a`.
pub(crate) fn gram(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.transpose() * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs() {
        let a = DMatrix::from_fn(5, 3, |i, j| ((i * 3 + j * 7) % 5) as f64 - 1.5);
        let (u, s, v) = svd(&a);
        let back = &u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(s.clone())) * v.transpose();
        assert!((back - &a).norm() < 1e-12);
        assert!(s.windows(2).all(|w| w[0] >= w[1]));
        let vals = singular_values(&a);
        assert!(vals.iter().zip(&s).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn sym_eigen_reconstructs_graded_matrix() {
        let n = 6;
        let mut a = DMatrix::from_fn(n, n, |i, j| 1e-7 * (((i + 2 * j) % 5) as f64 - 2.0));
        a = (&a + a.transpose()) * 0.5;
        for i in 0..n {
            a[(i, i)] += 0.5f64.powi(3 * i as i32);
        }
        let (vals, vecs) = sym_eigen(&a);
        let back = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vals)) * vecs.transpose();
        assert!((back - &a).norm() < 1e-14 * a.norm());
    }
}
