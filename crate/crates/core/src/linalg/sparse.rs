use std::sync::Arc;

use nalgebra::DMatrix;

use super::LinalgError;
use crate::par::{self, Execution};

/// Fixed set of coordinates, stored row-major with a column-major index on the
/// side so both `A x` and `Aᵀ y` reduce each output element in one pass.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityPattern {
    nrows: usize,
    ncols: usize,
    rows: Vec<u32>,
    cols: Vec<u32>,
    row_ptr: Vec<usize>,
    col_ptr: Vec<usize>,
    col_order: Vec<u32>,
}

impl SparsityPattern {
    /// Builds a pattern from coordinates that must already be sorted row-major
    /// and unique.
    pub fn from_sorted(nrows: usize, ncols: usize, coords: &[(usize, usize)]) -> Result<Self, LinalgError> {
        let mut rows = Vec::with_capacity(coords.len());
        let mut cols = Vec::with_capacity(coords.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(i, j) in coords {
            if i >= nrows || j >= ncols {
                return Err(LinalgError::OutOfBounds { row: i, col: j, nrows, ncols });
            }
            if let Some(p) = prev {
                if p == (i, j) {
                    return Err(LinalgError::DuplicateCoordinate { row: i, col: j });
                }
                if p > (i, j) {
                    return Err(LinalgError::Dimension("coordinates are not sorted row-major".into()));
                }
            }
            prev = Some((i, j));
            rows.push(i as u32);
            cols.push(j as u32);
        }
        let mut row_ptr = vec![0usize; nrows + 1];
        for &i in &rows {
            row_ptr[i as usize + 1] += 1;
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let mut col_ptr = vec![0usize; ncols + 1];
        for &j in &cols {
            col_ptr[j as usize + 1] += 1;
        }
        for j in 0..ncols {
            col_ptr[j + 1] += col_ptr[j];
        }
        let mut fill = col_ptr.clone();
        let mut col_order = vec![0u32; rows.len()];
        for (k, &j) in cols.iter().enumerate() {
            col_order[fill[j as usize]] = k as u32;
            fill[j as usize] += 1;
        }
        Ok(Self { nrows, ncols, rows, cols, row_ptr, col_ptr, col_order })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, k: usize) -> usize {
        self.rows[k] as usize
    }

    pub fn col(&self, k: usize) -> usize {
        self.cols[k] as usize
    }

    pub fn coords(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows.iter().zip(&self.cols).map(|(&i, &j)| (i as usize, j as usize))
    }

    /// Entry positions belonging to row `i`.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    /// Entry positions (into the row-major storage) belonging to column `j`.
    pub fn col_entries(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.col_order[self.col_ptr[j]..self.col_ptr[j + 1]].iter().map(|&k| k as usize)
    }

    /// Restricts the pattern to the entries flagged in `keep`, returning the
    /// new pattern and the retained entry positions.
    pub fn subset(&self, keep: &[bool]) -> (Self, Vec<usize>) {
        let idx: Vec<usize> = (0..self.nnz()).filter(|&k| keep[k]).collect();
        let coords: Vec<(usize, usize)> = idx.iter().map(|&k| (self.row(k), self.col(k))).collect();
        let pattern = Self::from_sorted(self.nrows, self.ncols, &coords).expect("subset of a valid pattern");
        (pattern, idx)
    }
}

/// Real matrix supported on a shared [`SparsityPattern`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Self {
        assert_eq!(pattern.nnz(), values.len(), "values must align with the pattern");
        Self { pattern, values }
    }

    /// Sorts and validates `(row, col, value)` triplets.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self, LinalgError> {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let coords: Vec<(usize, usize)> = triplets.iter().map(|t| (t.0, t.1)).collect();
        let pattern = SparsityPattern::from_sorted(nrows, ncols, &coords)?;
        let values = triplets.into_iter().map(|t| t.2).collect();
        Ok(Self { pattern: Arc::new(pattern), values })
    }

    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.pattern.coords().zip(&self.values).map(|((i, j), &v)| (i, j, v))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Trace inner product with another matrix given on the same pattern.
    pub fn dot_values(&self, other: &[f64]) -> f64 {
        assert_eq!(other.len(), self.values.len());
        self.values.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.mul_vec_with(Execution::default(), x)
    }

    pub fn mul_vec_with(&self, exec: Execution, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols());
        let p = &self.pattern;
        let mut out = vec![0.0; p.nrows];
        par::fill_indexed(exec, p.nnz(), &mut out, |i| {
            p.row_range(i).map(|k| self.values[k] * x[p.cols[k] as usize]).sum()
        });
        out
    }

    pub fn tr_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        self.tr_mul_vec_with(Execution::default(), y)
    }

    pub fn tr_mul_vec_with(&self, exec: Execution, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows());
        let p = &self.pattern;
        let mut out = vec![0.0; p.ncols];
        par::fill_indexed(exec, p.nnz(), &mut out, |j| {
            p.col_entries(j).map(|k| self.values[k] * y[p.rows[k] as usize]).sum()
        });
        out
    }

    /// `A B` for a dense `ncols x r` block `B`.
    pub fn mul_dense(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(b.nrows(), self.ncols());
        let r = b.ncols();
        let mut out = DMatrix::zeros(self.nrows(), r);
        for t in 0..r {
            let col = self.mul_vec(b.column(t).as_slice());
            out.column_mut(t).copy_from_slice(&col);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows(), self.ncols());
        for (i, j, v) in self.iter() {
            d[(i, j)] = v;
        }
        d
    }
}
