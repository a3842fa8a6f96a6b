//! Small linear-algebra building blocks shared by the FE kernel and the
//! reduced-order machinery: a compressed-row sparse matrix and a banded
//! Cholesky factorization for the full-order time integrator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Duplicates are summed.
    pub fn from_triplets<I>(nrows: usize, ncols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(i, j, _) in &entries {
            if i >= nrows {
                return Err(Error::index("row", i, nrows));
            }
            if j >= ncols {
                return Err(Error::index("column", j, ncols));
            }
        }
        entries.sort_unstable_by_key(|e| (e.0, e.1));

        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).expect("indices in range")
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut triplets = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    triplets.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), triplets).expect("indices in range")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "sparse matvec dimension");
        DVector::from_iterator(
            self.nrows,
            (0..self.nrows).map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum::<f64>()
            }),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            a[(i, j)] += v;
        }
        a
    }

    /// Galerkin projection `Vᵀ A V`.
    pub fn project(&self, basis: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(basis.nrows(), self.ncols, "projection basis rows");
        let m = basis.ncols();
        // A V, row by row
        let mut av = DMatrix::zeros(self.nrows, m);
        for i in 0..self.nrows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = self.values[k];
                let j = self.col_idx[k];
                for c in 0..m {
                    av[(i, c)] += v * basis[(j, c)];
                }
            }
        }
        basis.transpose() * av
    }

    /// `Σ coeff_k A_k` over matrices of identical shape.
    pub fn linear_combination(terms: &[(f64, &SparseMatrix)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Argument("empty linear combination".into()))?;
        let (nrows, ncols) = (first.nrows, first.ncols);
        let mut triplets = Vec::new();
        for (c, a) in terms {
            if a.nrows != nrows || a.ncols != ncols {
                return Err(Error::Dimension(format!(
                    "cannot combine {}x{} with {}x{}",
                    nrows, ncols, a.nrows, a.ncols
                )));
            }
            triplets.extend(a.iter().map(|(i, j, v)| (i, j, c * v)));
        }
        Self::from_triplets(nrows, ncols, triplets)
    }

    /// Half-bandwidth: max |i - j| over stored entries.
    pub fn half_bandwidth(&self) -> usize {
        self.iter().map(|(i, j, _)| i.abs_diff(j)).max().unwrap_or(0)
    }
}

/// Cholesky factor of a symmetric positive-definite banded matrix, stored by
/// lower diagonals: `band[i][k]` holds `L[i][i - k]`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    band: Vec<Vec<f64>>,
}

impl BandedCholesky {
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        Self::factor_combination(&[(1.0, a)])
    }

    /// Factors `Σ c_k A_k` without forming the sum as a sparse matrix.
    pub fn factor_combination(terms: &[(f64, &SparseMatrix)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| Error::Argument("empty linear combination".into()))?;
        let n = first.nrows();
        if terms.iter().any(|(_, a)| a.nrows() != n || a.ncols() != n) {
            return Err(Error::Dimension(
                "banded Cholesky needs square matrices of one size".into(),
            ));
        }
        let bw = terms.iter().map(|(_, a)| a.half_bandwidth()).max().unwrap_or(0);
        let mut band = vec![vec![0.0; bw + 1]; n];
        for (c, a) in terms {
            for (i, j, v) in a.iter() {
                if j <= i {
                    band[i][i - j] += c * v;
                }
            }
        }
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let mut s = band[i][i - j];
                let k0 = j0.max(j.saturating_sub(bw));
                for k in k0..j {
                    s -= band[i][i - k] * band[j][j - k];
                }
                if j == i {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(Error::Decomposition(format!("non-positive pivot {s:e} at row {i}")));
                    }
                    band[i][0] = s.sqrt();
                } else {
                    band[i][i - j] = s / band[j][0];
                }
            }
        }
        Ok(Self { n, bw, band })
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        assert_eq!(b.len(), self.n);
        let mut y = b.clone();
        for i in 0..self.n {
            let mut s = y[i];
            for k in i.saturating_sub(self.bw)..i {
                s -= self.band[i][i - k] * y[k];
            }
            y[i] = s / self.band[i][0];
        }
        for i in (0..self.n).rev() {
            let mut s = y[i];
            for k in (i + 1)..(i + self.bw + 1).min(self.n) {
                s -= self.band[k][k - i] * y[k];
            }
            y[i] = s / self.band[i][0];
        }
        y
    }
}

/// Relative Frobenius distance `‖a - b‖ / ‖b‖` (absolute when `b` vanishes).
pub fn relative_difference(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let diff = (a - b).norm();
    let scale = b.norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// `‖aᵀ - a‖ / ‖a‖`.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.norm();
    if scale == 0.0 {
        0.0
    } else {
        (a - a.transpose()).norm() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sum_duplicates() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]).unwrap();
        assert_eq!(a.nnz(), 2);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(1, 1), 0.0);
    }

    #[test]
    fn out_of_range_triplet() {
        assert!(SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn banded_cholesky_matches_dense() {
        // tridiagonal SPD
        let n = 7;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0 + i as f64));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = SparseMatrix::from_triplets(n, n, t).unwrap();
        let b = DVector::from_fn(n, |i, _| (i as f64).sin() + 1.0);
        let x = BandedCholesky::factor(&a).unwrap().solve(&b);
        let dense = a.to_dense().cholesky().unwrap().solve(&b);
        assert!((x - dense).norm() < 1e-13);
    }

    #[test]
    fn banded_cholesky_rejects_indefinite() {
        let a = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (1, 1, -1.0)]).unwrap();
        assert!(matches!(BandedCholesky::factor(&a), Err(Error::Decomposition(_))));
    }

    #[test]
    fn projection_matches_dense() {
        let a = SparseMatrix::from_triplets(3, 3, [(0, 0, 2.0), (0, 2, 1.0), (2, 0, 1.0), (1, 1, 3.0)]).unwrap();
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -1.0, 2.0, 0.25, 1.0]);
        let p = a.project(&v);
        let d = v.transpose() * a.to_dense() * &v;
        assert!((p - d).norm() < 1e-14);
    }
}
