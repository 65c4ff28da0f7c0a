//! Compressed sparse row matrices for graph propagation operators.

use ndarray::Array2;

/// Sparse matrix in CSR form. Values are f64; shape is `rows x cols`.
#[derive(Debug, Clone)]
pub struct Csr {
    pub rows: usize,
    pub cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets. Duplicate coordinates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            assert!(r < rows && c < cols, "triplet out of bounds");
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        let mut row_ptr = vec![0usize; rows + 1];
        for &(r, _, _) in &merged {
            row_ptr[r + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|e| e.1).collect();
        let vals = merged.iter().map(|e| e.2).collect();
        Csr { rows, cols, row_ptr, col_idx, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Dense product `self * x`.
    pub fn matmul(&self, x: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.cols, x.nrows(), "csr matmul shape mismatch");
        let d = x.ncols();
        let mut out = Array2::<f64>::zeros((self.rows, d));
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let v = self.vals[k];
                for j in 0..d {
                    out[[r, j]] += v * x[[c, j]];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Csr {
        let mut triplets = Vec::with_capacity(self.nnz());
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                triplets.push((self.col_idx[k], r, self.vals[k]));
            }
        }
        Csr::from_triplets(self.cols, self.rows, &triplets)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::<f64>::zeros((self.rows, self.cols));
        for r in 0..self.rows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[[r, self.col_idx[k]]] += self.vals[k];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn matmul_matches_dense() {
        let m = Csr::from_triplets(3, 3, &[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 2, 0.5)]);
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let got = m.matmul(&x);
        let want = m.to_dense().dot(&x);
        assert!((&got - &want).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn duplicates_are_summed() {
        let m = Csr::from_triplets(2, 2, &[(0, 0, 1.0), (0, 0, 2.0)]);
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.to_dense()[[0, 0]], 3.0);
    }

    #[test]
    fn transpose_round_trip() {
        let m = Csr::from_triplets(2, 3, &[(0, 1, 1.0), (1, 2, -2.0)]);
        let t = m.transpose();
        assert_eq!(t.rows, 3);
        assert_eq!(t.cols, 2);
        assert_eq!(t.to_dense(), m.to_dense().t().to_owned());
    }
}
