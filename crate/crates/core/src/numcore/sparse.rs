use super::{NumError, Tensor};

/// Compressed-sparse-row matrix used for constant operators such as a
/// normalized subgraph adjacency.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets. Duplicate coordinates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self, NumError> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, v) in &sorted {
            if r >= rows || c >= cols {
                return Err(NumError::IndexOutOfBounds {
                    index: (r, c),
                    shape: (rows, cols),
                });
            }
            if !v.is_finite() {
                return Err(NumError::NonFinite { op: "csr" });
            }
        }
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn to_dense(&self) -> Tensor {
        let mut out = Tensor::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out.set(r, c, out.get(r, c) + v);
            }
        }
        out
    }

    /// `self · x`.
    pub fn matmul_dense(&self, x: &Tensor) -> Result<Tensor, NumError> {
        if self.cols != x.rows() {
            return Err(NumError::ShapeMismatch {
                op: "spmm",
                left: (self.rows, self.cols),
                right: x.shape(),
            });
        }
        let n = x.cols();
        let mut out = Tensor::zeros(self.rows, n);
        let xd = x.data();
        let od = out.data_mut();
        for r in 0..self.rows {
            let orow = &mut od[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                let xrow = &xd[c * n..(c + 1) * n];
                for (o, xv) in orow.iter_mut().zip(xrow) {
                    *o += v * xv;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · g`, used for the backward pass of [`Self::matmul_dense`].
    pub fn transpose_matmul_dense(&self, g: &Tensor) -> Tensor {
        let n = g.cols();
        let mut out = Tensor::zeros(self.cols, n);
        let gd = g.data();
        let od = out.data_mut();
        for r in 0..self.rows {
            let grow = &gd[r * n..(r + 1) * n];
            for (c, v) in self.row(r) {
                let orow = &mut od[c * n..(c + 1) * n];
                for (o, gv) in orow.iter_mut().zip(grow) {
                    *o += v * gv;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0), (1, 0, 4.0)]).unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.to_dense().data(), &[0.0, 3.0, 4.0, 0.0]);
    }

    #[test]
    fn spmm_matches_dense() {
        let m = CsrMatrix::from_triplets(3, 2, &[(0, 0, 1.0), (1, 1, -2.0), (2, 0, 0.5), (2, 1, 3.0)])
            .unwrap();
        let x = Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let dense = m.to_dense().matmul(&x).unwrap();
        assert_eq!(m.matmul_dense(&x).unwrap(), dense);
        let g = Tensor::from_vec(3, 2, vec![1.0, 0.0, 2.0, 1.0, -1.0, 5.0]).unwrap();
        let expect = m.to_dense().transpose().matmul(&g).unwrap();
        assert_eq!(m.transpose_matmul_dense(&g), expect);
    }

    #[test]
    fn out_of_bounds_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, &[(2, 0, 1.0)]).is_err());
    }
}
