//! Minimal row-major dense matrix, just enough for MLP forward/backward.
//!
//! Loop orders in the multiply kernels are fixed so that floating-point
//! reductions are bit-reproducible run to run. Shape mismatches in the
//! kernels are programmer errors and panic; fallible public entry points
//! validate shapes before calling in.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                context: "matrix construction",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    /// Copies the given rows (in the given order) into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::Range {
                    what: "matrix rows",
                    index: i,
                    len: self.rows,
                });
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        })
    }

    /// `self * other^T`; `self` is m×k, `other` is n×k, result m×n.
    pub fn matmul_nt(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_nt inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            let out_row = out.row_mut(i);
            for (j, b) in (0..other.rows).map(|j| (j, other.row(j))) {
                let mut acc = 0.0;
                for k in 0..a.len() {
                    acc += a[k] * b[k];
                }
                out_row[j] = acc;
            }
        }
        out
    }

    /// `self * other`; `self` is m×k, `other` is k×n, result m×n.
    pub fn matmul_nn(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul_nn inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a = self.row(i);
            let out_row = out.row_mut(i);
            for (k, &aik) in a.iter().enumerate() {
                let b_row = other.row(k);
                for j in 0..other.cols {
                    out_row[j] += aik * b_row[j];
                }
            }
        }
        out
    }

    /// `self^T * other`; `self` is k×m, `other` is k×n, result m×n.
    pub fn matmul_tn(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "matmul_tn inner dimensions differ");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &aki) in a_row.iter().enumerate() {
                let out_row = out.row_mut(i);
                for j in 0..b_row.len() {
                    out_row[j] += aki * b_row[j];
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> Matrix {
        Matrix::from_vec(rows, cols, data.to_vec()).unwrap()
    }

    #[test]
    fn from_vec_validates_length() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn nt_against_hand_product() {
        // a = [[1,2],[3,4]], b = [[5,6],[7,8]]  -> a * b^T = [[17,23],[39,53]]
        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(a.matmul_nt(&b).data(), &[17.0, 23.0, 39.0, 53.0]);
    }

    #[test]
    fn nn_against_hand_product() {
        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        assert_eq!(a.matmul_nn(&b).data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn tn_against_hand_product() {
        let a = m(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = m(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        // a^T * b = [[26,30],[38,44]]
        assert_eq!(a.matmul_tn(&b).data(), &[26.0, 30.0, 38.0, 44.0]);
    }

    #[test]
    fn select_rows_copies_in_order() {
        let a = m(3, 2, &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let s = a.select_rows(&[2, 0]).unwrap();
        assert_eq!(s.data(), &[4.0, 5.0, 0.0, 1.0]);
        assert!(a.select_rows(&[3]).is_err());
    }

    #[test]
    fn rectangular_shapes_multiply() {
        let a = m(1, 3, &[1.0, 2.0, 3.0]);
        let b = m(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let c = a.matmul_nt(&b);
        assert_eq!((c.rows(), c.cols()), (1, 2));
        assert_eq!(c.data(), &[4.0, 2.0]);
    }
}
