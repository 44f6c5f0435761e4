//! Minimal compressed sparse row storage for the assembled systems.

use crate::error::{Error, Result};

/// A square-or-rectangular sparse matrix in compressed sparse row form with
/// column indices sorted within each row.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from duplicate-summed triplets.
    ///
    /// The triplet buffer is sorted in place; duplicates are merged by
    /// addition in their sorted order, which is deterministic for a given
    /// input sequence.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &mut [(u32, u32, f64)],
    ) -> Result<Self> {
        if n_rows > u32::MAX as usize || n_cols > u32::MAX as usize {
            return Err(Error::invalid("matrix dimension exceeds index range"));
        }
        for &(r, c, v) in triplets.iter() {
            if r as usize >= n_rows || c as usize >= n_cols {
                return Err(Error::invalid(format!(
                    "triplet ({r}, {c}) outside {n_rows} x {n_cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({r}, {c})")));
            }
        }
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));

        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut sum) = triplets[i];
            let mut j = i + 1;
            while j < triplets.len() && triplets[j].0 == r && triplets[j].1 == c {
                sum += triplets[j].2;
                j += 1;
            }
            row_ptr[r as usize + 1] += 1;
            col_idx.push(c);
            values.push(sum);
            i = j;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    /// Number of columns.
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Row start offsets, length `n_rows + 1`.
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    /// Column indices, sorted within each row.
    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    /// Stored values matching [`Self::col_idx`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Computes `y = M x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[idx] * x[self.col_idx[idx] as usize];
            }
            y[r] = acc;
        }
    }

    /// Applies the matrix, allocating the result.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    /// The bilinear form `v^T M u`.
    pub fn quadratic_form(&self, v: &[f64], u: &[f64]) -> f64 {
        let mut total = 0.0;
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for idx in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[idx] * u[self.col_idx[idx] as usize];
            }
            total += v[r] * acc;
        }
        total
    }

    /// Extracts the dense diagonal block with rows and columns in
    /// `[start, start + size)`, in row-major order.
    pub fn dense_block(&self, start: usize, size: usize) -> Vec<f64> {
        let mut block = vec![0.0; size * size];
        for r in 0..size {
            let row = start + r;
            for idx in self.row_ptr[row]..self.row_ptr[row + 1] {
                let c = self.col_idx[idx] as usize;
                if c >= start && c < start + size {
                    block[r * size + (c - start)] = self.values[idx];
                }
            }
        }
        block
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builds_and_merges_duplicates() {
        let mut triplets = vec![
            (0u32, 1u32, 2.0),
            (1, 0, 3.0),
            (0, 1, -0.5),
            (1, 1, 1.0),
        ];
        let m = CsrMatrix::from_triplets(2, 2, &mut triplets).unwrap();
        assert_eq!(m.nnz(), 3);
        let y = m.apply(&[1.0, 1.0]);
        assert_eq!(y, vec![1.5, 4.0]);
        assert_eq!(m.quadratic_form(&[1.0, 2.0], &[1.0, 1.0]), 1.5 + 8.0);
    }

    #[test]
    fn rejects_bad_triplets() {
        let mut out_of_range = vec![(2u32, 0u32, 1.0)];
        assert!(CsrMatrix::from_triplets(2, 2, &mut out_of_range).is_err());
        let mut non_finite = vec![(0u32, 0u32, f64::NAN)];
        assert!(CsrMatrix::from_triplets(2, 2, &mut non_finite).is_err());
    }

    #[test]
    fn extracts_diagonal_blocks() {
        let mut triplets = vec![
            (0u32, 0u32, 1.0),
            (0, 3, 9.0),
            (1, 0, 2.0),
            (2, 2, 3.0),
            (3, 2, 4.0),
            (3, 3, 5.0),
        ];
        let m = CsrMatrix::from_triplets(4, 4, &mut triplets).unwrap();
        assert_eq!(m.dense_block(0, 2), vec![1.0, 0.0, 2.0, 0.0]);
        assert_eq!(m.dense_block(2, 2), vec![3.0, 0.0, 4.0, 5.0]);
    }
}
