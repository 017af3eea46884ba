//! Row-compressed dense/sparse matrix used for network weights.
//!
//! Every matrix stores an explicit pattern of entries per row (sorted by
//! column). Matrices built from dense data keep every entry, including
//! zeros, so trainable nets expose a gradient slot for each weight. The
//! constructive approximators build block-structured layers whose pattern
//! stays proportional to the number of meaningful weights.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl Matrix {
    /// A `rows x cols` matrix with no stored entries.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Matrix {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Dense construction from row vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            crate::error::check_dim("matrix row length", cols, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self::from_dense(rows.len(), cols, &data))
    }

    /// Dense construction from row-major data.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "dense buffer length");
        Matrix {
            rows,
            cols,
            row_ptr: (0..=rows).map(|i| i * cols).collect(),
            col_idx: (0..rows).flat_map(|_| 0..cols).collect(),
            values: data.to_vec(),
        }
    }

    /// Builds from per-row `(column, value)` lists. Columns are sorted and
    /// duplicate columns summed.
    pub fn from_sparse_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut m = Matrix::zeros(0, cols);
        m.row_ptr.clear();
        m.row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                if last == Some(c) {
                    *m.values.last_mut().unwrap() += v;
                } else {
                    m.col_idx.push(c);
                    m.values.push(v);
                    last = Some(c);
                }
            }
            m.row_ptr.push(m.col_idx.len());
            m.rows += 1;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn row_values_mut(&mut self, i: usize) -> &mut [f64] {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        &mut self.values[s..e]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Iterator over `(row, col, value)` of stored entries.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map_or(0.0, |p| v[p])
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().map(|v| v.abs()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| {
                let mut row = vec![0.0; self.cols];
                let (c, v) = self.row(i);
                for (&j, &x) in c.iter().zip(v) {
                    row[j] = x;
                }
                row
            })
            .collect()
    }

    /// `out = self * x`, overwriting `out`.
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (i, o) in out.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for p in s..e {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *o = acc;
        }
    }

    /// `out += self^T * y`.
    pub fn mul_transpose_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, &w) in c.iter().zip(v) {
                out[j] += w * yi;
            }
        }
    }

    /// Sparse product `self * rhs`; the pattern is every structurally
    /// reachable entry.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        crate::error::check_dim("matmul inner dimension", self.cols, rhs.rows)?;
        let mut acc = vec![0.0; rhs.cols];
        let mut touched = vec![false; rhs.cols];
        let mut pattern: Vec<usize> = Vec::new();
        let mut rows = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let (ci, vi) = self.row(i);
            for (&k, &a) in ci.iter().zip(vi) {
                let (ck, vk) = rhs.row(k);
                for (&j, &b) in ck.iter().zip(vk) {
                    if !touched[j] {
                        touched[j] = true;
                        pattern.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            pattern.sort_unstable();
            let row: Vec<(usize, f64)> = pattern.iter().map(|&j| (j, acc[j])).collect();
            for &j in &pattern {
                acc[j] = 0.0;
                touched[j] = false;
            }
            pattern.clear();
            rows.push(row);
        }
        Ok(Matrix::from_sparse_rows(rhs.cols, rows))
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scale_rows(&mut self, factors: &[f64]) {
        debug_assert_eq!(factors.len(), self.rows);
        for (i, &f) in factors.iter().enumerate() {
            self.row_values_mut(i).iter_mut().for_each(|v| *v *= f);
        }
    }

    pub fn scale_cols(&mut self, factors: &[f64]) {
        debug_assert_eq!(factors.len(), self.cols);
        for (v, &c) in self.values.iter_mut().zip(&self.col_idx) {
            *v *= factors[c];
        }
    }

    /// Same entries, more (empty) rows and/or columns.
    pub fn padded(&self, rows: usize, cols: usize) -> Matrix {
        assert!(rows >= self.rows && cols >= self.cols);
        let mut m = self.clone();
        m.cols = cols;
        let last = *m.row_ptr.last().unwrap();
        m.row_ptr.resize(rows + 1, last);
        m.rows = rows;
        m
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&Matrix]) -> Result<Matrix> {
        let cols = parts.first().map_or(0, |m| m.cols);
        let mut out = Matrix::zeros(0, cols);
        for m in parts {
            crate::error::check_dim("vstack columns", cols, m.cols)?;
            let base = out.col_idx.len();
            out.row_ptr.extend(m.row_ptr[1..].iter().map(|p| p + base));
            out.col_idx.extend_from_slice(&m.col_idx);
            out.values.extend_from_slice(&m.values);
            out.rows += m.rows;
        }
        Ok(out)
    }

    /// Places matrices side by side; all must have equal row counts.
    pub fn hstack(parts: &[&Matrix]) -> Result<Matrix> {
        let rows = parts.first().map_or(0, |m| m.rows);
        for m in parts {
            crate::error::check_dim("hstack rows", rows, m.rows)?;
        }
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out_rows = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut row = Vec::new();
            let mut offset = 0;
            for m in parts {
                let (c, v) = m.row(i);
                row.extend(c.iter().zip(v).map(|(&j, &x)| (j + offset, x)));
                offset += m.cols;
            }
            out_rows.push(row);
        }
        Ok(Matrix::from_sparse_rows(cols, out_rows))
    }

    pub fn block_diag(parts: &[&Matrix]) -> Matrix {
        let cols: usize = parts.iter().map(|m| m.cols).sum();
        let mut out = Matrix::zeros(0, cols);
        let mut offset = 0;
        for m in parts {
            let base = out.col_idx.len();
            out.row_ptr.extend(m.row_ptr[1..].iter().map(|p| p + base));
            out.col_idx.extend(m.col_idx.iter().map(|c| c + offset));
            out.values.extend_from_slice(&m.values);
            out.rows += m.rows;
            offset += m.cols;
        }
        out
    }

    /// Column-selection matrix picking `indices` out of a `dim`-vector.
    pub fn selection(dim: usize, indices: &[usize]) -> Result<Matrix> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= dim) {
            return Err(Error::param(
                "indices",
                format!("index {bad} out of range for dimension {dim}"),
            ));
        }
        Ok(Matrix::from_sparse_rows(
            dim,
            indices.iter().map(|&i| vec![(i, 1.0)]).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_matches_dense() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0], vec![3.0, 0.5]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0, 0.0, 2.0], vec![-1.0, 4.0, 0.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        let expected = [
            vec![-1.0, 8.0, 2.0],
            vec![1.0, -4.0, 0.0],
            vec![2.5, 2.0, 6.0],
        ];
        assert_eq!(c.to_dense_rows(), expected);
    }

    #[test]
    fn sparse_rows_merge_duplicates() {
        let m = Matrix::from_sparse_rows(3, vec![vec![(2, 1.0), (0, 2.0), (2, 0.5)], vec![]]);
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn stacking() {
        let a = Matrix::identity(2);
        let b = Matrix::from_rows(&[vec![5.0, 6.0]]).unwrap();
        let v = Matrix::vstack(&[&a, &b]).unwrap();
        assert_eq!(v.to_dense_rows(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![5.0, 6.0]]);
        let d = Matrix::block_diag(&[&b, &a]);
        assert_eq!(d.rows(), 3);
        assert_eq!(d.cols(), 4);
        assert_eq!(d.get(2, 3), 1.0);
        let h = Matrix::hstack(&[&a, &a]).unwrap();
        assert_eq!(h.to_dense_rows(), vec![vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]]);
        assert!(Matrix::vstack(&[&a, &Matrix::identity(3)]).is_err());
    }

    #[test]
    fn transpose_product() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut out = vec![0.0; 2];
        a.mul_transpose_add(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![-2.0, -2.0]);
    }
}
