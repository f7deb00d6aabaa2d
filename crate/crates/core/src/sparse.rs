//! Sparse matrix kept in compressed-column and compressed-row form at once.
//!
//! Coordinate-descent updates read single columns (least squares) or single
//! rows (SVM dual), so both orientations are materialised up front.

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    col_ptr: Vec<usize>,
    col_rows: Vec<usize>,
    col_vals: Vec<f64>,
    row_ptr: Vec<usize>,
    row_cols: Vec<usize>,
    row_vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds the matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (r, c, v) in triplets {
            if r >= rows || c >= cols {
                return Err(Error::Instance(format!(
                    "entry ({r}, {c}) outside a {rows} x {cols} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Instance(format!("entry ({r}, {c}) is not finite")));
            }
            entries.push((c, r, v));
        }
        entries.sort_unstable_by_key(|a| (a.0, a.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (c, r, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == c && last.1 == r => last.2 += v,
                _ => merged.push((c, r, v)),
            }
        }
        merged.retain(|e| e.2 != 0.0);

        let mut col_ptr = vec![0usize; cols + 1];
        let mut row_ptr = vec![0usize; rows + 1];
        for &(c, r, _) in &merged {
            col_ptr[c + 1] += 1;
            row_ptr[r + 1] += 1;
        }
        for i in 0..cols {
            col_ptr[i + 1] += col_ptr[i];
        }
        for j in 0..rows {
            row_ptr[j + 1] += row_ptr[j];
        }
        let col_rows = merged.iter().map(|e| e.1).collect();
        let col_vals = merged.iter().map(|e| e.2).collect();

        // column-major traversal visits each row's entries in increasing column order
        let nnz = merged.len();
        let mut next = row_ptr.clone();
        let mut row_cols = vec![0usize; nnz];
        let mut row_vals = vec![0.0; nnz];
        for &(c, r, v) in &merged {
            let k = next[r];
            row_cols[k] = c;
            row_vals[k] = v;
            next[r] += 1;
        }
        Ok(Self {
            rows,
            cols,
            col_ptr,
            col_rows,
            col_vals,
            row_ptr,
            row_cols,
            row_vals,
        })
    }

    pub fn from_dense(dense: &[Vec<f64>]) -> Result<Self> {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        if dense.iter().any(|r| r.len() != cols) {
            return Err(Error::Instance("ragged dense matrix".into()));
        }
        Self::from_triplets(
            rows,
            cols,
            dense
                .iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().enumerate().map(move |(c, &v)| (r, c, v))),
        )
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).unwrap()
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_vals.len()
    }

    /// Row indices and values of column `c`, rows increasing.
    pub fn column(&self, c: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[c]..self.col_ptr[c + 1];
        (&self.col_rows[r.clone()], &self.col_vals[r])
    }

    /// Column indices and values of row `r`, columns increasing.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let k = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.row_cols[k.clone()], &self.row_vals[k])
    }

    pub fn column_norm_squared(&self, c: usize) -> f64 {
        self.column(c).1.iter().map(|v| v * v).sum()
    }

    pub fn row_norm_squared(&self, r: usize) -> f64 {
        self.row(r).1.iter().map(|v| v * v).sum()
    }

    /// Triplets in column-major order.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols).flat_map(move |c| {
            let (rows, vals) = self.column(c);
            rows.iter().zip(vals).map(move |(&r, &v)| (r, c, v))
        })
    }

    /// `A x` with compensated row sums.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                let mut acc = CompensatedSum::default();
                cols.iter().zip(vals).for_each(|(&c, &v)| acc.add(v * x[c]));
                acc.value()
            })
            .collect()
    }

    /// `A^T v` with compensated column sums.
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| {
                let (rows, vals) = self.column(c);
                let mut acc = CompensatedSum::default();
                rows.iter().zip(vals).for_each(|(&r, &a)| acc.add(a * v[r]));
                acc.value()
            })
            .collect()
    }

    /// Checks that both storage orders describe the same matrix.
    pub fn check_consistency(&self) -> Result<()> {
        let from_rows: Vec<(usize, usize, f64)> = {
            let mut v: Vec<_> = (0..self.rows)
                .flat_map(|r| {
                    let (cols, vals) = self.row(r);
                    cols.iter().zip(vals).map(move |(&c, &x)| (r, c, x)).collect::<Vec<_>>()
                })
                .collect();
            v.sort_unstable_by_key(|a| (a.1, a.0));
            v
        };
        let from_cols: Vec<_> = self.triplets().collect();
        if from_rows != from_cols {
            return Err(Error::Invariant("row and column storage disagree".into()));
        }
        for c in 0..self.cols {
            let (rows, vals) = self.column(c);
            if rows.windows(2).any(|w| w[0] >= w[1]) || vals.contains(&0.0) {
                return Err(Error::Invariant(format!("column {c} is not canonical")));
            }
        }
        Ok(())
    }
}
