//! Minimal row-compressed sparse matrices for assembling Jacobians.

use nalgebra::DMatrix;

use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_cols: usize,
    /// Per row: column-sorted `(col, value)` pairs.
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseMatrix {
    pub fn diag(values: &[f64]) -> Self {
        Self {
            n_cols: values.len(),
            rows: values.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect(),
        }
    }

    /// Neumann Laplacian on `grid` in matrix form.
    pub fn laplacian(grid: &Grid) -> Self {
        let n = grid.cell_count();
        let mut acc = Accumulator::new(n, n);
        for face in grid.faces() {
            let w = grid.inv_h2(face.axis);
            acc.add(face.left, face.left, -w);
            acc.add(face.left, face.right, w);
            acc.add(face.right, face.right, -w);
            acc.add(face.right, face.left, w);
        }
        acc.finish()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|&(j, v)| v * x[j]).sum()).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().find(|&&(j, _)| j == i).map_or(0.0, |&(_, v)| v))
            .collect()
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Self {
        Self {
            n_cols: self.n_cols,
            rows: self
                .rows
                .iter()
                .zip(d)
                .map(|(row, &s)| row.iter().map(|&(j, v)| (j, s * v)).collect())
                .collect(),
        }
    }

    pub fn mul(&self, other: &SparseMatrix) -> Self {
        assert_eq!(self.n_cols, other.n_rows());
        let mut acc = Accumulator::new(self.n_rows(), other.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in other.row(k) {
                    acc.add(i, j, a * b);
                }
            }
        }
        acc.finish()
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix) -> Self {
        assert_eq!(self.n_rows(), other.n_rows());
        let mut acc = Accumulator::new(self.n_rows(), self.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                acc.add(i, j, v);
            }
            for &(j, v) in other.row(i) {
                acc.add(i, j, s * v);
            }
        }
        acc.finish()
    }

    /// Assembles `[[a, b], [c, d]]`.
    pub fn block2x2(a: &Self, b: &Self, c: &Self, d: &Self) -> Self {
        let n_top = a.n_rows();
        let n_left = a.n_cols;
        let n_cols = n_left + b.n_cols;
        let mut rows = Vec::with_capacity(n_top + c.n_rows());
        for (left, right) in [(a, b), (c, d)] {
            for i in 0..left.n_rows() {
                let mut row: Vec<(usize, f64)> = left.row(i).to_vec();
                row.extend(right.row(i).iter().map(|&(j, v)| (j + n_left, v)));
                rows.push(row);
            }
        }
        Self { n_cols, rows }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n_rows(), self.n_cols);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] += v;
            }
        }
        m
    }
}

/// Row-wise sparse accumulator.
pub struct Accumulator {
    n_cols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Accumulator {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        Self { n_cols, rows: vec![Vec::new(); n_rows] }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.rows[i].push((j, v));
    }

    pub fn finish(self) -> SparseMatrix {
        let rows = self
            .rows
            .into_iter()
            .map(|mut row| {
                row.sort_by_key(|&(j, _)| j);
                let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
                for (j, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += v,
                        _ => merged.push((j, v)),
                    }
                }
                merged
            })
            .collect();
        SparseMatrix { n_cols: self.n_cols, rows }
    }
}
