//! Uniform cell-centered meshes on an interval or rectangle, with no-flux
//! (homogeneous Neumann) boundaries.
//!
//! All difference operators are written in face-flux form: each interior face
//! contributes an equal and opposite amount to its two cells and boundary faces
//! carry nothing. Discrete integrals of the operators therefore telescope to
//! zero, and `sum_i vol * g_i * (L f)_i = -<grad g, grad f>_faces`
//! (summation by parts).

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Smallest admissible number of cells per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: usize,
    n: [usize; 2],
    length: [f64; 2],
    h: [f64; 2],
}

impl Grid {
    pub fn new_1d(n: usize, length: f64) -> Result<Self> {
        Self::new(1, [n, 1], [length, 1.0])
    }

    pub fn new_2d(n: [usize; 2], length: [f64; 2]) -> Result<Self> {
        Self::new(2, n, length)
    }

    /// General constructor; for `dim == 1` the second axis entries are ignored.
    pub fn new(dim: usize, n: [usize; 2], length: [f64; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension must be 1 or 2, got {dim}")));
        }
        let (n, length) = if dim == 1 { ([n[0], 1], [length[0], 1.0]) } else { (n, length) };
        for axis in 0..dim {
            if n[axis] < MIN_CELLS {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} needs at least {MIN_CELLS} cells, got {}",
                    n[axis]
                )));
            }
            if !(length[axis].is_finite() && length[axis] > 0.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis} length must be positive, got {}",
                    length[axis]
                )));
            }
        }
        let h = [length[0] / n[0] as f64, length[1] / n[1] as f64];
        Ok(Self { dim, n, length, h })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis (only the first `dim` entries are meaningful).
    pub fn n(&self) -> &[usize] {
        &self.n[..self.dim]
    }

    pub fn length(&self) -> &[f64] {
        &self.length[..self.dim]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dim]
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.length().iter().product()
    }

    /// Cell-center coordinates; the second component is 0 in 1D.
    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let (ix, iy) = (cell / self.n[1], cell % self.n[1]);
        let y = if self.dim == 2 { (iy as f64 + 0.5) * self.h[1] } else { 0.0 };
        [(ix as f64 + 0.5) * self.h[0], y]
    }

    pub fn cell_centers(&self) -> impl Iterator<Item = [f64; 2]> + '_ {
        (0..self.cell_count()).map(|c| self.cell_center(c))
    }

    /// Midpoint of an interior face.
    pub fn face_center(&self, face: &Face) -> [f64; 2] {
        let mut x = self.cell_center(face.left);
        x[face.axis] += 0.5 * self.h[face.axis];
        x
    }

    /// All interior faces, axis by axis. Boundary faces carry zero flux and are omitted.
    pub fn faces(&self) -> impl Iterator<Item = Face> + '_ {
        let [nx, ny] = self.n;
        let x_faces = (0..nx - 1).flat_map(move |ix| {
            (0..ny).map(move |iy| Face {
                axis: 0,
                left: ix * ny + iy,
                right: (ix + 1) * ny + iy,
            })
        });
        let y_faces = (0..if self.dim == 2 { nx } else { 0 }).flat_map(move |ix| {
            (0..ny - 1).map(move |iy| Face {
                axis: 1,
                left: ix * ny + iy,
                right: ix * ny + iy + 1,
            })
        });
        x_faces.chain(y_faces)
    }

    /// `1 / h_axis^2`.
    #[inline]
    pub fn inv_h2(&self, axis: usize) -> f64 {
        1.0 / (self.h[axis] * self.h[axis])
    }
}

/// Interior face between cells `left` and `right` (right is the neighbor in +axis).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub left: usize,
    pub right: usize,
}

/// How face values of a cell coefficient are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FaceAveraging {
    #[default]
    Harmonic,
    Arithmetic,
}

impl FaceAveraging {
    #[inline]
    pub fn average(self, a: f64, b: f64) -> f64 {
        match self {
            FaceAveraging::Harmonic => 2.0 * a * b / (a + b),
            FaceAveraging::Arithmetic => 0.5 * (a + b),
        }
    }

    /// Partial derivatives of the face value with respect to `(a, b)`.
    #[inline]
    pub fn partials(self, a: f64, b: f64) -> (f64, f64) {
        match self {
            FaceAveraging::Harmonic => {
                let s = (a + b) * (a + b);
                (2.0 * b * b / s, 2.0 * a * a / s)
            }
            FaceAveraging::Arithmetic => (0.5, 0.5),
        }
    }
}

/// A grid function: one value per cell, row-major with the x index slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(Error::SizeMismatch { expected: grid.cell_count(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { values: vec![value; grid.cell_count()], grid }
    }

    /// Samples `fun` at the cell centers.
    pub fn from_fn(grid: Grid, fun: impl Fn([f64; 2]) -> f64) -> Self {
        Self { values: grid.cell_centers().map(fun).collect(), grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, fun: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| fun(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, fun: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        Self {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| fun(a, b)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.values[i]
    }
}

/// Second-order Laplacian with mirror ghost cells (zero normal derivative).
pub fn laplacian_neumann(f: &Field) -> Field {
    let grid = *f.grid();
    let mut out = vec![0.0; f.len()];
    for face in grid.faces() {
        let flux = (f[face.right] - f[face.left]) * grid.inv_h2(face.axis);
        out[face.left] += flux;
        out[face.right] -= flux;
    }
    Field { grid, values: out }
}

/// Conservative `div(a grad f)` with face coefficients averaged from cell values.
pub fn div_coeff_grad(a_cell: &Field, f: &Field, averaging: FaceAveraging) -> Result<Field> {
    if let Some(&bad) = a_cell.values().iter().find(|&&a| !(a > 0.0)) {
        return Err(Error::NonPositiveCoefficient(bad));
    }
    if a_cell.len() != f.len() {
        return Err(Error::SizeMismatch { expected: f.len(), got: a_cell.len() });
    }
    Ok(div_coeff_grad_unchecked(a_cell.values(), f, averaging))
}

pub(crate) fn div_coeff_grad_unchecked(a_cell: &[f64], f: &Field, averaging: FaceAveraging) -> Field {
    let grid = *f.grid();
    let mut out = vec![0.0; f.len()];
    for face in grid.faces() {
        let a_face = averaging.average(a_cell[face.left], a_cell[face.right]);
        let flux = a_face * (f[face.right] - f[face.left]) * grid.inv_h2(face.axis);
        out[face.left] += flux;
        out[face.right] -= flux;
    }
    Field { grid, values: out }
}

/// Midpoint quadrature `sum_i f_i * vol`.
pub fn integrate(f: &Field) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_volume()
}

pub fn mean(f: &Field) -> f64 {
    let n = f.len() as f64;
    f.values().iter().sum::<f64>() / n
}

pub fn norm_l2(f: &Field) -> f64 {
    (f.values().iter().map(|v| v * v).sum::<f64>() * f.grid().cell_volume()).sqrt()
}

pub fn norm_linf(f: &Field) -> f64 {
    f.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `int |grad f|^2` from interior face differences; boundary faces contribute
/// nothing, consistent with the no-flux condition.
pub fn h1_seminorm_sq(f: &Field) -> f64 {
    face_inner_product(f, f)
}

/// `sum_faces vol * (delta f / h)(delta g / h)`, the discrete `int grad f . grad g`.
pub fn face_inner_product(f: &Field, g: &Field) -> f64 {
    let grid = f.grid();
    let mut acc = 0.0;
    for face in grid.faces() {
        acc += (f[face.right] - f[face.left]) * (g[face.right] - g[face.left]) * grid.inv_h2(face.axis);
    }
    acc * grid.cell_volume()
}
