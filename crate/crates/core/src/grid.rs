//! Structured grids, dense matrices, and the field containers passed between
//! the solvers, the data pipeline, and the network.

use std::ops::Range;

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("{cols} columns"),
                    format!("{} columns in row {r}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Copies the half-open column range `cols` into a new matrix.
    pub fn column_range(&self, cols: Range<usize>) -> Matrix {
        assert!(cols.end <= self.cols && cols.start <= cols.end);
        let width = cols.end - cols.start;
        let mut data = Vec::with_capacity(self.rows * width);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[cols.clone()]);
        }
        Matrix {
            rows: self.rows,
            cols: width,
            data,
        }
    }

    /// Copies the half-open row range `rows` into a new matrix.
    pub fn row_range(&self, rows: Range<usize>) -> Matrix {
        assert!(rows.end <= self.rows && rows.start <= rows.end);
        Matrix {
            rows: rows.end - rows.start,
            cols: self.cols,
            data: self.data[rows.start * self.cols..rows.end * self.cols].to_vec(),
        }
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape("Matrix::hstack", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Matrix {
            rows: self.rows,
            cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Position of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|k| (k / self.cols.max(1), k % self.cols.max(1)))
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Spatial and temporal discretization of a structured 1D or 2D grid.
///
/// `ny == 0` marks a 1D grid; the `y_*` extents are then unused and zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub ny: usize,
    pub dt: f64,
    pub n_steps: usize,
}

impl GridSpec {
    pub fn line(x_min: f64, x_max: f64, nx: usize, dt: f64, n_steps: usize) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            nx,
            y_min: 0.0,
            y_max: 0.0,
            ny: 0,
            dt,
            n_steps,
        };
        grid.validate_stencil()?;
        Ok(grid)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn plane(
        x_min: f64,
        x_max: f64,
        nx: usize,
        y_min: f64,
        y_max: f64,
        ny: usize,
        dt: f64,
        n_steps: usize,
    ) -> Result<Self> {
        let grid = Self {
            x_min,
            x_max,
            nx,
            y_min,
            y_max,
            ny,
            dt,
            n_steps,
        };
        grid.validate_stencil()?;
        Ok(grid)
    }

    pub fn is_2d(&self) -> bool {
        self.ny > 0
    }

    /// Grid spacing along x; zero for a single-point axis.
    pub fn dx(&self) -> f64 {
        if self.nx > 1 {
            (self.x_max - self.x_min) / (self.nx - 1) as f64
        } else {
            0.0
        }
    }

    /// Grid spacing along y; zero for 1D grids.
    pub fn dy(&self) -> f64 {
        if self.ny > 1 {
            (self.y_max - self.y_min) / (self.ny - 1) as f64
        } else {
            0.0
        }
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + j as f64 * self.dy()
    }

    /// Extent of the second snapshot axis (1 for 1D grids).
    pub fn ny_eff(&self) -> usize {
        self.ny.max(1)
    }

    /// Total grid points K.
    pub fn num_points(&self) -> usize {
        self.nx * self.ny_eff()
    }

    /// Minimal structural checks shared by every container.
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 {
            return Err(Error::InvalidParameter("nx must be positive".into()));
        }
        if self.n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be positive".into()));
        }
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max, self.dt]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("grid extents must be finite".into()));
        }
        Ok(())
    }

    /// Checks required by the finite-difference solvers: interior points exist
    /// and every spacing is positive.
    pub fn validate_stencil(&self) -> Result<()> {
        self.validate()?;
        if self.nx < 3 || (self.is_2d() && self.ny < 3) {
            return Err(Error::InvalidParameter(format!(
                "grid {}x{} has no interior points (need at least 3 per axis)",
                self.nx, self.ny
            )));
        }
        if !(self.dx() > 0.0) || (self.is_2d() && !(self.dy() > 0.0)) {
            return Err(Error::InvalidParameter(
                "grid spacing must be positive".into(),
            ));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        Ok(())
    }
}

/// One variable sampled over every grid point at a single instant.
///
/// Values are stored row-major: point `(i, j)` lives at `i * ny + j`, with
/// `ny == 1` for 1D snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSnapshot {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
    pub variable_name: String,
}

impl FieldSnapshot {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::shape(
                "FieldSnapshot::new",
                format!("{} values for {nx}x{ny}", nx * ny),
                values.len(),
            ));
        }
        Ok(Self {
            nx,
            ny,
            values,
            variable_name: name.into(),
        })
    }

    pub fn filled(grid: &GridSpec, value: f64, name: impl Into<String>) -> Self {
        Self {
            nx: grid.nx,
            ny: grid.ny_eff(),
            values: vec![value; grid.num_points()],
            variable_name: name.into(),
        }
    }

    /// Samples `f(x, y)` at every point of a 2D grid.
    pub fn from_fn(grid: &GridSpec, name: impl Into<String>, f: impl Fn(f64, f64) -> f64) -> Self {
        let ny = grid.ny_eff();
        let mut values = Vec::with_capacity(grid.nx * ny);
        for i in 0..grid.nx {
            for j in 0..ny {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self {
            nx: grid.nx,
            ny,
            values,
            variable_name: name.into(),
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ny + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.ny + j] = v;
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

    pub fn matches(&self, grid: &GridSpec) -> bool {
        self.nx == grid.nx && self.ny == grid.ny_eff()
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(k) => Err(Error::Data(format!(
                "non-finite value {} in '{}' at point ({}, {})",
                self.values[k],
                self.variable_name,
                k / self.ny,
                k % self.ny
            ))),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Time series of one or more variables over a grid, stored as the
/// `(V·K) × N` matrix: one row per (variable, grid point), one column per
/// timestep. Variable blocks are stacked in the order of `variables`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSeries {
    pub grid: GridSpec,
    pub variables: Vec<String>,
    pub data: Matrix,
}

impl FieldSeries {
    pub fn new(grid: GridSpec, variables: Vec<String>, data: Matrix) -> Result<Self> {
        grid.validate()?;
        if variables.is_empty() {
            return Err(Error::Data("series needs at least one variable".into()));
        }
        let rows = variables.len() * grid.num_points();
        if data.rows() != rows || data.cols() != grid.n_steps {
            return Err(Error::shape(
                "FieldSeries::new",
                format!("{rows}x{}", grid.n_steps),
                format!("{}x{}", data.rows(), data.cols()),
            ));
        }
        if let Some((r, c)) = data.first_non_finite() {
            return Err(Error::Data(format!(
                "non-finite entry {} at row {r}, column {c}",
                data.get(r, c)
            )));
        }
        Ok(Self {
            grid,
            variables,
            data,
        })
    }

    pub fn num_points(&self) -> usize {
        self.grid.num_points()
    }

    pub fn num_steps(&self) -> usize {
        self.data.cols()
    }

    /// Stacks per-step snapshots into a series. `frames[n][v]` is variable `v`
    /// at column `n`; every snapshot must match `grid`.
    pub fn from_snapshots(
        grid: GridSpec,
        variables: Vec<String>,
        frames: &[Vec<FieldSnapshot>],
    ) -> Result<Self> {
        let k = grid.num_points();
        let v_count = variables.len();
        let mut data = Matrix::zeros(v_count * k, frames.len());
        for (col, frame) in frames.iter().enumerate() {
            if frame.len() != v_count {
                return Err(Error::shape("FieldSeries::from_snapshots", v_count, frame.len()));
            }
            for (v, snap) in frame.iter().enumerate() {
                if !snap.matches(&grid) {
                    return Err(Error::shape(
                        "FieldSeries::from_snapshots",
                        format!("{}x{}", grid.nx, grid.ny_eff()),
                        format!("{}x{}", snap.nx(), snap.ny()),
                    ));
                }
                for (p, &val) in snap.values().iter().enumerate() {
                    data.set(v * k + p, col, val);
                }
            }
        }
        Self::new(grid, variables, data)
    }

    /// Reconstructs variable `var` at timestep column `n`.
    pub fn snapshot(&self, var: usize, n: usize) -> FieldSnapshot {
        let k = self.num_points();
        let values = (var * k..(var + 1) * k)
            .map(|r| self.data.get(r, n))
            .collect();
        FieldSnapshot {
            nx: self.grid.nx,
            ny: self.grid.ny_eff(),
            values,
            variable_name: self.variables[var].clone(),
        }
    }
}
