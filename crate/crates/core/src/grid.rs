//! Raster containers shared by the simulator, the contouring code and the
//! estimators.
//!
//! Pixel `(i, j)` (row `i`, column `j`) sits at the physical point
//! `origin + (j * dx, i * dy)`: columns run along the first coordinate and rows
//! along the second.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major raster of finite field values with physical spacing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
}

impl FieldGrid {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, dx: f64, dy: f64) -> Result<Self> {
        Self::with_origin(rows, cols, values, dx, dy, [0.0, 0.0])
    }

    pub fn with_origin(rows: usize, cols: usize, values: Vec<f64>, dx: f64, dy: f64, origin: [f64; 2]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DegenerateGrid { rows, cols, min: 1 });
        }
        let expected = rows.checked_mul(cols).ok_or_else(|| Error::invalid("grid dimensions overflow"))?;
        if values.len() != expected {
            return Err(Error::invalid(format!("grid holds {} values, expected {rows}x{cols}", values.len())));
        }
        if !(dx > 0.0 && dx.is_finite() && dy > 0.0 && dy.is_finite()) {
            return Err(Error::invalid(format!("spacing must be positive, got ({dx}, {dy})")));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite value at index {pos}")));
        }
        Ok(Self { rows, cols, values, dx, dy, origin })
    }

    /// Samples `f(x, y)` at every pixel position.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        dx: f64,
        dy: f64,
        origin: [f64; 2],
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                values.push(f(origin[0] + j as f64 * dx, origin[1] + i as f64 * dy));
            }
        }
        Self::with_origin(rows, cols, values, dx, dy, origin)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Physical position of pixel `(i, j)`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + j as f64 * self.dx, self.origin[1] + i as f64 * self.dy]
    }

    /// Rectangle spanned by the pixel centres.
    pub fn window(&self) -> Window {
        Window {
            x0: self.origin[0],
            y0: self.origin[1],
            x1: self.origin[0] + (self.cols - 1) as f64 * self.dx,
            y1: self.origin[1] + (self.rows - 1) as f64 * self.dy,
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Returns `-X`, the field whose excursion above `-u` is the complement of `{X > u}`.
    pub fn negated(&self) -> Self {
        Self { values: self.values.iter().map(|v| -v).collect(), ..self.clone() }
    }
}

/// Axis-aligned observation window `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Window {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

/// Binary excursion image on the same pixel convention as [`FieldGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMask {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
}

impl BinaryMask {
    pub fn new(rows: usize, cols: usize, data: Vec<bool>, dx: f64, dy: f64) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::invalid(format!("mask holds {} pixels, expected {rows}x{cols}", data.len())));
        }
        if !(dx > 0.0 && dy > 0.0) {
            return Err(Error::invalid("mask spacing must be positive"));
        }
        Ok(Self { rows, cols, data, dx, dy, origin: [0.0, 0.0] })
    }

    /// Excursion set `{X > level}` of a grid.
    pub fn threshold(grid: &FieldGrid, level: f64) -> Self {
        Self {
            rows: grid.rows(),
            cols: grid.cols(),
            data: grid.values().iter().map(|&v| v > level).collect(),
            dx: grid.dx,
            dy: grid.dy,
            origin: grid.origin,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data, dx: 1.0, dy: 1.0, origin: [0.0, 0.0] }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Fraction of pixels inside the excursion.
    pub fn area_fraction(&self) -> f64 {
        self.count() as f64 / self.data.len() as f64
    }

    /// The 0/1 indicator as a field on the same pixels.
    pub fn indicator(&self) -> FieldGrid {
        let values = self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        FieldGrid::with_origin(self.rows, self.cols, values, self.dx, self.dy, self.origin)
            .expect("mask dimensions are validated on construction")
    }

    pub fn window(&self) -> Window {
        Window {
            x0: self.origin[0],
            y0: self.origin[1],
            x1: self.origin[0] + (self.cols - 1) as f64 * self.dx,
            y1: self.origin[1] + (self.rows - 1) as f64 * self.dy,
        }
    }
}
