//! Uniform cell-centered grids on the cube [-L, L]^N and vector-valued
//! fields sampled on them.
//!
//! Fields are extended by zero outside the cube: every model solution decays
//! at infinity, so a truncated box with configurable half-extent stands in
//! for the whole space. Differentiation is second-order central in the
//! interior with one-sided stencils at the walls, quadrature is the midpoint
//! rule, and point evaluation is multilinear interpolation from the 2^N
//! surrounding cell centers.

use crate::error::FieldError;
use serde::{Deserialize, Serialize};

/// Uniform cell-centered grid over [-L, L]^N.
///
/// Cell k along an axis is centered at x_k = -L + (k + 1/2) h with h = 2L/n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_extent: f64,
    cells_per_dim: usize,
}

impl Grid {
    pub fn new(dim: usize, half_extent: f64, cells_per_dim: usize) -> Result<Self, FieldError> {
        if dim < 2 {
            return Err(FieldError::InvalidGrid(format!("dimension {dim} < 2")));
        }
        if !(half_extent > 0.0 && half_extent.is_finite()) {
            return Err(FieldError::InvalidGrid(format!(
                "half extent {half_extent} must be positive and finite"
            )));
        }
        if cells_per_dim < 8 {
            return Err(FieldError::InvalidGrid(format!(
                "cells per dim {cells_per_dim} < 8"
            )));
        }
        // total cell count must stay addressable
        let mut total: usize = 1;
        for _ in 0..dim {
            total = total
                .checked_mul(cells_per_dim)
                .filter(|&t| t <= (1usize << 31))
                .ok_or_else(|| {
                    FieldError::InvalidGrid(format!("{cells_per_dim}^{dim} cells overflow"))
                })?;
        }
        Ok(Grid {
            dim,
            half_extent,
            cells_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    pub fn cells_per_dim(&self) -> usize {
        self.cells_per_dim
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_extent / self.cells_per_dim as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells_per_dim.pow(self.dim as u32)
    }

    /// h^N, the volume carried by one cell in the midpoint rule.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Coordinate of cell k along any axis.
    pub fn axis_coord(&self, k: usize) -> f64 {
        -self.half_extent + (k as f64 + 0.5) * self.spacing()
    }

    /// Stride of `axis` in the flat row-major cell index (last axis fastest).
    pub fn stride(&self, axis: usize) -> usize {
        self.cells_per_dim.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis cell index along `axis` of the flat index.
    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.cells_per_dim
    }

    /// Writes the center position of the cell with flat index `flat`.
    pub fn position(&self, flat: usize, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        for (axis, slot) in out.iter_mut().enumerate() {
            *slot = self.axis_coord(self.axis_index(flat, axis));
        }
    }

    /// Squared distance from the cell center to `center` (or to the origin).
    pub fn radius_sq(&self, flat: usize, center: Option<&[f64]>) -> f64 {
        let mut r2 = 0.0;
        for axis in 0..self.dim {
            let x = self.axis_coord(self.axis_index(flat, axis));
            let c = center.map_or(0.0, |c| c[axis]);
            r2 += (x - c) * (x - c);
        }
        r2
    }
}

/// m-component real field sampled on a grid, zero outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    components: Vec<Vec<f64>>,
}

impl Field {
    pub fn zeros(grid: Grid, m: usize) -> Self {
        assert!(m >= 1, "field needs at least one component");
        Field {
            components: vec![vec![0.0; grid.cell_count()]; m],
            grid,
        }
    }

    /// Builds an m-component field from a per-cell closure over positions.
    pub fn from_fn(grid: Grid, m: usize, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let mut field = Field::zeros(grid, m);
        let mut pos = vec![0.0; grid.dim()];
        let mut vals = vec![0.0; m];
        for cell in 0..grid.cell_count() {
            grid.position(cell, &mut pos);
            f(&pos, &mut vals);
            for (i, v) in vals.iter().enumerate() {
                field.components[i][cell] = *v;
            }
        }
        field
    }

    /// Scalar (m = 1) field from a closure over positions.
    pub fn from_scalar_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        Field::from_fn(grid, 1, |pos, out| out[0] = f(pos))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn from_components(grid: Grid, components: Vec<Vec<f64>>) -> Result<Self, FieldError> {
        if components.is_empty() {
            return Err(FieldError::ShapeMismatch {
                expected: grid.cell_count(),
                got: 0,
            });
        }
        for c in &components {
            if c.len() != grid.cell_count() {
                return Err(FieldError::ShapeMismatch {
                    expected: grid.cell_count(),
                    got: c.len(),
                });
            }
        }
        Ok(Field { grid, components })
    }

    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.components
            .iter()
            .all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Interpolated values at an arbitrary point; zero outside the box.
    pub fn interpolate(&self, point: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_components()];
        self.interpolate_into(point, &mut out);
        out
    }

    /// Multilinear interpolation from the 2^N surrounding cell centers.
    ///
    /// Virtual nodes beyond the outermost cell centers are zero, so values
    /// taper to zero in the half-cell rim just inside the walls; points
    /// outside the box return exactly zero.
    pub fn interpolate_into(&self, point: &[f64], out: &mut [f64]) {
        let grid = &self.grid;
        let n = grid.cells_per_dim();
        let l = grid.half_extent();
        let h = grid.spacing();
        for x in point.iter() {
            if x.abs() > l {
                out.fill(0.0);
                return;
            }
        }
        // per-axis base index and weight
        let mut base = [0isize; MAX_DIM];
        let mut frac = [0.0f64; MAX_DIM];
        for axis in 0..grid.dim() {
            let q = (point[axis] + l) / h - 0.5;
            let k0 = q.floor();
            base[axis] = k0 as isize;
            frac[axis] = q - k0;
        }
        out.fill(0.0);
        // accumulate over the 2^N corners
        let corners = 1usize << grid.dim();
        for corner in 0..corners {
            let mut weight = 1.0;
            let mut flat = 0usize;
            let mut inside = true;
            for axis in 0..grid.dim() {
                let hi = (corner >> axis) & 1 == 1;
                let k = base[axis] + if hi { 1 } else { 0 };
                weight *= if hi { frac[axis] } else { 1.0 - frac[axis] };
                if k < 0 || k >= n as isize {
                    inside = false;
                    break;
                }
                flat += k as usize * grid.stride(axis);
            }
            if !inside || weight == 0.0 {
                continue;
            }
            for (i, comp) in self.components.iter().enumerate() {
                out[i] += weight * comp[flat];
            }
        }
    }
}

/// Practical cap on the grid dimension (stack scratch in hot loops).
pub const MAX_DIM: usize = 8;

/// Per-axis derivative arrays of one field component.
#[derive(Debug, Clone)]
pub struct ComponentGradient {
    pub axes: Vec<Vec<f64>>,
}

impl ComponentGradient {
    /// |∇u|^2 at one cell.
    pub fn magnitude_sq(&self, cell: usize) -> f64 {
        self.axes.iter().map(|a| a[cell] * a[cell]).sum()
    }
}

/// Central differences in the interior, one-sided at the walls.
pub fn gradient(field: &Field) -> Vec<ComponentGradient> {
    let grid = *field.grid();
    let n = grid.cells_per_dim();
    let h = grid.spacing();
    let cells = grid.cell_count();
    let mut result = Vec::with_capacity(field.num_components());
    for comp in field.components() {
        let mut axes = Vec::with_capacity(grid.dim());
        for axis in 0..grid.dim() {
            let stride = grid.stride(axis);
            let mut deriv = vec![0.0; cells];
            for (cell, d) in deriv.iter_mut().enumerate() {
                let k = (cell / stride) % n;
                *d = if k == 0 {
                    (comp[cell + stride] - comp[cell]) / h
                } else if k == n - 1 {
                    (comp[cell] - comp[cell - stride]) / h
                } else {
                    (comp[cell + stride] - comp[cell - stride]) / (2.0 * h)
                };
            }
            axes.push(deriv);
        }
        result.push(ComponentGradient { axes });
    }
    result
}

/// Midpoint-rule integral h^N Σ samples with deterministic pairwise summation.
pub fn integrate(grid: &Grid, samples: &[f64]) -> f64 {
    assert_eq!(samples.len(), grid.cell_count(), "samples must match grid");
    grid.cell_volume() * pairwise_sum(samples)
}

/// Pairwise (cascade) summation: deterministic and accurate on large arrays.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}
