//! Rectangular grids, scalar fields, recodings and refinement schedules.

mod io;
mod policy;
mod recoding;
mod resample;

pub use io::{read_binary, read_csv, write_binary, write_csv};
pub use policy::{refine, PolicyFamily, DEFAULT_MAX_LEVEL, RefinementPolicy, Scheme, Stage};
pub use recoding::{apply_recoding, Recoding, RecodingKind};
pub use resample::{resample, restrict_to};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Field equality tolerance used when an operation does not promise bit-exactness.
pub const FIELD_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Free,
    Periodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dims: Vec<usize>,
    spacing: Vec<f64>,
    topology: Vec<Topology>,
}

/// Builds a grid. A single topology entry is broadcast to every axis.
pub fn make_grid(dims: &[usize], spacing: &[f64], topology: &[Topology]) -> Result<Grid> {
    let topology = if topology.len() == 1 {
        vec![topology[0]; dims.len()]
    } else {
        topology.to_vec()
    };
    Grid::new(dims.to_vec(), spacing.to_vec(), topology)
}

impl Grid {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>, topology: Vec<Topology>) -> Result<Self> {
        if dims.is_empty() || dims.len() > 3 {
            return invalid(format!("grids have 1 to 3 axes, got {}", dims.len()));
        }
        if spacing.len() != dims.len() || topology.len() != dims.len() {
            return invalid("dims, spacing and topology must have one entry per axis");
        }
        if let Some(a) = dims.iter().position(|&d| d == 0) {
            return invalid(format!("axis {a} has zero length"));
        }
        if let Some(a) = spacing.iter().position(|&h| !(h > 0.0 && h.is_finite())) {
            return invalid(format!("axis {a} has non-positive spacing {}", spacing[a]));
        }
        Ok(Grid {
            dims,
            spacing,
            topology,
        })
    }

    /// Grid covering the unit box with `dims` cells per axis.
    pub fn unit(dims: &[usize], topology: Topology) -> Result<Self> {
        let spacing = dims.iter().map(|&d| 1.0 / d.max(1) as f64).collect();
        Grid::new(dims.to_vec(), spacing, vec![topology; dims.len()])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn topology(&self) -> &[Topology] {
        &self.topology
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Physical length of each axis.
    pub fn extent(&self) -> Vec<f64> {
        self.dims
            .iter()
            .zip(&self.spacing)
            .map(|(&n, &h)| n as f64 * h)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// Row-major strides; the last axis is contiguous.
    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.ndim()];
        for a in (0..self.ndim().saturating_sub(1)).rev() {
            s[a] = s[a + 1] * self.dims[a + 1];
        }
        s
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(self.strides())
            .map(|(&c, s)| c * s)
            .sum()
    }

    pub fn coords(&self, mut idx: usize) -> Vec<usize> {
        let mut c = vec![0; self.ndim()];
        for a in (0..self.ndim()).rev() {
            c[a] = idx % self.dims[a];
            idx /= self.dims[a];
        }
        c
    }

    /// Cell-centre coordinate along `axis`.
    pub fn center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing[axis]
    }

    /// Same extent and topology, different resolution.
    pub fn with_dims(&self, dims: &[usize]) -> Result<Grid> {
        if dims.len() != self.ndim() {
            return invalid("resolution has the wrong number of axes");
        }
        let ext = self.extent();
        let spacing = dims
            .iter()
            .zip(&ext)
            .map(|(&n, &e)| e / n.max(1) as f64)
            .collect();
        Grid::new(dims.to_vec(), spacing, self.topology.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field has {} values but grid has {} points",
                values.len(),
                grid.len()
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("value {i} is not finite"));
        }
        Ok(Field { grid, values })
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let n = grid.len();
        Field::from_parts(grid, vec![c; n])
    }

    pub fn zeros(grid: Grid) -> Self {
        Field::constant(grid, 0.0)
    }

    /// Evaluates `f` at every cell centre.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.ndim()];
        let values = (0..grid.len())
            .map(|i| {
                for (a, c) in grid.coords(i).into_iter().enumerate() {
                    x[a] = grid.center(a, c);
                }
                f(&x)
            })
            .collect();
        Field::from_parts(grid, values)
    }

    /// Evaluates `f` at every integer index tuple.
    pub fn from_index_fn(grid: Grid, f: impl Fn(&[usize]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Field::from_parts(grid, values)
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

    pub fn get(&self, coords: &[usize]) -> f64 {
        self.values[self.grid.index(coords)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_parts(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Euclidean norm of the value vector.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Root-mean-square value; resolution independent.
    pub fn rms(&self) -> f64 {
        self.norm() / (self.values.len() as f64).sqrt()
    }

    fn check_same(&self, other: &Field) -> Result<()> {
        if self.grid.dims != other.grid.dims {
            return invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                self.grid.dims, other.grid.dims
            ));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &Field) -> Result<f64> {
        self.check_same(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field::from_parts(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_same(other)?;
        Ok(Field::from_parts(
            self.grid.clone(),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        ))
    }

    /// True when every value agrees within [`FIELD_TOL`].
    pub fn approx_eq(&self, other: &Field) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= FIELD_TOL)
    }
}
