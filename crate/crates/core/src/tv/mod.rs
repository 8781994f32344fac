//! TV-Tikhonov reconstruction with discrepancy-principle parameter choice.

mod commutation;
mod discrepancy;
mod operator;
mod solver;

pub use commutation::{commutation_gap, reconstruct, Pipeline, Reconstruction};
pub use discrepancy::{
    discrepancy_index_uniform, discrepancy_lambda, residual_curve, DiscrepancyOptions,
    LambdaGrid, LambdaRule, Search,
};
pub use operator::ForwardOperator;
pub use solver::{solve_tv, Init, Method, SolverOptions, TvSolution, OBJECTIVE_SLACK};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Field, Grid, Topology};

pub const DEFAULT_TAU: f64 = 1.1;
pub const DEFAULT_MU: f64 = 1e-8;

/// `min_u ||Au - d||^2 + lambda TV(u) + mu ||u||^2` with noise level `noise`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseProblem {
    pub op: ForwardOperator,
    pub data: Field,
    pub noise: f64,
    pub tau: f64,
    pub mu: f64,
}

impl InverseProblem {
    pub fn new(op: ForwardOperator, data: Field, noise: f64, tau: f64, mu: f64) -> Result<Self> {
        if !(noise >= 0.0 && noise.is_finite()) {
            return invalid("noise level must be >= 0");
        }
        if !(tau > 1.0 && tau.is_finite()) {
            return invalid("tau must exceed 1");
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return invalid("mu must be >= 0");
        }
        let op = op.at_grid(data.grid())?;
        Ok(InverseProblem {
            op,
            data,
            noise,
            tau,
            mu,
        })
    }

    /// Identity operator with default `tau` and `mu`.
    pub fn denoising(data: Field, noise: f64) -> Result<Self> {
        InverseProblem::new(ForwardOperator::Identity, data, noise, DEFAULT_TAU, DEFAULT_MU)
    }

    pub fn with_data(&self, data: Field) -> Result<Self> {
        InverseProblem::new(self.op.clone(), data, self.noise, self.tau, self.mu)
    }

    /// `||Au - d||`
    pub fn residual_norm(&self, u: &Field) -> Result<f64> {
        Ok(self.op.apply(u)?.sub(&self.data)?.norm())
    }

    pub fn objective(&self, u: &Field, lambda: f64) -> Result<f64> {
        let r = self.residual_norm(u)?;
        Ok(r * r + lambda * tv(u) + self.mu * u.norm().powi(2))
    }
}

/// Anisotropic total variation: sum over axes of absolute forward differences.
pub fn tv(u: &Field) -> f64 {
    Tv::new(u.grid())
        .grad(u.values())
        .iter()
        .flatten()
        .map(|d| d.abs())
        .sum()
}

/// Forward-difference operator `D` on a grid; one slot per axis per point,
/// slots without a forward neighbour (free boundary) stay zero.
#[derive(Clone, Debug)]
pub(crate) struct Tv {
    dims: Vec<usize>,
    strides: Vec<usize>,
    periodic: Vec<bool>,
    len: usize,
}

impl Tv {
    pub(crate) fn new(g: &Grid) -> Self {
        Tv {
            dims: g.dims().to_vec(),
            strides: g.strides(),
            periodic: g.topology().iter().map(|&t| t == Topology::Periodic).collect(),
            len: g.len(),
        }
    }

    fn neighbour(&self, a: usize, i: usize) -> Option<usize> {
        let (s, n) = (self.strides[a], self.dims[a]);
        let c = (i / s) % n;
        if c + 1 < n {
            Some(i + s)
        } else if self.periodic[a] && n > 1 {
            Some(i - (n - 1) * s)
        } else {
            None
        }
    }

    pub(crate) fn has_edge(&self, a: usize, i: usize) -> bool {
        self.neighbour(a, i).is_some()
    }

    pub(crate) fn zeros_dual(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.len]; self.dims.len()]
    }

    /// `||D||^2 <= 4 * rank`
    pub(crate) fn norm_sq_bound(&self) -> f64 {
        4.0 * self.dims.len() as f64
    }

    pub(crate) fn grad(&self, u: &[f64]) -> Vec<Vec<f64>> {
        (0..self.dims.len())
            .map(|a| {
                (0..self.len)
                    .map(|i| self.neighbour(a, i).map_or(0.0, |j| u[j] - u[i]))
                    .collect()
            })
            .collect()
    }

    /// `out = D^T y`
    pub(crate) fn grad_adj(&self, y: &[Vec<f64>], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (a, ya) in y.iter().enumerate() {
            for (i, &v) in ya.iter().enumerate() {
                if let Some(j) = self.neighbour(a, i) {
                    out[i] -= v;
                    out[j] += v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        let g = Grid::unit(&[2], Topology::Free).unwrap();
        assert_eq!(tv(&Field::new(g, vec![0.0, 1.0]).unwrap()), 1.0);
        let g = Grid::unit(&[2, 2], Topology::Free).unwrap();
        let cb = Field::new(g.clone(), vec![1.0, -1.0, -1.0, 1.0]).unwrap();
        assert_eq!(tv(&cb), 8.0);
        assert_eq!(tv(&Field::constant(g, 3.0)), 0.0);
    }

    #[test]
    fn periodic_wraps() {
        let g = Grid::unit(&[4], Topology::Periodic).unwrap();
        let f = Field::new(g, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert_eq!(tv(&f), 2.0);
    }

    #[test]
    fn adjoint_of_difference() {
        let g = Grid::new(vec![3, 4], vec![1.0, 1.0], vec![Topology::Free, Topology::Periodic])
            .unwrap();
        let d = Tv::new(&g);
        let u: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let y: Vec<Vec<f64>> = (0..2)
            .map(|a| (0..12).map(|i| ((i * 3 + a) % 4) as f64 * 0.5).collect())
            .collect();
        let du = d.grad(&u);
        let mut dty = vec![0.0; 12];
        d.grad_adj(&y, &mut dty);
        let mut lhs = 0.0;
        for a in 0..2 {
            for i in 0..12 {
                if d.has_edge(a, i) {
                    lhs += du[a][i] * y[a][i];
                }
            }
        }
        let rhs: f64 = u.iter().zip(&dty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
