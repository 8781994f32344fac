use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{resample, Field, Grid, Scheme, Topology};

/// Linear forward operator `A` of the inverse problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ForwardOperator {
    Identity,
    /// Centred convolution; periodic axes wrap, free axes zero-pad.
    Convolution { kernel: Field },
    /// Pointwise mask (1 observed, 0 missing) on the state grid.
    Subsampling { mask: Field },
}

impl ForwardOperator {
    pub fn convolution(kernel: Field) -> Result<Self> {
        if kernel.grid().dims().iter().any(|d| d % 2 == 0) {
            return invalid("convolution kernel needs odd size on every axis");
        }
        Ok(ForwardOperator::Convolution { kernel })
    }

    pub fn subsampling(mask: Field) -> Result<Self> {
        if mask.values().iter().any(|&m| m != 0.0 && m != 1.0) {
            return invalid("subsampling mask must be 0/1");
        }
        Ok(ForwardOperator::Subsampling { mask })
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, ForwardOperator::Identity)
    }

    /// Upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        match self {
            ForwardOperator::Identity | ForwardOperator::Subsampling { .. } => 1.0,
            ForwardOperator::Convolution { kernel } => {
                kernel.values().iter().map(|k| k.abs()).sum()
            }
        }
    }

    /// The same operator expressed on another grid of equal extent.
    pub fn at_grid(&self, g: &Grid) -> Result<ForwardOperator> {
        Ok(match self {
            ForwardOperator::Subsampling { mask } if mask.grid().dims() != g.dims() => {
                let m = resample(mask, &mask.grid().with_dims(g.dims())?, Scheme::Nearest)?;
                ForwardOperator::Subsampling { mask: m }
            }
            op => op.clone(),
        })
    }

    fn check(&self, u: &Field) -> Result<()> {
        match self {
            ForwardOperator::Identity => Ok(()),
            ForwardOperator::Convolution { kernel } => {
                if kernel.grid().ndim() != u.grid().ndim() {
                    return invalid("kernel rank differs from field rank");
                }
                Ok(())
            }
            ForwardOperator::Subsampling { mask } => {
                if mask.grid().dims() != u.grid().dims() {
                    return invalid("mask shape differs from field shape");
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, u: &Field) -> Result<Field> {
        self.check(u)?;
        Ok(match self {
            ForwardOperator::Identity => u.clone(),
            ForwardOperator::Subsampling { mask } => Field::from_parts(
                u.grid().clone(),
                u.values().iter().zip(mask.values()).map(|(a, m)| a * m).collect(),
            ),
            ForwardOperator::Convolution { kernel } => convolve(kernel, u, false),
        })
    }

    pub fn adjoint(&self, w: &Field) -> Result<Field> {
        match self {
            ForwardOperator::Convolution { kernel } => {
                self.check(w)?;
                Ok(convolve(kernel, w, true))
            }
            _ => self.apply(w),
        }
    }
}

/// `(K*u)(i) = sum_k K(k) u(i - (k - c))`; with `adjoint` the shift flips sign.
fn convolve(kernel: &Field, u: &Field, adjoint: bool) -> Field {
    let g = u.grid();
    let kg = kernel.grid();
    let nd = g.ndim();
    let taps: Vec<(Vec<i64>, f64)> = (0..kg.len())
        .filter(|&k| kernel.values()[k] != 0.0)
        .map(|k| {
            let c = kg.coords(k);
            let off = (0..nd)
                .map(|a| c[a] as i64 - (kg.dims()[a] / 2) as i64)
                .map(|o| if adjoint { o } else { -o })
                .collect();
            (off, kernel.values()[k])
        })
        .collect();
    let mut out = vec![0.0; g.len()];
    let mut src = vec![0usize; nd];
    for (i, o) in out.iter_mut().enumerate() {
        let c = g.coords(i);
        'tap: for (off, w) in &taps {
            for a in 0..nd {
                let n = g.dims()[a] as i64;
                let s = c[a] as i64 + off[a];
                src[a] = if (0..n).contains(&s) {
                    s as usize
                } else if g.topology()[a] == Topology::Periodic {
                    s.rem_euclid(n) as usize
                } else {
                    continue 'tap;
                };
            }
            *o += w * u.values()[g.index(&src)];
        }
    }
    Field::from_parts(g.clone(), out)
}
