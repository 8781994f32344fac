use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{solve_tv, InverseProblem, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::grid::Field;

/// Strictly ascending positive regularisation weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("lambda grid is empty");
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return invalid("lambda values must be positive");
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("lambda grid must be strictly ascending");
        }
        Ok(LambdaGrid { values })
    }

    /// `2^k * lambda0` for `k = 0..count`.
    pub fn geometric(lambda0: f64, count: usize) -> Result<Self> {
        LambdaGrid::new((0..count).map(|k| lambda0 * (k as f64).exp2()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn scaled(&self, s: f64) -> Result<Self> {
        LambdaGrid::new(self.values.iter().map(|v| v * s).collect())
    }
}

impl TryFrom<Vec<f64>> for LambdaGrid {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        LambdaGrid::new(v)
    }
}

impl From<LambdaGrid> for Vec<f64> {
    fn from(g: LambdaGrid) -> Self {
        g.values
    }
}

/// Which admissible weight to return.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaRule {
    /// The least admissible weight.
    #[default]
    Least,
    /// The greatest admissible weight (classical Morozov choice).
    Greatest,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Search {
    #[default]
    Linear,
    /// Exploits residual monotonicity in lambda.
    Bisection,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyOptions {
    pub rule: LambdaRule,
    pub search: Search,
    pub solver: SolverOptions,
}

/// `||A u_lambda - d||` for every weight of the grid.
pub fn residual_curve(p: &InverseProblem, grid: &LambdaGrid, opts: &SolverOptions) -> Result<Vec<f64>> {
    grid.values()
        .par_iter()
        .map(|&l| p.residual_norm(&solve_tv(p, l, opts)?.u))
        .collect()
}

/// The weight selected by the discrepancy principle together with its reconstruction.
pub fn discrepancy_lambda(
    p: &InverseProblem,
    grid: &LambdaGrid,
    opts: &DiscrepancyOptions,
) -> Result<(f64, Field)> {
    let k = discrepancy_index_uniform(std::slice::from_ref(p), grid, opts)?;
    let l = grid.values()[k];
    Ok((l, solve_tv(p, l, &opts.solver)?.u))
}

/// Grid index admissible for every problem at once.
pub fn discrepancy_index_uniform(
    problems: &[InverseProblem],
    grid: &LambdaGrid,
    opts: &DiscrepancyOptions,
) -> Result<usize> {
    if problems.is_empty() {
        return invalid("no problems given");
    }
    let admissible = |k: usize| -> Result<bool> {
        let l = grid.values()[k];
        let oks = problems
            .par_iter()
            .map(|p| {
                let u = solve_tv(p, l, &opts.solver)?.u;
                Ok(p.residual_norm(&u)? <= p.tau * p.noise)
            })
            .collect::<Result<Vec<bool>>>()?;
        Ok(oks.into_iter().all(|b| b))
    };
    let n = grid.len();
    let found = match (opts.search, opts.rule) {
        (Search::Linear, LambdaRule::Least) => {
            let mut hit = None;
            for k in 0..n {
                if admissible(k)? {
                    hit = Some(k);
                    break;
                }
            }
            hit
        }
        (Search::Linear, LambdaRule::Greatest) => {
            let mut hit = None;
            for k in 0..n {
                if admissible(k)? {
                    hit = Some(k);
                }
            }
            hit
        }
        // admissible weights form a prefix of the grid when the residual is monotone
        (Search::Bisection, LambdaRule::Least) => admissible(0)?.then_some(0),
        (Search::Bisection, LambdaRule::Greatest) => {
            if !admissible(0)? {
                None
            } else {
                let (mut lo, mut hi) = (0, n);
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if admissible(mid)? {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                Some(lo)
            }
        }
    };
    found.ok_or(Error::NoAdmissibleLambda)
}
