use serde::{Deserialize, Serialize};

use super::{discrepancy_lambda, DiscrepancyOptions, InverseProblem, LambdaGrid, SolverOptions};
use crate::error::Result;
use crate::grid::{refine, Field, Recoding, RefinementPolicy};

/// The full reconstruction pipeline `s`: refine, choose lambda, solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    /// Weights at the resolution of the data; rescaled per stage.
    pub lambdas: LambdaGrid,
    pub discrepancy: DiscrepancyOptions,
    /// Solve each stage to its scheduled tolerance `2^-m` instead of `solver.tol`.
    pub stage_tolerance: bool,
}

impl Pipeline {
    pub fn new(lambdas: LambdaGrid) -> Self {
        Pipeline {
            lambdas,
            discrepancy: DiscrepancyOptions::default(),
            stage_tolerance: true,
        }
    }

    /// The stage-`n` problem, its weight grid and solver settings.
    ///
    /// Weights scale like `h0 / h_n` and the noise level like the square root
    /// of the point count, which keeps the continuum functional fixed.
    pub fn stage_problem(
        &self,
        p: &InverseProblem,
        policy: &RefinementPolicy,
        n: usize,
    ) -> Result<(InverseProblem, LambdaGrid, SolverOptions)> {
        let stage = policy.stage(n)?;
        let d = refine(&p.data, policy, n)?;
        let h0 = p.data.grid().spacing()[0];
        let hn = d.grid().spacing()[0];
        let noise = p.noise * (d.len() as f64 / p.data.len() as f64).sqrt();
        let q = InverseProblem::new(p.op.clone(), d, noise, p.tau, p.mu)?;
        let mut solver = self.discrepancy.solver;
        if self.stage_tolerance {
            solver.tol = stage.tolerance();
        }
        Ok((q, self.lambdas.scaled(h0 / hn)?, solver))
    }
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub lambda: f64,
    pub u: Field,
}

pub fn reconstruct(
    p: &InverseProblem,
    policy: &RefinementPolicy,
    n: usize,
    pipe: &Pipeline,
) -> Result<Reconstruction> {
    let (q, lambdas, solver) = pipe.stage_problem(p, policy, n)?;
    let opts = DiscrepancyOptions {
        solver,
        ..pipe.discrepancy
    };
    let (lambda, u) = discrepancy_lambda(&q, &lambdas, &opts)?;
    Ok(Reconstruction { lambda, u })
}

/// `||U(s(d)) - s(T(d))|| / (1 + ||s(d)||)` in root-mean-square norm.
pub fn commutation_gap(
    p: &InverseProblem,
    r: &Recoding,
    policy: &RefinementPolicy,
    n: usize,
    pipe: &Pipeline,
) -> Result<f64> {
    let sd = reconstruct(p, policy, n, pipe)?.u;
    let td = p.with_data(r.forward(&p.data)?)?;
    let std_ = reconstruct(&td, policy, n, pipe)?.u;
    let usd = r.state_map(&sd)?;
    Ok(usd.sub(&std_)?.rms() / (1.0 + sd.rms()))
}
