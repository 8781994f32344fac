use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{InverseProblem, Tv};
use crate::error::{invalid, Error, Result};
use crate::grid::Field;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    Zero,
    /// Uniform dual start in the feasible box, drawn from ChaCha8 with this seed.
    Seeded(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Dual FISTA when `A` is the identity, linearised primal-dual otherwise.
    Auto,
    DualFista,
    PrimalDual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub check_every: usize,
    pub init: Init,
    pub method: Method,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            max_iter: 200_000,
            check_every: 10,
            init: Init::Zero,
            method: Method::Auto,
        }
    }
}

impl SolverOptions {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }
}

#[derive(Clone, Debug)]
pub struct TvSolution {
    pub u: Field,
    /// Dual certificate: one entry per axis per grid point, `|y| <= lambda`.
    pub dual: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub objective: f64,
    /// Objective of every accepted iterate, nonincreasing up to `1e-10` slack.
    pub history: Vec<f64>,
}

/// Slack allowed on the objective history when accepting the final iterate.
pub const OBJECTIVE_SLACK: f64 = 1e-10;

/// Minimises `||Au - d||^2 + lambda TV(u) + mu ||u||^2`.
///
/// Terminates when the first-order optimality residual
/// `max(||grad f(u) + D^T y||_inf, sum_j (lambda |Du_j| - y_j Du_j))` with
/// `|y| <= lambda` drops below `opts.tol` (plus the rounding floor `8 lambda N eps`). The second term is the duality gap
/// of the dual certificate `y`, so with `A = I` it also bounds
/// `||u - u*||^2 <= residual / (1 + mu)`.
pub fn solve_tv(p: &InverseProblem, lambda: f64, opts: &SolverOptions) -> Result<TvSolution> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    if !(opts.tol > 0.0) || opts.check_every == 0 {
        return invalid("solver tolerance must be positive");
    }
    let method = match opts.method {
        Method::Auto if p.op.is_identity() => Method::DualFista,
        Method::Auto => Method::PrimalDual,
        m => m,
    };
    if method == Method::DualFista && !p.op.is_identity() {
        return invalid("dual FISTA needs the identity operator");
    }
    let mut s = State::new(p, lambda, opts);
    match method {
        Method::DualFista => s.dual_fista(),
        _ => s.primal_dual(),
    }
}

struct State<'a> {
    p: &'a InverseProblem,
    tv: Tv,
    lambda: f64,
    opts: &'a SolverOptions,
    history: Vec<f64>,
    best: Option<(f64, f64, Vec<f64>, Vec<Vec<f64>>)>,
}

struct Eval {
    residual: f64,
    objective: f64,
}

impl<'a> State<'a> {
    fn new(p: &'a InverseProblem, lambda: f64, opts: &'a SolverOptions) -> Self {
        State {
            p,
            tv: Tv::new(p.data.grid()),
            lambda,
            opts,
            history: Vec::new(),
            best: None,
        }
    }

    fn initial_dual(&self) -> Vec<Vec<f64>> {
        let mut y = self.tv.zeros_dual();
        if let Init::Seeded(seed) = self.opts.init {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for (a, ya) in y.iter_mut().enumerate() {
                for (j, v) in ya.iter_mut().enumerate() {
                    let r: f64 = rng.random_range(-1.0..=1.0);
                    if self.tv.has_edge(a, j) {
                        *v = self.lambda * r;
                    }
                }
            }
        }
        y
    }

    fn initial_primal(&self) -> Vec<f64> {
        match self.opts.init {
            Init::Zero => vec![0.0; self.p.data.len()],
            Init::Seeded(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
                let scale = self.p.data.max().abs().max(self.p.data.min().abs()).max(1.0);
                (0..self.p.data.len())
                    .map(|_| scale * rng.random_range(-1.0..=1.0))
                    .collect()
            }
        }
    }

    /// Data term `||Au - d||^2 + mu ||u||^2` and its gradient.
    fn smooth(&self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let p = self.p;
        let uf = Field::from_parts(p.data.grid().clone(), u.to_vec());
        let r = p.op.apply(&uf)?.sub(&p.data)?;
        let g = p.op.adjoint(&r)?;
        let val = r.values().iter().map(|v| v * v).sum::<f64>()
            + p.mu * u.iter().map(|v| v * v).sum::<f64>();
        let grad = g
            .values()
            .iter()
            .zip(u)
            .map(|(gi, ui)| 2.0 * gi + 2.0 * p.mu * ui)
            .collect();
        Ok((val, grad))
    }

    fn evaluate(&self, u: &[f64], y: &[Vec<f64>]) -> Result<Eval> {
        let (f, grad) = self.smooth(u)?;
        let du = self.tv.grad(u);
        let mut dty = vec![0.0; u.len()];
        self.tv.grad_adj(y, &mut dty);
        let stat = grad
            .iter()
            .zip(&dty)
            .map(|(g, d)| (g + d).abs())
            .fold(0.0, f64::max);
        let mut gap = 0.0f64;
        let mut tv = 0.0;
        for (da, ya) in du.iter().zip(y) {
            for (d, yv) in da.iter().zip(ya) {
                tv += d.abs();
                gap += self.lambda * d.abs() - yv * d;
            }
        }
        Ok(Eval {
            residual: stat.max(gap),
            objective: f + self.lambda * tv,
        })
    }

    /// Monotone bookkeeping; returns the accepted solution once converged.
    fn check(&mut self, it: usize, u: &[f64], y: &[Vec<f64>]) -> Result<Option<TvSolution>> {
        let e = self.evaluate(u, y)?;
        let best_obj = self.best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if e.objective <= best_obj {
            self.history.push(e.objective);
            self.best = Some((e.objective, e.residual, u.to_vec(), y.to_vec()));
        }
        let slack = OBJECTIVE_SLACK * best_obj.abs().max(1.0);
        let tol = self.tolerance();
        if e.residual <= tol && e.objective <= best_obj + slack {
            if e.objective > best_obj {
                self.history.push(e.objective);
            }
            return Ok(Some(self.finish(it, u.to_vec(), y.to_vec(), e)));
        }
        if let Some((obj, res, bu, by)) = &self.best {
            if *res <= tol {
                let e = Eval {
                    residual: *res,
                    objective: *obj,
                };
                let (bu, by) = (bu.clone(), by.clone());
                return Ok(Some(self.finish(it, bu, by, e)));
            }
        }
        Ok(None)
    }

    /// Requested tolerance plus the rounding level of the gap, `8 lambda N eps`.
    fn tolerance(&self) -> f64 {
        self.opts.tol + 8.0 * self.lambda * self.p.data.len() as f64 * f64::EPSILON
    }

    fn finish(&mut self, it: usize, u: Vec<f64>, y: Vec<Vec<f64>>, e: Eval) -> TvSolution {
        TvSolution {
            u: Field::from_parts(self.p.data.grid().clone(), u),
            dual: y,
            residual: e.residual,
            iterations: it,
            objective: e.objective,
            history: std::mem::take(&mut self.history),
        }
    }

    fn failure(&self, it: usize) -> Error {
        Error::SolverFailure {
            residual: self.best.as_ref().map_or(f64::INFINITY, |b| b.1),
            iterations: it,
        }
    }

    /// FISTA with adaptive restart on the box-constrained dual of the
    /// identity-operator problem; the primal is `u = (2d - D^T y) / (2(1 + mu))`.
    fn dual_fista(&mut self) -> Result<TvSolution> {
        let c = 1.0 + self.p.mu;
        let d = self.p.data.values();
        let n = d.len();
        let lip = self.tv.norm_sq_bound() / (2.0 * c);
        let step = 1.0 / lip;
        let lam = self.lambda;

        let primal = |tv: &Tv, y: &[Vec<f64>], u: &mut Vec<f64>| {
            tv.grad_adj(y, u);
            for (ui, di) in u.iter_mut().zip(d) {
                *ui = (2.0 * di - *ui) / (2.0 * c);
            }
        };

        let mut y = self.initial_dual();
        let mut z = y.clone();
        let mut y_prev = y.clone();
        let mut u = vec![0.0; n];
        let mut t = 1.0f64;
        for it in 0..=self.opts.max_iter {
            if it % self.opts.check_every == 0 {
                primal(&self.tv, &y, &mut u);
                if let Some(sol) = self.check(it, &u, &y)? {
                    return Ok(sol);
                }
            }
            primal(&self.tv, &z, &mut u);
            let g = self.tv.grad(&u);
            std::mem::swap(&mut y_prev, &mut y);
            let mut restart = 0.0;
            for a in 0..y.len() {
                for j in 0..y[a].len() {
                    let v = (z[a][j] + step * g[a][j]).clamp(-lam, lam);
                    let v = if self.tv.has_edge(a, j) { v } else { 0.0 };
                    y[a][j] = v;
                    restart += (z[a][j] - v) * (v - y_prev[a][j]);
                }
            }
            let t_next = if restart > 0.0 {
                1.0
            } else {
                0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
            };
            let beta = if restart > 0.0 { 0.0 } else { (t - 1.0) / t_next };
            for a in 0..y.len() {
                for j in 0..y[a].len() {
                    z[a][j] = y[a][j] + beta * (y[a][j] - y_prev[a][j]);
                }
            }
            t = t_next;
        }
        Err(self.failure(self.opts.max_iter))
    }

    /// Linearised primal-dual splitting (Condat-Vu) for a general linear `A`.
    fn primal_dual(&mut self) -> Result<TvSolution> {
        let p = self.p;
        let lf = 2.0 * (p.op.norm_bound().powi(2) + p.mu);
        let dn = self.tv.norm_sq_bound().sqrt();
        let tau = 1.0 / (0.5 * lf + dn);
        let sigma = 1.0 / dn;
        let lam = self.lambda;

        let mut u = self.initial_primal();
        let mut y = self.initial_dual();
        let mut dty = vec![0.0; u.len()];
        let mut ubar = vec![0.0; u.len()];
        for it in 0..=self.opts.max_iter {
            if it % self.opts.check_every == 0 {
                if let Some(sol) = self.check(it, &u, &y)? {
                    return Ok(sol);
                }
            }
            let (_, grad) = self.smooth(&u)?;
            self.tv.grad_adj(&y, &mut dty);
            for i in 0..u.len() {
                let un = u[i] - tau * (grad[i] + dty[i]);
                ubar[i] = 2.0 * un - u[i];
                u[i] = un;
            }
            let g = self.tv.grad(&ubar);
            for a in 0..y.len() {
                for j in 0..y[a].len() {
                    if self.tv.has_edge(a, j) {
                        y[a][j] = (y[a][j] + sigma * g[a][j]).clamp(-lam, lam);
                    }
                }
            }
        }
        Err(self.failure(self.opts.max_iter))
    }
}
