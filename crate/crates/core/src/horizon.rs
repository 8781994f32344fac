//! Blue-shift weighted linear waves on a periodic interior slab.
//!
//! The field solves `phi_vv - phi_xx + V(v, x) phi = 0` for `v` in `[v0, v_max]`
//! and `x` on a periodic circle of length `L`, sampled at nodes `x_i = i L / N`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Field, Grid, PolicyFamily, Scheme, Topology};

pub const DEFAULT_FLUX_CAP_FACTOR: f64 = 1e6;
pub const DEFAULT_COURANT: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Potential {
    Zero,
    Constant { value: f64 },
    /// `amplitude e^{-rate v} (1 + modulation cos(2 pi x / L))`.
    Decaying { amplitude: f64, rate: f64, modulation: f64 },
    /// Tabulated in `x` on equally spaced periodic nodes, linear in between; constant in `v`.
    Profile { values: Vec<f64> },
}

impl Potential {
    fn eval(&self, v: f64, x: f64, length: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant { value } => *value,
            Potential::Decaying { amplitude, rate, modulation } => {
                amplitude * (-rate * v).exp() * (1.0 + modulation * (2.0 * PI * x / length).cos())
            }
            Potential::Profile { values } => {
                let n = values.len();
                let s = (x / length).rem_euclid(1.0) * n as f64;
                let i = (s.floor() as usize).min(n - 1);
                let w = s - i as f64;
                values[i] * (1.0 - w) + values[(i + 1) % n] * w
            }
        }
    }

    fn eval_v(&self, v: f64, x: f64, length: f64) -> f64 {
        match self {
            Potential::Decaying { rate, .. } => -rate * self.eval(v, x, length),
            _ => 0.0,
        }
    }

    /// Declared bound on `|V|` for `v >= v0`.
    pub fn sup(&self, v0: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant { value } => value.abs(),
            Potential::Decaying { amplitude, rate, modulation } => {
                amplitude.abs() * (-rate * v0).exp() * (1.0 + modulation.abs())
            }
            Potential::Profile { values } => values.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Potential::Zero => true,
            Potential::Constant { value } => value.is_finite(),
            Potential::Decaying { amplitude, rate, modulation } => {
                amplitude.is_finite() && *rate >= 0.0 && rate.is_finite() && modulation.is_finite()
            }
            Potential::Profile { values } => !values.is_empty() && values.iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            invalid("potential must be bounded with a non-negative decay rate")
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorModel {
    pub kappa: f64,
    pub potential: Potential,
    pub v0: f64,
    pub v_max: f64,
    pub length: f64,
}

impl InteriorModel {
    pub fn new(kappa: f64, potential: Potential, v0: f64, v_max: f64) -> Result<Self> {
        InteriorModel::with_length(kappa, potential, v0, v_max, 2.0 * PI)
    }

    pub fn with_length(kappa: f64, potential: Potential, v0: f64, v_max: f64, length: f64) -> Result<Self> {
        if !(kappa >= 0.0 && kappa.is_finite()) {
            return invalid("surface gravity must be finite and non-negative");
        }
        if !(v0.is_finite() && v_max.is_finite() && v_max > v0) {
            return invalid("need v0 < v_max");
        }
        if !(length > 0.0 && length.is_finite()) {
            return invalid("period must be positive");
        }
        potential.validate()?;
        Ok(InteriorModel { kappa, potential, v0, v_max, length })
    }

    pub fn span(&self) -> f64 {
        self.v_max - self.v0
    }

    pub fn weight(&self, v: f64) -> f64 {
        (self.kappa * v).exp()
    }

    fn dx(&self, n: usize) -> f64 {
        self.length / n as f64
    }
}

/// Initial data `(phi, phi_v)` on the slice `v = v0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CauchyDatum {
    Zero,
    /// Periodised Gaussian of the given width travelling with velocity `direction` (+1, -1 or 0).
    Pulse { center: f64, width: f64, amplitude: f64, direction: f64 },
    /// `amplitude cos(k x + phase)` with `phi_v = velocity * amplitude * k sin(k x + phase)`.
    Mode { k: u32, amplitude: f64, phase: f64, velocity: f64 },
    /// Nodal samples; resampled linearly when evolved at another resolution.
    Sampled { phi0: Vec<f64>, phi1: Vec<f64> },
}

impl CauchyDatum {
    pub fn sampled(phi0: Vec<f64>, phi1: Vec<f64>) -> Result<Self> {
        if phi0.is_empty() || phi0.len() != phi1.len() || phi0.iter().chain(&phi1).any(|x| !x.is_finite()) {
            return invalid("sampled datum needs two finite arrays of equal length");
        }
        Ok(CauchyDatum::Sampled { phi0, phi1 })
    }

    /// `(phi, phi_v)` at the `n` nodes of a circle of length `length`.
    pub fn fields(&self, n: usize, length: f64) -> (Vec<f64>, Vec<f64>) {
        let x = |i: usize| i as f64 * length / n as f64;
        match self {
            CauchyDatum::Zero => (vec![0.0; n], vec![0.0; n]),
            CauchyDatum::Pulse { center, width, amplitude, direction } => {
                let g = |y: f64| -> (f64, f64) {
                    let mut f = 0.0;
                    let mut df = 0.0;
                    for w in -2..=2 {
                        let z = y - center + w as f64 * length;
                        let e = amplitude * (-z * z / (2.0 * width * width)).exp();
                        f += e;
                        df += -z / (width * width) * e;
                    }
                    (f, df)
                };
                (0..n)
                    .map(|i| {
                        let (f, df) = g(x(i));
                        (f, -direction * df)
                    })
                    .unzip()
            }
            CauchyDatum::Mode { k, amplitude, phase, velocity } => {
                let kk = 2.0 * PI * *k as f64 / length;
                (0..n)
                    .map(|i| {
                        let a = kk * x(i) + phase;
                        (amplitude * a.cos(), velocity * amplitude * kk * a.sin())
                    })
                    .unzip()
            }
            CauchyDatum::Sampled { phi0, phi1 } => {
                if phi0.len() == n {
                    return (phi0.clone(), phi1.clone());
                }
                let m = phi0.len();
                let lerp = |a: &[f64], i: usize| {
                    let s = i as f64 * m as f64 / n as f64;
                    let j = s.floor() as usize % m;
                    let w = s - s.floor();
                    a[j] * (1.0 - w) + a[(j + 1) % m] * w
                };
                ((0..n).map(|i| lerp(phi0, i)).collect(), (0..n).map(|i| lerp(phi1, i)).collect())
            }
        }
    }

    /// Discrete `H^1 x L^2` norm at resolution `n`.
    pub fn norm(&self, n: usize, length: f64) -> f64 {
        let (p0, p1) = self.fields(n, length);
        let h = length / n as f64;
        let dx = central_diff(&p0, h);
        ((0..n).map(|i| p0[i] * p0[i] + dx[i] * dx[i] + p1[i] * p1[i]).sum::<f64>() * h).sqrt()
    }
}

fn central_diff(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    (0..n).map(|i| (f[(i + 1) % n] - f[(i + n - 1) % n]) / (2.0 * h)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Pipeline {
    /// Second-order leapfrog with step `courant * dx`.
    Leapfrog { courant: f64 },
    /// Exact transport of `phi_v -+ phi_x` along characteristics with a Heun source step, `dv = dx`.
    Characteristic,
}

impl Pipeline {
    pub fn leapfrog() -> Self {
        Pipeline::Leapfrog { courant: DEFAULT_COURANT }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Pipeline::Leapfrog { .. } => "leapfrog",
            Pipeline::Characteristic => "characteristic",
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "leapfrog" => Ok(Pipeline::leapfrog()),
            "characteristic" => Ok(Pipeline::Characteristic),
            _ => invalid(format!("unknown pipeline {name}")),
        }
    }
}

/// Every slice of a discrete evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteriorSolution {
    pub n: usize,
    pub dx: f64,
    pub v: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub phi_v: Vec<Vec<f64>>,
    pub phi_x: Vec<Vec<f64>>,
}

impl InteriorSolution {
    /// Samples a known solution; used for oracles.
    pub fn from_fn(
        model: &InteriorModel,
        n: usize,
        steps: usize,
        f: impl Fn(f64, f64) -> (f64, f64, f64),
    ) -> Result<Self> {
        if n == 0 || steps == 0 {
            return invalid("need at least one node and one step");
        }
        let dx = model.dx(n);
        let dv = model.span() / steps as f64;
        let mut s = InteriorSolution { n, dx, v: vec![], phi: vec![], phi_v: vec![], phi_x: vec![] };
        for k in 0..=steps {
            let v = model.v0 + k as f64 * dv;
            let (a, (b, c)): (Vec<f64>, (Vec<f64>, Vec<f64>)) =
                (0..n).map(|i| { let (p, pv, px) = f(v, i as f64 * dx); (p, (pv, px)) }).unzip();
            s.v.push(v);
            s.phi.push(a);
            s.phi_v.push(b);
            s.phi_x.push(c);
        }
        Ok(s)
    }

    pub fn steps(&self) -> usize {
        self.v.len() - 1
    }

    pub fn dv(&self) -> f64 {
        self.v[1] - self.v[0]
    }

    pub fn final_slice(&self) -> Field {
        self.slice_field(self.phi.last().unwrap().clone())
    }

    fn slice_field(&self, values: Vec<f64>) -> Field {
        let g = Grid::new(vec![self.n], vec![self.dx], vec![Topology::Periodic]).expect("valid slice grid");
        Field::new(g, values).expect("finite slice")
    }

    /// `1/2 int (phi_v^2 + phi_x^2 + V phi^2) dx` at slice `k`.
    pub fn energy(&self, model: &InteriorModel, k: usize) -> f64 {
        let v = self.v[k];
        0.5 * self.dx
            * (0..self.n)
                .map(|i| {
                    let vp = model.potential.eval(v, i as f64 * self.dx, model.length);
                    self.phi_v[k][i].powi(2) + self.phi_x[k][i].powi(2) + vp * self.phi[k][i].powi(2)
                })
                .sum::<f64>()
    }

    fn l2_sq(&self, a: &[f64]) -> f64 {
        a.iter().map(|x| x * x).sum::<f64>() * self.dx
    }

    fn node(&self, v: f64) -> Result<usize> {
        let k = ((v - self.v[0]) / self.dv()).round();
        if !(0.0..=self.steps() as f64).contains(&k) {
            return invalid(format!("v = {v} outside the evolved range"));
        }
        Ok(k as usize)
    }

    /// Linear interpolation in `v` between stored slices.
    pub fn slice_at(&self, v: f64) -> Result<Vec<f64>> {
        let s = (v - self.v[0]) / self.dv();
        if s < -1e-9 || s > self.steps() as f64 + 1e-9 {
            return invalid(format!("v = {v} outside the evolved range"));
        }
        let k = (s.floor().max(0.0) as usize).min(self.steps() - 1);
        let w = (s - k as f64).clamp(0.0, 1.0);
        Ok((0..self.n).map(|i| self.phi[k][i] * (1.0 - w) + self.phi[k + 1][i] * w).collect())
    }
}

/// Evolves `d` at `resolution` nodes over the model's `v` range.
pub fn evolve_interior(
    model: &InteriorModel,
    d: &CauchyDatum,
    pipeline: Pipeline,
    resolution: usize,
) -> Result<InteriorSolution> {
    if resolution < 4 {
        return invalid("need at least 4 nodes");
    }
    let n = resolution;
    let dx = model.dx(n);
    let sup = model.potential.sup(model.v0);
    let dv = match pipeline {
        Pipeline::Leapfrog { courant } => {
            if !(courant > 0.0 && courant <= 1.0) {
                return invalid(format!("Courant number {courant} outside (0, 1]"));
            }
            courant * dx
        }
        Pipeline::Characteristic => dx,
    };
    if dv * dv * sup > 1.0 {
        return invalid("step too large for the potential bound");
    }
    let steps_f = model.span() / dv;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-8 * steps_f.max(1.0) {
        return invalid(format!("v span {} is not a multiple of the step {dv}", model.span()));
    }
    let (phi0, phi1) = d.fields(n, model.length);
    let xs: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
    let pot = |v: f64| -> Vec<f64> { xs.iter().map(|&x| model.potential.eval(v, x, model.length)).collect() };
    let vs: Vec<f64> = (0..=steps).map(|k| model.v0 + k as f64 * dv).collect();
    let check = |step: usize, f: &[f64]| -> Result<()> {
        if f.iter().all(|x| x.is_finite() && x.abs() < 1e150) {
            Ok(())
        } else {
            Err(Error::EvolutionBlowup { step })
        }
    };
    match pipeline {
        Pipeline::Leapfrog { .. } => {
            let lap = |f: &[f64]| -> Vec<f64> {
                (0..n).map(|i| (f[(i + 1) % n] - 2.0 * f[i] + f[(i + n - 1) % n]) / (dx * dx)).collect()
            };
            let mut phi = Vec::with_capacity(steps + 2);
            phi.push(phi0.clone());
            let l0 = lap(&phi0);
            let v0p = pot(vs[0]);
            phi.push((0..n).map(|i| phi0[i] + dv * phi1[i] + 0.5 * dv * dv * (l0[i] - v0p[i] * phi0[i])).collect());
            // one extra slice so phi_v is centred at the last stored slice
            for k in 1..=steps {
                let l = lap(&phi[k]);
                let vp = pot(model.v0 + k as f64 * dv);
                let next: Vec<f64> =
                    (0..n).map(|i| 2.0 * phi[k][i] - phi[k - 1][i] + dv * dv * (l[i] - vp[i] * phi[k][i])).collect();
                check(k + 1, &next)?;
                phi.push(next);
            }
            let mut phi_v = vec![phi1];
            for k in 1..=steps {
                phi_v.push((0..n).map(|i| (phi[k + 1][i] - phi[k - 1][i]) / (2.0 * dv)).collect());
            }
            phi.pop();
            let phi_x = phi.iter().map(|f| central_diff(f, dx)).collect();
            Ok(InteriorSolution { n, dx, v: vs, phi, phi_v, phi_x })
        }
        Pipeline::Characteristic => {
            let d0 = central_diff(&phi0, dx);
            let mut a: Vec<f64> = (0..n).map(|i| phi1[i] - d0[i]).collect();
            let mut b: Vec<f64> = (0..n).map(|i| phi1[i] + d0[i]).collect();
            let mut phi = phi0;
            let mut sol = InteriorSolution { n, dx, v: vs.clone(), phi: vec![], phi_v: vec![], phi_x: vec![] };
            let push = |sol: &mut InteriorSolution, phi: &[f64], a: &[f64], b: &[f64]| {
                sol.phi.push(phi.to_vec());
                sol.phi_v.push((0..n).map(|i| 0.5 * (a[i] + b[i])).collect());
                sol.phi_x.push((0..n).map(|i| 0.5 * (b[i] - a[i])).collect());
            };
            push(&mut sol, &phi, &a, &b);
            let mut vp = pot(vs[0]);
            for k in 0..steps {
                let vq = pot(vs[k + 1]);
                let l = |i: usize| (i + n - 1) % n;
                let r = |i: usize| (i + 1) % n;
                let pp: Vec<f64> = (0..n).map(|i| phi[i] + dv * 0.5 * (a[i] + b[i])).collect();
                let ap: Vec<f64> = (0..n).map(|i| a[l(i)] - dv * vp[l(i)] * phi[l(i)]).collect();
                let bp: Vec<f64> = (0..n).map(|i| b[r(i)] - dv * vp[r(i)] * phi[r(i)]).collect();
                let na: Vec<f64> =
                    (0..n).map(|i| a[l(i)] - 0.5 * dv * (vp[l(i)] * phi[l(i)] + vq[i] * pp[i])).collect();
                let nb: Vec<f64> =
                    (0..n).map(|i| b[r(i)] - 0.5 * dv * (vp[r(i)] * phi[r(i)] + vq[i] * pp[i])).collect();
                let np: Vec<f64> =
                    (0..n).map(|i| phi[i] + 0.5 * dv * (0.5 * (a[i] + b[i]) + 0.5 * (ap[i] + bp[i]))).collect();
                check(k + 1, &np)?;
                check(k + 1, &na)?;
                check(k + 1, &nb)?;
                (phi, a, b, vp) = (np, na, nb, vq);
                push(&mut sol, &phi, &a, &b);
            }
            Ok(sol)
        }
    }
}

/// Trapezoid quadrature of `e^{kappa v} ||phi_v||^2` between the slices nearest `v0`, `v1`.
pub fn weighted_flux(model: &InteriorModel, sol: &InteriorSolution, v0: f64, v1: f64) -> Result<f64> {
    let (a, b) = (sol.node(v0)?, sol.node(v1)?);
    if a > b {
        return invalid("need v0 <= v1");
    }
    let dv = sol.dv();
    Ok((a..b)
        .map(|k| {
            let f = |j: usize| model.weight(sol.v[j]) * sol.l2_sq(&sol.phi_v[j]);
            0.5 * dv * (f(k) + f(k + 1))
        })
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FluxTail {
    pub value: f64,
    pub cap: f64,
    pub admissible: bool,
    /// `(v1, flux up to v1)` per tail window.
    pub windows: Vec<(f64, f64)>,
}

/// Tail endpoints `v1` at 1/2, 5/8, 6/8, 7/8 and all of the way from `v0` to the end.
pub fn tail_schedule(v0: f64, v_end: f64) -> Vec<f64> {
    (0..5).map(|j| v0 + (0.5 + j as f64 / 8.0) * (v_end - v0)).collect()
}

/// Finite liminf surrogate: least flux over the tail windows, with `cap = factor * E(v0)`.
pub fn flux_tail(model: &InteriorModel, sol: &InteriorSolution, v0: f64, cap_factor: f64) -> Result<FluxTail> {
    let v_end = *sol.v.last().unwrap();
    if v0 >= v_end {
        return invalid("tail start must precede the end of the run");
    }
    let windows = tail_schedule(v0, v_end)
        .into_iter()
        .map(|v1| Ok((v1, weighted_flux(model, sol, v0, v1)?)))
        .collect::<Result<Vec<_>>>()?;
    let value = windows.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    let cap = cap_factor * sol.energy(model, 0).max(f64::MIN_POSITIVE);
    Ok(FluxTail { value, cap, admissible: value.is_finite() && value < cap, windows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCandidate {
    pub policy_id: String,
    pub trace: Field,
    pub window: (f64, f64),
    pub flux_at_extraction: f64,
    /// `(1/w) int_window e^{kappa v} ||phi_v||^2` and the same with `phi_x`.
    pub mildness_v: f64,
    pub mildness_x: f64,
    /// Mean energy over the policy's samples in the last quarter of the run.
    pub late_energy: f64,
    /// L2 bound on the distance to the final slice: `sqrt(w F e^{-kappa v_start})`.
    pub bound: f64,
}

/// One candidate per policy. A policy's finest stage splits the run into
/// `prod(dims) * samples` windows; the trace is the last window's sample
/// (end slice, centre slice, or mean over the window by scheme).
pub fn extract_traces(
    model: &InteriorModel,
    sol: &InteriorSolution,
    fam: &PolicyFamily,
    cap_factor: f64,
) -> Result<Vec<TraceCandidate>> {
    let tail = flux_tail(model, sol, sol.v[0], cap_factor)?;
    if !tail.admissible {
        return Err(Error::InadmissibleDatum { flux: tail.value, cap: tail.cap });
    }
    let v_end = *sol.v.last().unwrap();
    let span = v_end - sol.v[0];
    let late = v_end - 0.25 * span;
    fam.policies()
        .iter()
        .map(|p| {
            let st = p.stage(fam.max_level())?;
            let cells = st.dims.iter().product::<usize>() * st.samples.max(1);
            let w = span / cells as f64;
            let start = v_end - w;
            let sample = |a: f64| -> Result<Vec<f64>> {
                let b = a + w;
                match p.scheme {
                    Scheme::Nearest => sol.slice_at(b),
                    Scheme::Bilinear => sol.slice_at(a + 0.5 * w),
                    Scheme::Conservative => {
                        let (ka, kb) = (sol.node(a)?, sol.node(b)?);
                        if ka == kb {
                            return sol.slice_at(a);
                        }
                        let mut acc = vec![0.0; sol.n];
                        for k in ka..kb {
                            for i in 0..sol.n {
                                acc[i] += 0.5 * (sol.phi[k][i] + sol.phi[k + 1][i]) / (kb - ka) as f64;
                            }
                        }
                        Ok(acc)
                    }
                }
            };
            let trace = sample(start)?;
            let flux = weighted_flux(model, sol, start, v_end)?;
            let (ka, kb) = (sol.node(start)?, sol.node(v_end)?);
            let mut mx = 0.0;
            for k in ka..kb {
                let f = |j: usize| model.weight(sol.v[j]) * sol.l2_sq(&sol.phi_x[j]);
                mx += 0.5 * sol.dv() * (f(k) + f(k + 1));
            }
            let late_samples: Vec<f64> = (0..cells)
                .map(|c| sol.v[0] + (c as f64 + 1.0) * w)
                .filter(|&v| v > late + 1e-12)
                .map(|v| sol.energy(model, sol.node(v).unwrap()))
                .collect();
            let late_energy = if late_samples.is_empty() {
                sol.energy(model, sol.steps())
            } else {
                late_samples.iter().sum::<f64>() / late_samples.len() as f64
            };
            Ok(TraceCandidate {
                policy_id: p.id.clone(),
                trace: sol.slice_field(trace),
                window: (start, v_end),
                flux_at_extraction: flux,
                mildness_v: flux / w,
                mildness_x: mx / w,
                late_energy,
                bound: (w * flux * (-model.kappa * start).exp()).sqrt(),
            })
        })
        .collect()
}

/// Derivatives entering the mildness cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MildnessTerms {
    #[default]
    Both,
    VOnly,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LateCost {
    /// Mean late-time energy seen by the policy.
    #[default]
    LateEnergy,
    /// `1/2 ||d_x trace||^2`.
    TraceGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOptions {
    pub terms: MildnessTerms,
    pub cost: LateCost,
    /// Relative band within which costs count as equal.
    pub band: f64,
    /// Tameness tolerances: `x` is tame under a policy when some `q` has
    /// `||x - trace_policy|| <= q (1 + ||x||)`.
    pub q_grid: Vec<f64>,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        SelectionOptions { terms: MildnessTerms::Both, cost: LateCost::LateEnergy, band: 1e-9, q_grid: vec![1e-3, 1e-2, 1e-1] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub chosen: TraceCandidate,
    pub e0: f64,
    pub phi1: f64,
    pub ut_passed: bool,
    pub tie_set_size: usize,
}

fn l2(f: &Field) -> f64 {
    f.norm() * f.grid().cell_volume().sqrt()
}

impl SelectionOptions {
    pub fn e0(&self, c: &TraceCandidate) -> f64 {
        match self.terms {
            MildnessTerms::Both => c.mildness_v + c.mildness_x,
            MildnessTerms::VOnly => c.mildness_v,
        }
    }

    pub fn phi1(&self, c: &TraceCandidate) -> f64 {
        match self.cost {
            LateCost::LateEnergy => c.late_energy,
            LateCost::TraceGradient => {
                let v = c.trace.values();
                let h = c.trace.grid().spacing()[0];
                0.5 * central_diff(v, h).iter().map(|x| x * x).sum::<f64>() * h
            }
        }
    }

    /// Universal tameness of `x` against every candidate's policy.
    pub fn tame(&self, x: &TraceCandidate, all: &[TraceCandidate]) -> bool {
        let nx = l2(&x.trace);
        all.iter().all(|c| {
            let d = x.trace.sub(&c.trace).map(|f| l2(&f)).unwrap_or(f64::INFINITY);
            self.q_grid.iter().any(|&q| d <= q * (1.0 + nx))
        })
    }
}

/// Lexicographic `(E0, Phi1)` minimum over tame candidates; ties go to the earliest candidate.
pub fn select_continuation(candidates: &[TraceCandidate], opts: &SelectionOptions) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return invalid("no candidates");
    }
    let tame: Vec<&TraceCandidate> = candidates.iter().filter(|c| opts.tame(c, candidates)).collect();
    if tame.is_empty() {
        return Err(Error::NoTameContinuation);
    }
    let close = |a: f64, b: f64| (a - b).abs() <= opts.band * (1.0 + a.abs().max(b.abs()));
    let e_min = tame.iter().map(|c| opts.e0(c)).fold(f64::INFINITY, f64::min);
    let g0: Vec<&&TraceCandidate> = tame.iter().filter(|c| close(opts.e0(c), e_min)).collect();
    let p_min = g0.iter().map(|c| opts.phi1(c)).fold(f64::INFINITY, f64::min);
    let star: Vec<&&&TraceCandidate> = g0.iter().filter(|c| close(opts.phi1(c), p_min)).collect();
    let chosen = (**star[0]).clone();
    Ok(SelectionOutcome {
        e0: opts.e0(&chosen),
        phi1: opts.phi1(&chosen),
        chosen,
        ut_passed: true,
        tie_set_size: star.len(),
    })
}

/// Energy-identity defect on the slab `[v1, v2]`:
/// `|W(v2) - W(v1) - int (kappa e^{kappa v} ||phi_v||^2 + R) dv|` with `W = e^{kappa v} E(v)` and
/// `R = kappa e^{kappa v} (1/2) int (phi_x^2 + V phi^2 - phi_v^2) + (1/2) e^{kappa v} int V_v phi^2`.
pub fn energy_identity_residual(model: &InteriorModel, sol: &InteriorSolution, v1: f64, v2: f64) -> Result<f64> {
    let (a, b) = (sol.node(v1)?, sol.node(v2)?);
    if a > b {
        return invalid("need v1 <= v2");
    }
    let k = model.kappa;
    let w = |j: usize| model.weight(sol.v[j]) * sol.energy(model, j);
    let rate = |j: usize| {
        let v = sol.v[j];
        let e = model.weight(v);
        let mut main = 0.0;
        let mut rem = 0.0;
        for i in 0..sol.n {
            let x = i as f64 * sol.dx;
            let vp = model.potential.eval(v, x, model.length);
            let (p, pv, px) = (sol.phi[j][i], sol.phi_v[j][i], sol.phi_x[j][i]);
            main += pv * pv;
            rem += k * 0.5 * (px * px + vp * p * p - pv * pv) + 0.5 * model.potential.eval_v(v, x, model.length) * p * p;
        }
        e * (k * main + rem) * sol.dx
    };
    let integral: f64 = (a..b).map(|j| 0.5 * sol.dv() * (rate(j) + rate(j + 1))).sum();
    Ok((w(b) - w(a) - integral).abs())
}

/// `||chosen_A - chosen_B|| / (1 + ||chosen_A||)` per resolution.
pub fn cross_pipeline_divergence(
    model: &InteriorModel,
    d: &CauchyDatum,
    a: Pipeline,
    b: Pipeline,
    resolutions: &[usize],
    fam: &PolicyFamily,
    opts: &SelectionOptions,
) -> Result<Vec<f64>> {
    resolutions
        .par_iter()
        .map(|&n| {
            let pick = |p: Pipeline| -> Result<Field> {
                let sol = evolve_interior(model, d, p, n)?;
                let c = extract_traces(model, &sol, fam, DEFAULT_FLUX_CAP_FACTOR)?;
                Ok(select_continuation(&c, opts)?.chosen.trace)
            };
            let (ua, ub) = (pick(a)?, pick(b)?);
            Ok(l2(&ua.sub(&ub)?) / (1.0 + l2(&ua)))
        })
        .collect()
}

/// Observed orders `log2(e_k / e_{k+1})` of a halving sequence.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
