use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{resample, Field, Recoding, Scheme};

/// `v(x) = base + contrast * chi_W(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub base: f64,
    pub contrast: f64,
    /// 0/1 indicator of the inclusion `W`.
    pub indicator: Field,
}

impl CoefficientField {
    pub fn new(base: f64, contrast: f64, indicator: Field) -> Result<Self> {
        if !(base > 0.0) || !(base + contrast.min(0.0) > 0.0) {
            return invalid(format!(
                "not uniformly elliptic: v0 = {base}, alpha = {contrast}"
            ));
        }
        if indicator.values().iter().any(|&x| x != 0.0 && x != 1.0) {
            return invalid("indicator must be 0/1");
        }
        Ok(CoefficientField {
            base,
            contrast,
            indicator,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityRow {
    pub recoding: String,
    pub cells: usize,
    /// Smallest Rayleigh quotient `a(u,u) / ||u||^2` (coercivity floor).
    pub floor: f64,
    /// Largest Rayleigh quotient (continuity bound).
    pub ceiling: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub rows: Vec<CoercivityRow>,
    /// Per level: `(max floor - min floor) / max floor` across recodings.
    pub spread: Vec<f64>,
    pub tolerance: f64,
    pub stable: bool,
}

/// Assembles `a(u,u) = sum v |grad u|^2` (cell-centred, Dirichlet outer faces)
/// at each level and reports extremal Rayleigh quotients per recoding.
pub fn coercivity_check(
    coef: &CoefficientField,
    recodings: &[Recoding],
    levels: &[usize],
    tolerance: f64,
) -> Result<CoercivityReport> {
    CoefficientField::new(coef.base, coef.contrast, coef.indicator.clone())?;
    if recodings.is_empty() || levels.is_empty() {
        return invalid("need at least one recoding and one level");
    }
    let mut rows = Vec::new();
    let mut spread = Vec::new();
    for &n in levels {
        let g = coef.indicator.grid().with_dims(&vec![n; coef.indicator.grid().ndim()])?;
        let chi = resample(&coef.indicator, &g, Scheme::Nearest)?;
        let mut floors = Vec::new();
        for r in recodings {
            let chi_r = r.forward(&chi)?;
            let v = chi_r.map(|x| coef.base + coef.contrast * x);
            let op = Stiffness::new(&v);
            let floor = op.smallest()?;
            let ceiling = op.largest();
            floors.push(floor);
            rows.push(CoercivityRow {
                recoding: r.name.clone(),
                cells: n,
                floor,
                ceiling,
            });
        }
        let hi = floors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = floors.iter().copied().fold(f64::INFINITY, f64::min);
        spread.push((hi - lo) / hi);
    }
    let stable = spread.iter().all(|&s| s <= tolerance);
    Ok(CoercivityReport {
        rows,
        spread,
        tolerance,
        stable,
    })
}

/// Matrix-free stiffness operator scaled so that `u.Ku / u.u` is the Rayleigh
/// quotient against the L2 norm.
struct Stiffness {
    /// `(i, j, coefficient)` for interior faces.
    edges: Vec<(usize, usize, f64)>,
    /// Boundary-face contribution `2 v_i` per cell.
    diag_bc: Vec<f64>,
    scale: f64,
}

impl Stiffness {
    fn new(v: &Field) -> Self {
        let g = v.grid();
        let nd = g.ndim();
        let strides = g.strides();
        let mut edges = Vec::new();
        let mut diag_bc = vec![0.0; g.len()];
        for i in 0..g.len() {
            let c = g.coords(i);
            for a in 0..nd {
                let n = g.dims()[a];
                if c[a] + 1 < n {
                    let j = i + strides[a];
                    edges.push((i, j, 0.5 * (v.values()[i] + v.values()[j])));
                } else {
                    diag_bc[i] += 2.0 * v.values()[i];
                }
                if c[a] == 0 {
                    diag_bc[i] += 2.0 * v.values()[i];
                }
            }
        }
        let h = g.spacing()[0];
        Stiffness {
            edges,
            diag_bc,
            scale: 1.0 / (h * h),
        }
    }

    fn apply(&self, u: &[f64], out: &mut [f64]) {
        for (o, (x, d)) in out.iter_mut().zip(u.iter().zip(&self.diag_bc)) {
            *o = d * x;
        }
        for &(i, j, w) in &self.edges {
            let f = w * (u[i] - u[j]);
            out[i] += f;
            out[j] -= f;
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = self.diag_bc.clone();
        for &(i, j, w) in &self.edges {
            d[i] += w;
            d[j] += w;
        }
        d.iter().map(|x| x * self.scale).collect()
    }

    fn rayleigh(&self, u: &[f64]) -> f64 {
        let mut ku = vec![0.0; u.len()];
        self.apply(u, &mut ku);
        dot(u, &ku) / dot(u, u)
    }

    /// Inverse iteration with Jacobi-preconditioned CG.
    fn smallest(&self) -> Result<f64> {
        let n = self.diag_bc.len();
        let diag = self.diagonal();
        let mut u = vec![1.0; n];
        let mut rq = self.rayleigh(&u);
        for _ in 0..200 {
            let x = self.cg(&u, &diag)?;
            let nx = dot(&x, &x).sqrt();
            u = x.iter().map(|v| v / nx).collect();
            let next = self.rayleigh(&u);
            let done = (rq - next).abs() <= 1e-15 * next;
            rq = next;
            if done {
                break;
            }
        }
        Ok(rq)
    }

    /// Power iteration from an alternating start.
    fn largest(&self) -> f64 {
        let n = self.diag_bc.len();
        let mut u: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut ku = vec![0.0; n];
        let mut rq = 0.0;
        for _ in 0..5000 {
            self.apply(&u, &mut ku);
            let next = dot(&u, &ku) / dot(&u, &u);
            let nk = dot(&ku, &ku).sqrt();
            u.iter_mut().zip(&ku).for_each(|(a, b)| *a = b / nk);
            let done = (next - rq).abs() <= 1e-12 * next;
            rq = next;
            if done {
                break;
            }
        }
        rq
    }

    fn cg(&self, b: &[f64], diag: &[f64]) -> Result<Vec<f64>> {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let bn = dot(b, b).sqrt();
        let mut ap = vec![0.0; n];
        for it in 0..(20 * n).max(100) {
            self.apply(&p, &mut ap);
            let alpha = rz / dot(&p, &ap);
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            if dot(&r, &r).sqrt() <= 1e-14 * bn {
                return Ok(x);
            }
            for i in 0..n {
                z[i] = r[i] / diag[i];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
            if it > 0 && !alpha.is_finite() {
                break;
            }
        }
        Err(crate::error::Error::SolverFailure {
            residual: dot(&r, &r).sqrt() / bn,
            iterations: 20 * n,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
