use serde::{Deserialize, Serialize};

use super::BarrierSpec;
use crate::error::{invalid, Error, Result};
use crate::grid::Topology;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityVerdict {
    Zero,
    Positive,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityOptions {
    /// Nodes per unit length along the longest axis, one entry per level.
    pub ladder: Vec<usize>,
    /// Chebyshev radius (in nodes) of the neighbourhood forced to `u >= 1`.
    pub dilation: usize,
    /// Minimum per-level decay factor for a zero verdict.
    pub gamma: f64,
    /// Half-width of the plateau band, relative to the midpoint of the final two energies.
    pub band: f64,
    /// Energies at or below this count as zero.
    pub floor: f64,
    /// Stop projected SOR once the largest update falls below this.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for CapacityOptions {
    fn default() -> Self {
        CapacityOptions {
            ladder: vec![8, 32, 128],
            dilation: 1,
            gamma: 1.5,
            band: 0.2,
            floor: 1e-9,
            tol: 1e-11,
            max_sweeps: 200_000,
        }
    }
}

impl CapacityOptions {
    /// `base * ratio^k` for `k < k_max`.
    pub fn geometric(base: usize, ratio: usize, k_max: usize) -> Self {
        CapacityOptions {
            ladder: (0..k_max).map(|k| base * ratio.pow(k as u32)).collect(),
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityLevel {
    pub resolution: usize,
    pub energy: f64,
    pub sweeps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub levels: Vec<CapacityLevel>,
    pub verdict: CapacityVerdict,
}

impl CapacityEstimate {
    pub fn energies(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.energy).collect()
    }
}

/// Trend test on a ladder of energies.
pub fn classify_energies(e: &[f64], opts: &CapacityOptions) -> CapacityVerdict {
    if e.iter().all(|&x| x <= opts.floor) {
        return CapacityVerdict::Zero;
    }
    if e.len() >= 2 && e.windows(2).all(|w| w[0] >= opts.gamma * w[1]) {
        return CapacityVerdict::Zero;
    }
    if e.len() >= 2 {
        let (a, b) = (e[e.len() - 2], e[e.len() - 1]);
        let mid = 0.5 * (a + b);
        if b > opts.floor && (a - mid).abs() <= opts.band * mid {
            return CapacityVerdict::Positive;
        }
    }
    CapacityVerdict::Inconclusive
}

/// Minimises the discrete Dirichlet energy with `u >= 1` near the barrier
/// and `u = 0` on free outer boundaries, at every ladder resolution.
pub fn capacity(spec: &BarrierSpec, opts: &CapacityOptions) -> Result<CapacityEstimate> {
    if opts.ladder.is_empty() {
        return invalid("capacity ladder is empty");
    }
    if opts.ladder.windows(2).any(|w| w[1] <= w[0]) || opts.ladder[0] == 0 {
        return invalid("capacity ladder must be strictly increasing and positive");
    }
    let geom = Geometry::from_spec(spec);
    let mut levels = Vec::with_capacity(opts.ladder.len());
    let mut prev: Option<NodeGrid> = None;
    for &n in &opts.ladder {
        let mut g = NodeGrid::new(&geom, n);
        g.mark_obstacle(&geom, opts.dilation);
        if let Some(p) = &prev {
            g.warm_start(p);
        }
        let sweeps = g.solve(opts)?;
        levels.push(CapacityLevel {
            resolution: n,
            energy: g.energy(),
            sweeps,
        });
        prev = Some(g);
    }
    let verdict = classify_energies(&levels.iter().map(|l| l.energy).collect::<Vec<_>>(), opts);
    Ok(CapacityEstimate { levels, verdict })
}

/// `(true, _)` iff the capacity verdict is zero; inconclusive is an error.
pub fn markov_unique(spec: &BarrierSpec, opts: &CapacityOptions) -> Result<(bool, CapacityEstimate)> {
    let est = capacity(spec, opts)?;
    match est.verdict {
        CapacityVerdict::Zero => Ok((true, est)),
        CapacityVerdict::Positive => Ok((false, est)),
        CapacityVerdict::Inconclusive => Err(Error::InconclusiveVerdict(format!(
            "capacity energies {:?}",
            est.energies()
        ))),
    }
}

/// Barrier as points and segments in physical coordinates.
struct Geometry {
    extent: Vec<f64>,
    periodic: Vec<bool>,
    points: Vec<Vec<f64>>,
    segments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Geometry {
    fn from_spec(spec: &BarrierSpec) -> Self {
        let g = spec.env.grid();
        let nd = g.ndim();
        let centre = |c: &[usize]| (0..nd).map(|a| g.center(a, c[a])).collect::<Vec<f64>>();
        let mut points = Vec::new();
        let mut segments = Vec::new();
        for i in 0..g.len() {
            if !spec.mask[i] {
                continue;
            }
            let c = g.coords(i);
            let x = centre(&c);
            // join to the forward 4-neighbour (wrapping on periodic axes)
            for a in 0..nd {
                let n = g.dims()[a];
                let mut cn = c.clone();
                let mut y = x.clone();
                if c[a] + 1 < n {
                    cn[a] += 1;
                    y[a] += g.spacing()[a];
                } else if g.topology()[a] == Topology::Periodic && n > 1 {
                    cn[a] = 0;
                    y[a] += g.spacing()[a];
                } else {
                    continue;
                }
                if spec.mask[g.index(&cn)] {
                    segments.push((x.clone(), y));
                }
            }
            points.push(x);
        }
        Geometry {
            extent: g.extent(),
            periodic: g.topology().iter().map(|&t| t == Topology::Periodic).collect(),
            points,
            segments,
        }
    }
}

/// Node-based grid: free axes carry `n + 1` nodes with the outer ones fixed
/// at zero, periodic axes carry `n` nodes.
struct NodeGrid {
    n: Vec<usize>,
    h: f64,
    periodic: Vec<bool>,
    nodes: Vec<usize>,
    strides: Vec<usize>,
    u: Vec<f64>,
    boundary: Vec<bool>,
    obstacle: Vec<bool>,
}

impl NodeGrid {
    fn new(geom: &Geometry, n_per_unit: usize) -> Self {
        let lmax = geom.extent.iter().copied().fold(0.0, f64::max);
        let h = lmax / n_per_unit as f64;
        let n: Vec<usize> = geom
            .extent
            .iter()
            .map(|&e| ((e / h).round() as usize).max(1))
            .collect();
        let nodes: Vec<usize> = n
            .iter()
            .zip(&geom.periodic)
            .map(|(&k, &p)| if p { k } else { k + 1 })
            .collect();
        let nd = n.len();
        let mut strides = vec![1; nd];
        for a in (0..nd.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * nodes[a + 1];
        }
        let total: usize = nodes.iter().product();
        let mut g = NodeGrid {
            n,
            h,
            periodic: geom.periodic.clone(),
            nodes,
            strides,
            u: vec![0.0; total],
            boundary: vec![false; total],
            obstacle: vec![false; total],
        };
        for i in 0..total {
            let c = g.coords(i);
            g.boundary[i] = (0..nd).any(|a| !g.periodic[a] && (c[a] == 0 || c[a] == g.n[a]));
        }
        g
    }

    fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut c = vec![0; self.nodes.len()];
        for a in (0..self.nodes.len()).rev() {
            c[a] = i % self.nodes[a];
            i /= self.nodes[a];
        }
        c
    }

    /// Nearest node to a physical point, `None` if it falls off a free axis.
    fn nearest(&self, x: &[f64]) -> Option<Vec<i64>> {
        Some(
            x.iter()
                .map(|&xa| (xa / self.h).round() as i64)
                .collect::<Vec<_>>(),
        )
    }

    fn flat(&self, c: &[i64]) -> Option<usize> {
        let mut i = 0;
        for a in 0..c.len() {
            let m = self.nodes[a] as i64;
            let ca = if self.periodic[a] {
                c[a].rem_euclid(m)
            } else if (0..m).contains(&c[a]) {
                c[a]
            } else {
                return None;
            };
            i += ca as usize * self.strides[a];
        }
        Some(i)
    }

    fn mark_obstacle(&mut self, geom: &Geometry, radius: usize) {
        let mut hits: Vec<Vec<i64>> = geom.points.iter().filter_map(|p| self.nearest(p)).collect();
        for (a, b) in &geom.segments {
            let len = a
                .iter()
                .zip(b)
                .map(|(x, y)| (y - x).powi(2))
                .sum::<f64>()
                .sqrt();
            let steps = ((2.0 * len / self.h).ceil() as usize).max(1);
            for s in 0..=steps {
                let t = s as f64 / steps as f64;
                let x: Vec<f64> = a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect();
                if let Some(c) = self.nearest(&x) {
                    hits.push(c);
                }
            }
        }
        let nd = self.nodes.len();
        let r = radius as i64;
        let offsets: Vec<Vec<i64>> = (0..(2 * r + 1).pow(nd as u32))
            .map(|mut k| {
                (0..nd)
                    .map(|_| {
                        let o = k % (2 * r + 1) - r;
                        k /= 2 * r + 1;
                        o
                    })
                    .collect()
            })
            .collect();
        for c in hits {
            for o in &offsets {
                let cc: Vec<i64> = c.iter().zip(o).map(|(x, y)| x + y).collect();
                if let Some(i) = self.flat(&cc) {
                    if !self.boundary[i] {
                        self.obstacle[i] = true;
                    }
                }
            }
        }
        for i in 0..self.u.len() {
            if self.obstacle[i] {
                self.u[i] = 1.0;
            }
        }
    }

    /// Multilinear prolongation of a coarser solution.
    fn warm_start(&mut self, coarse: &NodeGrid) {
        let nd = self.nodes.len();
        let ratio = coarse.h / self.h;
        for i in 0..self.u.len() {
            if self.boundary[i] || self.obstacle[i] {
                continue;
            }
            let c = self.coords(i);
            let mut base = vec![0i64; nd];
            let mut w = vec![0.0; nd];
            for a in 0..nd {
                let s = c[a] as f64 / ratio;
                base[a] = s.floor() as i64;
                w[a] = s - base[a] as f64;
            }
            let mut v = 0.0;
            for corner in 0..(1usize << nd) {
                let mut wt = 1.0;
                let mut cc = base.clone();
                for a in 0..nd {
                    if corner >> a & 1 == 1 {
                        cc[a] += 1;
                        wt *= w[a];
                    } else {
                        wt *= 1.0 - w[a];
                    }
                }
                if wt == 0.0 {
                    continue;
                }
                if let Some(j) = coarse.flat(&cc) {
                    v += wt * coarse.u[j];
                }
            }
            self.u[i] = v.clamp(0.0, 1.0);
        }
    }

    fn neighbours(&self, i: usize, out: &mut Vec<usize>) {
        out.clear();
        let c = self.coords(i);
        for a in 0..self.nodes.len() {
            let m = self.nodes[a];
            let s = self.strides[a];
            if c[a] + 1 < m {
                out.push(i + s);
            } else if self.periodic[a] && m > 1 {
                out.push(i - (m - 1) * s);
            }
            if c[a] > 0 {
                out.push(i - s);
            } else if self.periodic[a] && m > 1 {
                out.push(i + (m - 1) * s);
            }
        }
    }

    /// Projected SOR; returns the number of sweeps.
    fn solve(&mut self, opts: &CapacityOptions) -> Result<usize> {
        if !self.obstacle.iter().any(|&o| o) {
            self.u.iter_mut().for_each(|v| *v = 0.0);
            return Ok(0);
        }
        let free: Vec<usize> = (0..self.u.len()).filter(|&i| !self.boundary[i]).collect();
        let nbrs: Vec<Vec<usize>> = free
            .iter()
            .map(|&i| {
                let mut v = Vec::new();
                self.neighbours(i, &mut v);
                v
            })
            .collect();
        let nmax = self.n.iter().copied().max().unwrap_or(1) as f64;
        let omega = 2.0 / (1.0 + (std::f64::consts::PI / nmax).sin());
        let mut last = f64::INFINITY;
        for sweep in 1..=opts.max_sweeps {
            let mut delta = 0.0f64;
            for (k, &i) in free.iter().enumerate() {
                let nb = &nbrs[k];
                let avg = nb.iter().map(|&j| self.u[j]).sum::<f64>() / nb.len() as f64;
                let mut v = self.u[i] + omega * (avg - self.u[i]);
                if self.obstacle[i] {
                    v = v.max(1.0);
                }
                delta = delta.max((v - self.u[i]).abs());
                self.u[i] = v;
            }
            last = delta;
            if delta < opts.tol {
                return Ok(sweep);
            }
        }
        Err(Error::SolverFailure {
            residual: last,
            iterations: opts.max_sweeps,
        })
    }

    /// `h^(d-2) * sum over edges of (u_i - u_j)^2`
    fn energy(&self) -> f64 {
        let nd = self.nodes.len();
        let mut e = 0.0;
        for i in 0..self.u.len() {
            let c = self.coords(i);
            for a in 0..nd {
                let m = self.nodes[a];
                let j = if c[a] + 1 < m {
                    i + self.strides[a]
                } else if self.periodic[a] && m > 1 {
                    i - (m - 1) * self.strides[a]
                } else {
                    continue;
                };
                e += (self.u[i] - self.u[j]).powi(2);
            }
        }
        e * self.h.powi(nd as i32 - 2)
    }
}
