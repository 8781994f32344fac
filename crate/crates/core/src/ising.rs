//! Zero-temperature synchronous Ising dynamics.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Grid, Topology};

/// Spins on a box whose index 0 sits at global lattice coordinate `origin`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig {
    pub dims: Vec<usize>,
    pub topology: Vec<Topology>,
    pub origin: Vec<i64>,
    /// Number of updates applied so far; seeds the random tie-break.
    pub tick: u64,
    pub spins: Vec<i8>,
}

impl SpinConfig {
    pub fn new(dims: &[usize], topology: Topology, spins: Vec<i8>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.len() < 2 || dims.len() > 3 || dims.contains(&0) {
            return invalid("spin boxes are 2D or 3D with positive sides");
        }
        if spins.len() != n || spins.iter().any(|&s| s != 1 && s != -1) {
            return invalid("spins must be +-1, one per site");
        }
        Ok(SpinConfig {
            dims: dims.to_vec(),
            topology: vec![topology; dims.len()],
            origin: vec![0; dims.len()],
            tick: 0,
            spins,
        })
    }

    /// Box centred on the global origin with spins from `gen(global coords)`.
    pub fn centred(dims: &[usize], topology: Topology, gen: impl Fn(&[i64]) -> i8) -> Result<Self> {
        let origin: Vec<i64> = dims.iter().map(|&d| -((d / 2) as i64)).collect();
        let n: usize = dims.iter().product();
        let mut c = SpinConfig::new(dims, topology, vec![1; n])?;
        c.origin = origin;
        for i in 0..n {
            let g = c.global(i);
            c.spins[i] = gen(&g);
        }
        if c.spins.iter().any(|&s| s != 1 && s != -1) {
            return invalid("generator produced a value other than +-1");
        }
        Ok(c)
    }

    pub fn all_up(dims: &[usize], topology: Topology) -> Result<Self> {
        SpinConfig::new(dims, topology, vec![1; dims.iter().product()])
    }

    pub fn checkerboard(dims: &[usize], topology: Topology) -> Result<Self> {
        let mut c = SpinConfig::all_up(dims, topology)?;
        for i in 0..c.len() {
            c.spins[i] = parity(&c.global(i));
        }
        Ok(c)
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.dims.clone(), vec![1.0; self.dims.len()], self.topology.clone())
            .expect("validated box")
    }

    pub fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut c = vec![0; self.dims.len()];
        for a in (0..self.dims.len()).rev() {
            c[a] = i % self.dims[a];
            i /= self.dims[a];
        }
        c
    }

    pub fn index(&self, c: &[usize]) -> usize {
        c.iter().zip(&self.dims).fold(0, |acc, (&x, &d)| acc * d + x)
    }

    pub fn global(&self, i: usize) -> Vec<i64> {
        self.coords(i)
            .iter()
            .zip(&self.origin)
            .map(|(&c, &o)| c as i64 + o)
            .collect()
    }

    /// Site index of a global coordinate, if inside the box.
    pub fn site_of(&self, g: &[i64]) -> Option<usize> {
        let mut c = Vec::with_capacity(g.len());
        for a in 0..g.len() {
            let x = g[a] - self.origin[a];
            if x < 0 || x >= self.dims[a] as i64 {
                return None;
            }
            c.push(x as usize);
        }
        Some(self.index(&c))
    }

    /// Global spin flip.
    pub fn flipped(&self) -> SpinConfig {
        let mut c = self.clone();
        c.spins.iter_mut().for_each(|s| *s = -*s);
        c
    }

    fn key(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.spins.hash(&mut h);
        h.finish()
    }
}

fn parity(g: &[i64]) -> i8 {
    if g.iter().sum::<i64>().rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Finite-range ferromagnetic couplings `J_ij = weight(offset)` plus field `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub offsets: Vec<(Vec<i64>, f64)>,
    pub field: f64,
}

impl CouplingSpec {
    pub fn new(offsets: Vec<(Vec<i64>, f64)>, field: f64) -> Result<Self> {
        if offsets.iter().any(|(o, j)| !(*j >= 0.0 && j.is_finite()) || o.iter().all(|&x| x == 0)) {
            return invalid("couplings must be >= 0 on non-zero offsets");
        }
        if !field.is_finite() {
            return invalid("field must be finite");
        }
        Ok(CouplingSpec { offsets, field })
    }

    /// Nearest-neighbour coupling `j` in `dim` dimensions.
    pub fn nearest(dim: usize, j: f64, field: f64) -> Result<Self> {
        let mut offsets = Vec::new();
        for a in 0..dim {
            for s in [-1, 1] {
                let mut o = vec![0; dim];
                o[a] = s;
                offsets.push((o, j));
            }
        }
        CouplingSpec::new(offsets, field)
    }

    /// Largest per-axis offset: the propagation speed in sites per step.
    pub fn range(&self) -> usize {
        self.offsets
            .iter()
            .flat_map(|(o, _)| o.iter().map(|x| x.unsigned_abs() as usize))
            .max()
            .unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TieBreakRule {
    Plus,
    Minus,
    Keep,
    Flip,
    /// `+1` on even global coordinate sum, `-1` on odd.
    Parity,
    /// Coin from ChaCha8 keyed by the seed, streamed by global site, positioned by tick.
    SeededRandom { seed: u64 },
}

impl TieBreakRule {
    fn resolve(&self, current: i8, global: &[i64], tick: u64, key: &Option<[u8; 32]>) -> i8 {
        match self {
            TieBreakRule::Plus => 1,
            TieBreakRule::Minus => -1,
            TieBreakRule::Keep => current,
            TieBreakRule::Flip => -current,
            TieBreakRule::Parity => parity(global),
            TieBreakRule::SeededRandom { .. } => {
                let mut rng = ChaCha8Rng::from_seed(key.expect("seeded rule has a key"));
                rng.set_stream(site_stream(global));
                rng.set_word_pos(tick as u128 * 16);
                if rng.next_u32() & 1 == 0 {
                    1
                } else {
                    -1
                }
            }
        }
    }

    fn key(&self) -> Option<[u8; 32]> {
        match self {
            TieBreakRule::SeededRandom { seed } => Some(ChaCha8Rng::seed_from_u64(*seed).get_seed()),
            _ => None,
        }
    }
}

/// Packs up to three global coordinates (each within +-2^20) into a stream id.
fn site_stream(g: &[i64]) -> u64 {
    g.iter()
        .fold(0u64, |acc, &x| (acc << 21) | ((x + (1 << 20)) as u64 & 0x1f_ffff))
}

/// `sum_j J_ij s_j + h`; neighbours outside a free box contribute nothing.
pub fn local_field(s: &SpinConfig, c: &CouplingSpec, site: &[usize]) -> Result<f64> {
    if site.len() != s.dims.len() || site.iter().zip(&s.dims).any(|(&x, &d)| x >= d) {
        return invalid(format!("site {site:?} outside box {:?}", s.dims));
    }
    Ok(field_at(s, c, site))
}

fn field_at(s: &SpinConfig, c: &CouplingSpec, site: &[usize]) -> f64 {
    let mut l = c.field;
    let mut nb = [0usize; 3];
    'off: for (o, j) in &c.offsets {
        for a in 0..site.len() {
            let n = s.dims[a] as i64;
            let x = site[a] as i64 + o[a];
            nb[a] = if (0..n).contains(&x) {
                x as usize
            } else if s.topology[a] == Topology::Periodic {
                x.rem_euclid(n) as usize
            } else {
                continue 'off;
            };
        }
        l += j * s.spins[s.index(&nb[..site.len()])] as f64;
    }
    l
}

/// One synchronous update; ties go to `rule`.
pub fn step(s: &SpinConfig, c: &CouplingSpec, rule: &TieBreakRule) -> SpinConfig {
    let key = rule.key();
    let update = |i: usize| {
        let site = s.coords(i);
        let l = field_at(s, c, &site);
        if l > 0.0 {
            1
        } else if l < 0.0 {
            -1
        } else {
            rule.resolve(s.spins[i], &s.global(i), s.tick, &key)
        }
    };
    let spins: Vec<i8> = if s.len() >= 4096 {
        (0..s.len()).into_par_iter().map(update).collect()
    } else {
        (0..s.len()).map(update).collect()
    };
    SpinConfig {
        spins,
        tick: s.tick + 1,
        ..s.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CycleKind {
    FixedPoint,
    TwoCycle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cycle {
    pub kind: CycleKind,
    /// First step from which the orbit stays on the cycle until the end of the run.
    pub from_step: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evolution {
    pub steps: usize,
    pub final_config: SpinConfig,
    pub cycle: Option<Cycle>,
    /// Magnetisation per site after each step, starting with the initial state.
    pub magnetisation: Vec<f64>,
}

/// Runs `steps` updates and reports a fixed point or 2-cycle the orbit settles on.
pub fn evolve(s: &SpinConfig, c: &CouplingSpec, rule: &TieBreakRule, steps: usize) -> Evolution {
    let mag = |x: &SpinConfig| x.spins.iter().map(|&v| v as f64).sum::<f64>() / x.len() as f64;
    let mut hist = vec![s.clone()];
    let mut keys = vec![s.key()];
    let mut magnetisation = vec![mag(s)];
    for _ in 0..steps {
        let next = step(hist.last().unwrap(), c, rule);
        keys.push(next.key());
        magnetisation.push(mag(&next));
        hist.push(next);
    }
    let same = |a: usize, b: usize| keys[a] == keys[b] && hist[a].spins == hist[b].spins;
    // smallest t such that the cycle relation holds for every later step
    let mut fixed_from = None;
    for t in (0..steps).rev() {
        if same(t, t + 1) {
            fixed_from = Some(t);
        } else {
            break;
        }
    }
    let mut two_from = None;
    if steps >= 2 {
        for t in (0..steps - 1).rev() {
            if same(t, t + 2) {
                two_from = Some(t);
            } else {
                break;
            }
        }
    }
    let cycle = match (fixed_from, two_from) {
        (Some(t), _) => Some(Cycle {
            kind: CycleKind::FixedPoint,
            from_step: t,
        }),
        (None, Some(t)) => Some(Cycle {
            kind: CycleKind::TwoCycle,
            from_step: t,
        }),
        _ => None,
    };
    Evolution {
        steps,
        final_config: hist.pop().unwrap(),
        cycle,
        magnetisation,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxShape {
    pub dims: Vec<usize>,
    pub topology: Topology,
}

/// Initial conditions as a function of global coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpinGenerator {
    AllUp,
    AllDown,
    Checkerboard,
    /// Each site up with probability `p_up`, from a counter-based hash of (seed, site).
    Random { seed: u64, p_up: f64 },
}

impl SpinGenerator {
    pub fn spin(&self, g: &[i64]) -> i8 {
        match *self {
            SpinGenerator::AllUp => 1,
            SpinGenerator::AllDown => -1,
            SpinGenerator::Checkerboard => parity(g),
            SpinGenerator::Random { seed, p_up } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(site_stream(g));
                let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
                if u < p_up {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeAgreement {
    /// Fraction of core sites on which some pair of shapes disagrees, per step (index 0 = initial).
    pub density: Vec<f64>,
    /// Steps for which boundary influence cannot reach the core.
    pub window: usize,
    pub core_sites: usize,
    /// Per shape, the core spins after the final step (global-coordinate order).
    pub final_cores: Vec<Vec<i8>>,
}

/// Evolves the same initial condition on every shape (all centred on the global
/// origin) and compares the shared core `core_fraction` of the smallest box.
pub fn shape_agreement(
    gen: &SpinGenerator,
    shapes: &[BoxShape],
    c: &CouplingSpec,
    rule: &TieBreakRule,
    steps: usize,
    core_fraction: f64,
) -> Result<ShapeAgreement> {
    let Some(first) = shapes.first() else {
        return invalid("no shapes given");
    };
    let nd = first.dims.len();
    if shapes.iter().any(|s| s.dims.len() != nd) {
        return invalid("shapes differ in dimension");
    }
    if !(core_fraction > 0.0 && core_fraction <= 1.0) {
        return invalid("core fraction must lie in (0, 1]");
    }
    // core: central block of the smallest box along each axis
    let mut core_lo = vec![0i64; nd];
    let mut core_hi = vec![0i64; nd];
    for a in 0..nd {
        let m = shapes.iter().map(|s| s.dims[a]).min().unwrap();
        let w = ((m as f64 * core_fraction).floor() as i64).min(m as i64);
        if w < 1 {
            return invalid("empty common core");
        }
        core_lo[a] = -(w / 2);
        core_hi[a] = core_lo[a] + w - 1;
    }
    let range = c.range().max(1) as i64;
    let mut window = i64::MAX;
    for s in shapes {
        for a in 0..nd {
            let lo = -((s.dims[a] / 2) as i64);
            let hi = lo + s.dims[a] as i64 - 1;
            if core_lo[a] < lo || core_hi[a] > hi {
                return invalid("core does not fit inside every shape");
            }
            let d = (core_lo[a] - lo).min(hi - core_hi[a]);
            window = window.min(d / range);
        }
    }
    let core: Vec<Vec<i64>> = {
        let mut v = vec![core_lo.clone()];
        for a in 0..nd {
            v = v
                .into_iter()
                .flat_map(|p| {
                    (core_lo[a]..=core_hi[a]).map(move |x| {
                        let mut q = p.clone();
                        q[a] = x;
                        q
                    })
                })
                .collect();
        }
        v
    };
    let runs: Vec<Vec<Vec<i8>>> = shapes
        .par_iter()
        .map(|sh| {
            let mut s = SpinConfig::centred(&sh.dims, sh.topology, |g| gen.spin(g))?;
            let idx: Vec<usize> = core.iter().map(|g| s.site_of(g).unwrap()).collect();
            let mut out = Vec::with_capacity(steps + 1);
            out.push(idx.iter().map(|&i| s.spins[i]).collect());
            for _ in 0..steps {
                s = step(&s, c, rule);
                out.push(idx.iter().map(|&i| s.spins[i]).collect());
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let density = (0..=steps)
        .map(|t| {
            let bad = (0..core.len())
                .filter(|&k| runs.iter().any(|r| r[t][k] != runs[0][t][k]))
                .count();
            bad as f64 / core.len() as f64
        })
        .collect();
    Ok(ShapeAgreement {
        density,
        window: window as usize,
        core_sites: core.len(),
        final_cores: runs.into_iter().map(|mut r| r.pop().unwrap()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn local_field_examples() {
        let c = CouplingSpec::nearest(2, 1.0, 0.0).unwrap();
        let up = SpinConfig::all_up(&[4, 4], Topology::Free).unwrap();
        assert_eq!(local_field(&up, &c, &[1, 2]).unwrap(), 4.0);
        let ch = CouplingSpec::nearest(2, 1.0, 0.5).unwrap();
        assert_eq!(local_field(&up, &ch, &[0, 0]).unwrap(), 2.5);
        let cb = SpinConfig::checkerboard(&[4, 4], Topology::Free).unwrap();
        assert_eq!(local_field(&cb, &c, &[1, 1]).unwrap(), -4.0);
        assert!(local_field(&up, &c, &[4, 0]).is_err());
    }

    #[test]
    fn checkerboard_flip_is_two_cycle() {
        let c = CouplingSpec::nearest(2, 1.0, 0.0).unwrap();
        let cb = SpinConfig::checkerboard(&[6, 6], Topology::Periodic).unwrap();
        let next = step(&cb, &c, &TieBreakRule::Flip);
        assert_eq!(next.spins, cb.flipped().spins);
        let ev = evolve(&cb, &c, &TieBreakRule::Flip, 6);
        assert_eq!(
            ev.cycle,
            Some(Cycle {
                kind: CycleKind::TwoCycle,
                from_step: 0
            })
        );
    }

    #[test]
    fn all_up_fixed_at_zero() {
        let c = CouplingSpec::nearest(2, 1.0, 0.0).unwrap();
        let up = SpinConfig::all_up(&[5, 5], Topology::Free).unwrap();
        for rule in [
            TieBreakRule::Plus,
            TieBreakRule::Minus,
            TieBreakRule::Keep,
            TieBreakRule::Flip,
            TieBreakRule::Parity,
            TieBreakRule::SeededRandom { seed: 3 },
        ] {
            let ev = evolve(&up, &c, &rule, 10);
            assert_eq!(ev.cycle.unwrap().kind, CycleKind::FixedPoint);
            assert_eq!(ev.cycle.unwrap().from_step, 0);
        }
    }

    #[test]
    fn site_stream_is_injective_on_small_boxes() {
        let mut seen = std::collections::HashSet::new();
        for x in -5..5 {
            for y in -5..5 {
                assert!(seen.insert(site_stream(&[x, y])));
            }
        }
    }
}
