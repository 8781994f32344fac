use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{calibrate_theta, markov_unique, BarrierSpec, CapacityOptions, ThetaLadder};
use crate::error::{invalid, Result};
use crate::grid::{refine, Field, Grid, PolicyFamily, Topology};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierShape {
    Empty,
    Point,
    Segment,
}

impl BarrierShape {
    /// Ground truth: points and empty sets have zero capacity.
    pub fn markov_unique(self) -> bool {
        !matches!(self, BarrierShape::Segment)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub env: Field,
    pub shape: BarrierShape,
}

/// Seeded environment fields on a `cells x cells` unit square: background
/// noise below 1/32 plus one structure of value 1. Even members carry a single
/// cell (point), odd members a straight run of `min_len..=cells-4` cells
/// (segment); structures keep two cells away from the boundary.
pub fn mixed_ensemble(seed: u64, size: usize, cells: usize, min_len: usize) -> Result<Vec<EnsembleMember>> {
    if cells < 8 || min_len < 2 || min_len > cells - 4 {
        return invalid("mixed ensemble needs cells >= 8 and 2 <= min_len <= cells - 4");
    }
    let grid = Grid::unit(&[cells, cells], Topology::Free)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = 2;
    let hi = cells - 3;
    Ok((0..size)
        .map(|k| {
            let mut v: Vec<f64> = (0..grid.len())
                .map(|_| rng.random_range(0.0..1.0 / 32.0))
                .collect();
            let shape = if k % 2 == 0 {
                let (i, j) = (rng.random_range(lo..=hi), rng.random_range(lo..=hi));
                v[i * cells + j] = 1.0;
                BarrierShape::Point
            } else {
                let len = rng.random_range(min_len..=hi - lo + 1);
                let start = rng.random_range(lo..=hi + 1 - len);
                let other = rng.random_range(lo..=hi);
                let vertical = rng.random_bool(0.5);
                for t in start..start + len {
                    let (i, j) = if vertical { (t, other) } else { (other, t) };
                    v[i * cells + j] = 1.0;
                }
                BarrierShape::Segment
            };
            EnsembleMember {
                env: Field::from_parts(grid.clone(), v),
                shape,
            }
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFrequency {
    pub policy: String,
    /// Unique / ensemble size.
    pub fraction: f64,
    pub unique: usize,
    pub non_unique: usize,
    pub inconclusive: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniquenessFrequency {
    pub per_policy: Vec<PolicyFrequency>,
    /// Largest pairwise difference of fractions between policies.
    pub drift: f64,
    /// Per member, per policy: `Some(unique)` or `None` when inconclusive.
    pub classifications: Vec<Vec<Option<bool>>>,
    pub thetas: Vec<Option<f64>>,
}

/// Calibrates each member's threshold, then classifies its barrier at the
/// finest stage of every policy.
pub fn uniqueness_frequency(
    ensemble: &[Field],
    target: f64,
    fam: &PolicyFamily,
    ladder: &ThetaLadder,
    opts: &CapacityOptions,
) -> Result<UniquenessFrequency> {
    if ensemble.is_empty() {
        return invalid("ensemble is empty");
    }
    let top = fam.max_level();
    let rows: Vec<(Option<f64>, Vec<Option<bool>>)> = ensemble
        .par_iter()
        .map(|env| {
            let Ok(theta) = calibrate_theta(env, target, fam, ladder) else {
                return Ok((None, vec![None; fam.len()]));
            };
            let cls = fam
                .policies()
                .iter()
                .map(|p| {
                    let spec = BarrierSpec::new(refine(env, p, top)?, theta);
                    Ok(markov_unique(&spec, opts).ok().map(|r| r.0))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((Some(theta), cls))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = ensemble.len() as f64;
    let per_policy: Vec<PolicyFrequency> = fam
        .policies()
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let col = rows.iter().map(|r| r.1[k]);
            let unique = col.clone().filter(|c| *c == Some(true)).count();
            let non_unique = col.clone().filter(|c| *c == Some(false)).count();
            PolicyFrequency {
                policy: p.id.clone(),
                fraction: unique as f64 / n,
                unique,
                non_unique,
                inconclusive: ensemble.len() - unique - non_unique,
            }
        })
        .collect();
    let mut drift = 0.0f64;
    for a in &per_policy {
        for b in &per_policy {
            drift = drift.max((a.fraction - b.fraction).abs());
        }
    }
    let (thetas, classifications) = rows.into_iter().unzip();
    Ok(UniquenessFrequency {
        per_policy,
        drift,
        classifications,
        thetas,
    })
}
