use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{refine, Field, PolicyFamily};

/// Ascending rational threshold candidates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaLadder {
    pub values: Vec<f64>,
    /// First level (1-based) probed for each policy.
    pub settle_level: usize,
}

impl ThetaLadder {
    /// `k / denom` for `k` in `lo..=hi`.
    pub fn rational(lo: i64, hi: i64, denom: u32, settle_level: usize) -> Result<Self> {
        if denom == 0 || hi < lo {
            return invalid("empty threshold ladder");
        }
        Ok(ThetaLadder {
            values: (lo..=hi).map(|k| k as f64 / denom as f64).collect(),
            settle_level,
        })
    }
}

/// Fraction of points with `f >= theta`.
pub fn coverage(f: &Field, theta: f64) -> f64 {
    f.values().iter().filter(|&&v| v >= theta).count() as f64 / f.len() as f64
}

/// Least ladder threshold whose coverage is within `2^-m` of `target` for every
/// policy and every probed stage, `m` being that stage's tolerance exponent.
pub fn calibrate_theta(
    env: &Field,
    target: f64,
    fam: &PolicyFamily,
    ladder: &ThetaLadder,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return invalid("target coverage must lie in (0, 1)");
    }
    if ladder.values.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("threshold ladder must be ascending");
    }
    if env.min() == env.max() {
        return Err(Error::CalibrationFailure(
            "environment field is constant; coverage jumps from 1 to 0".into(),
        ));
    }
    let settle = ladder.settle_level.max(1);
    if settle > fam.max_level() {
        return invalid("settle level beyond maxLevel");
    }
    let mut stages = Vec::new();
    for p in fam.policies() {
        for n in settle..=fam.max_level() {
            stages.push((refine(env, p, n)?, p.stage(n)?.tolerance()));
        }
    }
    ladder
        .values
        .iter()
        .copied()
        .find(|&th| {
            stages
                .iter()
                .all(|(f, tol)| (coverage(f, th) - target).abs() <= *tol)
        })
        .ok_or_else(|| {
            Error::CalibrationFailure(format!("no threshold on the ladder reaches coverage {target}"))
        })
}
