use serde::{Deserialize, Serialize};

use super::{resample, Field};
use crate::error::{invalid, Result};

pub const DEFAULT_MAX_LEVEL: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Nearest,
    Bilinear,
    Conservative,
}

/// What a policy prescribes at one level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub dims: Vec<usize>,
    /// Number of samples (time nodes, probes, ...) drawn at this stage.
    pub samples: usize,
    /// The stage tolerance is `2^-tol_exp`.
    pub tol_exp: u32,
}

impl Stage {
    pub fn tolerance(&self) -> f64 {
        (-(self.tol_exp as f64)).exp2()
    }
}

/// A deterministic schedule from level `n` (1-based) to a stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementPolicy {
    pub id: String,
    pub scheme: Scheme,
    stages: Vec<Stage>,
}

impl RefinementPolicy {
    pub fn new(id: impl Into<String>, scheme: Scheme, stages: Vec<Stage>) -> Result<Self> {
        let id = id.into();
        if stages.is_empty() {
            return invalid(format!("policy '{id}' has no stages"));
        }
        for w in stages.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let grows = a.dims.len() == b.dims.len()
                && a.dims.iter().zip(&b.dims).all(|(x, y)| y >= x)
                && b.dims.iter().product::<usize>() > a.dims.iter().product::<usize>();
            if !grows {
                return invalid(format!("policy '{id}': resolutions must strictly increase"));
            }
            if b.tol_exp <= a.tol_exp {
                return invalid(format!("policy '{id}': tolerances must strictly decrease"));
            }
        }
        if stages.iter().any(|s| s.dims.contains(&0)) {
            return invalid(format!("policy '{id}': zero-sized stage"));
        }
        Ok(RefinementPolicy { id, scheme, stages })
    }

    /// Stage `n` has `base * ratio^(n-1)` cells per axis, `samples0 * ratio^(n-1)`
    /// samples and tolerance exponent `m0 + m_step * (n-1)`.
    #[allow(clippy::too_many_arguments)]
    pub fn geometric(
        id: impl Into<String>,
        scheme: Scheme,
        base: &[usize],
        ratio: usize,
        max_level: usize,
        samples0: usize,
        m0: u32,
        m_step: u32,
    ) -> Result<Self> {
        if ratio < 2 || m_step == 0 {
            return invalid("geometric policy needs ratio >= 2 and m_step >= 1");
        }
        let stages = (0..max_level)
            .map(|k| {
                let f = ratio.pow(k as u32);
                Stage {
                    dims: base.iter().map(|&b| b * f).collect(),
                    samples: samples0 * f,
                    tol_exp: m0 + m_step * k as u32,
                }
            })
            .collect();
        RefinementPolicy::new(id, scheme, stages)
    }

    pub fn max_level(&self) -> usize {
        self.stages.len()
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn stage(&self, n: usize) -> Result<&Stage> {
        if n == 0 || n > self.stages.len() {
            return invalid(format!(
                "level {n} out of range 1..={} for policy '{}'",
                self.stages.len(),
                self.id
            ));
        }
        Ok(&self.stages[n - 1])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyFamily {
    policies: Vec<RefinementPolicy>,
}

impl PolicyFamily {
    pub fn new(policies: Vec<RefinementPolicy>) -> Result<Self> {
        let Some(first) = policies.first() else {
            return invalid("policy family is empty");
        };
        let m = first.max_level();
        if policies.iter().any(|p| p.max_level() != m) {
            return invalid("all policies in a family must share maxLevel");
        }
        Ok(PolicyFamily { policies })
    }

    pub fn policies(&self) -> &[RefinementPolicy] {
        &self.policies
    }

    pub fn max_level(&self) -> usize {
        self.policies[0].max_level()
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Resamples `f` onto the stage-`n` grid of `policy` (same physical extent).
pub fn refine(f: &Field, policy: &RefinementPolicy, n: usize) -> Result<Field> {
    let stage = policy.stage(n)?;
    let target = f.grid().with_dims(&stage.dims)?;
    resample(f, &target, policy.scheme)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Topology};

    fn pol(scheme: Scheme) -> RefinementPolicy {
        RefinementPolicy::geometric("p", scheme, &[4, 4], 2, DEFAULT_MAX_LEVEL, 8, 6, 2).unwrap()
    }

    #[test]
    fn geometric_schedule() {
        let p = pol(Scheme::Bilinear);
        assert_eq!(p.max_level(), 5);
        assert_eq!(p.stage(3).unwrap().dims, vec![16, 16]);
        assert_eq!(p.stage(3).unwrap().samples, 32);
        assert_eq!(p.stage(1).unwrap().tolerance(), 1.0 / 64.0);
        assert!(p.stage(0).is_err());
        assert!(p.stage(6).is_err());
    }

    #[test]
    fn rejects_non_increasing() {
        let s = |d: usize, m: u32| Stage {
            dims: vec![d],
            samples: 1,
            tol_exp: m,
        };
        assert!(RefinementPolicy::new("x", Scheme::Nearest, vec![s(4, 1), s(4, 2)]).is_err());
        assert!(RefinementPolicy::new("x", Scheme::Nearest, vec![s(4, 2), s(8, 2)]).is_err());
        assert!(RefinementPolicy::new("x", Scheme::Nearest, vec![s(4, 1), s(8, 2)]).is_ok());
    }

    #[test]
    fn family_shares_max_level() {
        let a = pol(Scheme::Nearest);
        let b = RefinementPolicy::geometric("q", Scheme::Nearest, &[4], 2, 3, 1, 1, 1).unwrap();
        assert!(PolicyFamily::new(vec![a.clone(), b]).is_err());
        assert!(PolicyFamily::new(vec![]).is_err());
        assert_eq!(PolicyFamily::new(vec![a]).unwrap().max_level(), 5);
    }

    #[test]
    fn checkerboard_averages_to_mean() {
        let g = Grid::unit(&[8, 8], Topology::Free).unwrap();
        let f = Field::from_index_fn(g, |c| if (c[0] + c[1]) % 2 == 0 { 1.0 } else { -1.0 });
        let p = RefinementPolicy::new(
            "avg",
            Scheme::Conservative,
            vec![Stage {
                dims: vec![4, 4],
                samples: 1,
                tol_exp: 1,
            }],
        )
        .unwrap();
        let r = refine(&f, &p, 1).unwrap();
        assert_eq!(r.grid().dims(), &[4, 4]);
        assert!(r.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilinear_exact_on_ramp() {
        let g = Grid::unit(&[8], Topology::Free).unwrap();
        let f = Field::from_fn(g, |x| 3.0 * x[0] - 1.0);
        let p = RefinementPolicy::geometric("b", Scheme::Bilinear, &[8], 2, 2, 1, 1, 1).unwrap();
        let r = refine(&f, &p, 2).unwrap();
        let exact = Field::from_fn(r.grid().clone(), |x| 3.0 * x[0] - 1.0);
        assert!(r.max_abs_diff(&exact).unwrap() <= 1e-12);
    }
}
