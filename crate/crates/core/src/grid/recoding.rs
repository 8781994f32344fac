use serde::{Deserialize, Serialize};

use super::{Field, Grid};
use crate::error::{invalid, Result};

/// The catalog of exactly invertible recodings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RecodingKind {
    Identity,
    /// Output axis `k` is input axis `perm[k]`.
    Permutation { perm: Vec<usize> },
    Reflection { axis: usize },
    /// Counter-clockwise quarter turns in the `(axes[0], axes[1])` plane.
    Rotation { quarter_turns: u8, axes: [usize; 2] },
    /// Replicates every cell into a `factor`-wide block on each axis.
    Upsample { factor: usize },
    /// Keeps the lower-corner sample of each block; the inverse of `Upsample`.
    Restrict { factor: usize },
    /// `a * x + b`; `inverted` stores the exact inverse form `(x - b) / a`.
    ValueRescale {
        scale: f64,
        offset: f64,
        #[serde(default)]
        inverted: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recoding {
    pub name: String,
    #[serde(flatten)]
    pub kind: RecodingKind,
}

impl Recoding {
    pub fn new(name: impl Into<String>, kind: RecodingKind) -> Result<Self> {
        match &kind {
            RecodingKind::Permutation { perm } => {
                let mut seen = vec![false; perm.len()];
                for &p in perm {
                    if p >= perm.len() || seen[p] {
                        return invalid(format!("{perm:?} is not a permutation"));
                    }
                    seen[p] = true;
                }
            }
            RecodingKind::Rotation { axes, .. } if axes[0] == axes[1] => {
                return invalid("rotation needs two distinct axes");
            }
            RecodingKind::Upsample { factor } | RecodingKind::Restrict { factor } if *factor == 0 => {
                return invalid("resample factor must be positive");
            }
            RecodingKind::ValueRescale { scale, offset, .. }
                if !(scale.is_finite() && offset.is_finite() && *scale != 0.0) =>
            {
                return invalid("value rescale needs a finite non-zero scale");
            }
            _ => {}
        }
        Ok(Recoding {
            name: name.into(),
            kind,
        })
    }

    pub fn identity() -> Self {
        Recoding {
            name: "identity".into(),
            kind: RecodingKind::Identity,
        }
    }

    pub fn reflection(axis: usize) -> Self {
        Recoding {
            name: format!("reflect-{axis}"),
            kind: RecodingKind::Reflection { axis },
        }
    }

    pub fn rotation(quarter_turns: u8) -> Self {
        Recoding {
            name: format!("rot{}", 90 * (quarter_turns % 4) as u32),
            kind: RecodingKind::Rotation {
                quarter_turns: quarter_turns % 4,
                axes: [0, 1],
            },
        }
    }

    pub fn transpose() -> Self {
        Recoding {
            name: "transpose".into(),
            kind: RecodingKind::Permutation { perm: vec![1, 0] },
        }
    }

    pub fn upsample(factor: usize) -> Self {
        Recoding {
            name: format!("upsample-{factor}"),
            kind: RecodingKind::Upsample { factor },
        }
    }

    pub fn rescale(scale: f64, offset: f64) -> Result<Self> {
        Recoding::new(
            format!("rescale-{scale}-{offset}"),
            RecodingKind::ValueRescale {
                scale,
                offset,
                inverted: false,
            },
        )
    }

    /// Looks up a recoding by its catalog name, e.g. `rot90`, `reflect-1`,
    /// `transpose`, `upsample-2`, `identity`.
    pub fn by_name(name: &str) -> Result<Self> {
        let r = match name {
            "identity" => Recoding::identity(),
            "transpose" => Recoding::transpose(),
            "rot90" => Recoding::rotation(1),
            "rot180" => Recoding::rotation(2),
            "rot270" => Recoding::rotation(3),
            _ => {
                if let Some(a) = name.strip_prefix("reflect-") {
                    Recoding::reflection(a.parse().map_err(|_| bad_name(name))?)
                } else if let Some(f) = name.strip_prefix("upsample-") {
                    Recoding::upsample(f.parse().map_err(|_| bad_name(name))?)
                } else {
                    return invalid(format!("unknown recoding '{name}'"));
                }
            }
        };
        Ok(r)
    }

    pub fn inverse(&self) -> Recoding {
        use RecodingKind::*;
        let kind = match &self.kind {
            Identity => Identity,
            Permutation { perm } => {
                let mut inv = vec![0; perm.len()];
                for (k, &p) in perm.iter().enumerate() {
                    inv[p] = k;
                }
                Permutation { perm: inv }
            }
            Reflection { axis } => Reflection { axis: *axis },
            Rotation {
                quarter_turns,
                axes,
            } => Rotation {
                quarter_turns: (4 - quarter_turns % 4) % 4,
                axes: *axes,
            },
            Upsample { factor } => Restrict { factor: *factor },
            Restrict { factor } => Upsample { factor: *factor },
            ValueRescale {
                scale,
                offset,
                inverted,
            } => ValueRescale {
                scale: *scale,
                offset: *offset,
                inverted: !inverted,
            },
        };
        Recoding {
            name: format!("{}^-1", self.name),
            kind,
        }
    }

    /// True for recodings that move values between grid points without changing them.
    pub fn is_geometric(&self) -> bool {
        matches!(
            self.kind,
            RecodingKind::Identity
                | RecodingKind::Permutation { .. }
                | RecodingKind::Reflection { .. }
                | RecodingKind::Rotation { .. }
        )
    }

    pub fn forward(&self, f: &Field) -> Result<Field> {
        use RecodingKind::*;
        match &self.kind {
            Identity => Ok(f.clone()),
            ValueRescale {
                scale,
                offset,
                inverted,
            } => Ok(if *inverted {
                f.map(|y| (y - offset) / scale)
            } else {
                f.map(|x| scale * x + offset)
            }),
            _ => {
                let (out, src) = self.index_map(f.grid())?;
                let values = (0..out.len())
                    .map(|i| f.values()[src(&out.coords(i))])
                    .collect();
                Ok(Field::from_parts(out, values))
            }
        }
    }

    /// The induced map on solutions living on a refinement-stage grid.
    ///
    /// Resampling recodings change only the data representation; the stage
    /// grid is fixed by the refinement policy, so their state map is the identity.
    pub fn state_map(&self, u: &Field) -> Result<Field> {
        match self.kind {
            RecodingKind::Upsample { .. } | RecodingKind::Restrict { .. } => Ok(u.clone()),
            _ => self.forward(u),
        }
    }

    /// Output grid plus a map from output coordinates to the flat source index.
    #[allow(clippy::type_complexity)]
    fn index_map<'g>(&self, g: &'g Grid) -> Result<(Grid, Box<dyn Fn(&[usize]) -> usize + 'g>)> {
        use RecodingKind::*;
        let nd = g.ndim();
        let check_axis = |a: usize| {
            if a >= nd {
                invalid(format!("axis {a} out of range for a {nd}-axis grid"))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            Permutation { perm } => {
                if perm.len() != nd {
                    return invalid("permutation length differs from grid rank");
                }
                let dims: Vec<usize> = perm.iter().map(|&p| g.dims()[p]).collect();
                let spacing: Vec<f64> = perm.iter().map(|&p| g.spacing()[p]).collect();
                let topo = perm.iter().map(|&p| g.topology()[p]).collect();
                let out = Grid::new(dims, spacing, topo)?;
                let perm = perm.clone();
                Ok((
                    out,
                    Box::new(move |c: &[usize]| {
                        let mut s = [0usize; 3];
                        for (k, &p) in perm.iter().enumerate() {
                            s[p] = c[k];
                        }
                        g.index(&s[..perm.len()])
                    }),
                ))
            }
            Reflection { axis } => {
                check_axis(*axis)?;
                let axis = *axis;
                let n = g.dims()[axis];
                Ok((
                    g.clone(),
                    Box::new(move |c: &[usize]| {
                        let mut s = c.to_vec();
                        s[axis] = n - 1 - c[axis];
                        g.index(&s)
                    }),
                ))
            }
            Rotation {
                quarter_turns,
                axes,
            } => {
                check_axis(axes[0])?;
                check_axis(axes[1])?;
                let [a, b] = *axes;
                if g.dims()[a] != g.dims()[b]
                    || g.spacing()[a] != g.spacing()[b]
                    || g.topology()[a] != g.topology()[b]
                {
                    return invalid("rotation needs a square plane");
                }
                let n = g.dims()[a];
                let k = quarter_turns % 4;
                Ok((
                    g.clone(),
                    Box::new(move |c: &[usize]| {
                        let mut s = c.to_vec();
                        for _ in 0..k {
                            let (x, y) = (s[a], s[b]);
                            s[a] = n - 1 - y;
                            s[b] = x;
                        }
                        g.index(&s)
                    }),
                ))
            }
            Upsample { factor } => {
                let f = *factor;
                let dims: Vec<usize> = g.dims().iter().map(|&d| d * f).collect();
                let out = g.with_dims(&dims)?;
                Ok((
                    out,
                    Box::new(move |c: &[usize]| {
                        let s: Vec<usize> = c.iter().map(|&x| x / f).collect();
                        g.index(&s)
                    }),
                ))
            }
            Restrict { factor } => {
                let f = *factor;
                if g.dims().iter().any(|d| d % f != 0) {
                    return invalid(format!("dims {:?} not divisible by {f}", g.dims()));
                }
                let dims: Vec<usize> = g.dims().iter().map(|&d| d / f).collect();
                let out = g.with_dims(&dims)?;
                Ok((
                    out,
                    Box::new(move |c: &[usize]| {
                        let s: Vec<usize> = c.iter().map(|&x| x * f).collect();
                        g.index(&s)
                    }),
                ))
            }
            Identity | ValueRescale { .. } => unreachable!(),
        }
    }
}

fn bad_name(name: &str) -> crate::error::Error {
    crate::error::Error::InvalidArgument(format!("malformed recoding name '{name}'"))
}

pub fn apply_recoding(r: &Recoding, f: &Field) -> Result<Field> {
    r.forward(f)
}
