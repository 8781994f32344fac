use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{resample, restrict_to, Field, Scheme};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub ratio: f64,
    pub slack: f64,
    pub floor: f64,
    pub band: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { ratio: 0.5, slack: 0.1, floor: 1e-9, band: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Decaying,
    Plateau,
    Inconclusive,
}

/// Decaying: every value under the floor, or nonincreasing within `slack` with
/// `last <= ratio * first`. Plateau: the final two agree within `band`, sit above
/// the floor, and the last is still above `ratio * first`.
pub fn verdict(xs: &[f64], t: &Thresholds) -> Result<Verdict> {
    if xs.len() < 2 {
        return invalid("a verdict needs at least two levels");
    }
    if xs.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return invalid("indices must be finite and non-negative");
    }
    let (first, last) = (xs[0], xs[xs.len() - 1]);
    if xs.iter().all(|&x| x <= t.floor) {
        return Ok(Verdict::Decaying);
    }
    let monotone = xs.windows(2).all(|w| w[1] <= w[0] * (1.0 + t.slack) + t.floor);
    if monotone && last <= t.ratio * first {
        return Ok(Verdict::Decaying);
    }
    let prev = xs[xs.len() - 2];
    if last > t.floor && (last - prev).abs() <= t.band * prev.max(last) && last > t.ratio * first {
        return Ok(Verdict::Plateau);
    }
    Ok(Verdict::Inconclusive)
}

/// `rms(a - b) / (1 + rms(a))`, after bringing the finer field to the coarser grid.
pub fn normalized_distance(a: &Field, b: &Field) -> Result<f64> {
    if a.grid().ndim() != b.grid().ndim() {
        return invalid("fields differ in dimension");
    }
    let (coarse, fine, swapped) = if a.len() <= b.len() { (a, b, false) } else { (b, a, true) };
    let divides = coarse.grid().dims().iter().zip(fine.grid().dims()).all(|(&c, &f)| f % c == 0 && f >= c);
    let fine = if fine.grid().dims() == coarse.grid().dims() {
        fine.clone()
    } else if divides {
        restrict_to(fine, coarse.grid().dims())?
    } else {
        let target = fine.grid().with_dims(coarse.grid().dims())?;
        resample(fine, &target, Scheme::Bilinear)?
    };
    let (a2, b2) = if swapped { (&fine, coarse) } else { (coarse, &fine) };
    let diff: f64 =
        (a2.values().iter().zip(b2.values()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a2.len() as f64).sqrt();
    Ok(diff / (1.0 + a2.rms()))
}

/// Survivor-averaged `max over policies` of successive-stage distances.
/// `outputs[member][policy][level]`; `None` members failed.
pub fn ssi(outputs: &[Option<Vec<Vec<Field>>>]) -> Result<Vec<f64>> {
    let alive: Vec<&Vec<Vec<Field>>> = outputs.iter().flatten().collect();
    if alive.is_empty() {
        return invalid("no surviving members");
    }
    let levels = alive[0][0].len();
    let mut out = vec![0.0; levels.saturating_sub(1)];
    for m in &alive {
        for (n, slot) in out.iter_mut().enumerate() {
            let mut worst: f64 = 0.0;
            for p in m.iter() {
                worst = worst.max(normalized_distance(&p[n], &p[n + 1])?);
            }
            *slot += worst / alive.len() as f64;
        }
    }
    Ok(out)
}

/// Survivor-averaged per-level commutation gaps (`gaps[member][level]`, already maximised).
pub fn sc(gaps: &[Option<Vec<f64>>]) -> Result<Vec<f64>> {
    let alive: Vec<&Vec<f64>> = gaps.iter().flatten().collect();
    if alive.is_empty() {
        return invalid("no surviving members");
    }
    let levels = alive[0].len();
    Ok((0..levels).map(|n| alive.iter().map(|g| g[n]).sum::<f64>() / alive.len() as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, Topology};

    #[test]
    fn verdict_examples() {
        let t = Thresholds::default();
        assert_eq!(verdict(&[0.4, 0.2, 0.1, 0.05], &t).unwrap(), Verdict::Decaying);
        assert_eq!(verdict(&[0.3, 0.29, 0.30, 0.29], &t).unwrap(), Verdict::Plateau);
        assert_eq!(verdict(&[0.3, 0.5, 0.1], &t).unwrap(), Verdict::Inconclusive);
        assert_eq!(verdict(&[0.0, 0.0], &t).unwrap(), Verdict::Decaying);
        assert!(verdict(&[0.1], &t).is_err());
    }

    #[test]
    fn distance_across_resolutions() {
        let g = Grid::unit(&[4, 4], Topology::Free).unwrap();
        let a = Field::constant(g.clone(), 2.0);
        let b = Field::constant(g.with_dims(&[8, 8]).unwrap(), 2.0);
        assert_eq!(normalized_distance(&a, &b).unwrap(), 0.0);
        assert_eq!(normalized_distance(&b, &a).unwrap(), 0.0);
        let c = Field::constant(g, 1.0);
        assert!((normalized_distance(&a, &c).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }
}
