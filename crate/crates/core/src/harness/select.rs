use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivarianceReport {
    /// Selected label per fiber.
    pub selection: Vec<usize>,
    pub equivariant: bool,
    /// `(group element, fiber)` pairs where `s(g F) != g s(F)`.
    pub violations: Vec<(usize, usize)>,
    /// Fibers whose minimum is attained more than once, so the tie-break decides.
    pub multiplicity: Vec<usize>,
}

/// Least-cost element of each fiber, ties to the smallest label, then an
/// exhaustive check of `s(g F) = g s(F)` over the given permutations of labels.
pub fn invariant_selection(fibers: &[Vec<usize>], cost: &[f64], group: &[Vec<usize>]) -> Result<EquivarianceReport> {
    let n = cost.len();
    if fibers.iter().any(|f| f.is_empty()) {
        return invalid("empty fiber");
    }
    if fibers.iter().flatten().any(|&l| l >= n) {
        return invalid("fiber label without a cost");
    }
    let mut sorted: Vec<Vec<usize>> = fibers.to_vec();
    for f in &mut sorted {
        f.sort_unstable();
        f.dedup();
    }
    for g in group {
        let mut seen = vec![false; n];
        if g.len() != n || g.iter().any(|&x| x >= n || std::mem::replace(&mut seen[x], true)) {
            return invalid("group element is not a permutation of the labels");
        }
    }
    let select = |f: &[usize]| -> usize {
        let min = f.iter().map(|&l| cost[l]).fold(f64::INFINITY, f64::min);
        *f.iter().filter(|&&l| cost[l] == min).min().unwrap()
    };
    let selection: Vec<usize> = sorted.iter().map(|f| select(f)).collect();
    let multiplicity = sorted
        .iter()
        .enumerate()
        .filter(|(k, f)| f.iter().filter(|&&l| cost[l] == cost[selection[*k]]).count() > 1)
        .map(|(k, _)| k)
        .collect();
    let mut violations = Vec::new();
    for (gi, g) in group.iter().enumerate() {
        for (fi, f) in sorted.iter().enumerate() {
            let mut image: Vec<usize> = f.iter().map(|&l| g[l]).collect();
            image.sort_unstable();
            let Some(target) = sorted.iter().position(|h| *h == image) else {
                return invalid(format!("group element {gi} does not map fiber {fi} to a fiber"));
            };
            if selection[target] != g[selection[fi]] {
                violations.push((gi, fi));
            }
        }
    }
    Ok(EquivarianceReport { selection, equivariant: violations.is_empty(), violations, multiplicity })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let r = invariant_selection(&[vec![0], vec![1]], &[1.0, 2.0], &[vec![1, 0]]).unwrap();
        assert!(r.equivariant && r.multiplicity.is_empty());
        let r = invariant_selection(&[vec![0, 1]], &[1.0, 1.0], &[vec![1, 0]]).unwrap();
        assert!(!r.equivariant);
        assert_eq!(r.multiplicity, vec![0]);
        let r = invariant_selection(&[vec![0, 1], vec![2, 3]], &[1.0, 2.0, 1.0, 2.0], &[vec![2, 3, 0, 1]]).unwrap();
        assert!(r.equivariant);
        assert!(invariant_selection(&[vec![]], &[], &[]).is_err());
        assert!(invariant_selection(&[vec![0], vec![1, 2]], &[0.0; 3], &[vec![1, 0, 2]]).is_err());
    }
}
