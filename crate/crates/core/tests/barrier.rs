use dplab::barrier::*;
use dplab::grid::{refine, Field, Grid, PolicyFamily, Recoding, RefinementPolicy, Scheme, Topology};
use dplab::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn grid(n: usize) -> Grid {
    Grid::unit(&[n, n], Topology::Free).unwrap()
}

fn mask(n: usize, on: impl Fn(usize, usize) -> bool) -> BarrierSpec {
    let m: Vec<bool> = (0..n * n).map(|k| on(k / n, k % n)).collect();
    BarrierSpec::from_mask(grid(n), &m).unwrap()
}

#[test]
fn empty_mask_has_zero_capacity() {
    let est = capacity(&mask(16, |_, _| false), &CapacityOptions::default()).unwrap();
    assert!(est.energies().iter().all(|&e| e < 1e-12), "{:?}", est.energies());
    assert_eq!(est.verdict, CapacityVerdict::Zero);
    assert!(markov_unique(&mask(16, |_, _| false), &CapacityOptions::default()).unwrap().0);
}

#[test]
fn point_and_segment_verdicts() {
    let opts = CapacityOptions::default();
    let (unique, est) = markov_unique(&mask(16, |i, j| i == 8 && j == 8), &opts).unwrap();
    let e = est.energies();
    assert!(unique, "{e:?}");
    assert!(e.windows(2).all(|w| w[0] >= 1.5 * w[1]), "{e:?}");

    // strip periodic in x: the dilated band [y_lo, y_hi] gives 1/y_lo + 1/(1 - y_hi) exactly
    let strip = Grid::new(vec![16, 16], vec![1.0 / 16.0; 2], vec![Topology::Free, Topology::Periodic]).unwrap();
    let row: Vec<bool> = (0..256).map(|k| k / 16 == 8).collect();
    let (unique, est) = markov_unique(&BarrierSpec::from_mask(strip, &row).unwrap(), &opts).unwrap();
    let e = est.energies();
    assert!(!unique, "{e:?}");
    for (&n, &got) in opts.ladder.iter().zip(&e) {
        let k = (17.0 * n as f64 / 32.0).round();
        let (lo, hi) = ((k - 1.0) / n as f64, (k + 1.0) / n as f64);
        let want = 1.0 / lo + 1.0 / (1.0 - hi);
        assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
    }
    let (lo, hi) = e.iter().fold((f64::MAX, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let mid = 0.5 * (lo + hi);
    assert!(e.iter().all(|&x| (x - mid).abs() <= 0.2 * mid), "{e:?}");
}

#[test]
fn energies_fall_under_nested_refinement() {
    let opts = CapacityOptions { ladder: vec![8, 16, 32, 64], ..Default::default() };
    for spec in [mask(16, |i, j| i == 5 && j == 9), mask(16, |i, j| j == 4 && (3..12).contains(&i))] {
        let e = capacity(&spec, &opts).unwrap().energies();
        assert!(e.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)), "{e:?}");
    }
}

#[test]
fn capacity_is_monotone_in_the_mask() {
    let opts = CapacityOptions { ladder: vec![8, 16, 32], ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..4 {
        let big: Vec<bool> = (0..256).map(|_| rng.random_bool(0.08)).collect();
        let small: Vec<bool> = big.iter().map(|&b| b && rng.random_bool(0.5)).collect();
        let es = capacity(&BarrierSpec::from_mask(grid(16), &small).unwrap(), &opts).unwrap().energies();
        let eb = capacity(&BarrierSpec::from_mask(grid(16), &big).unwrap(), &opts).unwrap().energies();
        for (a, b) in es.iter().zip(&eb) {
            assert!(*a <= b * (1.0 + 1e-8) + 1e-10, "{es:?} {eb:?}");
        }
    }
}

fn coarse_grainings() -> PolicyFamily {
    PolicyFamily::new(vec![
        RefinementPolicy::geometric("fine", Scheme::Conservative, &[4, 4], 2, 3, 1, 2, 1).unwrap(),
        RefinementPolicy::geometric("coarse", Scheme::Conservative, &[2, 2], 2, 3, 1, 2, 1).unwrap(),
    ])
    .unwrap()
}

fn family(m0: u32) -> PolicyFamily {
    PolicyFamily::new(vec![
        RefinementPolicy::geometric("cons", Scheme::Conservative, &[16, 16], 2, 2, 1, m0, 1).unwrap(),
        RefinementPolicy::geometric("near", Scheme::Nearest, &[16, 16], 2, 2, 1, m0, 1).unwrap(),
    ])
    .unwrap()
}

#[test]
fn calibration_examples() {
    let fam = family(4);
    let ramp = Field::from_fn(grid(32), |x| x[0]);
    let ladder = ThetaLadder::rational(0, 32, 32, 1).unwrap();
    let th = calibrate_theta(&ramp, 0.5, &fam, &ladder).unwrap();
    assert!((th - 0.5).abs() <= 1.0 / 16.0 + 1.0 / 32.0, "{th}");

    let flat = Field::constant(grid(8), 0.3);
    assert!(matches!(calibrate_theta(&flat, 0.5, &fam, &ladder), Err(Error::CalibrationFailure(_))));

    let cb = Field::from_index_fn(grid(16), |c| if (c[0] + c[1]) % 2 == 0 { 1.0 } else { -1.0 });
    let near = PolicyFamily::new(vec![RefinementPolicy::geometric("n", Scheme::Nearest, &[16, 16], 2, 2, 1, 6, 1).unwrap()]).unwrap();
    let from_zero = ThetaLadder::rational(0, 4, 4, 1).unwrap();
    assert_eq!(calibrate_theta(&cb, 0.5, &near, &from_zero).unwrap(), 0.0);
    assert!(calibrate_theta(&ramp, 1.5, &fam, &ladder).is_err());
}

fn qualifies(env: &Field, theta: f64, target: f64, fam: &PolicyFamily, settle: usize) -> bool {
    fam.policies().iter().all(|p| {
        (settle..=fam.max_level()).all(|n| {
            let f = refine(env, p, n).unwrap();
            let cov = f.values().iter().filter(|&&v| v >= theta).count() as f64 / f.len() as f64;
            (cov - target).abs() <= p.stage(n).unwrap().tolerance()
        })
    })
}

#[test]
fn calibration_returns_least_qualifying_rung() {
    let fam = family(3);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..10 {
        let env = Field::new(grid(16), (0..256).map(|_| rng.random_range(0.0..1.0f64).powi(3)).collect()).unwrap();
        let target = rng.random_range(0.1..0.6);
        let ladder = ThetaLadder::rational(0, 64, 64, 1 + trial % 2).unwrap();
        match calibrate_theta(&env, target, &fam, &ladder) {
            Ok(th) => {
                assert!(qualifies(&env, th, target, &fam, ladder.settle_level));
                for &t in ladder.values.iter().filter(|&&t| t < th) {
                    assert!(!qualifies(&env, t, target, &fam, ladder.settle_level), "{t} < {th}");
                }
            }
            Err(Error::CalibrationFailure(_)) => {
                assert!(ladder.values.iter().all(|&t| !qualifies(&env, t, target, &fam, ladder.settle_level)))
            }
            Err(e) => panic!("{e}"),
        }
    }
}

#[test]
fn uniqueness_frequencies() {
    let fam = coarse_grainings();
    let ladder = ThetaLadder::rational(1, 16, 16, 3).unwrap();
    let opts = CapacityOptions::default();
    let members = mixed_ensemble(12, 40, 16, 6).unwrap();

    let empties: Vec<Field> = members.iter().take(3).map(|m| m.env.map(|v| v.min(0.03))).collect();
    let f = uniqueness_frequency(&empties, 0.06, &fam, &ladder, &opts).unwrap();
    assert!(f.per_policy.iter().all(|p| p.fraction == 1.0) && f.drift == 0.0);

    let envs: Vec<Field> = members.iter().map(|m| m.env.clone()).collect();
    let f = uniqueness_frequency(&envs, 0.06, &fam, &ladder, &opts).unwrap();
    for (m, row) in members.iter().zip(&f.classifications) {
        for c in row {
            assert_eq!(*c, Some(m.shape.markov_unique()), "{:?}", m.shape);
        }
    }
    assert!(f.per_policy.iter().all(|p| p.fraction == 0.5));
    assert_eq!(f.drift, 0.0);

    let segs: Vec<Field> = members.iter().filter(|m| m.shape == BarrierShape::Segment).map(|m| m.env.clone()).collect();
    let f = uniqueness_frequency(&segs, 0.06, &fam, &ladder, &opts).unwrap();
    assert!(f.per_policy.iter().all(|p| p.fraction == 0.0) && f.drift == 0.0);
}

#[test]
fn empty_barriers_are_unique_everywhere() {
    let fam = family(3);
    let opts = CapacityOptions::default();
    for scheme in [Scheme::Conservative, Scheme::Nearest] {
        let p = &fam.policies()[(scheme == Scheme::Nearest) as usize];
        let spec = BarrierSpec::new(refine(&Field::zeros(grid(16)), p, 2).unwrap(), 0.5);
        assert!(spec.is_empty());
        assert!(markov_unique(&spec, &opts).unwrap().0);
    }
}

/// Smallest eigenvalue of the 1D cell-centred Dirichlet Laplacian (ghost at h/2).
fn dirichlet_1d_min(n: usize) -> f64 {
    let m = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            if i == 0 || i == n - 1 { 3.0 } else { 2.0 }
        } else if i.abs_diff(j) == 1 {
            -1.0
        } else {
            0.0
        }
    });
    m.symmetric_eigenvalues().min()
}

#[test]
fn coercivity_examples() {
    let recs: Vec<Recoding> = ["identity", "rot90", "transpose", "reflect-0", "reflect-1"]
        .iter()
        .map(|n| Recoding::by_name(n).unwrap())
        .collect();
    let levels = [8, 16];
    let none = Field::zeros(grid(8));
    let r = coercivity_check(&CoefficientField::new(2.5, 0.0, none).unwrap(), &recs, &levels, 1e-9).unwrap();
    assert!(r.stable);
    for row in &r.rows {
        let h = 1.0 / row.cells as f64;
        let want = 2.5 * 2.0 * dirichlet_1d_min(row.cells) / (h * h);
        assert!((row.floor - want).abs() <= 1e-9 * want, "{} vs {want}", row.floor);
    }

    let left = Field::from_fn(grid(8), |x| (x[0] < 0.5) as u8 as f64);
    let coef = CoefficientField::new(1.0, 4.0, left.clone()).unwrap();
    let r = coercivity_check(&coef, &recs, &levels, 1e-9).unwrap();
    assert!(r.stable, "{:?}", r.spread);

    let base = coercivity_check(&CoefficientField::new(1.0, 0.0, left.clone()).unwrap(), &recs[..1], &levels, 1e-9).unwrap();
    let weak = coercivity_check(&CoefficientField::new(1.0, -0.999, left.clone()).unwrap(), &recs[..1], &levels, 1e-9).unwrap();
    for (w, b) in weak.rows.iter().zip(&base.rows) {
        assert!(w.floor >= 0.001 * b.floor && w.floor < b.floor, "{} {}", w.floor, b.floor);
        assert!(w.ceiling >= w.floor);
    }
    assert!(CoefficientField::new(1.0, -1.0, left.clone()).is_err());
    assert!(CoefficientField::new(0.0, 1.0, left).is_err());
}
