use std::f64::consts::PI;

use dplab::grid::{PolicyFamily, RefinementPolicy, Scheme};
use dplab::horizon::*;
use dplab::Error;
use proptest::prelude::*;

const RES: [usize; 3] = [64, 128, 256];

fn flat(span: f64) -> InteriorModel {
    InteriorModel::new(0.0, Potential::Zero, 0.0, span).unwrap()
}

fn pulse() -> CauchyDatum {
    CauchyDatum::Pulse { center: PI, width: 0.6, amplitude: 1.0, direction: 1.0 }
}

fn family() -> PolicyFamily {
    PolicyFamily::new(vec![
        RefinementPolicy::geometric("end", Scheme::Nearest, &[4], 2, 3, 1, 2, 1).unwrap(),
        RefinementPolicy::geometric("mid", Scheme::Bilinear, &[4], 2, 3, 1, 2, 1).unwrap(),
        RefinementPolicy::geometric("mean", Scheme::Conservative, &[2], 2, 3, 1, 2, 1).unwrap(),
    ])
    .unwrap()
}

fn l2_diff(a: &[f64], b: &[f64], dx: f64) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() * dx).sqrt()
}

fn both() -> [Pipeline; 2] {
    [Pipeline::leapfrog(), Pipeline::Characteristic]
}

#[test]
fn right_moving_mode_translates() {
    let m = flat(PI);
    let d = CauchyDatum::Mode { k: 2, amplitude: 1.0, phase: 0.0, velocity: 1.0 };
    for p in both() {
        let errs: Vec<f64> = RES
            .iter()
            .map(|&n| {
                let s = evolve_interior(&m, &d, p, n).unwrap();
                let exact: Vec<f64> = (0..n).map(|i| (2.0 * (i as f64 * s.dx - PI)).cos()).collect();
                l2_diff(s.phi.last().unwrap(), &exact, s.dx)
            })
            .collect();
        if p == Pipeline::Characteristic {
            // exact transport along characteristics: only rounding remains
            assert!(errs.iter().all(|&e| e < 1e-11), "{errs:?}");
        } else {
            let ord = observed_orders(&errs);
            assert!(errs[0] < 5e-2, "{errs:?}");
            assert!(ord.iter().all(|&o| o > 1.9), "{ord:?}");
        }
    }
}

#[test]
fn massive_mode_dispersion() {
    let m = InteriorModel::new(0.0, Potential::Constant { value: 1.0 }, 0.0, PI).unwrap();
    let d = CauchyDatum::Mode { k: 2, amplitude: 1.0, phase: 0.0, velocity: 0.0 };
    let w = 5f64.sqrt();
    for (p, res) in [(Pipeline::leapfrog(), RES), (Pipeline::Characteristic, [256, 512, 1024])] {
        let errs: Vec<f64> = res
            .iter()
            .map(|&n| {
                let s = evolve_interior(&m, &d, p, n).unwrap();
                let exact: Vec<f64> = (0..n).map(|i| (w * PI).cos() * (2.0 * i as f64 * s.dx).cos()).collect();
                l2_diff(s.phi.last().unwrap(), &exact, s.dx)
            })
            .collect();
        let ord = observed_orders(&errs);
        assert!(ord.iter().all(|&o| o > 1.9), "{p:?} {errs:?} {ord:?}");
    }
}

fn energy_drift(m: &InteriorModel, p: Pipeline, n: usize) -> f64 {
    let s = evolve_interior(m, &pulse(), p, n).unwrap();
    let e0 = s.energy(m, 0);
    (0..=s.steps()).map(|k| (s.energy(m, k) - e0).abs()).fold(0.0, f64::max)
}

#[test]
fn flat_energy_conservation_order() {
    let m = flat(2.0 * PI);
    let d: Vec<f64> = RES.iter().map(|&n| energy_drift(&m, Pipeline::leapfrog(), n)).collect();
    let ord = observed_orders(&d);
    assert!(ord.iter().all(|&o| o >= 1.9), "{d:?} {ord:?}");
    for n in RES {
        assert!(energy_drift(&m, Pipeline::Characteristic, n) < 1e-12);
    }
}

fn blue_shift_model() -> InteriorModel {
    InteriorModel::new(0.5, Potential::Decaying { amplitude: 2.0, rate: 1.0, modulation: 0.5 }, 0.0, 2.0 * PI)
        .unwrap()
}

#[test]
fn weighted_current_residual_converges() {
    let m = blue_shift_model();
    for p in both() {
        let r: Vec<f64> = RES
            .iter()
            .map(|&n| {
                let s = evolve_interior(&m, &pulse(), p, n).unwrap();
                energy_identity_residual(&m, &s, PI / 2.0, 2.0 * PI).unwrap()
            })
            .collect();
        let ord = observed_orders(&r);
        assert!(ord.iter().all(|&o| o >= 0.9), "{p:?} {ord:?}");
    }
}

#[test]
fn flat_identity_residual_is_conservation_error() {
    let m = flat(2.0 * PI);
    let s = evolve_interior(&m, &pulse(), Pipeline::leapfrog(), 128).unwrap();
    let r = energy_identity_residual(&m, &s, 0.0, 2.0 * PI).unwrap();
    assert!((r - (s.energy(&m, s.steps()) - s.energy(&m, 0)).abs()).abs() < 1e-14);
    assert!(r < 1e-2);
}

#[test]
fn pipelines_converge_to_each_other() {
    let m = blue_shift_model();
    let opts = SelectionOptions { q_grid: vec![0.05, 0.5, 5.0], ..Default::default() };
    let div = cross_pipeline_divergence(&m, &pulse(), Pipeline::leapfrog(), Pipeline::Characteristic, &RES, &family(), &opts)
        .unwrap();
    let ord = observed_orders(&div);
    assert!(ord.iter().all(|&o| o >= 1.0), "{div:?}");
    let same = cross_pipeline_divergence(&m, &pulse(), Pipeline::Characteristic, Pipeline::Characteristic, &RES, &family(), &opts)
        .unwrap();
    assert!(same.iter().all(|&x| x == 0.0));
    let zero = cross_pipeline_divergence(&m, &CauchyDatum::Zero, Pipeline::leapfrog(), Pipeline::Characteristic, &RES, &family(), &opts)
        .unwrap();
    assert!(zero.iter().all(|&x| x == 0.0));
}

#[test]
fn flux_closed_form_and_additivity() {
    let m = flat(2.0 * PI);
    let s = InteriorSolution::from_fn(&m, 16, 400, |v, _| (v.sin(), v.cos(), 0.0)).unwrap();
    let f = weighted_flux(&m, &s, 0.0, 2.0 * PI).unwrap();
    assert!((f - PI * 2.0 * PI).abs() < 1e-10);
    let still = InteriorSolution::from_fn(&m, 16, 40, |_, x| (x.sin(), 0.0, x.cos())).unwrap();
    assert_eq!(weighted_flux(&m, &still, 0.0, 2.0 * PI).unwrap(), 0.0);
    let bm = blue_shift_model();
    let sol = evolve_interior(&bm, &pulse(), Pipeline::Characteristic, 64).unwrap();
    let v = &sol.v;
    let (a, b, c) = (v[0], v[37], v[v.len() - 1]);
    let whole = weighted_flux(&bm, &sol, a, c).unwrap();
    let parts = weighted_flux(&bm, &sol, a, b).unwrap() + weighted_flux(&bm, &sol, b, c).unwrap();
    assert!((whole - parts).abs() <= 1e-12 * whole);
}

#[test]
fn flux_tail_admissibility() {
    let m = InteriorModel::new(0.05, Potential::Zero, 0.0, 4.0 * PI).unwrap();
    let tails: Vec<FluxTail> = [64, 128]
        .iter()
        .map(|&n| {
            let s = evolve_interior(&m, &pulse(), Pipeline::leapfrog(), n).unwrap();
            flux_tail(&m, &s, 0.0, DEFAULT_FLUX_CAP_FACTOR).unwrap()
        })
        .collect();
    for t in &tails {
        assert!(t.admissible);
        assert!(t.windows.windows(2).all(|w| w[0].1 <= w[1].1));
    }
    assert!((tails[0].value - tails[1].value).abs() < 1e-2 * tails[1].value);

    // V = -m^2 drives the k = 0 mode; leapfrog amplifies by the root of r^2 - (2 + dv^2 m^2) r + 1
    let mass = 2.0;
    let um = InteriorModel::new(0.05, Potential::Constant { value: -mass * mass }, 0.0, 4.0 * PI).unwrap();
    let d = CauchyDatum::Mode { k: 0, amplitude: 1.0, phase: 0.0, velocity: 0.0 };
    let s = evolve_interior(&um, &d, Pipeline::leapfrog(), 64).unwrap();
    let t = flux_tail(&um, &s, 0.0, DEFAULT_FLUX_CAP_FACTOR).unwrap();
    assert!(!t.admissible);
    let dv = s.dv();
    let b = 2.0 + dv * dv * mass * mass;
    let r = (b + (b * b - 4.0).sqrt()) / 2.0;
    let k = s.steps();
    let observed = s.phi[k][0] / s.phi[k - 1][0];
    assert!((observed - r).abs() < 1e-9, "{observed} vs {r}");
    match extract_traces(&um, &s, &family(), DEFAULT_FLUX_CAP_FACTOR) {
        Err(Error::InadmissibleDatum { flux, cap }) => assert!(flux >= cap),
        other => panic!("{other:?}"),
    }
}

#[test]
fn blowup_reports_step() {
    let um = InteriorModel::new(0.0, Potential::Constant { value: -36.0 }, 0.0, 200.0 * PI).unwrap();
    let d = CauchyDatum::Mode { k: 0, amplitude: 1.0, phase: 0.0, velocity: 0.0 };
    assert!(matches!(evolve_interior(&um, &d, Pipeline::Characteristic, 64), Err(Error::EvolutionBlowup { .. })));
}

#[test]
fn trace_examples() {
    let m = blue_shift_model();
    let zero = evolve_interior(&m, &CauchyDatum::Zero, Pipeline::leapfrog(), 64).unwrap();
    let c = extract_traces(&m, &zero, &family(), DEFAULT_FLUX_CAP_FACTOR).unwrap();
    assert_eq!(c.len(), 3);
    assert!(c.iter().all(|t| t.trace.values().iter().all(|&x| x == 0.0)));

    let fm = flat(2.0 * PI);
    let still = CauchyDatum::Mode { k: 0, amplitude: 0.7, phase: 0.0, velocity: 0.0 };
    let s = evolve_interior(&fm, &still, Pipeline::leapfrog(), 64).unwrap();
    let c = extract_traces(&fm, &s, &family(), DEFAULT_FLUX_CAP_FACTOR).unwrap();
    assert!(c.iter().all(|t| t.trace == c[0].trace));

    let s = evolve_interior(&m, &pulse(), Pipeline::leapfrog(), 128).unwrap();
    let c = extract_traces(&m, &s, &family(), DEFAULT_FLUX_CAP_FACTOR).unwrap();
    let end = s.final_slice();
    for t in &c {
        let d = l2_diff(t.trace.values(), end.values(), s.dx);
        assert!(d <= t.bound + 1e-12, "{} {d} {}", t.policy_id, t.bound);
    }
    let d01 = l2_diff(c[0].trace.values(), c[1].trace.values(), s.dx);
    assert!(d01 > 0.0 && d01 <= c[0].bound + c[1].bound);
}

fn candidate(id: &str, value: f64, mild: f64, late: f64) -> TraceCandidate {
    let m = flat(1.0);
    let s = InteriorSolution::from_fn(&m, 8, 4, |_, _| (value, 0.0, 0.0)).unwrap();
    TraceCandidate {
        policy_id: id.into(),
        trace: s.final_slice(),
        window: (0.0, 1.0),
        flux_at_extraction: mild,
        mildness_v: mild,
        mildness_x: 0.0,
        late_energy: late,
        bound: 0.0,
    }
}

#[test]
fn selection_examples() {
    let opts = SelectionOptions::default();
    let one = select_continuation(&[candidate("a", 1.0, 2.0, 3.0)], &opts).unwrap();
    assert_eq!((one.chosen.policy_id.as_str(), one.tie_set_size), ("a", 1));
    assert!(one.ut_passed);

    let wide = SelectionOptions { q_grid: vec![1.0], ..Default::default() };
    let pair = [candidate("a", 1.0, 2.0, 3.0), candidate("b", 1.0, 2.0, 1.0)];
    assert_eq!(select_continuation(&pair, &wide).unwrap().chosen.policy_id, "b");

    let twins = [candidate("p", 1.0, 2.0, 3.0), candidate("q", 1.0, 2.0, 3.0)];
    let out = select_continuation(&twins, &opts).unwrap();
    assert_eq!((out.chosen.policy_id.as_str(), out.tie_set_size), ("p", 2));

    let apart = [candidate("a", 0.0, 1.0, 1.0), candidate("b", 5.0, 1.0, 1.0)];
    assert!(matches!(select_continuation(&apart, &opts), Err(Error::NoTameContinuation)));
    assert!(select_continuation(&[], &opts).is_err());
}

#[test]
fn selection_is_idempotent() {
    let m = blue_shift_model();
    let s = evolve_interior(&m, &pulse(), Pipeline::Characteristic, 64).unwrap();
    let c = extract_traces(&m, &s, &family(), DEFAULT_FLUX_CAP_FACTOR).unwrap();
    let opts = SelectionOptions { q_grid: vec![0.5, 5.0], ..Default::default() };
    let first = select_continuation(&c, &opts).unwrap();
    let again = select_continuation(std::slice::from_ref(&first.chosen), &opts).unwrap();
    assert_eq!(again.chosen, first.chosen);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn evolution_is_linear(seed in prop::collection::vec(-1.0f64..1.0, 128), alpha in -3.0f64..3.0, lf in any::<bool>()) {
        let m = blue_shift_model();
        let p = if lf { Pipeline::leapfrog() } else { Pipeline::Characteristic };
        let n = 32;
        let d1 = CauchyDatum::sampled(seed[..n].to_vec(), seed[n..2 * n].to_vec()).unwrap();
        let d2 = CauchyDatum::sampled(seed[2 * n..3 * n].to_vec(), seed[3 * n..].to_vec()).unwrap();
        let (a0, a1) = d1.fields(n, m.length);
        let (b0, b1) = d2.fields(n, m.length);
        let mix = CauchyDatum::sampled(
            (0..n).map(|i| alpha * a0[i] + b0[i]).collect(),
            (0..n).map(|i| alpha * a1[i] + b1[i]).collect(),
        ).unwrap();
        let (s1, s2, sm) = (
            evolve_interior(&m, &d1, p, n).unwrap(),
            evolve_interior(&m, &d2, p, n).unwrap(),
            evolve_interior(&m, &mix, p, n).unwrap(),
        );
        for k in 0..=sm.steps() {
            for i in 0..n {
                prop_assert!((sm.phi[k][i] - alpha * s1.phi[k][i] - s2.phi[k][i]).abs() <= 1e-10);
            }
        }
    }
}
