use std::f64::consts::PI;

use dplab::grid::{PolicyFamily, RefinementPolicy, Scheme};
use dplab::pointer::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn plus() -> DensityMatrix {
    DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap()
}

fn thermal_qubits(seed: u64, n: usize) -> Vec<DensityMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| DensityMatrix::thermal(&pauli('z'), rng.random_range(0.1..3.0)).unwrap())
        .collect()
}

fn menu() -> BasisMenu {
    BasisMenu::new(["x", "y", "z", "tilt"].iter().map(|n| named_basis(n, 2).unwrap()).collect()).unwrap()
}

fn time_family() -> PolicyFamily {
    PolicyFamily::new(vec![
        RefinementPolicy::geometric("right", Scheme::Nearest, &[32], 2, 3, 1, 2, 1).unwrap(),
        RefinementPolicy::geometric("mid", Scheme::Bilinear, &[24], 2, 3, 1, 2, 1).unwrap(),
        RefinementPolicy::geometric("avg", Scheme::Conservative, &[16], 2, 3, 1, 2, 1).unwrap(),
    ])
    .unwrap()
}

// Composite trapezoid of the closed-form coherence with many panels.
fn oracle_integral(g: f64, p: f64, horizon: f64) -> f64 {
    let n = 200_000;
    let h = horizon / n as f64;
    (0..=n)
        .map(|k| {
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            w * h * dephasing_factor(g, p, k as f64 * h)
        })
        .sum()
}

#[test]
fn dephasing_matches_closed_form() {
    let m = dephasing_model(1.0, plus()).unwrap();
    let z = named_basis("z", 2).unwrap();
    for p in [0.55, 0.8, 0.95] {
        let rho_e = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
        for t in [0.0, 0.3, 1.7, 4.0] {
            let got = m.coherence(&z, &rho_e, t).unwrap();
            assert!((got - dephasing_factor(1.0, p, t)).abs() < 1e-12);
        }
        let quad = TimeGridQuadrature::trapezoid(3.0, 4000).unwrap();
        let phi = decoherence_functional(&z, &rho_e, &m, &quad).unwrap();
        assert!((phi - oracle_integral(1.0, p, 3.0)).abs() < 1e-6, "p={p}");
    }
}

#[test]
fn functional_examples() {
    let quad = TimeGridQuadrature::trapezoid(2.0, 64).unwrap();
    let z = named_basis("z", 2).unwrap();
    let x = named_basis("x", 2).unwrap();
    let rho_e = DensityMatrix::diagonal(&[0.3, 0.7]).unwrap();
    // local system term diagonal in z, diagonal start: never any coherence
    let hs = pauli('z').kronecker(&DMatrix::identity(2, 2)) * c(0.8);
    let diag = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
    let m = PointerModel::new(HilbertSpec::new(2, 2).unwrap(), hs.clone(), diag).unwrap();
    assert_eq!(decoherence_functional(&z, &rho_e, &m, &quad).unwrap(), 0.0);
    // uncoupled with coherence 1 in z: value T
    let he = DMatrix::identity(2, 2).kronecker(&pauli('x')) * c(0.5);
    let m = PointerModel::new(HilbertSpec::new(2, 2).unwrap(), hs + he, plus()).unwrap();
    assert!((decoherence_functional(&z, &rho_e, &m, &quad).unwrap() - 2.0).abs() < 1e-10);
    assert!(decoherence_functional(&x, &rho_e, &m, &quad).unwrap() > 0.0);
}

#[test]
fn preferred_basis_examples() {
    let quad = TimeGridQuadrature::trapezoid(4.0, 64).unwrap();
    let m = dephasing_model(1.0, DensityMatrix::diagonal(&[0.7, 0.3]).unwrap()).unwrap();
    let rho_e = DensityMatrix::diagonal(&[0.6, 0.4]).unwrap();
    let zx = BasisMenu::new(vec![named_basis("z", 2).unwrap(), named_basis("x", 2).unwrap()]).unwrap();
    let sel = preferred_basis(&zx, &rho_e, &m, &quad, DEFAULT_TIE_TOL).unwrap();
    assert_eq!(sel.argmin, vec!["z"]);
    let single = BasisMenu::new(vec![named_basis("x", 2).unwrap()]).unwrap();
    assert_eq!(preferred_basis(&single, &rho_e, &m, &quad, DEFAULT_TIE_TOL).unwrap().argmin, vec!["x"]);
    let z = named_basis("z", 2).unwrap().matrix;
    let twins = BasisMenu::new(vec![
        Basis { label: "b".into(), matrix: z.clone() },
        Basis { label: "a".into(), matrix: z },
    ])
    .unwrap();
    let sel = preferred_basis(&twins, &rho_e, &m, &quad, DEFAULT_TIE_TOL).unwrap();
    assert_eq!(sel.argmin, vec!["a", "b"]);
    assert_eq!(sel.chosen(), "a");
}

#[test]
fn thermal_ensemble_selects_dephasing_basis() {
    let quad = TimeGridQuadrature::trapezoid(4.0, 64).unwrap();
    let m = dephasing_model(1.0, DensityMatrix::diagonal(&[0.7, 0.3]).unwrap()).unwrap();
    let ens = thermal_qubits(17, 20);
    let h = named_basis("x", 2).unwrap().matrix;
    let map = basis_frequency_map(&ens, &menu(), &m, &quad, &[pauli('x'), h]).unwrap();
    assert_eq!(map.frequency("z"), 1.0);
    assert_eq!(map.drift, 0.0);
    assert_eq!(map.tables.len(), 3);
    for r in &ens {
        let sel = preferred_basis(&menu(), r, &m, &quad, DEFAULT_TIE_TOL).unwrap();
        let vz = sel.values.iter().find(|v| v.0 == "z").unwrap().1;
        assert!(sel.values.iter().all(|v| vz <= v.1));
        let vx = sel.values.iter().find(|v| v.0 == "x").unwrap().1;
        assert!((vx - 0.4 * 4.0).abs() < 1e-10);
    }
}

#[test]
fn frequency_map_trivial_cases() {
    let quad = TimeGridQuadrature::trapezoid(1.0, 8).unwrap();
    let m = dephasing_model(1.0, plus()).unwrap();
    let ens = thermal_qubits(2, 5);
    let single = BasisMenu::new(vec![named_basis("y", 2).unwrap()]).unwrap();
    let map = basis_frequency_map(&ens, &single, &m, &quad, &[pauli('x')]).unwrap();
    assert_eq!(map.tables[0], vec![1.0]);
    assert_eq!(map.drift, 0.0);
    let x = named_basis("x", 2).unwrap().matrix;
    let twins = BasisMenu::new(vec![
        Basis { label: "p".into(), matrix: x.clone() },
        Basis { label: "q".into(), matrix: x },
    ])
    .unwrap();
    let map = basis_frequency_map(&ens, &twins, &m, &quad, &[]).unwrap();
    assert_eq!(map.tables[0], vec![1.0, 0.0]);
}

#[test]
fn quadrature_self_convergence() {
    let m = dephasing_model(1.0, plus()).unwrap();
    let z = named_basis("z", 2).unwrap();
    let rho_e = DensityMatrix::diagonal(&[0.8, 0.2]).unwrap();
    let phi: Vec<f64> = [16, 32, 64]
        .iter()
        .map(|&n| decoherence_functional(&z, &rho_e, &m, &TimeGridQuadrature::trapezoid(3.0, n).unwrap()).unwrap())
        .collect();
    let order = ((phi[0] - phi[1]) / (phi[1] - phi[2])).abs().log2();
    assert!(order >= 1.9, "order {order}");
}

#[test]
fn evolution_preserves_trace() {
    let m = spin_boson_truncated(0.5, 0.3, 1.0, 0.4, 8, plus()).unwrap();
    let rho_e = oscillator_thermal(1.0, 8, 0.7).unwrap();
    for t in [0.0, 0.5, 3.0, 25.0] {
        let r = m.reduced(&rho_e, t).unwrap();
        assert!((r.matrix().trace() - c(1.0)).norm() < 1e-10);
        let full = evolve_state(&m.hamiltonian, &m.composite(&rho_e).unwrap(), t).unwrap();
        let defect = (full.matrix() - full.matrix().adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-10);
        assert!((full.matrix().trace() - c(1.0)).norm() < 1e-10);
    }
    let r0 = evolve_state(&m.hamiltonian, &m.composite(&rho_e).unwrap(), 0.0).unwrap();
    assert!((r0.matrix() - m.composite(&rho_e).unwrap().matrix()).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn universal_stability_examples() {
    let fam = time_family();
    let z = named_basis("z", 2).unwrap();
    let bath = graded_bath_model(0.1, 32, plus()).unwrap();
    let env = gaussian_population(32, 3.5).unwrap();
    for q in [1e-5, 1e-3, 0.1] {
        assert!(universally_stable(&z, &env, &bath, 15.0, &fam, &[q], 0.0).unwrap().stable);
    }
    // uncoupled: coherence fixed at 1
    let hs = pauli('z').kronecker(&DMatrix::identity(2, 2));
    let still = PointerModel::new(HilbertSpec::new(2, 2).unwrap(), hs, plus()).unwrap();
    let rho_e = DensityMatrix::maximally_mixed(2).unwrap();
    let r = universally_stable(&z, &rho_e, &still, 5.0, &fam, &[0.5, 0.9], 0.0).unwrap();
    assert!(!r.stable);
    assert!(r.densities.iter().flatten().all(|&d| d == 1.0));
    let diag = still.with_system_state(DensityMatrix::diagonal(&[0.5, 0.5]).unwrap()).unwrap();
    assert!(universally_stable(&z, &rho_e, &diag, 5.0, &fam, &[1e-9], 0.0).unwrap().stable);
}

#[test]
fn canonical_selection_prefers_stable_minimiser() {
    let fam = time_family();
    let quad = TimeGridQuadrature::trapezoid(15.0, 150).unwrap();
    let bath = graded_bath_model(0.1, 32, DensityMatrix::diagonal(&[0.7, 0.3]).unwrap()).unwrap();
    let env = gaussian_population(32, 3.5).unwrap();
    let got = canonical_basis(&menu(), &env, &bath, &quad, &fam, &[1e-3], SecondaryCost::TerminalOffdiag).unwrap();
    assert_eq!(got.as_deref(), Some("z"));
}

fn random_unitary(seed: u64) -> DMatrix<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (a, b, g) = (rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c(a.cos()),
            -Complex64::from_polar(a.sin(), g),
            Complex64::from_polar(a.sin(), b),
            Complex64::from_polar(a.cos(), b + g),
        ],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relabelling_preserves_argmin(seed in any::<u64>(), p in 0.55f64..0.95) {
        let v = random_unitary(seed);
        let quad = TimeGridQuadrature::trapezoid(3.0, 48).unwrap();
        let m = dephasing_model(1.0, DensityMatrix::diagonal(&[0.7, 0.3]).unwrap()).unwrap();
        let rho_e = DensityMatrix::diagonal(&[p, 1.0 - p]).unwrap();
        let a = preferred_basis(&menu(), &rho_e, &m, &quad, DEFAULT_TIE_TOL).unwrap();
        let b = preferred_basis(&menu().relabel(&v).unwrap(), &rho_e, &m.relabel_system(&v).unwrap(), &quad, DEFAULT_TIE_TOL).unwrap();
        prop_assert_eq!(a.argmin, b.argmin);
    }

    #[test]
    fn functional_nonnegative(seed in any::<u64>(), beta in 0.0f64..4.0) {
        let v = random_unitary(seed);
        let quad = TimeGridQuadrature::trapezoid(2.0, 16).unwrap();
        let m = spin_boson_truncated(0.3, 0.5, 1.0, 0.6, 6, plus().conjugate(&v)).unwrap();
        let rho_e = oscillator_thermal(1.0, 6, beta).unwrap();
        for b in menu().bases() {
            prop_assert!(decoherence_functional(b, &rho_e, &m, &quad).unwrap() >= 0.0);
        }
    }
}
