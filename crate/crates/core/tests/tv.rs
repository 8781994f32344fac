use dplab::grid::{Field, Grid, Recoding, RefinementPolicy, Scheme, Topology};
use dplab::tv::*;
use dplab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(rng: &mut ChaCha8Rng, dims: &[usize], topo: Topology) -> Field {
    let g = Grid::unit(dims, topo).unwrap();
    let n = g.len();
    Field::new(g, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn dot(a: &Field, b: &Field) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

#[test]
fn adjoints_pass_random_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for topo in [Topology::Free, Topology::Periodic] {
        for dims in [vec![17], vec![9, 7], vec![4, 5, 3]] {
            let kdims = vec![3; dims.len()];
            let ops = [
                ForwardOperator::Identity,
                ForwardOperator::convolution(random_field(&mut rng, &kdims, Topology::Free)).unwrap(),
                ForwardOperator::subsampling(random_field(&mut rng, &dims, topo).map(|v| (v > 0.0) as u8 as f64)).unwrap(),
            ];
            for op in &ops {
                for _ in 0..5 {
                    let u = random_field(&mut rng, &dims, topo);
                    let w = random_field(&mut rng, &dims, topo);
                    let lhs = dot(&op.apply(&u).unwrap(), &w);
                    let rhs = dot(&u, &op.adjoint(&w).unwrap());
                    assert!((lhs - rhs).abs() <= 1e-10, "{op:?} {lhs} {rhs}");
                }
            }
        }
    }
    let even = Field::constant(Grid::unit(&[2, 3], Topology::Free).unwrap(), 1.0);
    assert!(ForwardOperator::convolution(even).is_err());
}

#[test]
fn trivial_minimisers() {
    let g = Grid::unit(&[12, 12], Topology::Free).unwrap();
    let opts = SolverOptions::default().with_tol(1e-10);
    let c = InverseProblem::denoising(Field::constant(g.clone(), 0.7), 0.1).unwrap();
    let u = solve_tv(&c, 0.5, &opts).unwrap().u;
    assert!(u.values().iter().all(|&v| (v - 0.7 / (1.0 + DEFAULT_MU)).abs() < 1e-8));
    let z = InverseProblem::denoising(Field::zeros(g), 0.1).unwrap();
    assert!(solve_tv(&z, 3.0, &opts).unwrap().u.values().iter().all(|&v| v.abs() < 1e-12));
}

fn step_objective(a: f64, b: f64, lambda: f64, mu: f64) -> f64 {
    16.0 * a * a + 16.0 * (b - 1.0).powi(2) + lambda * (b - a).abs() + mu * 16.0 * (a * a + b * b)
}

/// Exhaustive scan over two-level candidates sharing the step's breakpoint.
fn step_oracle(lambda: f64, mu: f64) -> (f64, f64) {
    let scan = |best: &mut (f64, f64, f64), lo_a: f64, lo_b: f64, h: f64, m: usize| {
        for i in 0..=m {
            for j in 0..=m {
                let (a, b) = (lo_a + i as f64 * h, lo_b + j as f64 * h);
                let v = step_objective(a, b, lambda, mu);
                if v < best.0 {
                    *best = (v, a, b);
                }
            }
        }
    };
    let mut best = (f64::INFINITY, 0.0, 0.0);
    scan(&mut best, -0.1, -0.1, 1e-3, 1200);
    let (a0, b0) = (best.1, best.2);
    scan(&mut best, a0 - 1e-3, b0 - 1e-3, 1e-6, 2000);
    (best.1, best.2)
}

#[test]
fn step_signal_matches_two_level_oracle() {
    let (lambda, mu) = (0.1, 1e-6);
    let g = Grid::unit(&[32], Topology::Free).unwrap();
    let d = Field::from_index_fn(g, |c| (c[0] >= 16) as u8 as f64);
    let p = InverseProblem::new(ForwardOperator::Identity, d, 0.0, DEFAULT_TAU, mu).unwrap();
    let sol = solve_tv(&p, lambda, &SolverOptions::default().with_tol(1e-12)).unwrap();
    let (a, b) = step_oracle(lambda, mu);
    for (i, &v) in sol.u.values().iter().enumerate() {
        let want = if i < 16 { a } else { b };
        assert!((v - want).abs() < 2e-6, "{i}: {v} vs {want}");
    }
    assert!(p.objective(&sol.u, lambda).unwrap() <= step_objective(a, b, lambda, mu) + 1e-9);
    assert!(sol.history.windows(2).all(|w| w[1] <= w[0] + OBJECTIVE_SLACK));
}

#[test]
fn strong_convexity_gives_unique_minimiser() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = random_field(&mut rng, &[24, 24], Topology::Free);
    let tol = 1e-8;
    for method in [Method::DualFista, Method::PrimalDual] {
        let p = InverseProblem::new(ForwardOperator::Identity, d.clone(), 0.1, DEFAULT_TAU, 1e-3).unwrap();
        let o = SolverOptions { method, ..SolverOptions::default().with_tol(tol) };
        let a = solve_tv(&p, 0.3, &o.with_init(Init::Seeded(1))).unwrap();
        let b = solve_tv(&p, 0.3, &o.with_init(Init::Seeded(2))).unwrap();
        assert!(a.u.max_abs_diff(&b.u).unwrap() <= 10.0 * tol.sqrt(), "{method:?}");
        assert!(a.residual <= tol && b.residual <= tol);
    }
}

fn noisy_step(seed: u64, n: usize, sigma: f64) -> InverseProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Grid::unit(&[n], Topology::Free).unwrap();
    let mut d = Field::from_index_fn(g, |c| (c[0] >= n / 2) as u8 as f64);
    for v in d.values_mut() {
        *v += sigma * rng.random_range(-1.0f64..1.0) * 3f64.sqrt();
    }
    InverseProblem::denoising(d, sigma * (n as f64).sqrt()).unwrap()
}

#[test]
fn discrepancy_agrees_with_brute_force() {
    let grid = LambdaGrid::geometric(1e-3, 20).unwrap();
    let solver = SolverOptions::default().with_tol(1e-10);
    for seed in 0..3 {
        let p = noisy_step(seed, 64, 0.1);
        let res: Vec<f64> =
            grid.values().iter().map(|&l| p.residual_norm(&solve_tv(&p, l, &solver).unwrap().u).unwrap()).collect();
        assert!(res.windows(2).all(|w| w[1] >= w[0] - 1e-8), "{res:?}");
        let ok: Vec<usize> = (0..res.len()).filter(|&k| res[k] <= p.tau * p.noise).collect();
        for (rule, want) in [(LambdaRule::Least, ok[0]), (LambdaRule::Greatest, *ok.last().unwrap())] {
            for search in [Search::Linear, Search::Bisection] {
                let o = DiscrepancyOptions { rule, search, solver };
                let (l, u) = discrepancy_lambda(&p, &grid, &o).unwrap();
                assert_eq!(l, grid.values()[want], "{rule:?} {search:?}");
                assert!(p.residual_norm(&u).unwrap() <= p.tau * p.noise);
            }
        }
        assert!(ok.len() > 1 && ok.len() < 20, "ladder should bracket the noise level: {ok:?}");
    }
}

#[test]
fn discrepancy_edge_cases() {
    let grid = LambdaGrid::geometric(0.01, 5).unwrap();
    let g = Grid::unit(&[16], Topology::Free).unwrap();
    let zero = InverseProblem::denoising(Field::zeros(g.clone()), 0.0).unwrap();
    let (l, u) = discrepancy_lambda(&zero, &grid, &DiscrepancyOptions::default()).unwrap();
    assert_eq!(l, 0.01);
    assert!(u.values().iter().all(|&v| v == 0.0));
    let exact = InverseProblem::denoising(Field::from_index_fn(g, |c| c[0] as f64), 0.0).unwrap();
    for rule in [LambdaRule::Least, LambdaRule::Greatest] {
        for search in [Search::Linear, Search::Bisection] {
            let o = DiscrepancyOptions { rule, search, ..Default::default() };
            assert!(matches!(discrepancy_lambda(&exact, &grid, &o), Err(Error::NoAdmissibleLambda)));
        }
    }
    assert!(LambdaGrid::new(vec![0.1, 0.1]).is_err());
    assert!(LambdaGrid::new(vec![-1.0, 0.1]).is_err());
}

fn pipeline() -> Pipeline {
    let mut p = Pipeline::new(LambdaGrid::geometric(1e-3, 14).unwrap());
    p.discrepancy.rule = LambdaRule::Greatest;
    p.discrepancy.search = Search::Bisection;
    p
}

#[test]
fn symmetry_recodings_commute() {
    let policy = RefinementPolicy::geometric("c", Scheme::Conservative, &[8, 8], 2, 2, 1, 8, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let g = Grid::unit(&[32, 32], Topology::Free).unwrap();
    let blob = Field::from_fn(g, |x| (-((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)) * 20.0).exp());
    let symmetric = InverseProblem::denoising(blob, 0.05 * 32.0).unwrap();
    let generic = InverseProblem::denoising(random_field(&mut rng, &[32, 32], Topology::Free), 0.3 * 32.0).unwrap();
    for p in [&symmetric, &generic] {
        for name in ["identity", "rot90", "transpose", "reflect-0", "rot270"] {
            let r = Recoding::by_name(name).unwrap();
            for n in 1..=2 {
                let tol = policy.stage(n).unwrap().tolerance();
                let gap = commutation_gap(p, &r, &policy, n, &pipeline()).unwrap();
                assert!(gap <= 10.0 * tol, "{name} level {n}: {gap}");
                if name == "identity" {
                    assert_eq!(gap, 0.0);
                }
            }
        }
    }
    let r = Recoding::rescale(3.0, 0.5).unwrap();
    let gap = commutation_gap(&generic, &r, &policy, 1, &pipeline()).unwrap();
    assert!(gap.is_finite() && gap > 0.0, "{gap}");
}
