use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::{json, Value};

use super::config::{PointerPreset, ProtocolConfig, ProtocolKind};
use crate::barrier::{calibrate_theta, markov_unique, mixed_ensemble, BarrierSpec, CapacityOptions, ThetaLadder};
use crate::error::{invalid, Result};
use crate::grid::{refine, Field, Grid, PolicyFamily, Recoding, RefinementPolicy, Scheme, Topology};
use crate::horizon::{
    evolve_interior, extract_traces, select_continuation, CauchyDatum, InteriorModel, Pipeline as Evolver,
    SelectionOptions, DEFAULT_FLUX_CAP_FACTOR,
};
use crate::ising::{evolve, CouplingSpec, SpinConfig, SpinGenerator, TieBreakRule};
use crate::pointer::{
    dephasing_model, decoherence_functional, named_basis, parse_matrix, pauli,
    spin_boson_truncated, CMatrix, DensityMatrix, HilbertSpec, PointerModel, TimeGridQuadrature,
};
use crate::tv::{reconstruct, DiscrepancyOptions, InverseProblem, LambdaGrid, LambdaRule, Pipeline, Search};

/// What one ensemble member contributes: `outputs[policy][level]`, the
/// per-level commutation gap (maximised over policies and recodings) and
/// protocol-specific diagnostics.
pub struct MemberRun {
    pub outputs: Vec<Vec<Field>>,
    pub gaps: Vec<f64>,
    pub extra: Value,
}

/// Everything a protocol needs that is shared between members.
pub(crate) enum Setup {
    Imaging { pipe: Pipeline, recodings: Vec<Recoding> },
    Barrier { envs: Vec<crate::barrier::EnsembleMember>, ladder: ThetaLadder, recodings: Vec<Recoding> },
    Ising { coupling: CouplingSpec, core: Vec<usize>, recodings: Vec<IsingRecoding> },
    Pointer { model: PointerModel, env_h: CMatrix, menu: Vec<crate::pointer::Basis>, recodings: Vec<(String, CMatrix)> },
    Horizon { model: InteriorModel, pipelines: Vec<Evolver>, traces: PolicyFamily, opts: SelectionOptions },
}

pub(crate) enum IsingRecoding {
    Flip,
    Geometric(Recoding),
}

pub fn member_rng(seed: u64, member: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member as u64);
    rng
}

fn field_gap(reference: &Field, other: &Field) -> Result<f64> {
    Ok(reference.sub(other)?.rms() / (1.0 + reference.rms()))
}

fn geometric(names: &[String]) -> Result<Vec<Recoding>> {
    names
        .iter()
        .map(|n| {
            let r = Recoding::by_name(n)?;
            if !r.is_geometric() {
                return invalid(format!("recoding '{n}' is not a symmetry of the grid"));
            }
            Ok(r)
        })
        .collect()
}

pub(crate) fn prepare(cfg: &ProtocolConfig, fam: &PolicyFamily) -> Result<Setup> {
    Ok(match cfg.protocol {
        ProtocolKind::Imaging => {
            let p = &cfg.imaging;
            if p.size < 4 || !(p.noise > 0.0) || p.blobs == 0 {
                return invalid("imaging needs size >= 4, noise > 0 and at least one blob");
            }
            let mut pipe = Pipeline::new(LambdaGrid::geometric(p.lambda0, p.lambda_count)?);
            pipe.discrepancy = DiscrepancyOptions { rule: LambdaRule::Greatest, search: Search::Bisection, ..Default::default() };
            Setup::Imaging { pipe, recodings: geometric(&cfg.recodings)? }
        }
        ProtocolKind::Barrier => {
            let p = &cfg.barrier;
            let envs = mixed_ensemble(cfg.seed, cfg.ensemble_size, p.cells, p.min_len)?;
            let ladder = ThetaLadder::rational(1, p.denom as i64, p.denom, p.settle_level.unwrap_or(cfg.levels))?;
            Setup::Barrier { envs, ladder, recodings: geometric(&cfg.recodings)? }
        }
        ProtocolKind::Ising => {
            let p = &cfg.ising;
            if !(0.0..=1.0).contains(&p.p_up) {
                return invalid("p_up must lie in [0, 1]");
            }
            let nd = fam.policies()[0].stage(1)?.dims.len();
            let coupling = CouplingSpec::nearest(nd, p.coupling, p.field)?;
            let mut core = vec![usize::MAX; nd];
            for pol in fam.policies() {
                if pol.stage(1)?.dims.len() != nd {
                    return invalid("ising policies differ in dimension");
                }
                for (c, &d) in core.iter_mut().zip(&pol.stage(1)?.dims) {
                    *c = (*c).min(d);
                }
            }
            let core: Vec<usize> = core.iter().map(|&m| (m as f64 * p.core_fraction).floor() as usize).collect();
            if !(p.core_fraction > 0.0 && p.core_fraction <= 1.0) || core.contains(&0) {
                return invalid("ising core is empty; raise core_fraction or the base box");
            }
            let recodings = cfg
                .recodings
                .iter()
                .map(|n| if n == "flip" { Ok(IsingRecoding::Flip) } else { Ok(IsingRecoding::Geometric(geometric(std::slice::from_ref(n))?.remove(0))) })
                .collect::<Result<Vec<_>>>()?;
            Setup::Ising { coupling, core, recodings }
        }
        ProtocolKind::Pointer => {
            let p = &cfg.pointer;
            let rho = DensityMatrix::pure(&p.psi0.iter().map(|&a| Complex64::new(a, 0.0)).collect::<Vec<_>>())?;
            let (model, env_h) = match p.model {
                PointerPreset::Dephasing => (dephasing_model(p.coupling, rho)?, pauli('z')),
                PointerPreset::SpinBosonTruncated => {
                    let m = spin_boson_truncated(p.eps, p.tunnelling, p.omega, p.coupling, p.env_levels, rho)?;
                    let n = CMatrix::from_diagonal(&DVector::from_fn(p.env_levels, |k, _| Complex64::new(p.omega * k as f64, 0.0)));
                    (m, n)
                }
                PointerPreset::Custom => {
                    let Some(path) = &p.hamiltonian_file else {
                        return invalid("custom pointer model needs hamiltonian_file");
                    };
                    let h = parse_matrix(&std::fs::read_to_string(path)?)?;
                    if p.dim_s == 0 || h.nrows() % p.dim_s != 0 {
                        return invalid("hamiltonian size is not a multiple of dim_s");
                    }
                    let de = h.nrows() / p.dim_s;
                    let m = PointerModel::new(HilbertSpec::new(p.dim_s, de)?, h, rho)?;
                    let ladder = CMatrix::from_diagonal(&DVector::from_fn(de, |k, _| Complex64::new(k as f64, 0.0)));
                    (m, ladder)
                }
            };
            if !(p.horizon > 0.0) || !(p.beta_min > 0.0 && p.beta_max >= p.beta_min) {
                return invalid("pointer needs horizon > 0 and 0 < beta_min <= beta_max");
            }
            let menu = p.menu.iter().map(|n| named_basis(n, model.spec.dim_s)).collect::<Result<Vec<_>>>()?;
            let de = model.spec.dim_e;
            let recodings = cfg
                .recodings
                .iter()
                .map(|n| Ok((n.clone(), env_recoding(n, de)?)))
                .collect::<Result<Vec<_>>>()?;
            Setup::Pointer { model, env_h, menu, recodings }
        }
        ProtocolKind::Horizon => {
            let p = &cfg.horizon;
            let model = InteriorModel::with_length(p.kappa, p.potential.clone(), 0.0, p.span, 2.0 * PI)?;
            let names: Vec<String> = if cfg.recodings.is_empty() {
                vec!["leapfrog".into(), "characteristic".into()]
            } else {
                cfg.recodings.clone()
            };
            let pipelines = names.iter().map(|n| Evolver::by_name(n)).collect::<Result<Vec<_>>>()?;
            let traces = PolicyFamily::new(vec![
                RefinementPolicy::geometric("end", Scheme::Nearest, &[4], 2, 3, 1, 2, 1)?,
                RefinementPolicy::geometric("mid", Scheme::Bilinear, &[4], 2, 3, 1, 2, 1)?,
                RefinementPolicy::geometric("mean", Scheme::Conservative, &[2], 2, 3, 1, 2, 1)?,
            ])?;
            let opts = SelectionOptions { q_grid: p.q_grid.clone(), ..Default::default() };
            Setup::Horizon { model, pipelines, traces, opts }
        }
    })
}

/// Unitary re-encodings of the environment: `identity`, `env-reverse`
/// (basis order reversed), `env-fourier` (discrete Fourier transform) and
/// `env-phase` (diagonal phases `e^{ik}`).
pub fn env_recoding(name: &str, d: usize) -> Result<CMatrix> {
    Ok(match name {
        "identity" => CMatrix::identity(d, d),
        "env-reverse" => CMatrix::from_fn(d, d, |i, j| Complex64::new((i + j + 1 == d) as u8 as f64, 0.0)),
        "env-fourier" => CMatrix::from_fn(d, d, |i, j| {
            Complex64::from_polar(1.0 / (d as f64).sqrt(), 2.0 * PI * (i * j) as f64 / d as f64)
        }),
        "env-phase" => CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::from_polar(1.0, i as f64) } else { Complex64::new(0.0, 0.0) }),
        _ => return invalid(format!("unknown environment recoding '{name}'")),
    })
}

/// Sum of seeded Gaussian blobs on the unit square, values in roughly `[0, 1]`.
pub fn smooth_phantom(rng: &mut impl Rng, size: usize, blobs: usize) -> Result<Field> {
    let params: Vec<(f64, f64, f64, f64)> = (0..blobs)
        .map(|_| (rng.random_range(0.25..0.75), rng.random_range(0.25..0.75), rng.random_range(0.08..0.2), rng.random_range(0.4..1.0)))
        .collect();
    Ok(Field::from_fn(Grid::unit(&[size, size], Topology::Free)?, |x| {
        params
            .iter()
            .map(|&(cx, cy, w, a)| a * (-((x[0] - cx).powi(2) + (x[1] - cy).powi(2)) / (2.0 * w * w)).exp())
            .sum()
    }))
}

pub(crate) fn run_member(cfg: &ProtocolConfig, fam: &PolicyFamily, setup: &Setup, member: usize) -> Result<MemberRun> {
    let levels = cfg.levels;
    let mut rng = member_rng(cfg.seed, member);
    let pols = fam.policies();
    match setup {
        Setup::Imaging { pipe, recodings } => {
            let p = &cfg.imaging;
            let clean = smooth_phantom(&mut rng, p.size, p.blobs)?;
            let noise = Normal::new(0.0, p.noise).map_err(|e| crate::error::Error::InvalidArgument(e.to_string()))?;
            let mut data = clean;
            for v in data.values_mut() {
                *v += noise.sample(&mut rng);
            }
            let prob = InverseProblem::new(
                crate::tv::ForwardOperator::Identity,
                data.clone(),
                p.noise * (data.len() as f64).sqrt(),
                p.tau,
                crate::tv::DEFAULT_MU,
            )?;
            let recoded = recodings
                .iter()
                .map(|r| prob.with_data(r.forward(&data)?))
                .collect::<Result<Vec<_>>>()?;
            let mut outputs = Vec::new();
            let mut gaps = vec![0.0f64; levels];
            let mut lambdas = Vec::new();
            for pol in pols {
                let mut row = Vec::new();
                for n in 1..=levels {
                    let rec = reconstruct(&prob, pol, n, pipe)?;
                    for (r, q) in recodings.iter().zip(&recoded) {
                        let other = reconstruct(q, pol, n, pipe)?.u;
                        let usd = r.state_map(&rec.u)?;
                        gaps[n - 1] = gaps[n - 1].max(usd.sub(&other)?.rms() / (1.0 + rec.u.rms()));
                    }
                    lambdas.push(rec.lambda);
                    row.push(rec.u);
                }
                outputs.push(row);
            }
            Ok(MemberRun { outputs, gaps, extra: json!({ "lambdas": lambdas }) })
        }
        Setup::Barrier { envs, ladder, recodings } => {
            let m = &envs[member];
            let theta = calibrate_theta(&m.env, cfg.barrier.target, fam, ladder)?;
            let mask = |f: Field| f.map(|v| (v >= theta) as u8 as f64);
            let mut outputs = Vec::new();
            let mut gaps = vec![0.0f64; levels];
            let recoded = recodings
                .iter()
                .map(|r| {
                    let env = r.forward(&m.env)?;
                    Ok((env.clone(), calibrate_theta(&env, cfg.barrier.target, fam, ladder)?))
                })
                .collect::<Result<Vec<_>>>()?;
            for pol in pols {
                let mut row = Vec::new();
                for n in 1..=levels {
                    let out = mask(refine(&m.env, pol, n)?);
                    for (r, (env, th)) in recodings.iter().zip(&recoded) {
                        let other = refine(env, pol, n)?.map(|v| (v >= *th) as u8 as f64);
                        gaps[n - 1] = gaps[n - 1].max(other.sub(&r.forward(&out)?)?.rms() / (1.0 + out.rms()));
                    }
                    row.push(out);
                }
                outputs.push(row);
            }
            let mut extra = json!({ "theta": theta, "shape": m.shape });
            if cfg.barrier.capacity {
                let spec = BarrierSpec::new(m.env.clone(), theta);
                let (unique, est) = markov_unique(&spec, &CapacityOptions::default())?;
                extra["markov_unique"] = json!(unique);
                extra["expected_unique"] = json!(m.shape.markov_unique());
                extra["energies"] = json!(est.energies());
            }
            Ok(MemberRun { outputs, gaps, extra })
        }
        Setup::Ising { coupling, core, recodings } => {
            let p = &cfg.ising;
            let seed: u64 = rng.random();
            let gen = SpinGenerator::Random { seed, p_up: p.p_up };
            let core_grid = Grid::unit(core, Topology::Free)?;
            let lo: Vec<i64> = core.iter().map(|&w| -((w / 2) as i64)).collect();
            let mut outputs = Vec::new();
            let mut gaps = vec![0.0f64; levels];
            let mut cycles = Vec::new();
            for pol in pols {
                let mut row = Vec::new();
                for n in 1..=levels {
                    let dims = &pol.stage(n)?.dims;
                    let s0 = SpinConfig::centred(dims, p.topology, |g| gen.spin(g))?;
                    let ev = evolve(&s0, coupling, &p.rule, p.steps);
                    cycles.push(ev.cycle.as_ref().map(|c| c.from_step));
                    let fin = &ev.final_config;
                    let values = (0..core_grid.len())
                        .map(|i| {
                            let c = core_grid.coords(i);
                            let g: Vec<i64> = c.iter().zip(&lo).map(|(&x, &l)| l + x as i64).collect();
                            fin.site_of(&g).map(|k| fin.spins[k] as f64).ok_or_else(|| {
                                crate::error::Error::InvalidArgument("ising core leaves the box".into())
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    row.push(Field::new(core_grid.clone(), values)?);
                    for r in recodings {
                        let g = ising_gap(&s0, fin, r, coupling, &p.rule, p.steps)?;
                        gaps[n - 1] = gaps[n - 1].max(g);
                    }
                }
                outputs.push(row);
            }
            Ok(MemberRun { outputs, gaps, extra: json!({ "spin_seed": seed, "cycle_from": cycles }) })
        }
        Setup::Pointer { model, env_h, menu, recodings } => {
            let p = &cfg.pointer;
            let beta = rng.random_range(p.beta_min..=p.beta_max);
            let rho_e = DensityMatrix::thermal(env_h, beta)?;
            let phis = |m: &PointerModel, r: &DensityMatrix, intervals: usize| -> Result<Vec<f64>> {
                let quad = TimeGridQuadrature::trapezoid(p.horizon, intervals)?;
                menu.iter().map(|b| decoherence_functional(b, r, m, &quad)).collect()
            };
            let grid = Grid::unit(&[menu.len()], Topology::Free)?;
            let recoded = recodings
                .iter()
                .map(|(_, w)| Ok((model.recode_env(w)?, rho_e.conjugate(w))))
                .collect::<Result<Vec<_>>>()?;
            let mut outputs = Vec::new();
            let mut gaps = vec![0.0f64; levels];
            let mut chosen = String::new();
            for pol in pols {
                let mut row = Vec::new();
                for n in 1..=levels {
                    let st = pol.stage(n)?;
                    let intervals = st.dims.iter().product::<usize>() * st.samples.max(1);
                    let f = Field::new(grid.clone(), phis(model, &rho_e, intervals)?)?;
                    for (m, r) in &recoded {
                        let g = Field::new(grid.clone(), phis(m, r, intervals)?)?;
                        gaps[n - 1] = gaps[n - 1].max(field_gap(&f, &g)?);
                    }
                    row.push(f);
                }
                let last = row.last().unwrap().values();
                let k = (0..last.len()).fold(0, |k, i| if last[i] < last[k] { i } else { k });
                chosen = menu[k].label.clone();
                outputs.push(row);
            }
            Ok(MemberRun { outputs, gaps, extra: json!({ "beta": beta, "chosen": chosen }) })
        }
        Setup::Horizon { model, pipelines, traces, opts } => {
            let datum = CauchyDatum::Pulse {
                center: rng.random_range(0.0..2.0 * PI),
                width: rng.random_range(0.4..0.8),
                amplitude: rng.random_range(0.5..1.5),
                direction: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            };
            let pick = |e: Evolver, n: usize| -> Result<Field> {
                let sol = evolve_interior(model, &datum, e, n)?;
                let c = extract_traces(model, &sol, traces, DEFAULT_FLUX_CAP_FACTOR)?;
                Ok(select_continuation(&c, opts)?.chosen.trace)
            };
            let mut outputs = Vec::new();
            let mut gaps = vec![0.0f64; levels];
            for pol in pols {
                let mut row = Vec::new();
                for n in 1..=levels {
                    let st = pol.stage(n)?;
                    let res = st.dims.iter().product::<usize>() * st.samples.max(1);
                    let reference = pick(pipelines[0], res)?;
                    for &e in &pipelines[1..] {
                        gaps[n - 1] = gaps[n - 1].max(field_gap(&reference, &pick(e, res)?)?);
                    }
                    row.push(reference);
                }
                outputs.push(row);
            }
            Ok(MemberRun { outputs, gaps, extra: json!({ "datum": datum }) })
        }
    }
}

/// Fraction of sites where recoding the evolved state differs from evolving the recoded state.
fn ising_gap(
    s0: &SpinConfig,
    fin: &SpinConfig,
    r: &IsingRecoding,
    c: &CouplingSpec,
    rule: &TieBreakRule,
    steps: usize,
) -> Result<f64> {
    let (expect, got) = match r {
        IsingRecoding::Flip => {
            let swapped = match rule {
                TieBreakRule::Plus => TieBreakRule::Minus,
                TieBreakRule::Minus => TieBreakRule::Plus,
                other => *other,
            };
            (fin.flipped().spins, evolve(&s0.flipped(), c, &swapped, steps).final_config.spins)
        }
        IsingRecoding::Geometric(g) => {
            let to_field = |s: &SpinConfig| Field::new(s.grid(), s.spins.iter().map(|&v| v as f64).collect());
            let moved = g.forward(&to_field(s0)?)?;
            let dims = moved.grid().dims().to_vec();
            let mut t0 = SpinConfig::new(&dims, s0.topology[0], moved.values().iter().map(|&v| v as i8).collect())?;
            t0.origin = dims.iter().map(|&d| -((d / 2) as i64)).collect();
            let expect = g.forward(&to_field(fin)?)?.values().iter().map(|&v| v as i8).collect::<Vec<_>>();
            (expect, evolve(&t0, c, rule, steps).final_config.spins)
        }
    };
    Ok(expect.iter().zip(&got).filter(|(a, b)| a != b).count() as f64 / expect.len() as f64)
}
