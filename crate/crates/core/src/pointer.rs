//! Decoherence functional and pointer-basis selection on small composite systems.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{PolicyFamily, Scheme};

pub type CMatrix = DMatrix<Complex64>;

pub const DEFAULT_DIM_CAP: usize = 64;
pub const MATRIX_TOL: f64 = 1e-10;
pub const DEFAULT_TIE_TOL: f64 = 1e-9;
pub const DENSITY_SLACK: f64 = 1e-12;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertSpec {
    pub dim_s: usize,
    pub dim_e: usize,
}

impl HilbertSpec {
    pub fn new(dim_s: usize, dim_e: usize) -> Result<Self> {
        HilbertSpec::with_cap(dim_s, dim_e, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(dim_s: usize, dim_e: usize, cap: usize) -> Result<Self> {
        if dim_s == 0 || dim_e == 0 || dim_s * dim_e > cap {
            return invalid(format!("dimensions {dim_s}x{dim_e} outside 1..={cap}"));
        }
        Ok(HilbertSpec { dim_s, dim_e })
    }

    pub fn total(&self) -> usize {
        self.dim_s * self.dim_e
    }
}

fn hermitian_defect(m: &CMatrix) -> f64 {
    (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn is_unitary(m: &CMatrix) -> bool {
    m.is_square() && (m.adjoint() * m - CMatrix::identity(m.nrows(), m.ncols())).iter().all(|z| z.norm() <= MATRIX_TOL)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return invalid("density matrix must be square");
        }
        if hermitian_defect(&m) > MATRIX_TOL {
            return invalid("density matrix is not Hermitian");
        }
        if (m.trace().re - 1.0).abs() > MATRIX_TOL {
            return invalid(format!("trace {} != 1", m.trace().re));
        }
        let h = (&m + m.adjoint()) * c(0.5);
        if h.symmetric_eigenvalues().min() < -MATRIX_TOL {
            return invalid("density matrix is not positive semidefinite");
        }
        Ok(DensityMatrix(m))
    }

    pub fn diagonal(p: &[f64]) -> Result<Self> {
        DensityMatrix::new(CMatrix::from_diagonal(&DVector::from_iterator(p.len(), p.iter().map(|&x| c(x)))))
    }

    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let v = DVector::from_column_slice(psi);
        let n = v.norm();
        if n == 0.0 {
            return invalid("zero state vector");
        }
        let v = v / c(n);
        DensityMatrix::new(&v * v.adjoint())
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        DensityMatrix::diagonal(&vec![1.0 / d as f64; d])
    }

    /// Gibbs state `exp(-beta H) / Z`.
    pub fn thermal(h: &CMatrix, beta: f64) -> Result<Self> {
        if hermitian_defect(h) > MATRIX_TOL {
            return invalid("Hamiltonian is not Hermitian");
        }
        let eig = h.clone().symmetric_eigen();
        let e0 = eig.eigenvalues.min();
        let w: Vec<f64> = eig.eigenvalues.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
        let z: f64 = w.iter().sum();
        let d = DVector::from_iterator(w.len(), w.iter().map(|&x| c(x / z)));
        let v = &eig.eigenvectors;
        let m = v * CMatrix::from_diagonal(&d) * v.adjoint();
        DensityMatrix::new((&m + m.adjoint()) * c(0.5))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(self.0.kronecker(&other.0))
    }

    pub fn conjugate(&self, w: &CMatrix) -> DensityMatrix {
        DensityMatrix(w * &self.0 * w.adjoint())
    }

    /// Trace over the second factor of an `S (x) E` state.
    pub fn partial_trace_env(&self, spec: HilbertSpec) -> Result<DensityMatrix> {
        if self.dim() != spec.total() {
            return invalid("state does not match the composite dimension");
        }
        let (ds, de) = (spec.dim_s, spec.dim_e);
        let m = CMatrix::from_fn(ds, ds, |a, b| (0..de).map(|e| self.0[(a * de + e, b * de + e)]).sum());
        Ok(DensityMatrix(m))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    pub label: String,
    pub matrix: CMatrix,
}

/// Finite menu of orthonormal bases on the system, kept sorted by label.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisMenu(Vec<Basis>);

impl BasisMenu {
    pub fn new(mut bases: Vec<Basis>) -> Result<Self> {
        if bases.is_empty() {
            return invalid("basis menu is empty");
        }
        let d = bases[0].matrix.nrows();
        for b in &bases {
            if b.matrix.nrows() != d || !is_unitary(&b.matrix) {
                return invalid(format!("basis {} is not unitary of size {d}", b.label));
            }
        }
        bases.sort_by(|a, b| a.label.cmp(&b.label));
        if bases.windows(2).any(|w| w[0].label == w[1].label) {
            return invalid("duplicate basis labels");
        }
        Ok(BasisMenu(bases))
    }

    pub fn bases(&self) -> &[Basis] {
        &self.0
    }

    pub fn labels(&self) -> Vec<String> {
        self.0.iter().map(|b| b.label.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.0[0].matrix.nrows()
    }

    /// Standard qubit menu: computational, Hadamard and circular bases.
    pub fn qubit() -> Self {
        BasisMenu::new(vec![named_basis("z", 2).unwrap(), named_basis("x", 2).unwrap(), named_basis("y", 2).unwrap()])
            .unwrap()
    }

    /// `V B_k` for every entry.
    pub fn relabel(&self, v: &CMatrix) -> Result<Self> {
        BasisMenu::new(self.0.iter().map(|b| Basis { label: b.label.clone(), matrix: v * &b.matrix }).collect())
    }
}

/// `z` (computational), `fourier` (momentum-like), and for qubits `x`, `y`, `tilt` (pi/8 rotation).
pub fn named_basis(name: &str, d: usize) -> Result<Basis> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let matrix = match (name, d) {
        ("z", _) => CMatrix::identity(d, d),
        ("fourier", _) => CMatrix::from_fn(d, d, |j, k| {
            Complex64::from_polar(1.0 / (d as f64).sqrt(), 2.0 * PI * (j * k) as f64 / d as f64)
        }),
        ("x", 2) => CMatrix::from_row_slice(2, 2, &[c(s), c(s), c(s), c(-s)]),
        ("y", 2) => CMatrix::from_row_slice(2, 2, &[c(s), c(s), I * s, -I * s]),
        ("tilt", 2) => {
            let (co, si) = ((PI / 8.0).cos(), (PI / 8.0).sin());
            CMatrix::from_row_slice(2, 2, &[c(co), c(-si), c(si), c(co)])
        }
        _ => return invalid(format!("unknown basis {name} for dimension {d}")),
    };
    Ok(Basis { label: name.to_string(), matrix })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGridQuadrature {
    pub horizon: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TimeGridQuadrature {
    pub fn new(horizon: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) || nodes.is_empty() || nodes.len() != weights.len() {
            return invalid("quadrature needs a positive horizon and matching nodes and weights");
        }
        if weights.iter().any(|&w| !(w > 0.0))
            || nodes.windows(2).any(|w| w[0] >= w[1])
            || nodes[0] < 0.0
            || *nodes.last().unwrap() > horizon
        {
            return invalid("quadrature nodes must ascend in [0, T] with positive weights");
        }
        Ok(TimeGridQuadrature { horizon, nodes, weights })
    }

    /// Composite trapezoid rule with `intervals` panels.
    pub fn trapezoid(horizon: f64, intervals: usize) -> Result<Self> {
        if intervals == 0 {
            return invalid("need at least one interval");
        }
        let h = horizon / intervals as f64;
        let nodes = (0..=intervals).map(|k| k as f64 * h).collect();
        let weights = (0..=intervals).map(|k| if k == 0 || k == intervals { h / 2.0 } else { h }).collect();
        TimeGridQuadrature::new(horizon, nodes, weights)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64 + Sync) -> f64 {
        let vals: Vec<f64> = self.nodes.par_iter().map(|&t| f(t)).collect();
        vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// System-environment model: Hamiltonian on `S (x) E` and initial system state.
#[derive(Clone, Debug)]
pub struct PointerModel {
    pub spec: HilbertSpec,
    pub hamiltonian: CMatrix,
    pub rho_s0: DensityMatrix,
    eigvals: Vec<f64>,
    eigvecs: CMatrix,
}

impl PointerModel {
    pub fn new(spec: HilbertSpec, hamiltonian: CMatrix, rho_s0: DensityMatrix) -> Result<Self> {
        if hamiltonian.nrows() != spec.total() || hamiltonian.ncols() != spec.total() {
            return invalid("Hamiltonian does not match the composite dimension");
        }
        if hermitian_defect(&hamiltonian) > MATRIX_TOL {
            return invalid("Hamiltonian is not Hermitian");
        }
        if rho_s0.dim() != spec.dim_s {
            return invalid("system state does not match dim_s");
        }
        let eig = hamiltonian.clone().symmetric_eigen();
        Ok(PointerModel {
            spec,
            hamiltonian,
            rho_s0,
            eigvals: eig.eigenvalues.iter().copied().collect(),
            eigvecs: eig.eigenvectors,
        })
    }

    pub fn with_system_state(&self, rho_s0: DensityMatrix) -> Result<Self> {
        PointerModel::new(self.spec, self.hamiltonian.clone(), rho_s0)
    }

    /// Same physics written in a rotated environment frame `W`.
    pub fn recode_env(&self, w: &CMatrix) -> Result<Self> {
        if w.nrows() != self.spec.dim_e || !is_unitary(w) {
            return invalid("environment recoding must be unitary on E");
        }
        let full = CMatrix::identity(self.spec.dim_s, self.spec.dim_s).kronecker(w);
        let h = &full * &self.hamiltonian * full.adjoint();
        PointerModel::new(self.spec, (&h + h.adjoint()) * c(0.5), self.rho_s0.clone())
    }

    /// `V (x) I` applied to the Hamiltonian and `V rho V^dagger` to the system state.
    pub fn relabel_system(&self, v: &CMatrix) -> Result<Self> {
        let full = v.kronecker(&CMatrix::identity(self.spec.dim_e, self.spec.dim_e));
        let h = &full * &self.hamiltonian * full.adjoint();
        PointerModel::new(self.spec, (&h + h.adjoint()) * c(0.5), self.rho_s0.conjugate(v))
    }

    fn propagate(&self, rho: &CMatrix, t: f64) -> CMatrix {
        let v = &self.eigvecs;
        let mut m = v.adjoint() * rho * v;
        for (j, &ej) in self.eigvals.iter().enumerate() {
            for (k, &ek) in self.eigvals.iter().enumerate() {
                m[(j, k)] *= Complex64::from_polar(1.0, -(ej - ek) * t);
            }
        }
        v * m * v.adjoint()
    }

    pub fn composite(&self, rho_e: &DensityMatrix) -> Result<DensityMatrix> {
        if rho_e.dim() != self.spec.dim_e {
            return invalid("environment state does not match dim_e");
        }
        Ok(self.rho_s0.tensor(rho_e))
    }

    /// Reduced system state at time `t`.
    pub fn reduced(&self, rho_e: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        let rho = self.composite(rho_e)?;
        DensityMatrix(self.propagate(rho.matrix(), t)).partial_trace_env(self.spec)
    }

    pub fn coherence(&self, b: &Basis, rho_e: &DensityMatrix, t: f64) -> Result<f64> {
        offdiag_norm(&self.reduced(rho_e, t)?, b)
    }
}

/// `exp(-iHt) rho exp(iHt)`.
pub fn evolve_state(h: &CMatrix, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    if !h.is_square() || h.nrows() != rho.dim() {
        return invalid("Hamiltonian and state differ in dimension");
    }
    if hermitian_defect(h) > MATRIX_TOL {
        return invalid("Hamiltonian is not Hermitian");
    }
    if !(t >= 0.0) {
        return invalid("time must be non-negative");
    }
    let spec = HilbertSpec::with_cap(rho.dim(), 1, usize::MAX)?;
    let m = PointerModel::new(spec, h.clone(), rho.clone())?;
    Ok(DensityMatrix(m.propagate(rho.matrix(), t)))
}

/// Trace norm of `B^dagger rho B` with its diagonal removed.
pub fn offdiag_norm(rho: &DensityMatrix, b: &Basis) -> Result<f64> {
    if rho.dim() != b.matrix.nrows() {
        return invalid("basis and state differ in dimension");
    }
    let mut m = b.matrix.adjoint() * rho.matrix() * &b.matrix;
    for k in 0..m.nrows() {
        m[(k, k)] = c(0.0);
    }
    Ok(m.singular_values().sum())
}

pub fn decoherence_functional(
    b: &Basis,
    rho_e: &DensityMatrix,
    model: &PointerModel,
    quad: &TimeGridQuadrature,
) -> Result<f64> {
    let rho = model.composite(rho_e)?;
    if b.matrix.nrows() != model.spec.dim_s {
        return invalid("basis does not act on the system");
    }
    let vals: Vec<Result<f64>> = quad
        .nodes
        .par_iter()
        .map(|&t| {
            let r = DensityMatrix(model.propagate(rho.matrix(), t)).partial_trace_env(model.spec)?;
            offdiag_norm(&r, b)
        })
        .collect();
    let mut acc = 0.0;
    for (v, w) in vals.into_iter().zip(&quad.weights) {
        acc += v? * w;
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Labels within the tie tolerance of the minimum, in label order.
    pub argmin: Vec<String>,
    pub values: Vec<(String, f64)>,
}

impl Selection {
    pub fn chosen(&self) -> &str {
        &self.argmin[0]
    }
}

pub fn preferred_basis(
    menu: &BasisMenu,
    rho_e: &DensityMatrix,
    model: &PointerModel,
    quad: &TimeGridQuadrature,
    tie_tol: f64,
) -> Result<Selection> {
    let values = menu
        .bases()
        .iter()
        .map(|b| Ok((b.label.clone(), decoherence_functional(b, rho_e, model, quad)?)))
        .collect::<Result<Vec<_>>>()?;
    let min = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let argmin = values.iter().filter(|v| v.1 <= min + tie_tol).map(|v| v.0.clone()).collect();
    Ok(Selection { argmin, values })
}

/// Sampling times of a policy stage over `[0, T]`: one per cell, placed by the scheme.
pub fn sample_times(horizon: f64, cells: usize, scheme: Scheme) -> Vec<Vec<f64>> {
    let h = horizon / cells as f64;
    (0..cells)
        .map(|k| match scheme {
            Scheme::Nearest => vec![(k + 1) as f64 * h],
            Scheme::Bilinear => vec![(k as f64 + 0.5) * h],
            Scheme::Conservative => (0..4).map(|j| (k as f64 + (j as f64 + 0.5) / 4.0) * h).collect(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// Per policy: exceedance fraction over the tail window for each q.
    pub densities: Vec<Vec<f64>>,
}

/// For every policy some `q` has tail exceedance fraction `<= density_tol`.
/// The tail is the second half of the policy's finest sampling stage; each
/// sample is the mean coherence over its cell's probe times.
pub fn universally_stable(
    b: &Basis,
    rho_e: &DensityMatrix,
    model: &PointerModel,
    horizon: f64,
    fam: &PolicyFamily,
    q_grid: &[f64],
    density_tol: f64,
) -> Result<StabilityReport> {
    if q_grid.is_empty() || q_grid.iter().any(|&q| !(q > 0.0)) {
        return invalid("q grid must hold positive values");
    }
    let mut densities = Vec::new();
    for p in fam.policies() {
        let stage = p.stage(fam.max_level())?;
        let cells: usize = stage.dims.iter().product::<usize>() * stage.samples.max(1);
        let times = sample_times(horizon, cells, p.scheme);
        let tail = &times[cells / 2..];
        let samples = tail
            .par_iter()
            .map(|ts| {
                let mut s = 0.0;
                for &t in ts {
                    s += model.coherence(b, rho_e, t)?;
                }
                Ok(s / ts.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        densities.push(
            q_grid
                .iter()
                .map(|&q| samples.iter().filter(|&&s| s > q).count() as f64 / samples.len() as f64)
                .collect::<Vec<_>>(),
        );
    }
    let stable = densities.iter().all(|d| d.iter().any(|&x| x <= density_tol + DENSITY_SLACK));
    Ok(StabilityReport { stable, densities })
}

/// Tie-breaking cost among the arg-min set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondaryCost {
    /// Off-diagonal norm at the horizon.
    #[default]
    TerminalOffdiag,
    /// Largest off-diagonal norm over the quadrature nodes.
    PeakOffdiag,
}

impl SecondaryCost {
    pub fn evaluate(&self, b: &Basis, rho_e: &DensityMatrix, model: &PointerModel, quad: &TimeGridQuadrature) -> Result<f64> {
        match self {
            SecondaryCost::TerminalOffdiag => model.coherence(b, rho_e, quad.horizon),
            SecondaryCost::PeakOffdiag => {
                let mut m: f64 = 0.0;
                for &t in &quad.nodes {
                    m = m.max(model.coherence(b, rho_e, t)?);
                }
                Ok(m)
            }
        }
    }
}

/// Secondary-cost refinement of the arg-min set restricted to universally stable bases.
#[allow(clippy::too_many_arguments)]
pub fn canonical_basis(
    menu: &BasisMenu,
    rho_e: &DensityMatrix,
    model: &PointerModel,
    quad: &TimeGridQuadrature,
    fam: &PolicyFamily,
    q_grid: &[f64],
    cost: SecondaryCost,
) -> Result<Option<String>> {
    let sel = preferred_basis(menu, rho_e, model, quad, DEFAULT_TIE_TOL)?;
    let mut best: Option<(f64, String)> = None;
    for b in menu.bases().iter().filter(|b| sel.argmin.contains(&b.label)) {
        if !universally_stable(b, rho_e, model, quad.horizon, fam, q_grid, 0.0)?.stable {
            continue;
        }
        let v = cost.evaluate(b, rho_e, model, quad)?;
        if best.as_ref().is_none_or(|(bv, _)| v < *bv - DEFAULT_TIE_TOL) {
            best = Some((v, b.label.clone()));
        }
    }
    Ok(best.map(|b| b.1))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyMap {
    pub labels: Vec<String>,
    /// One frequency table per environment encoding (identity first).
    pub tables: Vec<Vec<f64>>,
    pub drift: f64,
}

impl FrequencyMap {
    pub fn frequency(&self, label: &str) -> f64 {
        self.labels.iter().position(|l| l == label).map_or(0.0, |i| self.tables[0][i])
    }
}

/// Selection frequencies over an environment ensemble, repeated under each
/// unitary re-encoding `W` of the environment.
pub fn basis_frequency_map(
    ensemble: &[DensityMatrix],
    menu: &BasisMenu,
    model: &PointerModel,
    quad: &TimeGridQuadrature,
    recodings: &[CMatrix],
) -> Result<FrequencyMap> {
    if ensemble.is_empty() {
        return invalid("empty environment ensemble");
    }
    let labels = menu.labels();
    let id = CMatrix::identity(model.spec.dim_e, model.spec.dim_e);
    let mut tables = Vec::new();
    for w in std::iter::once(&id).chain(recodings) {
        let m = model.recode_env(w)?;
        let picks = ensemble
            .par_iter()
            .map(|r| Ok(preferred_basis(menu, &r.conjugate(w), &m, quad, DEFAULT_TIE_TOL)?.chosen().to_string()))
            .collect::<Result<Vec<_>>>()?;
        tables.push(
            labels
                .iter()
                .map(|l| picks.iter().filter(|p| *p == l).count() as f64 / ensemble.len() as f64)
                .collect::<Vec<_>>(),
        );
    }
    let mut drift: f64 = 0.0;
    for a in &tables {
        for b in &tables {
            drift = drift.max(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>());
        }
    }
    Ok(FrequencyMap { labels, tables, drift })
}

pub fn pauli(k: char) -> CMatrix {
    match k {
        'x' => CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
        'y' => CMatrix::from_row_slice(2, 2, &[c(0.0), -I, I, c(0.0)]),
        'z' => CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)]),
        _ => CMatrix::identity(2, 2),
    }
}

/// `g sz (x) sz` on two qubits.
pub fn dephasing_model(g: f64, rho_s0: DensityMatrix) -> Result<PointerModel> {
    PointerModel::new(HilbertSpec::new(2, 2)?, pauli('z').kronecker(&pauli('z')) * c(g), rho_s0)
}

/// Qubit coupled through `sz` to several environment qubits with couplings `gs`.
pub fn spin_bath_model(gs: &[f64], rho_s0: DensityMatrix) -> Result<PointerModel> {
    let n = gs.len();
    let de = 1usize << n;
    let spec = HilbertSpec::new(2, de)?;
    let mut h = CMatrix::zeros(2 * de, 2 * de);
    for s in 0..2 {
        for e in 0..de {
            let zs = if s == 0 { 1.0 } else { -1.0 };
            let ze: f64 = (0..n).map(|k| if e >> (n - 1 - k) & 1 == 0 { gs[k] } else { -gs[k] }).sum();
            h[(s * de + e, s * de + e)] = c(zs * ze);
        }
    }
    PointerModel::new(spec, h, rho_s0)
}

/// Qubit dephased by an environment ladder `sz (x) delta diag(0..levels)`; with a
/// Gaussian population the coherence decays like `exp(-2 (delta s)^2 t^2)` until
/// the recurrence at `pi / delta`.
pub fn graded_bath_model(delta: f64, levels: usize, rho_s0: DensityMatrix) -> Result<PointerModel> {
    let spec = HilbertSpec::new(2, levels)?;
    let ladder = CMatrix::from_diagonal(&DVector::from_fn(levels, |e, _| c(delta * e as f64)));
    PointerModel::new(spec, pauli('z').kronecker(&ladder), rho_s0)
}

/// Thermal state of `(e - centre)^2` on `levels` states, i.e. a Gaussian of width `s`.
pub fn gaussian_population(levels: usize, s: f64) -> Result<DensityMatrix> {
    let mid = (levels as f64 - 1.0) / 2.0;
    let h = CMatrix::from_diagonal(&DVector::from_fn(levels, |e, _| c((e as f64 - mid).powi(2))));
    DensityMatrix::thermal(&h, 1.0 / (2.0 * s * s))
}

/// Qubit with tunnelling `delta` dephased by a harmonic mode truncated to `levels`:
/// `(eps/2) sz + (delta/2) sx + omega a^dag a + g sz (a + a^dag)`.
pub fn spin_boson_truncated(
    eps: f64,
    delta: f64,
    omega: f64,
    g: f64,
    levels: usize,
    rho_s0: DensityMatrix,
) -> Result<PointerModel> {
    let spec = HilbertSpec::new(2, levels)?;
    let a = CMatrix::from_fn(levels, levels, |i, j| if j == i + 1 { c((j as f64).sqrt()) } else { c(0.0) });
    let n = a.adjoint() * &a;
    let id_e = CMatrix::identity(levels, levels);
    let h = pauli('z').kronecker(&id_e) * c(eps / 2.0)
        + pauli('x').kronecker(&id_e) * c(delta / 2.0)
        + CMatrix::identity(2, 2).kronecker(&n) * c(omega)
        + pauli('z').kronecker(&(&a + a.adjoint())) * c(g);
    PointerModel::new(spec, h, rho_s0)
}

/// Thermal states of the harmonic mode `omega a^dag a` truncated to `levels`.
pub fn oscillator_thermal(omega: f64, levels: usize, beta: f64) -> Result<DensityMatrix> {
    let p: Vec<f64> = (0..levels).map(|k| (-beta * omega * k as f64).exp()).collect();
    let z: f64 = p.iter().sum();
    DensityMatrix::diagonal(&p.iter().map(|x| x / z).collect::<Vec<_>>())
}

/// Closed-form coherence factor of `g sz (x) sz` with the environment in `diag(p, 1-p)`.
pub fn dephasing_factor(g: f64, p: f64, t: f64) -> f64 {
    let (co, si) = ((2.0 * g * t).cos(), (2.0 * g * t).sin());
    (co * co + (2.0 * p - 1.0).powi(2) * si * si).sqrt()
}

/// Parses a matrix written as rows of `re,im` pairs separated by whitespace.
/// Blank lines and lines starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                let (re, im) = tok.split_once(',').unwrap_or((tok, "0"));
                match (re.parse::<f64>(), im.parse::<f64>()) {
                    (Ok(a), Ok(b)) => Ok(Complex64::new(a, b)),
                    _ => Err(Error::Parse { position: ln + 1, message: format!("bad entry {tok:?}") }),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Format("matrix rows are empty or ragged".into()));
    }
    Ok(CMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

pub fn format_matrix(m: &CMatrix) -> String {
    let mut s = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{},{}", m[(i, j)].re, m[(i, j)].im)).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn offdiag_examples() {
        let plus = DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap();
        let z = named_basis("z", 2).unwrap();
        let x = named_basis("x", 2).unwrap();
        assert!((offdiag_norm(&plus, &z).unwrap() - 1.0).abs() < 1e-12);
        assert!(offdiag_norm(&plus, &x).unwrap() < 1e-12);
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        for name in ["z", "x", "y", "tilt"] {
            assert!(offdiag_norm(&mixed, &named_basis(name, 2).unwrap()).unwrap() < 1e-12);
        }
    }

    #[test]
    fn sigma_z_phase() {
        let plus = DensityMatrix::pure(&[c(1.0), c(1.0)]).unwrap();
        let out = evolve_state(&pauli('z'), &plus, PI / 2.0).unwrap();
        // rho_01(t) = e^{-2it}/2 from the closed-form 2x2 propagator
        let want = Complex64::from_polar(0.5, -PI);
        assert!((out.matrix()[(0, 1)] - want).norm() < 1e-12);
        let q = evolve_state(&pauli('z'), &plus, PI / 4.0).unwrap();
        assert!((q.matrix()[(0, 1)] - (-I * 0.5)).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(DensityMatrix::diagonal(&[0.6, 0.6]).is_err());
        assert!(DensityMatrix::diagonal(&[1.2, -0.2]).is_err());
        assert!(HilbertSpec::new(2, 64).is_err());
        let bad = CMatrix::from_row_slice(2, 2, &[c(1.0), c(1.0), c(0.0), c(1.0)]);
        assert!(evolve_state(&bad, &DensityMatrix::maximally_mixed(2).unwrap(), 1.0).is_err());
        assert!(BasisMenu::new(vec![]).is_err());
        assert!(BasisMenu::new(vec![Basis { label: "b".into(), matrix: bad }]).is_err());
    }

    #[test]
    fn matrix_text_round_trip() {
        let m = pauli('y') * c(0.25) + pauli('x');
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        assert!(matches!(parse_matrix("1,0 2\n3,x 4"), Err(Error::Parse { position: 2, .. })));
    }
}
