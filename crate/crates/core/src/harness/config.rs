use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::indices::Thresholds;
use crate::error::{invalid, Error, Result};
use crate::grid::{PolicyFamily, RefinementPolicy, Scheme, Topology};
use crate::horizon::Potential;
use crate::ising::TieBreakRule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Imaging,
    Barrier,
    Ising,
    Pointer,
    Horizon,
}

impl ProtocolKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProtocolKind::Imaging => "imaging",
            ProtocolKind::Barrier => "barrier",
            ProtocolKind::Ising => "ising",
            ProtocolKind::Pointer => "pointer",
            ProtocolKind::Horizon => "horizon",
        }
    }

    fn axes(&self) -> &'static [usize] {
        match self {
            ProtocolKind::Imaging | ProtocolKind::Barrier => &[2],
            ProtocolKind::Ising => &[2, 3],
            ProtocolKind::Pointer | ProtocolKind::Horizon => &[1],
        }
    }
}

/// A geometric refinement policy: stage `n` has `base * ratio^(n-1)` cells per axis
/// and tolerance `2^-(tol_exp + (n-1) tol_step)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub id: String,
    pub scheme: Scheme,
    pub base: Vec<usize>,
    #[serde(default = "two")]
    pub ratio: usize,
    #[serde(default = "one")]
    pub samples: usize,
    #[serde(default = "two_u32")]
    pub tol_exp: u32,
    #[serde(default = "one_u32")]
    pub tol_step: u32,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn two_u32() -> u32 {
    2
}
fn one_u32() -> u32 {
    1
}
fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingParams {
    /// Side of the square data grid.
    pub size: usize,
    /// Standard deviation of the additive noise.
    pub noise: f64,
    pub blobs: usize,
    pub lambda0: f64,
    pub lambda_count: usize,
    pub tau: f64,
}

impl Default for ImagingParams {
    fn default() -> Self {
        ImagingParams { size: 128, noise: 0.05, blobs: 3, lambda0: 1e-3, lambda_count: 12, tau: 1.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierParams {
    pub cells: usize,
    pub min_len: usize,
    /// Target coverage fraction for the threshold calibration.
    pub target: f64,
    /// Thresholds are searched on `k / denom`.
    pub denom: u32,
    /// First level at which the calibration must hold (defaults to the last).
    pub settle_level: Option<usize>,
    /// Also run the capacity trend test per member (slow).
    pub capacity: bool,
}

impl Default for BarrierParams {
    fn default() -> Self {
        BarrierParams { cells: 16, min_len: 6, target: 0.06, denom: 16, settle_level: None, capacity: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsingParams {
    pub p_up: f64,
    pub steps: usize,
    pub coupling: f64,
    pub field: f64,
    pub rule: TieBreakRule,
    pub topology: Topology,
    pub core_fraction: f64,
}

impl Default for IsingParams {
    fn default() -> Self {
        IsingParams {
            p_up: 0.5,
            steps: 8,
            coupling: 1.0,
            field: 0.0,
            rule: TieBreakRule::Plus,
            topology: Topology::Free,
            core_fraction: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointerPreset {
    Dephasing,
    SpinBosonTruncated,
    Custom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointerParams {
    pub model: PointerPreset,
    /// Hamiltonian on `S (x) E` for the custom preset (rows of `re,im` pairs).
    pub hamiltonian_file: Option<String>,
    pub dim_s: usize,
    pub horizon: f64,
    pub coupling: f64,
    /// Oscillator levels, bias, tunnelling and frequency of the spin-boson preset.
    pub env_levels: usize,
    pub eps: f64,
    pub tunnelling: f64,
    pub omega: f64,
    pub beta_min: f64,
    pub beta_max: f64,
    pub menu: Vec<String>,
    /// Real amplitudes of the initial pure system state (normalised on use).
    pub psi0: Vec<f64>,
}

impl Default for PointerParams {
    fn default() -> Self {
        PointerParams {
            model: PointerPreset::Dephasing,
            hamiltonian_file: None,
            dim_s: 2,
            horizon: 4.0,
            coupling: 1.0,
            env_levels: 6,
            eps: 0.0,
            tunnelling: 0.0,
            omega: 1.0,
            beta_min: 0.05,
            beta_max: 0.5,
            menu: vec!["x".into(), "y".into(), "z".into()],
            psi0: vec![3.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HorizonParams {
    pub kappa: f64,
    pub potential: Potential,
    pub span: f64,
    pub q_grid: Vec<f64>,
}

impl Default for HorizonParams {
    fn default() -> Self {
        HorizonParams {
            kappa: 0.5,
            potential: Potential::Decaying { amplitude: 2.0, rate: 1.0, modulation: 0.5 },
            span: 2.0 * PI,
            q_grid: vec![0.05, 0.5, 5.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub ensemble_size: usize,
    /// Number of refinement stages per policy.
    pub levels: usize,
    /// Recoding names; for the horizon protocol these name equivalent pipelines.
    #[serde(default)]
    pub recodings: Vec<String>,
    /// Fraction of members that must succeed.
    #[serde(default = "half")]
    pub quorum: f64,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub imaging: ImagingParams,
    #[serde(default)]
    pub barrier: BarrierParams,
    #[serde(default)]
    pub ising: IsingParams,
    #[serde(default)]
    pub pointer: PointerParams,
    #[serde(default)]
    pub horizon: HorizonParams,
}

impl ProtocolConfig {
    pub fn from_toml(src: &str) -> Result<Self> {
        let cfg: ProtocolConfig = toml::from_str(src).map_err(|e| Error::InvalidArgument(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)?;
        ProtocolConfig::from_toml(&src)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return invalid("ensemble_size must be at least 1");
        }
        if self.levels < 2 {
            return invalid("levels must be at least 2");
        }
        if !(self.quorum > 0.0 && self.quorum <= 1.0) {
            return invalid("quorum must lie in (0, 1]");
        }
        if self.policies.is_empty() {
            return invalid("at least one policy is required");
        }
        for p in &self.policies {
            if !self.protocol.axes().contains(&p.base.len()) {
                return invalid(format!(
                    "policy {} has {} axes; the {} protocol expects {:?}",
                    p.id,
                    p.base.len(),
                    self.protocol.name(),
                    self.protocol.axes()
                ));
            }
        }
        self.family()?;
        Ok(())
    }

    pub fn family(&self) -> Result<PolicyFamily> {
        PolicyFamily::new(
            self.policies
                .iter()
                .map(|p| {
                    RefinementPolicy::geometric(
                        p.id.clone(),
                        p.scheme,
                        &p.base,
                        p.ratio,
                        self.levels,
                        p.samples,
                        p.tol_exp,
                        p.tol_step,
                    )
                })
                .collect::<Result<Vec<_>>>()?,
        )
    }

    /// SHA-256 of the canonical JSON form of the parsed config.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serialises");
        Sha256::digest(canon.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}
