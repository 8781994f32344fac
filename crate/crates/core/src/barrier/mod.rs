//! Thin barriers, capacity certificates and the weak-form coercivity check.

mod calibrate;
mod capacity;
mod coercivity;
mod ensemble;

pub use calibrate::{calibrate_theta, coverage, ThetaLadder};
pub use capacity::{
    capacity, classify_energies, markov_unique, CapacityEstimate, CapacityLevel, CapacityOptions,
    CapacityVerdict,
};
pub use coercivity::{coercivity_check, CoefficientField, CoercivityReport, CoercivityRow};
pub use ensemble::{
    mixed_ensemble, uniqueness_frequency, BarrierShape, EnsembleMember, UniquenessFrequency,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{Field, Grid};

/// Environment field thresholded into the barrier mask `env >= theta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub env: Field,
    pub theta: f64,
    pub mask: Vec<bool>,
}

impl BarrierSpec {
    pub fn new(env: Field, theta: f64) -> Self {
        let mask = env.values().iter().map(|&v| v >= theta).collect();
        BarrierSpec { env, theta, mask }
    }

    /// Barrier given directly as a 0/1 field thresholded at 1/2.
    pub fn from_mask(grid: Grid, mask: &[bool]) -> Result<Self> {
        let env = Field::new(grid, mask.iter().map(|&m| m as u8 as f64).collect())?;
        Ok(BarrierSpec::new(env, 0.5))
    }

    pub fn mask_field(&self) -> Field {
        Field::from_parts(
            self.env.grid().clone(),
            self.mask.iter().map(|&m| m as u8 as f64).collect(),
        )
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&m| m)
    }
}
