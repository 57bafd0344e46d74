use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pulse::PulseConfig;

/// Scenario constants shared by the estimator, the bounds and the design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub pulse: PulseConfig,
    /// Number of RISs (K).
    pub num_ris: usize,
    /// Reflecting elements per RIS (N).
    pub elements: usize,
    /// Training sub-phases (M); must be at least `num_ris * elements`.
    pub subphases: usize,
}

impl SystemConfig {
    /// Configuration with `M = NK` training sub-phases.
    pub fn new(pulse: PulseConfig, num_ris: usize, elements: usize) -> Self {
        SystemConfig {
            pulse,
            num_ris,
            elements,
            subphases: num_ris * elements,
        }
    }

    /// Total number of reflecting elements, `NK`.
    pub fn total_elements(&self) -> usize {
        self.num_ris * self.elements
    }

    /// Length of the stacked training observation, `M * L_o * Q`.
    pub fn training_len(&self) -> usize {
        self.subphases * self.pulse.samples()
    }

    pub fn validate(&self) -> Result<()> {
        self.pulse.validate()?;
        if self.num_ris == 0 {
            return Err(Error::InvalidConfig("number of RISs must be positive".into()));
        }
        if self.elements == 0 {
            return Err(Error::InvalidConfig("elements per RIS must be positive".into()));
        }
        if self.subphases < self.total_elements() {
            return Err(Error::InvalidConfig(format!(
                "{} training sub-phases cannot identify {} cascaded coefficients",
                self.subphases,
                self.total_elements()
            )));
        }
        Ok(())
    }
}
