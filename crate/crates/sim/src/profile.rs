//! Device profiles: key/value TOML describing the resistance ladder and
//! noise of an array.

use std::path::Path;

use crossbar_core::device::{ideal_ladder, NoiseSpec, ResistanceLadder};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// The shipped four-state reference device.
pub const REFERENCE_PROFILE: &str = include_str!("../profiles/reference.toml");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub n_states: usize,
    pub r_min_ohm: f64,
    pub r_max_ohm: f64,
    pub sigma_nl_ohm: f64,
    pub sigma_perp_ohm: f64,
    pub seed: u64,
}

impl DeviceProfile {
    pub fn reference() -> Self {
        Self::parse(REFERENCE_PROFILE).expect("shipped profile parses")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let p: DeviceProfile = toml::from_str(text).map_err(|e| SimError::Profile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(SimError::io(path))?;
        Self::parse(&text).map_err(|e| SimError::Profile(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain struct serializes")
    }

    fn validate(&self) -> Result<()> {
        self.noise()?;
        ideal_ladder(self.n_states, self.r_min_ohm, self.r_max_ohm)?;
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        Ok(NoiseSpec::new(self.sigma_nl_ohm, self.sigma_perp_ohm, self.seed)?)
    }

    /// Ideal ladder; systematic offsets are drawn by the consumer.
    pub fn ladder(&self) -> Result<ResistanceLadder> {
        Ok(ideal_ladder(self.n_states, self.r_min_ohm, self.r_max_ohm)?)
    }
}
