//! Resistance states of a crossbar cell and their non-idealities.
//!
//! A [`ResistanceLadder`] holds the `N` nominal states shared by a device
//! family together with a systematic per-state offset that every cell of the
//! array sees identically. Cell-specific offsets are drawn on top of that,
//! independently for each cell, by [`ResistanceLadder::cell_states`].

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal and systematically perturbed resistance states, in ohms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResistanceLadder {
    r_min: f64,
    r_max: f64,
    nominal_states: Vec<f64>,
    systematic_offsets: Vec<f64>,
}

/// Standard deviations of the two noise sources, in ohms, plus the seed of
/// the experiment that uses them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub sigma_nl: f64,
    pub sigma_perp: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma_nl: 0.0, sigma_perp: 0.0, seed: 0 };

    pub fn new(sigma_nl: f64, sigma_perp: f64, seed: u64) -> Result<Self> {
        if !(sigma_nl >= 0.0 && sigma_perp >= 0.0) || !sigma_nl.is_finite() || !sigma_perp.is_finite() {
            return Err(Error::invalid("noise standard deviations must be finite and >= 0"));
        }
        Ok(Self { sigma_nl, sigma_perp, seed })
    }

    /// Effective deviation `sqrt(sigma_nl^2 + sigma_perp^2)`.
    pub fn sigma_total(&self) -> f64 {
        libm::hypot(self.sigma_nl, self.sigma_perp)
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_nl == 0.0 && self.sigma_perp == 0.0
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::NONE
    }
}

/// `n_states` equidistant states spanning `[r_min, r_max]`.
///
/// A single-state ladder sits at the midpoint of the range.
pub fn ideal_ladder(n_states: usize, r_min: f64, r_max: f64) -> Result<ResistanceLadder> {
    if n_states == 0 {
        return Err(Error::invalid("a ladder needs at least one state"));
    }
    if !(r_min <= r_max) || !r_min.is_finite() || !r_max.is_finite() {
        return Err(Error::invalid("resistance range must satisfy r_min <= r_max"));
    }
    let nominal_states = if n_states == 1 {
        vec![0.5 * (r_min + r_max)]
    } else {
        let step = (r_max - r_min) / (n_states - 1) as f64;
        (0..n_states)
            .map(|i| if i == n_states - 1 { r_max } else { r_min + i as f64 * step })
            .collect()
    };
    Ok(ResistanceLadder { r_min, r_max, nominal_states, systematic_offsets: vec![0.0; n_states] })
}

impl ResistanceLadder {
    pub fn n_states(&self) -> usize {
        self.nominal_states.len()
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.r_min + self.r_max)
    }

    pub fn nominal_states(&self) -> &[f64] {
        &self.nominal_states
    }

    pub fn systematic_offsets(&self) -> &[f64] {
        &self.systematic_offsets
    }

    /// Distance between adjacent nominal states (zero for a single state).
    pub fn spacing(&self) -> f64 {
        match self.n_states() {
            1 => 0.0,
            n => (self.r_max - self.r_min) / (n - 1) as f64,
        }
    }

    /// Nominal state plus the shared systematic offset.
    pub fn shared_state(&self, index: usize) -> f64 {
        self.nominal_states[index] + self.systematic_offsets[index]
    }

    /// Draws one systematic offset per state from `Normal(0, sigma_nl)`.
    ///
    /// Exactly `n_states` standard normals are consumed whatever the value of
    /// `sigma_nl`, so changing the deviation never shifts later draws.
    pub fn apply_systematic<R: Rng + ?Sized>(&self, noise: &NoiseSpec, rng: &mut R) -> ResistanceLadder {
        let systematic_offsets = (0..self.n_states())
            .map(|_| noise.sigma_nl * rng.sample::<f64, _>(StandardNormal))
            .collect();
        ResistanceLadder { systematic_offsets, ..self.clone() }
    }

    /// Replaces the systematic offsets. Used when a realization is reused.
    pub fn with_systematic_offsets(&self, offsets: Vec<f64>) -> Result<ResistanceLadder> {
        Error::check_len(self.n_states(), offsets.len())?;
        Ok(ResistanceLadder { systematic_offsets: offsets, ..self.clone() })
    }

    /// States seen by one freshly drawn cell: nominal plus systematic plus an
    /// independent `Normal(0, sigma_perp)` offset per state.
    ///
    /// Values are neither clamped nor re-sorted.
    pub fn cell_states<R: Rng + ?Sized>(&self, noise: &NoiseSpec, rng: &mut R) -> Vec<f64> {
        (0..self.n_states())
            .map(|i| self.shared_state(i) + noise.sigma_perp * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }
}
