//! Per-scenario link quantities shared by the precoder, the DMA update and
//! the field evaluation.

use num_complex::Complex64;

use crate::dma::DmaState;
use crate::error::Result;
use crate::linalg;
use crate::propagation::{channel_vector, waveguide_matrix, ChannelVector, WaveguideMatrix};
use crate::scenario::Scenario;

#[derive(Debug, Clone)]
pub struct LinkModel {
    pub scenario: Scenario,
    pub channels: Vec<ChannelVector>,
    pub waveguide: WaveguideMatrix,
}

impl LinkModel {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        let channels = scenario
            .receivers
            .iter()
            .map(|rx| channel_vector(&scenario.geometry, rx.position))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            waveguide: waveguide_matrix(&scenario.geometry),
            scenario: scenario.clone(),
            channels,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.scenario.weights()
    }

    pub fn channel_slices(&self) -> Vec<&[Complex64]> {
        self.channels.iter().map(|c| c.entries.as_slice()).collect()
    }

    /// Radiated element signal `H Q w`.
    pub fn radiated(&self, state: &DmaState, w: &[Complex64]) -> Result<Vec<Complex64>> {
        Ok(self.waveguide.apply(&state.apply(w)?))
    }

    /// `E_m = zeta |a_m^H H Q w|^2` for every receiver.
    pub fn harvested_energies(&self, state: &DmaState, w: &[Complex64]) -> Result<Vec<f64>> {
        let r = self.radiated(state, w)?;
        let zeta = self.scenario.conversion_efficiency;
        Ok(self
            .channels
            .iter()
            .map(|a| zeta * linalg::inner(&a.entries, &r).norm_sqr())
            .collect())
    }

    /// `sum_m alpha_m E_m`.
    pub fn weighted_objective(&self, state: &DmaState, w: &[Complex64]) -> Result<f64> {
        Ok(self
            .harvested_energies(state, w)?
            .iter()
            .zip(self.weights())
            .map(|(e, a)| e * a)
            .sum())
    }

    /// True when some receiver with positive weight has a nonzero channel.
    pub fn is_servable(&self) -> bool {
        self.channels
            .iter()
            .zip(self.weights())
            .any(|(a, alpha)| alpha > 0.0 && a.gain() > 0.0)
    }
}
