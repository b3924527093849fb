//! Physical scenario: the planar DMA aperture, energy receivers and the
//! radiating near-field boundaries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light used throughout, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.998e8;

/// Default inter-element spacing as a fraction of the wavelength.
pub const DEFAULT_SPACING_FRACTION: f64 = 0.5;

// Guards the element-count floor against representation error when
// 2D/lambda is an exact integer.
const FLOOR_GUARD: f64 = 1e-9;

/// Planar DMA geometry. Microstrip `i` runs along `y` at abscissa `x_i`;
/// element `l` of every microstrip sits at ordinate `y_l`. The grid is
/// centred on the origin of the `z = 0` plane and radiates towards `+z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemGeometry {
    pub frequency: f64,
    pub wavelength: f64,
    pub wavenumber: f64,
    pub aperture_side: f64,
    pub microstrips: usize,
    pub elements_per_microstrip: usize,
    pub spacing: f64,
    pub waveguide_attenuation: f64,
    pub waveguide_phase: f64,
    pub boresight_gain: f64,
    positions: Vec<[f64; 3]>,
}

/// Inputs to [`build_geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    pub frequency: f64,
    pub aperture_side: f64,
    pub spacing_fraction: f64,
    pub waveguide_attenuation: f64,
    pub waveguide_phase: f64,
    pub boresight_gain: f64,
}

/// Derives the element grid from the aperture side and carrier frequency:
/// `N_d = N_e = floor(2 D / lambda)` with spacing `spacing_fraction * lambda`.
pub fn build_geometry(params: &GeometryParams) -> Result<SystemGeometry> {
    let GeometryParams {
        frequency,
        aperture_side,
        spacing_fraction,
        waveguide_attenuation,
        waveguide_phase,
        boresight_gain,
    } = *params;
    if !(frequency.is_finite() && frequency > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    if !(aperture_side.is_finite() && aperture_side > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "aperture side must be positive, got {aperture_side}"
        )));
    }
    if !(spacing_fraction.is_finite() && spacing_fraction > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "spacing fraction must be positive, got {spacing_fraction}"
        )));
    }
    if !(waveguide_attenuation.is_finite() && waveguide_attenuation >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "waveguide attenuation must be non-negative, got {waveguide_attenuation}"
        )));
    }
    if !waveguide_phase.is_finite() || !(boresight_gain.is_finite() && boresight_gain >= 0.0) {
        return Err(Error::InvalidConfig(
            "waveguide phase and boresight gain must be finite (gain non-negative)".into(),
        ));
    }

    let wavelength = SPEED_OF_LIGHT / frequency;
    let count = (2.0 * aperture_side / wavelength + FLOOR_GUARD).floor();
    if count < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "aperture {aperture_side} m is smaller than half a wavelength ({wavelength} m); no elements fit"
        )));
    }
    let count = count as usize;
    let spacing = spacing_fraction * wavelength;
    let centre = (count as f64 + 1.0) / 2.0;
    let coord = |k: usize| ((k + 1) as f64 - centre) * spacing;

    let mut positions = Vec::with_capacity(count * count);
    for i in 0..count {
        for l in 0..count {
            positions.push([coord(i), coord(l), 0.0]);
        }
    }

    Ok(SystemGeometry {
        frequency,
        wavelength,
        wavenumber: 2.0 * std::f64::consts::PI / wavelength,
        aperture_side,
        microstrips: count,
        elements_per_microstrip: count,
        spacing,
        waveguide_attenuation,
        waveguide_phase,
        boresight_gain,
        positions,
    })
}

impl SystemGeometry {
    /// Total number of metamaterial elements `N = N_d * N_e`.
    pub fn element_count(&self) -> usize {
        self.microstrips * self.elements_per_microstrip
    }

    pub fn flat_index(&self, microstrip: usize, element: usize) -> usize {
        debug_assert!(microstrip < self.microstrips && element < self.elements_per_microstrip);
        microstrip * self.elements_per_microstrip + element
    }

    pub fn unflatten(&self, index: usize) -> (usize, usize) {
        (
            index / self.elements_per_microstrip,
            index % self.elements_per_microstrip,
        )
    }

    /// Element positions in flat (microstrip-major) order.
    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn fraunhofer_distance(&self) -> f64 {
        2.0 * self.aperture_side * self.aperture_side / self.wavelength
    }

    pub fn fresnel_limit(&self) -> f64 {
        (self.aperture_side.powi(4) / (8.0 * self.wavelength)).cbrt()
    }

    pub fn classify_region(&self, point: [f64; 3]) -> Region {
        let distance = norm3(point);
        if distance < self.fresnel_limit() {
            Region::Reactive
        } else if distance <= self.fraunhofer_distance() {
            Region::RadiatingNearField
        } else {
            Region::FarField
        }
    }

    pub fn params(&self) -> GeometryParams {
        GeometryParams {
            frequency: self.frequency,
            aperture_side: self.aperture_side,
            spacing_fraction: self.spacing / self.wavelength,
            waveguide_attenuation: self.waveguide_attenuation,
            waveguide_phase: self.waveguide_phase,
            boresight_gain: self.boresight_gain,
        }
    }
}

/// Fraunhofer distance `2 D^2 / lambda`.
pub fn fraunhofer_distance(geometry: &SystemGeometry) -> f64 {
    geometry.fraunhofer_distance()
}

/// Fresnel limit `(D^4 / (8 lambda))^(1/3)`.
pub fn fresnel_limit(geometry: &SystemGeometry) -> f64 {
    geometry.fresnel_limit()
}

/// Region classification by distance from the aperture centre. Both
/// boundaries belong to the radiating near-field.
pub fn classify_region(geometry: &SystemGeometry, point: [f64; 3]) -> Region {
    geometry.classify_region(point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Region {
    Reactive,
    RadiatingNearField,
    FarField,
}

pub(crate) fn norm3(p: [f64; 3]) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Receiver {
    pub position: [f64; 3],
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub geometry: SystemGeometry,
    pub receivers: Vec<Receiver>,
    pub max_power: f64,
    pub conversion_efficiency: f64,
}

impl Scenario {
    pub fn new(
        geometry: SystemGeometry,
        receivers: Vec<Receiver>,
        max_power: f64,
        conversion_efficiency: f64,
    ) -> Result<Self> {
        if receivers.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one receiver is required".into(),
            ));
        }
        for (m, rx) in receivers.iter().enumerate() {
            if !(rx.weight.is_finite() && rx.weight >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "receiver {m}: weight must be non-negative, got {}",
                    rx.weight
                )));
            }
            if !rx.position.iter().all(|c| c.is_finite()) || rx.position[2] <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "receiver {m}: position must be finite with z > 0, got {:?}",
                    rx.position
                )));
            }
        }
        if !(max_power.is_finite() && max_power > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "p_max_w must be positive, got {max_power}"
            )));
        }
        if !(conversion_efficiency > 0.0 && conversion_efficiency < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "zeta must lie in (0, 1), got {conversion_efficiency}"
            )));
        }
        Ok(Self {
            geometry,
            receivers,
            max_power,
            conversion_efficiency,
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.receivers.iter().map(|r| r.weight).collect()
    }

    pub fn from_file_spec(spec: &ScenarioFile) -> Result<Self> {
        let geometry = build_geometry(&GeometryParams {
            frequency: spec.frequency_hz,
            aperture_side: spec.aperture_m,
            spacing_fraction: spec.spacing_fraction,
            waveguide_attenuation: spec.alpha_c,
            waveguide_phase: spec.beta_c,
            boresight_gain: spec.boresight_b,
        })?;
        let receivers = spec
            .receivers
            .iter()
            .map(|r| Receiver {
                position: r.position_m,
                weight: r.weight,
            })
            .collect();
        Scenario::new(geometry, receivers, spec.p_max_w, spec.zeta)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_file_spec(&ScenarioFile::from_json(text)?)
    }

    pub fn to_file_spec(&self) -> ScenarioFile {
        let g = &self.geometry;
        ScenarioFile {
            frequency_hz: g.frequency,
            aperture_m: g.aperture_side,
            spacing_fraction: g.spacing / g.wavelength,
            alpha_c: g.waveguide_attenuation,
            beta_c: g.waveguide_phase,
            boresight_b: g.boresight_gain,
            p_max_w: self.max_power,
            zeta: self.conversion_efficiency,
            receivers: self
                .receivers
                .iter()
                .map(|r| ReceiverFile {
                    position_m: r.position,
                    weight: r.weight,
                })
                .collect(),
        }
    }
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub frequency_hz: f64,
    pub aperture_m: f64,
    #[serde(default = "default_spacing_fraction")]
    pub spacing_fraction: f64,
    pub alpha_c: f64,
    pub beta_c: f64,
    pub boresight_b: f64,
    pub p_max_w: f64,
    pub zeta: f64,
    pub receivers: Vec<ReceiverFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverFile {
    pub position_m: [f64; 3],
    pub weight: f64,
}

fn default_spacing_fraction() -> f64 {
    DEFAULT_SPACING_FRACTION
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Parse {
            what: "scenario".into(),
            source,
        })
    }
}
