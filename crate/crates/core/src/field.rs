//! Received-power maps over a planar grid in front of the aperture.
//!
//! Two quantities are evaluated per point: the raw received power
//! `zeta |a(p)^H H Q w|^2` and the path-loss-free power
//! `|a(p)^H H Q w|^2 / ||a(p)||^2` (received power divided by the channel
//! power gain). The grid's `normalized` column is the latter divided by its
//! peak over the grid, so it lies in `[0, 1]`.

use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dma::DmaState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::precoder::Precoder;
use crate::propagation::{response_at, waveguide_matrix};
use crate::scenario::SystemGeometry;

/// Floor applied to `norm_db`, dB relative to the peak.
pub const DB_FLOOR: f64 = -300.0;

pub const CSV_HEADER: &str = "x_m,z_m,power_w,normalized,norm_db";

/// Radiated signal of a configured DMA, ready for point evaluations.
#[derive(Debug, Clone)]
pub struct FieldEvaluator<'a> {
    geometry: &'a SystemGeometry,
    conversion_efficiency: f64,
    radiated: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedPower {
    pub value: f64,
    /// The point has no line of sight to any element (`||a(p)|| = 0`).
    pub zero_channel: bool,
}

impl<'a> FieldEvaluator<'a> {
    pub fn new(
        geometry: &'a SystemGeometry,
        state: &DmaState,
        precoder: &Precoder,
        conversion_efficiency: f64,
    ) -> Result<Self> {
        if state.element_count() != geometry.element_count() {
            return Err(Error::DimensionMismatch {
                context: "DMA state vs geometry",
                expected: geometry.element_count(),
                actual: state.element_count(),
            });
        }
        let radiated = waveguide_matrix(geometry).apply(&state.apply(&precoder.weights)?);
        Ok(Self {
            geometry,
            conversion_efficiency,
            radiated,
        })
    }

    /// `||H Q w||^2`.
    pub fn radiated_power(&self) -> f64 {
        linalg::norm_sqr(&self.radiated)
    }

    /// `zeta |a(p)^H H Q w|^2`, W.
    pub fn received_power(&self, point: [f64; 3]) -> Result<f64> {
        let resp = response_at(self.geometry, &self.radiated, point)?;
        Ok(self.conversion_efficiency * resp.amplitude.norm_sqr())
    }

    /// `|a(p)^H H Q w|^2 / ||a(p)||^2`; zero (flagged) where `a(p) = 0`.
    pub fn normalized_power(&self, point: [f64; 3]) -> Result<NormalizedPower> {
        let resp = response_at(self.geometry, &self.radiated, point)?;
        Ok(normalized(resp.amplitude.norm_sqr(), resp.gain))
    }

    fn both(&self, point: [f64; 3]) -> Result<(f64, NormalizedPower)> {
        let resp = response_at(self.geometry, &self.radiated, point)?;
        let sq = resp.amplitude.norm_sqr();
        Ok((self.conversion_efficiency * sq, normalized(sq, resp.gain)))
    }
}

fn normalized(amplitude_sq: f64, gain: f64) -> NormalizedPower {
    if gain > 0.0 {
        NormalizedPower {
            value: amplitude_sq / gain,
            zero_channel: false,
        }
    } else {
        NormalizedPower {
            value: 0.0,
            zero_channel: true,
        }
    }
}

pub fn received_power(
    geometry: &SystemGeometry,
    state: &DmaState,
    precoder: &Precoder,
    conversion_efficiency: f64,
    point: [f64; 3],
) -> Result<f64> {
    FieldEvaluator::new(geometry, state, precoder, conversion_efficiency)?.received_power(point)
}

pub fn normalized_power(
    geometry: &SystemGeometry,
    state: &DmaState,
    precoder: &Precoder,
    point: [f64; 3],
) -> Result<NormalizedPower> {
    FieldEvaluator::new(geometry, state, precoder, 1.0)?.normalized_power(point)
}

/// Inclusive linear axis `start:end:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl AxisRange {
    pub fn new(start: f64, end: f64, count: usize) -> Result<Self> {
        let axis = Self { start, end, count };
        axis.validate()?;
        Ok(axis)
    }

    fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) || self.count < 2 {
            return Err(Error::InvalidConfig(format!(
                "axis range needs finite bounds and at least 2 points, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> f64 {
        if k + 1 == self.count {
            return self.end;
        }
        self.start + (self.end - self.start) * k as f64 / (self.count - 1) as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.value(k)).collect()
    }
}

impl FromStr for AxisRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || Error::InvalidConfig(format!("axis range must be start:end:count, got '{s}'"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start = parts[0].trim().parse().map_err(|_| bad())?;
        let end = parts[1].trim().parse().map_err(|_| bad())?;
        let count = parts[2].trim().parse().map_err(|_| bad())?;
        Self::new(start, end, count)
    }
}

/// Sampling plane: the `xz` plane at fixed `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub y: f64,
    pub x: AxisRange,
    pub z: AxisRange,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            y: 0.0,
            x: AxisRange { start: -1.0, end: 1.0, count: 201 },
            z: AxisRange { start: 0.5, end: 3.0, count: 251 },
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.x.count * self.z.count
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `k` in row-major order: `z` outer, `x` inner.
    pub fn point(&self, k: usize) -> [f64; 3] {
        let (iz, ix) = (k / self.x.count, k % self.x.count);
        [self.x.value(ix), self.y, self.z.value(iz)]
    }

    pub fn validate(&self) -> Result<()> {
        self.x.validate()?;
        self.z.validate()?;
        if !self.y.is_finite() {
            return Err(Error::InvalidConfig("grid plane offset must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    pub spec: GridSpec,
    /// Raw received power, W.
    pub power: Vec<f64>,
    /// Path-loss-free power, before peak normalisation.
    pub path_free: Vec<f64>,
    /// `path_free / max(path_free)`, in `[0, 1]`.
    pub normalized: Vec<f64>,
    pub peak_index: usize,
    pub zero_channel_points: usize,
}

impl PowerGrid {
    pub fn peak_point(&self) -> [f64; 3] {
        self.spec.point(self.peak_index)
    }

    pub fn peak_path_free(&self) -> f64 {
        self.path_free[self.peak_index]
    }

    pub fn norm_db(&self, k: usize) -> f64 {
        let v = self.normalized[k];
        if v > 0.0 {
            (10.0 * v.log10()).max(DB_FLOOR)
        } else {
            DB_FLOOR
        }
    }

    /// Fraction of points with normalised power at least half the peak.
    pub fn spot_fraction(&self) -> f64 {
        let hot = self.normalized.iter().filter(|&&v| v >= 0.5).count();
        hot as f64 / self.normalized.len() as f64
    }

    pub fn min_normalized(&self) -> f64 {
        self.normalized.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_normalized(&self) -> f64 {
        self.normalized.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for k in 0..self.power.len() {
            let p = self.spec.point(k);
            writeln!(
                out,
                "{},{},{},{},{}",
                p[0],
                p[2],
                self.power[k],
                self.normalized[k],
                self.norm_db(k)
            )?;
        }
        Ok(())
    }

    pub fn summary(&self) -> GridSummary {
        let peak = self.peak_point();
        GridSummary {
            spec: self.spec,
            points: self.power.len(),
            peak_index: self.peak_index,
            peak_x_m: peak[0],
            peak_z_m: peak[2],
            peak_power_w: self.power[self.peak_index],
            peak_path_free: self.peak_path_free(),
            min_normalized: self.min_normalized(),
            max_normalized: self.max_normalized(),
            spot_fraction: self.spot_fraction(),
            zero_channel_points: self.zero_channel_points,
            normalization: "normalized = (|a(p)^H H Q w|^2 / ||a(p)||^2) / peak over grid; \
                            norm_db = 10 log10(normalized), floored"
                .into(),
            db_floor: DB_FLOOR,
            row_order: "z outer, x inner".into(),
        }
    }
}

/// Sidecar metadata for a grid CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub spec: GridSpec,
    pub points: usize,
    pub peak_index: usize,
    pub peak_x_m: f64,
    pub peak_z_m: f64,
    pub peak_power_w: f64,
    pub peak_path_free: f64,
    pub min_normalized: f64,
    pub max_normalized: f64,
    pub spot_fraction: f64,
    pub zero_channel_points: usize,
    pub normalization: String,
    pub db_floor: f64,
    pub row_order: String,
}

pub fn evaluate_grid(
    geometry: &SystemGeometry,
    state: &DmaState,
    precoder: &Precoder,
    conversion_efficiency: f64,
    spec: &GridSpec,
) -> Result<PowerGrid> {
    spec.validate()?;
    let evaluator = FieldEvaluator::new(geometry, state, precoder, conversion_efficiency)?;
    let samples = (0..spec.len())
        .into_par_iter()
        .map(|k| evaluator.both(spec.point(k)))
        .collect::<Result<Vec<_>>>()?;

    let power: Vec<f64> = samples.iter().map(|(p, _)| *p).collect();
    let path_free: Vec<f64> = samples.iter().map(|(_, n)| n.value).collect();
    let zero_channel_points = samples.iter().filter(|(_, n)| n.zero_channel).count();
    // first maximum in row-major order
    let peak_index = path_free
        .iter()
        .enumerate()
        .fold(0, |best, (k, &v)| if v > path_free[best] { k } else { best });
    let peak = path_free[peak_index];
    let normalized = path_free
        .iter()
        .map(|&v| if peak > 0.0 { v / peak } else { 0.0 })
        .collect();

    Ok(PowerGrid {
        spec: *spec,
        power,
        path_free,
        normalized,
        peak_index,
        zero_channel_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{build_geometry, GeometryParams, SPEED_OF_LIGHT};

    fn geometry(frequency: f64, aperture: f64) -> SystemGeometry {
        build_geometry(&GeometryParams {
            frequency,
            aperture_side: aperture,
            spacing_fraction: 0.5,
            waveguide_attenuation: 1.2,
            waveguide_phase: 827.67,
            boresight_gain: 2.0,
        })
        .unwrap()
    }

    #[test]
    fn axis_parsing() {
        let a: AxisRange = "-1:1:3".parse().unwrap();
        assert_eq!(a.values(), vec![-1.0, 0.0, 1.0]);
        assert!("0:1".parse::<AxisRange>().is_err());
        assert!("0:1:1".parse::<AxisRange>().is_err());
        assert!("a:1:4".parse::<AxisRange>().is_err());
    }

    #[test]
    fn aperture_plane_receives_nothing() {
        let g = geometry(1.2e9, 0.3);
        let state = DmaState::new(2, 2, vec![0.3; 4]).unwrap();
        let w = Precoder::new(vec![Complex64::new(1.0, 0.0); 2]);
        let ev = FieldEvaluator::new(&g, &state, &w, 0.5).unwrap();
        assert_eq!(ev.received_power([3.0, 0.0, 0.0]).unwrap(), 0.0);
        let n = ev.normalized_power([3.0, 0.0, 0.0]).unwrap();
        assert!(n.zero_channel);
        assert_eq!(n.value, 0.0);
    }

    #[test]
    fn single_element_normalized_power_is_position_independent() {
        let g = geometry(SPEED_OF_LIGHT / 0.6, 0.3);
        assert_eq!(g.element_count(), 1);
        let state = DmaState::new(1, 1, vec![0.7]).unwrap();
        let w = Precoder::new(vec![Complex64::new(0.8, -0.3)]);
        let ev = FieldEvaluator::new(&g, &state, &w, 0.5).unwrap();
        let expected = ev.radiated_power();
        for p in [[0.0, 0.0, 1.0], [0.4, 0.1, 0.3], [-2.0, 0.0, 5.0]] {
            let n = ev.normalized_power(p).unwrap();
            assert!((n.value - expected).abs() <= 1e-14 * expected);
        }
    }

    #[test]
    fn cauchy_schwarz_bounds() {
        let g = geometry(28e9, 0.03);
        let n = g.element_count();
        let state = DmaState::new(g.microstrips, g.elements_per_microstrip, (0..n).map(|k| k as f64 * 0.37).collect()).unwrap();
        let w = Precoder::new((0..g.microstrips).map(|i| Complex64::cis(i as f64)).collect());
        let ev = FieldEvaluator::new(&g, &state, &w, 0.5).unwrap();
        let spec = GridSpec {
            y: 0.0,
            x: AxisRange::new(-0.5, 0.5, 11).unwrap(),
            z: AxisRange::new(0.1, 1.0, 7).unwrap(),
        };
        for k in 0..spec.len() {
            let p = spec.point(k);
            let a = crate::propagation::channel_vector(&g, p).unwrap();
            let (raw, norm) = ev.both(p).unwrap();
            assert!(norm.value <= ev.radiated_power() * (1.0 + 1e-12));
            assert!(raw <= 0.5 * a.gain() * ev.radiated_power() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn grid_shape_order_and_csv() {
        let g = geometry(1.2e9, 0.3);
        let state = DmaState::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let w = Precoder::new(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)]);
        let spec = GridSpec {
            y: 0.0,
            x: AxisRange::new(-1.0, 1.0, 2).unwrap(),
            z: AxisRange::new(0.5, 3.0, 2).unwrap(),
        };
        let grid = evaluate_grid(&g, &state, &w, 0.5, &spec).unwrap();
        assert_eq!(grid.power.len(), 4);
        assert_eq!(spec.point(1), [1.0, 0.0, 0.5]);
        assert_eq!(spec.point(2), [-1.0, 0.0, 3.0]);
        assert!(grid.normalized.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(grid.max_normalized(), 1.0);
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("-1,0.5,"));
    }

    #[test]
    fn grid_is_order_independent() {
        let g = geometry(28e9, 0.03);
        let n = g.element_count();
        let state = DmaState::new(g.microstrips, g.elements_per_microstrip, (0..n).map(|k| (k * k) as f64 * 0.1).collect()).unwrap();
        let w = Precoder::new((0..g.microstrips).map(|i| Complex64::cis(0.5 * i as f64)).collect());
        let spec = GridSpec {
            y: 0.0,
            x: AxisRange::new(-0.3, 0.3, 5).unwrap(),
            z: AxisRange::new(0.2, 0.8, 4).unwrap(),
        };
        let grid = evaluate_grid(&g, &state, &w, 0.5, &spec).unwrap();
        let ev = FieldEvaluator::new(&g, &state, &w, 0.5).unwrap();
        for k in (0..spec.len()).rev() {
            assert_eq!(grid.power[k], ev.received_power(spec.point(k)).unwrap());
        }
    }
}
