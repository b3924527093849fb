//! Shared fixtures and dense reference computations for the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;
use std::path::PathBuf;

use dma_wpt::dma::DmaState;
use dma_wpt::scenario::{build_geometry, GeometryParams, Receiver, Scenario, SystemGeometry, SPEED_OF_LIGHT};
use dma_wpt::Complex64;
use rand::Rng;

pub const APERTURE: f64 = 0.3;

pub fn preset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(format!("{name}.json"))
}

pub fn load_preset(name: &str) -> Scenario {
    let text = std::fs::read_to_string(preset(name)).expect("preset readable");
    Scenario::from_json(&text).expect("preset valid")
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex<R: Rng>(rng: &mut R) -> Complex64 {
    c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_vector<R: Rng>(rng: &mut R, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| random_complex(rng)).collect()
}

pub fn random_phases<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(0.0..TAU)).collect()
}

/// Frequency at which a `APERTURE`-wide array gets `n` elements per side.
pub fn frequency_for_side(n: usize) -> f64 {
    (n as f64 + 0.5) * SPEED_OF_LIGHT / (2.0 * APERTURE)
}

pub fn geometry(frequency: f64, alpha_c: f64, beta_c: f64) -> SystemGeometry {
    build_geometry(&GeometryParams {
        frequency,
        aperture_side: APERTURE,
        spacing_fraction: 0.5,
        waveguide_attenuation: alpha_c,
        waveguide_phase: beta_c,
        boresight_gain: 2.0,
    })
    .expect("valid geometry")
}

pub fn random_receiver<R: Rng>(rng: &mut R) -> Receiver {
    Receiver {
        position: [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.3..3.0),
        ],
        weight: rng.gen_range(0.05..1.0),
    }
}

/// Small random scenario: 2..=8 elements per side, 1..=3 receivers.
pub fn random_scenario<R: Rng>(rng: &mut R) -> Scenario {
    let side = rng.gen_range(2..=8);
    let g = geometry(
        frequency_for_side(side),
        rng.gen_range(0.0..3.0),
        rng.gen_range(100.0..1500.0),
    );
    let m = rng.gen_range(1..=3);
    let receivers = (0..m).map(|_| random_receiver(rng)).collect();
    Scenario::new(g, receivers, rng.gen_range(0.5..2.0), rng.gen_range(0.1..0.9))
        .expect("valid scenario")
}

/// Lorentzian weight written out directly.
pub fn lorentzian(phase: f64) -> Complex64 {
    (c(0.0, 1.0) + Complex64::from_polar(1.0, phase)) * 0.5
}

/// Waveguide factor of flat element `n`, written out directly.
pub fn waveguide_factor(g: &SystemGeometry, n: usize) -> Complex64 {
    let rho = (n % g.elements_per_microstrip) as f64 * g.spacing;
    (-c(g.waveguide_attenuation, g.waveguide_phase) * rho).exp()
}

/// `a^H H Q w` by explicit summation over the flat element index.
pub fn dense_amplitude(
    g: &SystemGeometry,
    phases: &[f64],
    channel: &[Complex64],
    w: &[Complex64],
) -> Complex64 {
    let ne = g.elements_per_microstrip;
    (0..g.element_count())
        .map(|n| channel[n].conj() * waveguide_factor(g, n) * lorentzian(phases[n]) * w[n / ne])
        .sum()
}

/// `Q^H H^H a` by explicit summation.
pub fn dense_effective_channel(
    g: &SystemGeometry,
    phases: &[f64],
    channel: &[Complex64],
) -> Vec<Complex64> {
    let ne = g.elements_per_microstrip;
    let mut v = vec![c(0.0, 0.0); g.microstrips];
    for n in 0..g.element_count() {
        v[n / ne] += (waveguide_factor(g, n) * lorentzian(phases[n])).conj() * channel[n];
    }
    v
}

/// Exhaustive optimum of the single-receiver relaxed objective
/// `zeta alpha P ||Q^H H^H a||^2` over `levels` phases per element.
pub fn brute_force_single(scenario: &Scenario, channel: &[Complex64], levels: usize) -> f64 {
    let g = &scenario.geometry;
    let n = g.element_count();
    let grid: Vec<f64> = (0..levels).map(|k| TAU * k as f64 / levels as f64).collect();
    let total = levels.pow(n as u32);
    let mut phases = vec![0.0; n];
    let mut best = 0.0f64;
    for mut code in 0..total {
        for p in phases.iter_mut() {
            *p = grid[code % levels];
            code /= levels;
        }
        let v = dense_effective_channel(g, &phases, channel);
        best = best.max(v.iter().map(|x| x.norm_sqr()).sum());
    }
    let rx = &scenario.receivers[0];
    scenario.conversion_efficiency * rx.weight * scenario.max_power * best
}

/// Largest `| |q - j/2| - 1/2 |` over a configuration.
pub fn feasibility_defect(state: &DmaState) -> f64 {
    state
        .weights()
        .iter()
        .map(|q| ((q - c(0.0, 0.5)).norm() - 0.5).abs())
        .fold(0.0, f64::max)
}

pub fn is_non_decreasing(trace: &[f64], slack: f64) -> bool {
    trace
        .windows(2)
        .all(|w| w[1] >= w[0] - slack * w[0].abs().max(f64::MIN_POSITIVE))
}
