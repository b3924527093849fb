//! DMA element configuration and the vectorised weight-update machinery.
//!
//! Each element weight is constrained to the Lorentzian circle
//! `q = (j + e^{j phi}) / 2`, i.e. `|q - j/2| = 1/2`. The weight matrix `Q`
//! (`N x N_d`) is block diagonal: microstrip `i` feeds only its own `N_e`
//! elements. It is never materialised; [`DmaState::apply`] and
//! [`DmaState::apply_adjoint`] work on the `N` nonzero weights directly.
//!
//! For a fixed precoder `w`, the received amplitude `a^H H Q w` is linear in
//! the stacked nonzero weights `q`: it equals `z^H q` with
//! `z_n = conj(w_i) conj(h_n) a_n` for element `n` of microstrip `i`. The
//! weighted objective then becomes the quadratic form `q^H A q` with
//! `A = -zeta * sum_m alpha_m z_m z_m^H`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::propagation::WaveguideMatrix;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Lorentzian-constrained weight `(j + e^{j phi}) / 2`.
pub fn lorentzian_weight(phase: f64) -> Complex64 {
    (J + Complex64::cis(phase)) * 0.5
}

/// Unit-circle variable from a Lorentzian weight: `b = 2 q - j`.
pub fn b_from_q(q: &[Complex64]) -> Vec<Complex64> {
    q.iter().map(|v| 2.0 * v - J).collect()
}

/// Inverse of [`b_from_q`]: `q = (b + j) / 2`.
pub fn q_from_b(b: &[Complex64]) -> Vec<Complex64> {
    b.iter().map(|v| (v + J) * 0.5).collect()
}

/// Distance of `q` from the Lorentzian circle, `| |q - j/2| - 1/2 |`.
pub fn lorentzian_residual(q: Complex64) -> f64 {
    ((q - 0.5 * J).norm() - 0.5).abs()
}

/// Element phases of an `n_d x n_e` DMA, stored flat in microstrip-major
/// order and reduced to `[0, 2 pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DmaState {
    microstrips: usize,
    elements_per_microstrip: usize,
    phases: Vec<f64>,
}

impl DmaState {
    pub fn new(microstrips: usize, elements_per_microstrip: usize, phases: Vec<f64>) -> Result<Self> {
        let expected = microstrips * elements_per_microstrip;
        if phases.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "DMA phases",
                expected,
                actual: phases.len(),
            });
        }
        if let Some(bad) = phases.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite DMA phase {bad}")));
        }
        Ok(Self {
            microstrips,
            elements_per_microstrip,
            phases: phases.into_iter().map(canonical_phase).collect(),
        })
    }

    /// Builds the state whose unit-circle variable is `b` (phases `arg b`).
    pub fn from_circle(
        microstrips: usize,
        elements_per_microstrip: usize,
        b: &[Complex64],
    ) -> Result<Self> {
        Self::new(
            microstrips,
            elements_per_microstrip,
            b.iter().map(|v| v.arg()).collect(),
        )
    }

    pub fn microstrips(&self) -> usize {
        self.microstrips
    }

    pub fn elements_per_microstrip(&self) -> usize {
        self.elements_per_microstrip
    }

    pub fn element_count(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// The nonzero entries of `Q` in flat order (the reduced vector `q`).
    pub fn weights(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| lorentzian_weight(p)).collect()
    }

    /// Unit-circle variable `b = e^{j phi}`.
    pub fn circle_point(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::cis(p)).collect()
    }

    /// `Q w`: entry `(i, l)` is `q_{i,l} w_i`.
    pub fn apply(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        self.check_precoder(w)?;
        let ne = self.elements_per_microstrip;
        Ok(self
            .phases
            .iter()
            .enumerate()
            .map(|(n, &p)| lorentzian_weight(p) * w[n / ne])
            .collect())
    }

    /// `Q^H v`: entry `i` is `sum_l conj(q_{i,l}) v_{i,l}`.
    pub fn apply_adjoint(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.element_count() {
            return Err(Error::DimensionMismatch {
                context: "Q adjoint input",
                expected: self.element_count(),
                actual: v.len(),
            });
        }
        let ne = self.elements_per_microstrip;
        Ok(self
            .phases
            .chunks_exact(ne)
            .zip(v.chunks_exact(ne))
            .map(|(ph, vs)| {
                ph.iter()
                    .zip(vs)
                    .map(|(&p, x)| lorentzian_weight(p).conj() * x)
                    .sum()
            })
            .collect())
    }

    /// Dense entry of the `N x N_d` matrix `Q`.
    pub fn q_entry(&self, row: usize, col: usize) -> Complex64 {
        if row / self.elements_per_microstrip == col {
            lorentzian_weight(self.phases[row])
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn check_precoder(&self, w: &[Complex64]) -> Result<()> {
        if w.len() != self.microstrips {
            return Err(Error::DimensionMismatch {
                context: "precoder length",
                expected: self.microstrips,
                actual: w.len(),
            });
        }
        Ok(())
    }

    pub fn to_config(&self) -> DmaConfig {
        DmaConfig {
            n_d: self.microstrips,
            n_e: self.elements_per_microstrip,
            phases_rad: self
                .phases
                .chunks_exact(self.elements_per_microstrip)
                .map(<[f64]>::to_vec)
                .collect(),
        }
    }

    pub fn from_config(config: &DmaConfig) -> Result<Self> {
        if config.phases_rad.len() != config.n_d {
            return Err(Error::DimensionMismatch {
                context: "DMA config rows",
                expected: config.n_d,
                actual: config.phases_rad.len(),
            });
        }
        if let Some(row) = config.phases_rad.iter().find(|r| r.len() != config.n_e) {
            return Err(Error::DimensionMismatch {
                context: "DMA config row length",
                expected: config.n_e,
                actual: row.len(),
            });
        }
        Self::new(
            config.n_d,
            config.n_e,
            config.phases_rad.iter().flatten().copied().collect(),
        )
    }
}

fn canonical_phase(p: f64) -> f64 {
    let r = p.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// JSON form of a DMA configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmaConfig {
    pub n_d: usize,
    pub n_e: usize,
    pub phases_rad: Vec<Vec<f64>>,
}

/// Reduced channel `z` of one receiver for a fixed precoder, such that
/// `z^H q = a^H H Q w` for every weight vector `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedChannel {
    pub entries: Vec<Complex64>,
}

impl ReducedChannel {
    pub fn amplitude(&self, q: &[Complex64]) -> Complex64 {
        linalg::inner(&self.entries, q)
    }
}

pub fn reduced_channels(
    w: &[Complex64],
    channels: &[&[Complex64]],
    waveguide: &WaveguideMatrix,
    elements_per_microstrip: usize,
) -> Result<Vec<ReducedChannel>> {
    let n = waveguide.dim();
    if w.len() * elements_per_microstrip != n {
        return Err(Error::DimensionMismatch {
            context: "precoder length times elements per microstrip",
            expected: n,
            actual: w.len() * elements_per_microstrip,
        });
    }
    channels
        .iter()
        .map(|a| {
            if a.len() != n {
                return Err(Error::DimensionMismatch {
                    context: "channel length",
                    expected: n,
                    actual: a.len(),
                });
            }
            let entries = a
                .iter()
                .zip(waveguide.diagonal())
                .enumerate()
                .map(|(idx, (an, hn))| (w[idx / elements_per_microstrip] * hn).conj() * an)
                .collect();
            Ok(ReducedChannel { entries })
        })
        .collect()
}

/// Low-rank negative semidefinite form `A = -sum_m c_m z_m z_m^H` with
/// `c_m = zeta * alpha_m`. `A 1` is cached.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    factors: Vec<Vec<Complex64>>,
    coefficients: Vec<f64>,
    applied_to_ones: Vec<Complex64>,
}

impl QuadraticForm {
    pub fn new(factors: Vec<Vec<Complex64>>, coefficients: Vec<f64>) -> Result<Self> {
        if factors.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                context: "quadratic form coefficients",
                expected: factors.len(),
                actual: coefficients.len(),
            });
        }
        let dim = factors.first().map_or(0, Vec::len);
        if let Some(f) = factors.iter().find(|f| f.len() != dim) {
            return Err(Error::DimensionMismatch {
                context: "quadratic form factor length",
                expected: dim,
                actual: f.len(),
            });
        }
        if coefficients.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(Error::InvalidConfig(
                "quadratic form coefficients must be non-negative".into(),
            ));
        }
        let mut form = Self {
            factors,
            coefficients,
            applied_to_ones: Vec::new(),
        };
        let ones = vec![Complex64::new(1.0, 0.0); dim];
        form.applied_to_ones = form.apply(&ones);
        Ok(form)
    }

    pub fn dim(&self) -> usize {
        self.applied_to_ones.len()
    }

    pub fn rank_bound(&self) -> usize {
        self.factors.len()
    }

    /// `A x`.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
        for (z, &c) in self.factors.iter().zip(&self.coefficients) {
            let s = -c * linalg::inner(z, x);
            for (o, zn) in out.iter_mut().zip(z) {
                *o += s * zn;
            }
        }
        out
    }

    /// `A 1`.
    pub fn applied_to_ones(&self) -> &[Complex64] {
        &self.applied_to_ones
    }

    /// `x^H A x = -sum_m c_m |z_m^H x|^2`.
    pub fn value(&self, x: &[Complex64]) -> f64 {
        -self
            .factors
            .iter()
            .zip(&self.coefficients)
            .map(|(z, c)| c * linalg::inner(z, x).norm_sqr())
            .sum::<f64>()
    }

    /// `-trace(A) = sum_m c_m ||z_m||^2`, an upper bound on the spectral norm.
    pub fn trace_magnitude(&self) -> f64 {
        self.factors
            .iter()
            .zip(&self.coefficients)
            .map(|(z, c)| c * linalg::norm_sqr(z))
            .sum()
    }

    /// The same form multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            factors: self.factors.clone(),
            coefficients: self.coefficients.iter().map(|c| c * factor).collect(),
            applied_to_ones: linalg::scaled(&self.applied_to_ones, factor),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.trace_magnitude() == 0.0
    }
}

/// `A(w) = -zeta * sum_m alpha_m z_m z_m^H`.
pub fn build_quadratic_form(
    reduced: &[ReducedChannel],
    weights: &[f64],
    conversion_efficiency: f64,
) -> Result<QuadraticForm> {
    if !(conversion_efficiency > 0.0 && conversion_efficiency < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "conversion efficiency must lie in (0, 1), got {conversion_efficiency}"
        )));
    }
    QuadraticForm::new(
        reduced.iter().map(|z| z.entries.clone()).collect(),
        weights.iter().map(|a| conversion_efficiency * a).collect(),
    )
}
