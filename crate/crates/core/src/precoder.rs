//! Closed-form digital precoder for a fixed DMA configuration.
//!
//! For fixed weights the weighted sum of harvested energies is `w^H G w` with
//! `G = zeta * sum_m alpha_m Q^H H^H a_m a_m^H H Q`, so the best precoder under
//! `||w||^2 <= P_max` is `sqrt(P_max)` times the dominant eigenvector of `G`.
//! All power goes to a single precoding vector.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dma::DmaState;
use crate::error::Result;
use crate::linalg::{self, SquareMatrix};
use crate::model::LinkModel;
use crate::propagation::WaveguideMatrix;

/// Hermitian PSD `N_d x N_d` energy matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix {
    matrix: SquareMatrix,
}

impl EnergyMatrix {
    pub fn from_matrix(matrix: SquareMatrix) -> Self {
        Self { matrix }
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `w^H G w`.
    pub fn quadratic(&self, w: &[Complex64]) -> f64 {
        self.matrix.quadratic(w)
    }
}

pub fn build_energy_matrix(
    state: &DmaState,
    channels: &[&[Complex64]],
    waveguide: &WaveguideMatrix,
    weights: &[f64],
    conversion_efficiency: f64,
) -> Result<EnergyMatrix> {
    let mut g = SquareMatrix::zeros(state.microstrips());
    for (a, &alpha) in channels.iter().zip(weights) {
        if alpha == 0.0 {
            continue;
        }
        // v = Q^H H^H a, so that v^H w = a^H H Q w
        let v = state.apply_adjoint(&waveguide.apply_adjoint(a))?;
        g.add_outer(&v, conversion_efficiency * alpha);
    }
    Ok(EnergyMatrix { matrix: g })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominantEigenpair {
    pub value: f64,
    pub vector: Vec<Complex64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Dominant eigenpair of a Hermitian PSD matrix by power iteration.
///
/// The iteration starts from the normalised all-ones vector; if `G` maps it to
/// (numerically) zero, the canonical basis vectors are tried in order. The
/// result is therefore a deterministic function of `G`. On a zero matrix the
/// pair `(0, e_1)` is returned.
pub fn max_eigvec(g: &EnergyMatrix, options: EigenOptions) -> DominantEigenpair {
    let n = g.dim();
    let scale = g.matrix.frobenius_norm();
    let mut basis = |k: usize| {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[k] = Complex64::new(1.0, 0.0);
        e
    };
    if n == 0 || scale == 0.0 {
        return DominantEigenpair {
            value: 0.0,
            vector: if n == 0 { Vec::new() } else { basis(0) },
            iterations: 0,
            converged: true,
        };
    }

    let threshold = 1e-12 * scale;
    let ones = linalg::scaled(&vec![Complex64::new(1.0, 0.0); n], 1.0 / (n as f64).sqrt());
    let start = std::iter::once(ones)
        .chain((0..n).map(&mut basis))
        .find(|x| linalg::norm(&g.matrix.mul_vec(x)) > threshold)
        .unwrap_or_else(|| basis(0));

    let mut v = start;
    let mut gv = g.matrix.mul_vec(&v);
    let mut value = linalg::inner(&v, &gv).re;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < options.max_iterations {
        let residual: f64 = gv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b * value).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if residual <= options.tolerance * value.abs() {
            converged = true;
            break;
        }
        let norm = linalg::norm(&gv);
        if norm == 0.0 {
            break;
        }
        v = linalg::scaled(&gv, 1.0 / norm);
        gv = g.matrix.mul_vec(&v);
        value = linalg::inner(&v, &gv).re;
        iterations += 1;
    }
    if !converged {
        let residual = linalg::norm(
            &gv.iter()
                .zip(&v)
                .map(|(a, b)| a - b * value)
                .collect::<Vec<_>>(),
        );
        converged = residual <= options.tolerance * value.abs();
    }
    DominantEigenpair {
        value: value.max(0.0),
        vector: v,
        iterations,
        converged,
    }
}

/// Digital precoding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub weights: Vec<Complex64>,
}

impl Precoder {
    pub fn new(weights: Vec<Complex64>) -> Self {
        Self { weights }
    }

    /// `||w||^2`.
    pub fn power(&self) -> f64 {
        linalg::norm_sqr(&self.weights)
    }

    pub fn to_pairs(&self) -> Vec<[f64; 2]> {
        self.weights.iter().map(|v| [v.re, v.im]).collect()
    }

    pub fn from_pairs(pairs: &[[f64; 2]]) -> Self {
        Self::new(pairs.iter().map(|p| Complex64::new(p[0], p[1])).collect())
    }
}

impl Serialize for Precoder {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Precoder {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(deserializer)?;
        Ok(Self::from_pairs(&pairs))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderOutcome {
    pub precoder: Precoder,
    pub eigenvalue: f64,
    pub converged: bool,
    /// `G = 0`: no receiver can be reached with the current configuration.
    pub degenerate: bool,
}

/// `w_1 = sqrt(P_max) v_max(G(Q))`; the remaining precoders are zero and
/// omitted.
pub fn precoder_for(
    state: &DmaState,
    model: &LinkModel,
    options: EigenOptions,
) -> Result<PrecoderOutcome> {
    let g = build_energy_matrix(
        state,
        &model.channel_slices(),
        &model.waveguide,
        &model.weights(),
        model.scenario.conversion_efficiency,
    )?;
    let pair = max_eigvec(&g, options);
    let amplitude = model.scenario.max_power.sqrt();
    Ok(PrecoderOutcome {
        precoder: Precoder::new(linalg::scaled(&pair.vector, amplitude)),
        eigenvalue: pair.value,
        converged: pair.converged,
        degenerate: g.matrix.frobenius_norm() == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix() {
        let g = EnergyMatrix::from_matrix(SquareMatrix::from_fn(2, |r, col| {
            if r == col {
                c(2.0 - r as f64, 0.0)
            } else {
                c(0.0, 0.0)
            }
        }));
        let pair = max_eigvec(&g, EigenOptions::default());
        assert!(pair.converged);
        assert!((pair.value - 2.0).abs() < 1e-9);
        assert!((pair.vector[0].norm() - 1.0).abs() < 1e-9);
        assert!(pair.vector[1].norm() < 1e-5);
    }

    #[test]
    fn rank_one_matrix() {
        let z = vec![c(1.0, 2.0), c(-0.5, 0.1), c(0.0, 1.5)];
        let mut m = SquareMatrix::zeros(3);
        m.add_outer(&z, 0.25);
        let pair = max_eigvec(&EnergyMatrix::from_matrix(m), EigenOptions::default());
        let zn = linalg::norm_sqr(&z);
        assert!((pair.value - 0.25 * zn).abs() < 1e-12);
        let overlap = linalg::inner(&pair.vector, &z).norm() / zn.sqrt();
        assert!((overlap - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_returns_first_basis_vector() {
        let pair = max_eigvec(
            &EnergyMatrix::from_matrix(SquareMatrix::zeros(3)),
            EigenOptions::default(),
        );
        assert_eq!(pair.value, 0.0);
        assert_eq!(pair.vector[0], c(1.0, 0.0));
    }

    #[test]
    fn start_orthogonal_to_ones_falls_back_to_basis() {
        // G = u u^H with u orthogonal to the all-ones vector
        let u = vec![c(1.0, 0.0), c(-1.0, 0.0)];
        let mut m = SquareMatrix::zeros(2);
        m.add_outer(&u, 1.0);
        let pair = max_eigvec(&EnergyMatrix::from_matrix(m), EigenOptions::default());
        assert!(pair.converged);
        assert!((pair.value - 2.0).abs() < 1e-12);
    }

    #[test]
    fn precoder_json_is_pairs() {
        let p = Precoder::new(vec![c(1.0, -2.0), c(0.5, 0.0)]);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(text, "[[1.0,-2.0],[0.5,0.0]]");
        let back: Precoder = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert!((p.power() - 5.25).abs() < 1e-15);
    }
}
