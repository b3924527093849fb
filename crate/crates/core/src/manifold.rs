//! Riemannian conjugate gradient on the product of `N` complex unit circles.
//!
//! Minimises `f(b) = 1/4 (b + j1)^H A (b + j1)` subject to `|b_l| = 1`, where
//! `A` is a [`QuadraticForm`]. The Euclidean gradient used is
//! `1/2 (A b + j A 1)`: the gradient of `f` with respect to the real and
//! imaginary parts packed as a complex vector (twice the Wirtinger
//! derivative), so directional derivatives are `Re<grad, d>`.
//!
//! Tangent vectors at `b` satisfy `Re(t_l conj(b_l)) = 0`. Retraction is
//! entrywise renormalisation and vector transport is re-projection.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dma::QuadraticForm;
use crate::error::{Error, Result};
use crate::linalg;

const J: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on `| |b_l| - 1 |` accepted for starting points.
const MODULUS_TOLERANCE: f64 = 1e-9;

/// Point on the product of unit circles.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldPoint(Vec<Complex64>);

impl ManifoldPoint {
    pub fn new(b: Vec<Complex64>) -> Result<Self> {
        let defect = modulus_defect(&b);
        if !(defect <= MODULUS_TOLERANCE) {
            return Err(Error::InvalidConfig(format!(
                "point is off the unit-circle manifold (max | |b| - 1 | = {defect:e})"
            )));
        }
        Ok(Self(b))
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self(phases.iter().map(|&p| Complex64::cis(p)).collect())
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Largest `| |b_l| - 1 |`.
pub fn modulus_defect(b: &[Complex64]) -> f64 {
    b.iter().map(|v| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
}

fn shifted(b: &[Complex64]) -> Vec<Complex64> {
    b.iter().map(|v| v + J).collect()
}

pub fn objective(form: &QuadraticForm, b: &[Complex64]) -> f64 {
    0.25 * form.value(&shifted(b))
}

/// `1/2 (A b + j A 1)`, using the cached `A 1`.
pub fn euclidean_gradient(form: &QuadraticForm, b: &[Complex64]) -> Vec<Complex64> {
    let ab = form.apply(b);
    ab.iter()
        .zip(form.applied_to_ones())
        .map(|(x, y)| 0.5 * (x + J * y))
        .collect()
}

/// Projection onto the tangent space at `b`: `g_l - Re(g_l conj(b_l)) b_l`.
pub fn riemannian_gradient(euclidean: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    project(euclidean, b)
}

fn project(v: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    v.iter()
        .zip(b)
        .map(|(g, bl)| g - bl * (g * bl.conj()).re)
        .collect()
}

/// Largest `|Re(t_l conj(b_l))|`.
pub fn tangency_residual(t: &[Complex64], b: &[Complex64]) -> f64 {
    t.iter()
        .zip(b)
        .map(|(tl, bl)| (tl * bl.conj()).re.abs())
        .fold(0.0, f64::max)
}

/// `b'_l = (b_l + s t_l) / |b_l + s t_l|`. A vanishing denominator (only
/// possible for non-tangent input) halves the step until it clears.
pub fn retract(b: &[Complex64], tangent: &[Complex64], step: f64) -> Vec<Complex64> {
    let mut step = step;
    loop {
        let moved: Vec<Complex64> = b.iter().zip(tangent).map(|(x, t)| x + t * step).collect();
        if moved.iter().all(|v| v.norm() > f64::MIN_POSITIVE) {
            return moved.into_iter().map(|v| v / v.norm()).collect();
        }
        step *= 0.5;
    }
}

/// Moves a tangent vector to the tangent space at `to` by re-projection.
pub fn transport(tangent: &[Complex64], to: &[Complex64]) -> Vec<Complex64> {
    project(tangent, to)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcgOptions {
    pub max_iterations: usize,
    /// Stop when the Riemannian gradient norm of the trace-normalised
    /// objective drops below `gradient_tolerance * N`.
    pub gradient_tolerance: f64,
    pub initial_step: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
    /// Forced steepest-descent restart period; `None` restarts every `N`
    /// iterations.
    pub restart_period: Option<usize>,
}

impl Default for RcgOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
            initial_step: 1.0,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 50,
            restart_period: None,
        }
    }
}

impl RcgOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && self.gradient_tolerance > 0.0
            && self.initial_step > 0.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0
            && self.max_backtracks > 0
            && self.restart_period.map_or(true, |p| p > 0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid RCG options: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RcgStop {
    GradientTolerance,
    IterationCap,
    LineSearchStalled,
    ZeroForm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcgOutcome {
    pub point: Vec<Complex64>,
    /// Objective at the start point and after every accepted step.
    pub trace: Vec<f64>,
    /// Riemannian gradient norm (of the original form) at every trace point.
    pub gradient_norms: Vec<f64>,
    pub iterations: usize,
    pub stop: RcgStop,
}

impl RcgOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.stop, RcgStop::GradientTolerance | RcgStop::ZeroForm)
    }

    pub fn final_value(&self) -> f64 {
        *self.trace.last().expect("trace always holds the start value")
    }

    /// `iteration,f,grad_norm` rows.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,f,grad_norm")?;
        for (k, (f, g)) in self.trace.iter().zip(&self.gradient_norms).enumerate() {
            writeln!(out, "{k},{f},{g}")?;
        }
        Ok(())
    }
}

/// Polak-Ribiere+ conjugate gradient with Armijo backtracking.
///
/// The search runs on `A / tr(-A)`, which has the same minimisers; reported
/// objective values and gradient norms are in the original scale.
pub fn rcg_minimize(
    form: &QuadraticForm,
    start: &ManifoldPoint,
    options: &RcgOptions,
) -> Result<RcgOutcome> {
    options.validate()?;
    let n = start.len();
    if form.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "RCG start point",
            expected: form.dim(),
            actual: n,
        });
    }
    let scale = form.trace_magnitude();
    let mut b = start.as_slice().to_vec();
    if scale == 0.0 {
        return Ok(RcgOutcome {
            trace: vec![objective(form, &b)],
            gradient_norms: vec![0.0],
            point: b,
            iterations: 0,
            stop: RcgStop::ZeroForm,
        });
    }
    let normalised = form.scaled(1.0 / scale);
    let restart_period = options.restart_period.unwrap_or(n.max(1));
    let tolerance = options.gradient_tolerance * n as f64;

    let mut value = objective(&normalised, &b);
    let mut grad = riemannian_gradient(&euclidean_gradient(&normalised, &b), &b);
    let mut grad_sq = linalg::norm_sqr(&grad);
    let mut direction: Vec<Complex64> = grad.iter().map(|g| -g).collect();
    let mut since_restart = 0;

    let mut trace = vec![value * scale];
    let mut gradient_norms = vec![grad_sq.sqrt() * scale];
    let mut iterations = 0;

    let stop = loop {
        if grad_sq.sqrt() < tolerance {
            break RcgStop::GradientTolerance;
        }
        if iterations >= options.max_iterations {
            break RcgStop::IterationCap;
        }

        let mut slope = linalg::real_inner(&grad, &direction);
        if slope >= 0.0 {
            direction = grad.iter().map(|g| -g).collect();
            slope = -grad_sq;
            since_restart = 0;
        }
        let mut accepted = armijo(&normalised, &b, value, &direction, slope, options);
        if accepted.is_none() && since_restart > 0 {
            direction = grad.iter().map(|g| -g).collect();
            slope = -grad_sq;
            since_restart = 0;
            accepted = armijo(&normalised, &b, value, &direction, slope, options);
        }
        let Some((next, next_value)) = accepted else {
            break RcgStop::LineSearchStalled;
        };

        let next_grad = riemannian_gradient(&euclidean_gradient(&normalised, &next), &next);
        let next_grad_sq = linalg::norm_sqr(&next_grad);
        since_restart += 1;
        let beta = if since_restart >= restart_period {
            since_restart = 0;
            0.0
        } else {
            let old_grad = transport(&grad, &next);
            let diff: Vec<Complex64> = next_grad.iter().zip(&old_grad).map(|(x, y)| x - y).collect();
            (linalg::real_inner(&next_grad, &diff) / grad_sq).max(0.0)
        };
        let carried = transport(&direction, &next);
        direction = next_grad
            .iter()
            .zip(&carried)
            .map(|(g, d)| -g + d * beta)
            .collect();
        if beta == 0.0 {
            since_restart = 0;
        }

        b = next;
        value = next_value;
        grad = next_grad;
        grad_sq = next_grad_sq;
        iterations += 1;
        trace.push(value * scale);
        gradient_norms.push(grad_sq.sqrt() * scale);
    };

    Ok(RcgOutcome {
        point: b,
        trace,
        gradient_norms,
        iterations,
        stop,
    })
}

fn armijo(
    form: &QuadraticForm,
    b: &[Complex64],
    value: f64,
    direction: &[Complex64],
    slope: f64,
    options: &RcgOptions,
) -> Option<(Vec<Complex64>, f64)> {
    let mut step = options.initial_step;
    for _ in 0..=options.max_backtracks {
        let candidate = retract(b, direction, step);
        let candidate_value = objective(form, &candidate);
        if candidate_value <= value + options.sufficient_decrease * step * slope
            && candidate_value <= value
        {
            return Some((candidate, candidate_value));
        }
        step *= options.contraction;
    }
    None
}
