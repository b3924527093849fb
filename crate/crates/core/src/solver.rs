//! Alternating optimisation of the digital precoder and the DMA weights.
//!
//! Each outer iteration first sets the precoder to the closed-form optimum for
//! the current weights (power budget on the digital output), then improves the
//! weights for that precoder by RCG on the unit-circle reformulation. After
//! the loop the precoder is rescaled so that the radiated power `||H Q w||^2`
//! equals `P_max`, and all reported energies use the rescaled precoder.

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dma::{build_quadratic_form, reduced_channels, DmaState};
use crate::error::{Error, Result};
use crate::linalg;
use crate::manifold::{rcg_minimize, ManifoldPoint, RcgOptions, RcgOutcome};
use crate::model::LinkModel;
use crate::precoder::{precoder_for, EigenOptions, Precoder};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub outer_iterations: usize,
    pub relative_tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
    pub rcg: RcgOptions,
    pub eigen_tolerance: f64,
    pub eigen_max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let eigen = EigenOptions::default();
        Self {
            outer_iterations: 200,
            relative_tolerance: 1e-5,
            restarts: 4,
            seed: 0,
            rcg: RcgOptions::default(),
            eigen_tolerance: eigen.tolerance,
            eigen_max_iterations: eigen.max_iterations,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.outer_iterations == 0 || self.restarts == 0 {
            return Err(Error::InvalidConfig(
                "outer iterations and restarts must be at least 1".into(),
            ));
        }
        if !(self.relative_tolerance >= 0.0)
            || !(self.eigen_tolerance > 0.0)
            || self.eigen_max_iterations == 0
        {
            return Err(Error::InvalidConfig(format!(
                "invalid solver tolerances: {self:?}"
            )));
        }
        self.rcg.validate()
    }

    fn eigen(&self) -> EigenOptions {
        EigenOptions {
            tolerance: self.eigen_tolerance,
            max_iterations: self.eigen_max_iterations,
        }
    }
}

/// History of one multi-start run.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartRun {
    pub state: DmaState,
    /// Precoder of the relaxed problem (`||w||^2 = P_max`).
    pub relaxed_precoder: Precoder,
    /// Precoder rescaled to `||H Q w||^2 = P_max`.
    pub precoder: Precoder,
    /// Weighted objective `sum_m alpha_m E_m` of the relaxed problem after
    /// every half-step (precoder update, then weight update).
    pub objective_trace: Vec<f64>,
    pub rcg_runs: Vec<RcgOutcome>,
    pub energies: Vec<f64>,
    pub weighted_objective: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    pub eigen_converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverReport {
    pub objective_trace: Vec<f64>,
    pub restart_traces: Vec<Vec<f64>>,
    /// Harvested energy per receiver, W, with the rescaled precoder.
    pub energies: Vec<f64>,
    pub weighted_objective: f64,
    /// Final value of the relaxed objective.
    pub relaxed_objective: f64,
    pub converged: bool,
    pub outer_iterations: usize,
    pub best_restart: usize,
    pub rcg_runs: Vec<RcgOutcome>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub state: DmaState,
    pub precoder: Precoder,
    pub report: SolverReport,
}

pub fn solve(scenario: &Scenario, options: &SolverOptions) -> Result<Solution> {
    options.validate()?;
    let started = Instant::now();
    let model = LinkModel::new(scenario)?;
    if !model.is_servable() {
        return Err(Error::Unservable);
    }

    let runs = (0..options.restarts)
        .into_par_iter()
        .map(|restart| {
            let state = initial_state(&model, options.seed, restart as u64)?;
            run_from(&model, state, options)
        })
        .collect::<Result<Vec<_>>>()?;

    // ties go to the lower restart index
    let best_restart = runs
        .iter()
        .enumerate()
        .fold(0, |best, (k, run)| {
            if run.weighted_objective > runs[best].weighted_objective {
                k
            } else {
                best
            }
        });
    let restart_traces = runs.iter().map(|r| r.objective_trace.clone()).collect();
    let best = runs.into_iter().nth(best_restart).expect("at least one restart");
    let report = SolverReport {
        relaxed_objective: *best.objective_trace.last().unwrap_or(&0.0),
        objective_trace: best.objective_trace,
        restart_traces,
        energies: best.energies,
        weighted_objective: best.weighted_objective,
        converged: best.converged && best.eigen_converged,
        outer_iterations: best.outer_iterations,
        best_restart,
        rcg_runs: best.rcg_runs,
        wall_time: started.elapsed(),
    };
    Ok(Solution {
        state: best.state,
        precoder: best.precoder,
        report,
    })
}

/// Uniform random phases on `[0, 2 pi)`; restart `k` draws from stream `k`
/// of the ChaCha generator seeded with `seed`.
pub fn initial_state(model: &LinkModel, seed: u64, restart: u64) -> Result<DmaState> {
    let g = &model.scenario.geometry;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    let phases = (0..g.element_count()).map(|_| rng.gen_range(0.0..TAU)).collect();
    DmaState::new(g.microstrips, g.elements_per_microstrip, phases)
}

/// Runs the alternating loop from a given initial configuration.
pub fn run_from(model: &LinkModel, initial: DmaState, options: &SolverOptions) -> Result<RestartRun> {
    let scenario = &model.scenario;
    let weights = model.weights();
    let zeta = scenario.conversion_efficiency;
    let ne = scenario.geometry.elements_per_microstrip;
    let nd = scenario.geometry.microstrips;

    let mut state = initial;
    let mut w: Option<Vec<Complex64>> = None;
    let mut objective_trace = Vec::with_capacity(2 * options.outer_iterations + 1);
    let mut rcg_runs = Vec::with_capacity(options.outer_iterations);
    let mut previous: Option<f64> = None;
    let mut converged = false;
    let mut eigen_converged = true;
    let mut outer_iterations = 0;

    for _ in 0..options.outer_iterations {
        let (next_w, value, ok) = update_precoder(model, &state, w.as_deref(), options)?;
        eigen_converged &= ok;
        objective_trace.push(value);

        let reduced = reduced_channels(&next_w, &model.channel_slices(), &model.waveguide, ne)?;
        let form = build_quadratic_form(&reduced, &weights, zeta)?;
        let start = ManifoldPoint::new(state.circle_point())?;
        let outcome = rcg_minimize(&form, &start, &options.rcg)?;
        state = DmaState::from_circle(nd, ne, &outcome.point)?;
        rcg_runs.push(outcome);

        let value = model.weighted_objective(&state, &next_w)?;
        objective_trace.push(value);
        w = Some(next_w);
        outer_iterations += 1;

        if let Some(prev) = previous {
            if value - prev <= options.relative_tolerance * prev.abs() {
                converged = true;
                break;
            }
        }
        previous = Some(value);
    }

    // closing precoder update for the final weights
    let (relaxed, value, ok) = update_precoder(model, &state, w.as_deref(), options)?;
    eigen_converged &= ok;
    objective_trace.push(value);

    let radiated = linalg::norm(&model.radiated(&state, &relaxed)?);
    let rescaled = if radiated > 0.0 {
        linalg::scaled(&relaxed, scenario.max_power.sqrt() / radiated)
    } else {
        relaxed.clone()
    };
    let energies = model.harvested_energies(&state, &rescaled)?;
    let weighted_objective = energies.iter().zip(&weights).map(|(e, a)| e * a).sum();

    Ok(RestartRun {
        state,
        relaxed_precoder: Precoder::new(relaxed),
        precoder: Precoder::new(rescaled),
        objective_trace,
        rcg_runs,
        energies,
        weighted_objective,
        outer_iterations,
        converged,
        eigen_converged,
    })
}

/// Closed-form precoder for `state`. If the eigen-solver returns a worse
/// vector than the current one (non-convergence), the current one is kept.
fn update_precoder(
    model: &LinkModel,
    state: &DmaState,
    current: Option<&[Complex64]>,
    options: &SolverOptions,
) -> Result<(Vec<Complex64>, f64, bool)> {
    let outcome = precoder_for(state, model, options.eigen())?;
    let candidate = outcome.precoder.weights;
    let value = model.weighted_objective(state, &candidate)?;
    if let Some(cur) = current {
        let cur_value = model.weighted_objective(state, cur)?;
        if cur_value > value {
            return Ok((cur.to_vec(), cur_value, outcome.converged));
        }
    }
    Ok((candidate, value, outcome.converged))
}

/// `E_m = zeta |a_m^H H Q w|^2` for every receiver of `scenario`.
pub fn harvested_energies(
    state: &DmaState,
    precoder: &Precoder,
    scenario: &Scenario,
) -> Result<Vec<f64>> {
    LinkModel::new(scenario)?.harvested_energies(state, &precoder.weights)
}
