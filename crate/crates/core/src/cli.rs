//! `dma-wpt` command line: `solve`, `grid` and `sweep`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 unservable scenario,
//! 3 solver did not converge (outputs are still written).

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dma::{DmaConfig, DmaState};
use crate::error::{Error, Result};
use crate::field::{evaluate_grid, AxisRange, GridSpec};
use crate::manifold::RcgOptions;
use crate::model::LinkModel;
use crate::precoder::Precoder;
use crate::scenario::{Scenario, ScenarioFile, SPEED_OF_LIGHT};
use crate::solver::{solve, Solution, SolverOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_UNSERVABLE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dma-wpt", version, about = "Near-field DMA energy focusing for wireless power transfer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimise precoder and DMA weights for a scenario.
    Solve(SolveArgs),
    /// Evaluate the received-power map of a solved configuration.
    Grid(GridArgs),
    /// Solve once per value of a scenario parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, env = "DMA_WPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, env = "DMA_WPT_RESTARTS", default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, env = "DMA_WPT_OUTER_ITERATIONS", default_value_t = 200)]
    pub outer_iterations: usize,
    #[arg(long, env = "DMA_WPT_RELATIVE_TOLERANCE", default_value_t = 1e-5)]
    pub relative_tolerance: f64,
    #[arg(long, env = "DMA_WPT_RCG_MAX_ITERATIONS", default_value_t = 500)]
    pub rcg_max_iterations: usize,
    #[arg(long, env = "DMA_WPT_RCG_GRADIENT_TOLERANCE", default_value_t = 1e-6)]
    pub rcg_gradient_tolerance: f64,
    #[arg(long, env = "DMA_WPT_RCG_INITIAL_STEP", default_value_t = 1.0)]
    pub rcg_initial_step: f64,
    #[arg(long, env = "DMA_WPT_RCG_CONTRACTION", default_value_t = 0.5)]
    pub rcg_contraction: f64,
    #[arg(long, env = "DMA_WPT_RCG_SUFFICIENT_DECREASE", default_value_t = 1e-4)]
    pub rcg_sufficient_decrease: f64,
    #[arg(long, env = "DMA_WPT_RCG_MAX_BACKTRACKS", default_value_t = 50)]
    pub rcg_max_backtracks: usize,
    #[arg(long, env = "DMA_WPT_EIGEN_TOLERANCE", default_value_t = 1e-10)]
    pub eigen_tolerance: f64,
    #[arg(long, env = "DMA_WPT_EIGEN_MAX_ITERATIONS", default_value_t = 5000)]
    pub eigen_max_iterations: usize,
}

impl CommonArgs {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            outer_iterations: self.outer_iterations,
            relative_tolerance: self.relative_tolerance,
            restarts: self.restarts,
            seed: self.seed,
            rcg: RcgOptions {
                max_iterations: self.rcg_max_iterations,
                gradient_tolerance: self.rcg_gradient_tolerance,
                initial_step: self.rcg_initial_step,
                contraction: self.rcg_contraction,
                sufficient_decrease: self.rcg_sufficient_decrease,
                max_backtracks: self.rcg_max_backtracks,
                restart_period: None,
            },
            eigen_tolerance: self.eigen_tolerance,
            eigen_max_iterations: self.eigen_max_iterations,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Also write the per-iteration RCG trace of the best restart.
    #[arg(long)]
    pub trace: bool,
    /// Also write the receiver channel vectors as CSV.
    #[arg(long)]
    pub dump_channels: bool,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory holding `dma.json` and `precoder.json` from a previous
    /// solve; without it the scenario is solved inline.
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long, default_value = "-1:1:201")]
    pub grid_x: AxisRange,
    #[arg(long, default_value = "0.5:3:251")]
    pub grid_z: AxisRange,
    /// Offset of the xz sampling plane along y, m.
    #[arg(long, default_value_t = 0.0)]
    pub grid_y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Frequency,
    Weights,
    ReceiverZ,
    PMax,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum)]
    pub param: SweepParameter,
    /// Comma-separated values. Per-receiver values (weights, receiver_z)
    /// separate receivers with ':'; a single receiver_z applies to all.
    #[arg(long)]
    pub values: String,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Grid(args) => cmd_grid(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

pub fn exit_code_for(error: &Error) -> i32 {
    match error {
        Error::Unservable => EXIT_UNSERVABLE,
        _ => EXIT_INVALID,
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::InvalidConfig(format!("cannot read scenario {}: {e}", path.display()))
    })?;
    let spec = serde_json::from_str::<ScenarioFile>(&text).map_err(|source| Error::Parse {
        what: path.display().to_string(),
        source,
    })?;
    Scenario::from_file_spec(&spec)
}

/// Resolved configuration embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub scenario: ScenarioFile,
    pub solver: SolverOptions,
    pub seed: u64,
    pub speed_of_light_m_per_s: f64,
    pub elements: [usize; 2],
    pub fraunhofer_distance_m: f64,
    pub fresnel_limit_m: f64,
}

impl ConfigEcho {
    pub fn new(scenario: &Scenario, solver: &SolverOptions) -> Self {
        let g = &scenario.geometry;
        Self {
            scenario: scenario.to_file_spec(),
            solver: *solver,
            seed: solver.seed,
            speed_of_light_m_per_s: SPEED_OF_LIGHT,
            elements: [g.microstrips, g.elements_per_microstrip],
            fraunhofer_distance_m: g.fraunhofer_distance(),
            fresnel_limit_m: g.fresnel_limit(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub energies_w: Vec<f64>,
    pub weighted_objective_w: f64,
    pub relaxed_objective_w: f64,
    pub objective_trace: Vec<f64>,
    pub restart_traces: Vec<Vec<f64>>,
    pub best_restart: usize,
    pub outer_iterations: usize,
    pub converged: bool,
    pub phases: DmaConfig,
    pub precoder: Precoder,
    pub config_echo: serde_json::Value,
}

impl ReportFile {
    pub fn new(solution: &Solution, echo: &ConfigEcho) -> Self {
        let r = &solution.report;
        Self {
            energies_w: r.energies.clone(),
            weighted_objective_w: r.weighted_objective,
            relaxed_objective_w: r.relaxed_objective,
            objective_trace: r.objective_trace.clone(),
            restart_traces: r.restart_traces.clone(),
            best_restart: r.best_restart,
            outer_iterations: r.outer_iterations,
            converged: r.converged,
            phases: solution.state.to_config(),
            precoder: solution.precoder.clone(),
            config_echo: serde_json::to_value(echo).expect("config echo serialises"),
        }
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("output serialises");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_solution(out: &Path, solution: &Solution, echo: &ConfigEcho) -> Result<()> {
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &ReportFile::new(solution, echo))?;
    write_json(&out.join("dma.json"), &solution.state.to_config())?;
    write_json(&out.join("precoder.json"), &solution.precoder)?;
    Ok(())
}

fn status_code(solution: &Solution) -> i32 {
    if solution.report.converged {
        EXIT_OK
    } else {
        eprintln!("warning: solver hit its iteration cap before converging; best iterate written");
        EXIT_NOT_CONVERGED
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let scenario = load_scenario(&args.common.scenario)?;
    let options = args.common.solver_options();
    let solution = solve(&scenario, &options)?;
    let echo = ConfigEcho::new(&scenario, &options);
    write_solution(&args.common.out, &solution, &echo)?;

    if args.trace {
        let mut text = String::from("outer,iteration,f,grad_norm\n");
        for (outer, run) in solution.report.rcg_runs.iter().enumerate() {
            for (k, (f, g)) in run.trace.iter().zip(&run.gradient_norms).enumerate() {
                text.push_str(&format!("{outer},{k},{f},{g}\n"));
            }
        }
        fs::write(args.common.out.join("rcg_trace.csv"), text)?;
    }
    if args.dump_channels {
        let model = LinkModel::new(&scenario)?;
        for (m, channel) in model.channels.iter().enumerate() {
            let file = fs::File::create(args.common.out.join(format!("channel_{m}.csv")))?;
            channel.write_csv(std::io::BufWriter::new(file))?;
        }
    }

    for (m, e) in solution.report.energies.iter().enumerate() {
        eprintln!("receiver {}: {:.4} uW", m + 1, e * 1e6);
    }
    eprintln!(
        "restart {} of {}, {} outer iterations, {:.2?}",
        solution.report.best_restart + 1,
        options.restarts,
        solution.report.outer_iterations,
        solution.report.wall_time
    );
    Ok(status_code(&solution))
}

pub fn cmd_grid(args: &GridArgs) -> Result<i32> {
    let scenario = load_scenario(&args.common.scenario)?;
    let options = args.common.solver_options();
    let spec = GridSpec {
        y: args.grid_y,
        x: args.grid_x,
        z: args.grid_z,
    };
    spec.validate()?;

    let (state, precoder, code) = match &args.from {
        Some(dir) => {
            let dma: DmaConfig = read_json(&dir.join("dma.json"))?;
            let precoder: Precoder = read_json(&dir.join("precoder.json"))?;
            (DmaState::from_config(&dma)?, precoder, EXIT_OK)
        }
        None => {
            let solution = solve(&scenario, &options)?;
            let code = status_code(&solution);
            (solution.state, solution.precoder, code)
        }
    };
    let grid = evaluate_grid(
        &scenario.geometry,
        &state,
        &precoder,
        scenario.conversion_efficiency,
        &spec,
    )?;

    fs::create_dir_all(&args.common.out)?;
    let file = fs::File::create(args.common.out.join("grid.csv"))?;
    let mut writer = std::io::BufWriter::new(file);
    grid.write_csv(&mut writer)?;
    std::io::Write::flush(&mut writer)?;

    let sidecar = json!({
        "grid": grid.summary(),
        "source": args.from.as_ref().map(|p| p.display().to_string()),
        "config_echo": ConfigEcho::new(&scenario, &options),
    });
    write_json(&args.common.out.join("grid.json"), &sidecar)?;
    let peak = grid.peak_point();
    eprintln!(
        "peak at x = {:.3} m, z = {:.3} m; half-power spot fraction {:.4}",
        peak[0],
        peak[2],
        grid.spot_fraction()
    );
    Ok(code)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse {
        what: path.display().to_string(),
        source,
    })
}

/// One sweep value applied to a base scenario.
pub fn apply_sweep_value(
    base: &ScenarioFile,
    parameter: SweepParameter,
    value: &str,
) -> Result<ScenarioFile> {
    let parse = |s: &str| -> Result<f64> {
        s.trim().parse::<f64>().map_err(|_| {
            Error::InvalidConfig(format!("sweep value '{s}' is not a number"))
        })
    };
    let per_receiver = |s: &str| -> Result<Vec<f64>> {
        let values = s.split(':').map(parse).collect::<Result<Vec<_>>>()?;
        match values.len() {
            1 => Ok(vec![values[0]; base.receivers.len()]),
            n if n == base.receivers.len() => Ok(values),
            n => Err(Error::InvalidConfig(format!(
                "sweep value '{s}' has {n} entries for {} receivers",
                base.receivers.len()
            ))),
        }
    };
    let mut spec = base.clone();
    match parameter {
        SweepParameter::Frequency => spec.frequency_hz = parse(value)?,
        SweepParameter::PMax => spec.p_max_w = parse(value)?,
        SweepParameter::Weights => {
            for (rx, w) in spec.receivers.iter_mut().zip(per_receiver(value)?) {
                rx.weight = w;
            }
        }
        SweepParameter::ReceiverZ => {
            for (rx, z) in spec.receivers.iter_mut().zip(per_receiver(value)?) {
                rx.position_m[2] = z;
            }
        }
    }
    Ok(spec)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.common.scenario).map_err(|e| {
        Error::InvalidConfig(format!(
            "cannot read scenario {}: {e}",
            args.common.scenario.display()
        ))
    })?;
    let base = ScenarioFile::from_json(&text)?;
    let values: Vec<&str> = args
        .values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Error::InvalidConfig("sweep needs at least one value".into()));
    }
    let base_options = args.common.solver_options();
    let receivers = base.receivers.len();

    let mut rows = Vec::with_capacity(values.len());
    let mut echoes = Vec::with_capacity(values.len());
    let mut code = EXIT_OK;
    for (index, value) in values.iter().enumerate() {
        let spec = apply_sweep_value(&base, args.param, value)?;
        let scenario = Scenario::from_file_spec(&spec)?;
        let options = SolverOptions {
            seed: base_options.seed.wrapping_add(index as u64),
            ..base_options
        };
        let solution = solve(&scenario, &options)?;
        if !solution.report.converged {
            code = EXIT_NOT_CONVERGED;
        }
        let mut row = vec![value.to_string()];
        row.extend(solution.report.energies.iter().map(|e| e.to_string()));
        row.push(solution.report.weighted_objective.to_string());
        rows.push(row.join(","));
        echoes.push(ConfigEcho::new(&scenario, &options));
    }

    fs::create_dir_all(&args.common.out)?;
    let mut header = vec!["value".to_string()];
    header.extend((1..=receivers).map(|m| format!("E_{m}_w")));
    header.push("objective_w".into());
    let mut csv = header.join(",");
    csv.push('\n');
    for row in rows {
        csv.push_str(&row);
        csv.push('\n');
    }
    fs::write(args.common.out.join("sweep.csv"), csv)?;
    write_json(
        &args.common.out.join("sweep.json"),
        &json!({
            "parameter": args.param,
            "values": values,
            "seed": base_options.seed,
            "runs": echoes,
        }),
    )?;
    if code != EXIT_OK {
        eprintln!("warning: at least one sweep point did not converge");
    }
    Ok(code)
}
