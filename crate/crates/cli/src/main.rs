//! `mfdoa` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver did not converge
//! (single-solve commands), 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mfdoa::experiments::{render, run_scenario, trial_measurement, Format, Scenario};
use mfdoa::extraction::{extract_doas, null_spectrum_csv};
use mfdoa::formulations::{build_fast_primal, build_full_primal, solve_primal, Estimator, PrimalSdpResult};
use mfdoa::lifting::LiftingPlan;
use mfdoa::model::MeasurementTensor;
use mfdoa::solver::{dump_problem, SolveStatus};
use mfdoa::DoaError;
use serde_json::json;

#[derive(Parser)]
#[command(name = "mfdoa", version, about = "Gridless multi-frequency DOA estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the number of Monte Carlo trials.
    #[arg(long)]
    mc: Option<usize>,
    /// fast_primal | full_primal
    #[arg(long)]
    estimator: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv | json
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args, Clone)]
struct MeasurementInput {
    /// Measurement JSON written by `simulate`; synthesized from the scenario
    /// when omitted.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one measurement tensor (trial 0) as JSON.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve the selected SDP on one measurement and report the solution.
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: MeasurementInput,
        /// Also write the conic problem in text form to this path.
        #[arg(long)]
        dump_problem: Option<PathBuf>,
    },
    /// Solve and extract DOAs from one measurement.
    Extract {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: MeasurementInput,
    },
    /// Run the scenario's Monte Carlo sweep and emit the result table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Include wall-clock solve times (otherwise reported as NA).
        #[arg(long)]
        timing: bool,
        /// Keep per-trial records in JSON output.
        #[arg(long)]
        trials: bool,
    },
    /// Null spectrum of the solved matrix on a uniform grid, as CSV.
    Nullspec {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        input: MeasurementInput,
        #[arg(long, default_value_t = 4096)]
        grid: usize,
    },
}

enum Failure {
    Config(String),
    NotConverged(String),
    Other(String),
}

impl From<DoaError> for Failure {
    fn from(e: DoaError) -> Self {
        match e {
            DoaError::Config(_)
            | DoaError::InvalidGeometry(_)
            | DoaError::InvalidFrequency(_)
            | DoaError::Domain { .. }
            | DoaError::Unsupported(_)
            | DoaError::SubspaceDimension { .. }
            | DoaError::Parse(_)
            | DoaError::DimensionMismatch { .. } => Failure::Config(e.to_string()),
            DoaError::NotConverged(_) => Failure::NotConverged(e.to_string()),
            other => Failure::Other(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_scenario(c: &Common) -> CliResult<Scenario> {
    let text = std::fs::read_to_string(&c.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", c.config.display())))?;
    let mut s = Scenario::from_toml(&text)?;
    if let Some(seed) = c.seed {
        s.seed = seed;
    }
    if let Some(mc) = c.mc {
        s.mc = mc;
    }
    if let Some(e) = &c.estimator {
        s.estimator = e.parse::<Estimator>()?;
    }
    s.validate()?;
    Ok(s)
}

fn format_of(c: &Common) -> CliResult<Format> {
    Ok(c.format.parse::<Format>()?)
}

fn write_out(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Other(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Trial-0 measurement of the scenario (first sweep value, if any).
fn synthesize_scenario(s: &Scenario) -> CliResult<MeasurementTensor> {
    let point = match &s.sweep {
        Some(sw) => s.with_sweep_value(sw.axis, sw.values[0])?,
        None => s.clone(),
    };
    Ok(trial_measurement(&point, 0)?)
}

fn measurement(s: &Scenario, input: &MeasurementInput) -> CliResult<MeasurementTensor> {
    match &input.input {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("bad measurement file: {e}")))
        }
        None => synthesize_scenario(s),
    }
}

fn solve_checked(s: &Scenario, y: &MeasurementTensor) -> CliResult<(LiftingPlan, PrimalSdpResult)> {
    let plan = LiftingPlan::new(&y.geometry);
    let res = solve_primal(y, &plan, s.estimator, &s.solve_options())?;
    if res.info.status != SolveStatus::Optimal {
        return Err(Failure::NotConverged(format!(
            "solver stopped with status {:?} after {} iterations",
            res.info.status, res.info.iterations
        )));
    }
    Ok((plan, res))
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { common } => {
            let s = load_scenario(&common)?;
            let y = synthesize_scenario(&s)?;
            let text = serde_json::to_string_pretty(&y).map_err(|e| Failure::Other(e.to_string()))?;
            write_out(common.out.as_deref(), &(text + "\n"))
        }
        Command::Solve { common, input, dump_problem: dump } => {
            let s = load_scenario(&common)?;
            let y = measurement(&s, &input)?;
            if let Some(path) = dump {
                let plan = LiftingPlan::new(&y.geometry);
                let problem = match s.estimator {
                    Estimator::FastPrimal => build_fast_primal(&y, &plan)?,
                    Estimator::FullPrimal => build_full_primal(&y, &plan)?,
                };
                write_out(Some(&path), &dump_problem(&problem))?;
            }
            let (_, res) = solve_checked(&s, &y)?;
            let report = json!({
                "estimator": res.estimator,
                "objective": res.objective,
                "u": res.u,
                "gamma": res.gamma,
                "status": res.info.status,
                "iterations": res.info.iterations,
                "primal_residual": res.info.primal_residual,
                "dual_residual": res.info.dual_residual,
                "min_block_eig": res.min_block_eig,
            });
            write_out(common.out.as_deref(), &(serde_json::to_string_pretty(&report).unwrap() + "\n"))
        }
        Command::Extract { common, input } => {
            let s = load_scenario(&common)?;
            let y = measurement(&s, &input)?;
            let (plan, res) = solve_checked(&s, &y)?;
            let est = extract_doas(&res.t_matrix(&plan)?, &res.gamma, s.k_extract(), &s.extract_options())?;
            let text = match format_of(&common)? {
                Format::Json => serde_json::to_string_pretty(&est).unwrap() + "\n",
                Format::Csv => {
                    let mut out = String::from("theta_deg,w,power,null_spectrum\n");
                    for i in 0..est.k {
                        out.push_str(&format!(
                            "{:.6},{:.9},{:.6e},{:.6e}\n",
                            est.thetas_deg[i], est.w_hat[i], est.powers[i], est.null_spectrum_minima[i]
                        ));
                    }
                    out
                }
            };
            write_out(common.out.as_deref(), &text)
        }
        Command::Sweep { common, timing, trials } => {
            let s = load_scenario(&common)?;
            let format = format_of(&common)?;
            let table = run_scenario(&s, trials)?;
            write_out(common.out.as_deref(), &render(&table, format, timing)?)
        }
        Command::Nullspec { common, input, grid } => {
            let s = load_scenario(&common)?;
            let y = measurement(&s, &input)?;
            let (plan, res) = solve_checked(&s, &y)?;
            let csv = null_spectrum_csv(&res.t_matrix(&plan)?, &res.gamma, s.k_extract(), grid)?;
            write_out(common.out.as_deref(), &csv)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("configuration error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::NotConverged(m)) => {
            eprintln!("not converged: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Other(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
