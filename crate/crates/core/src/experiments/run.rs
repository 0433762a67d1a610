//! Seeded Monte Carlo runs and RMSE scoring.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{spread_thetas, AmplitudeKind, Scenario, SourceSpec, SweepAxis};
use crate::error::{DoaError, Result};
use crate::extraction::{extract_doas, DoaEstimate};
use crate::formulations::solve_primal;
use crate::lifting::LiftingPlan;
use crate::model::{
    collision_scan, derive_seed, random_doas, rng_from_seed, synthesize, MeasurementTensor, SourceSet, DEFAULT_NEAR_TOL,
};
use crate::solver::SolveStatus;

/// Per-trial mean squared error cap, in deg².
pub const SQ_ERR_CAP: f64 = 100.0;

const STREAM_DOAS: u64 = 1;
const STREAM_AMPLITUDES: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Per-trial mean squared error between sorted lists, capped.
pub fn trial_sq_error(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() || truth.is_empty() {
        return Err(DoaError::Scoring(format!(
            "{} estimates for {} true DOAs",
            estimate.len(),
            truth.len()
        )));
    }
    let mut e = estimate.to_vec();
    let mut t = truth.to_vec();
    e.sort_by(f64::total_cmp);
    t.sort_by(f64::total_cmp);
    let mse = e.iter().zip(&t).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / t.len() as f64;
    Ok(mse.min(SQ_ERR_CAP))
}

/// `sqrt( mean_trials min( mean_k (θ̂_k − θ_k)², 10² ) )` with both lists
/// sorted ascending and paired positionally.
pub fn rmse(estimates: &[Vec<f64>], truths: &[Vec<f64>]) -> Result<f64> {
    if estimates.len() != truths.len() || truths.is_empty() {
        return Err(DoaError::Scoring(format!("{} estimate lists for {} trials", estimates.len(), truths.len())));
    }
    let mut acc = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        acc += trial_sq_error(e, t)?;
    }
    Ok((acc / truths.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub truth_deg: Vec<f64>,
    /// Sorted estimates after truncation to the true K; empty on failure.
    pub estimate_deg: Vec<f64>,
    pub sq_error: f64,
    pub iterations: usize,
    pub solve_ms: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scenario_id: String,
    pub sweep_axis: String,
    pub sweep_value: Option<f64>,
    pub rmse_deg: f64,
    pub mean_iters: f64,
    /// `None` when timing is withheld from the output.
    pub mean_solve_ms: Option<f64>,
    pub n_failed: usize,
    /// Near-collision findings and similar remarks.
    #[serde(default)]
    pub notes: Vec<String>,
    #[serde(default)]
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// DOAs drawn for one trial.
fn trial_thetas(s: &Scenario, n_grid: usize, trial_seed: u64) -> Result<Vec<f64>> {
    let seed = derive_seed(trial_seed, STREAM_DOAS);
    match &s.sources {
        SourceSpec::Fixed { thetas_deg, jitter_deg } => {
            if *jitter_deg == 0.0 {
                return Ok(thetas_deg.clone());
            }
            let mut rng = rng_from_seed(seed);
            Ok(thetas_deg.iter().map(|t| t + rng.random_range(-jitter_deg..=*jitter_deg)).collect())
        }
        SourceSpec::Random { k, min_sep_cos, range_deg } => {
            random_doas(*k, *range_deg, min_sep_cos.unwrap_or(4.0 / n_grid as f64), seed)
        }
        SourceSpec::Spread { k } => Ok(spread_thetas(*k)),
    }
}

fn trial_sources(s: &Scenario, trial_seed: u64) -> Result<SourceSet> {
    let geometry = s.geometry()?;
    let thetas = trial_thetas(s, geometry.sensor_grid_len(), trial_seed)?;
    let k = thetas.len();
    let powers = s.powers.clone().unwrap_or_else(|| vec![1.0; k]);
    match s.amplitudes {
        AmplitudeKind::Gaussian => SourceSet::with_gaussian_amplitudes(
            thetas,
            powers,
            geometry.n_freqs(),
            s.n_snapshots,
            derive_seed(trial_seed, STREAM_AMPLITUDES),
        ),
        AmplitudeKind::Deterministic => {
            SourceSet::with_deterministic_amplitudes(thetas, powers, geometry.n_freqs(), s.n_snapshots)
        }
    }
}

/// Measurement tensor of one trial, exactly as `run_trial` sees it. The
/// ground truth travels in `MeasurementTensor::truth`.
pub fn trial_measurement(s: &Scenario, trial: usize) -> Result<MeasurementTensor> {
    let trial_seed = s.seed ^ trial as u64;
    let sources = trial_sources(s, trial_seed)?;
    synthesize(&s.geometry()?, &sources, s.n_snapshots, s.snr_db, derive_seed(trial_seed, STREAM_NOISE))
}

/// Runs one trial; solver and extraction failures are recorded and scored
/// at the cap, anything else is an error.
pub fn run_trial(s: &Scenario, plan: &LiftingPlan, trial: usize) -> Result<(TrialRecord, Option<DoaEstimate>)> {
    let y = trial_measurement(s, trial)?;
    let truth = y.truth.as_ref().map(|t| t.sorted_thetas()).unwrap_or_default();
    let fail = |msg: String, iterations: usize, solve_ms: f64| TrialRecord {
        trial,
        truth_deg: truth.clone(),
        estimate_deg: Vec::new(),
        sq_error: SQ_ERR_CAP,
        iterations,
        solve_ms: Some(solve_ms),
        failure: Some(msg),
    };
    let primal = solve_primal(&y, plan, s.estimator, &s.solve_options())?;
    let (iters, ms) = (primal.info.iterations, primal.info.solve_ms);
    if primal.info.status != SolveStatus::Optimal {
        return Ok((fail(format!("solver status {:?}", primal.info.status), iters, ms), None));
    }
    let t = primal.t_matrix(plan)?;
    let est = match extract_doas(&t, &primal.gamma, s.k_extract(), &s.extract_options()) {
        Ok(e) => e,
        Err(e @ DoaError::DegenerateSpectrum { .. }) => return Ok((fail(e.to_string(), iters, ms), None)),
        Err(e) => return Err(e),
    };
    let kept = est.truncated(s.k_true());
    let sq_error = trial_sq_error(&kept.thetas_deg, &truth)?;
    let record = TrialRecord {
        trial,
        truth_deg: truth,
        estimate_deg: kept.thetas_deg.clone(),
        sq_error,
        iterations: iters,
        solve_ms: Some(ms),
        failure: None,
    };
    Ok((record, Some(est)))
}

fn collision_notes(s: &Scenario) -> Result<Vec<String>> {
    let SourceSpec::Fixed { thetas_deg, jitter_deg } = &s.sources else {
        return Ok(Vec::new());
    };
    let geometry = s.geometry()?;
    let probe = SourceSet::with_deterministic_amplitudes(thetas_deg.clone(), vec![1.0; thetas_deg.len()], 1, 1)?;
    let tol = DEFAULT_NEAR_TOL.max(*jitter_deg * std::f64::consts::PI / 360.0);
    let report = collision_scan(&probe, &geometry, tol)?;
    Ok(report
        .pairs
        .iter()
        .map(|p| {
            format!(
                "near collision: {}° and {}° at f = {}, |Δw| − {}/{} = {:.6}",
                thetas_deg[p.i], thetas_deg[p.j], p.f, p.k, p.f, p.residual
            )
        })
        .collect())
}

fn run_point(s: &Scenario, axis: Option<SweepAxis>, value: Option<f64>, keep_trials: bool) -> Result<ResultRow> {
    let geometry = s.geometry()?;
    let plan = LiftingPlan::new(&geometry);
    let results: Vec<Result<(TrialRecord, Option<DoaEstimate>)>> =
        (0..s.mc).into_par_iter().map(|t| run_trial(s, &plan, t)).collect();
    let mut trials = Vec::with_capacity(s.mc);
    for r in results {
        trials.push(r?.0);
    }
    let n = trials.len() as f64;
    let rmse_deg = (trials.iter().map(|t| t.sq_error).sum::<f64>() / n).sqrt();
    let mean_iters = trials.iter().map(|t| t.iterations as f64).sum::<f64>() / n;
    let mean_solve_ms = Some(trials.iter().filter_map(|t| t.solve_ms).sum::<f64>() / n);
    let n_failed = trials.iter().filter(|t| t.failure.is_some()).count();
    Ok(ResultRow {
        scenario_id: s.id.clone(),
        sweep_axis: axis.map_or("none", |a| a.name()).to_string(),
        sweep_value: value,
        rmse_deg,
        mean_iters,
        mean_solve_ms,
        n_failed,
        notes: collision_notes(s)?,
        trials: if keep_trials { trials } else { Vec::new() },
    })
}

/// Runs the scenario: its sweep if one is configured, otherwise one row.
pub fn run_scenario(s: &Scenario, keep_trials: bool) -> Result<ResultTable> {
    s.validate()?;
    match &s.sweep {
        Some(sw) => sweep(s, sw.axis, &sw.values, keep_trials),
        None => Ok(ResultTable { rows: vec![run_point(s, None, None, keep_trials)?] }),
    }
}

/// One row per sweep value; all values share the base seed.
pub fn sweep(s: &Scenario, axis: SweepAxis, values: &[f64], keep_trials: bool) -> Result<ResultTable> {
    let points: Vec<Scenario> = values.iter().map(|&v| s.with_sweep_value(axis, v)).collect::<Result<_>>()?;
    for p in &points {
        p.validate()?;
    }
    let rows = points
        .iter()
        .zip(values)
        .map(|(p, &v)| run_point(p, Some(axis), Some(v), keep_trials))
        .collect::<Result<_>>()?;
    Ok(ResultTable { rows })
}
