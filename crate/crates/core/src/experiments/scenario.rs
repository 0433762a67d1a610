//! Scenario configuration, read from TOML.
//!
//! ```toml
//! id = "mmv_snr"
//! n_sensors = 16            # or: sensors = [0, 1, 3, 4]
//! n_freqs = 2               # or: freq_indices = [1, 3, 4]
//! n_snapshots = 20
//! snr_db = 30.0             # omit for noise-free data
//! mc = 20
//! seed = 7
//! estimator = "fast_primal"
//!
//! [sources]
//! kind = "fixed"            # fixed | random | spread
//! thetas_deg = [88.0, 93.0, 155.0]
//!
//! [sweep]
//! axis = "snr"              # snr | n_snapshots | n_freqs
//! values = [-10.0, 0.0, 10.0, 20.0, 30.0]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::extraction::ExtractOptions;
use crate::formulations::Estimator;
use crate::model::GeometryConfig;
use crate::solver::SolveOptions;

pub const DEFAULT_MC: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Fixed angles; each trial adds a uniform offset in `±jitter_deg`.
    Fixed {
        thetas_deg: Vec<f64>,
        #[serde(default)]
        jitter_deg: f64,
    },
    /// Uniform draws in `range_deg` with pairwise `|Δcos θ| ≥ min_sep_cos`
    /// (default `4/N_M`).
    Random {
        k: usize,
        #[serde(default)]
        min_sep_cos: Option<f64>,
        #[serde(default = "default_range")]
        range_deg: [f64; 2],
    },
    /// Deterministic layout `⌊acos(−1 + 2(k − ½)/K)⌋` degrees, `k = 1..K`.
    Spread { k: usize },
}

fn default_range() -> [f64; 2] {
    [15.0, 165.0]
}

impl SourceSpec {
    pub fn count(&self) -> usize {
        match self {
            Self::Fixed { thetas_deg, .. } => thetas_deg.len(),
            Self::Random { k, .. } | Self::Spread { k } => *k,
        }
    }
}

/// `⌊acos(−1 + 2(k − ½)/K)⌋` in degrees for `k = 1..=K`. A small offset
/// keeps exact integers (e.g. 120°) from flooring one degree low.
pub fn spread_thetas(k: usize) -> Vec<f64> {
    (1..=k)
        .map(|i| ((-1.0 + 2.0 * (i as f64 - 0.5) / k as f64).acos().to_degrees() + 1e-9).floor())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeKind {
    Gaussian,
    Deterministic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Snr,
    NSnapshots,
    NFreqs,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::NSnapshots => "n_snapshots",
            Self::NFreqs => "n_freqs",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = DoaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snr" => Ok(Self::Snr),
            "n_snapshots" => Ok(Self::NSnapshots),
            "n_freqs" => Ok(Self::NFreqs),
            other => Err(DoaError::Config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_id")]
    pub id: String,
    #[serde(default)]
    pub sensors: Option<Vec<usize>>,
    #[serde(default)]
    pub n_sensors: Option<usize>,
    #[serde(default)]
    pub freq_indices: Option<Vec<usize>>,
    #[serde(default)]
    pub n_freqs: Option<usize>,
    #[serde(default = "default_f1")]
    pub f1_hz: f64,
    #[serde(default = "default_speed")]
    pub speed: f64,
    pub sources: SourceSpec,
    #[serde(default)]
    pub powers: Option<Vec<f64>>,
    #[serde(default = "default_amplitudes")]
    pub amplitudes: AmplitudeKind,
    #[serde(default = "default_one")]
    pub n_snapshots: usize,
    #[serde(default)]
    pub snr_db: Option<f64>,
    #[serde(default = "default_mc")]
    pub mc: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_estimator")]
    pub estimator: Estimator,
    /// Model order handed to the extractor; defaults to the true K.
    #[serde(default)]
    pub k_est: Option<usize>,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_refine")]
    pub refine_iters: usize,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn default_id() -> String {
    "scenario".into()
}
fn default_f1() -> f64 {
    100.0
}
fn default_speed() -> f64 {
    343.0
}
fn default_amplitudes() -> AmplitudeKind {
    AmplitudeKind::Gaussian
}
fn default_one() -> usize {
    1
}
fn default_mc() -> usize {
    DEFAULT_MC
}
fn default_estimator() -> Estimator {
    Estimator::FastPrimal
}
fn default_tol() -> f64 {
    SolveOptions::default().tol
}
fn default_max_iter() -> usize {
    SolveOptions::default().max_iter
}
fn default_grid() -> usize {
    ExtractOptions::default().grid_points
}
fn default_refine() -> usize {
    ExtractOptions::default().refine_iters
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| DoaError::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| DoaError::Config(e.to_string()))
    }

    pub fn sensor_indices(&self) -> Result<Vec<usize>> {
        match (&self.sensors, self.n_sensors) {
            (Some(s), None) => Ok(s.clone()),
            (None, Some(n)) => Ok((0..n).collect()),
            _ => Err(DoaError::Config("give exactly one of `sensors` and `n_sensors`".into())),
        }
    }

    pub fn frequency_indices(&self) -> Result<Vec<usize>> {
        match (&self.freq_indices, self.n_freqs) {
            (Some(f), None) => Ok(f.clone()),
            (None, Some(n)) => Ok((1..=n).collect()),
            _ => Err(DoaError::Config("give exactly one of `freq_indices` and `n_freqs`".into())),
        }
    }

    pub fn geometry(&self) -> Result<GeometryConfig> {
        GeometryConfig::new(self.sensor_indices()?, self.frequency_indices()?, self.f1_hz, self.speed)
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.solver_tol, max_iter: self.max_iter, ..Default::default() }
    }

    pub fn extract_options(&self) -> ExtractOptions {
        ExtractOptions { grid_points: self.grid_points, refine_iters: self.refine_iters }
    }

    pub fn k_true(&self) -> usize {
        self.sources.count()
    }

    pub fn k_extract(&self) -> usize {
        self.k_est.unwrap_or_else(|| self.k_true())
    }

    /// The scenario with one sweep value applied.
    pub fn with_sweep_value(&self, axis: SweepAxis, value: f64) -> Result<Scenario> {
        let mut s = self.clone();
        s.sweep = None;
        match axis {
            SweepAxis::Snr => s.snr_db = Some(value),
            SweepAxis::NSnapshots => s.n_snapshots = as_count(value, "n_snapshots")?,
            SweepAxis::NFreqs => {
                s.freq_indices = None;
                s.n_freqs = Some(as_count(value, "n_freqs")?);
            }
        }
        Ok(s)
    }

    /// Checks everything that can be checked without running a trial.
    pub fn validate(&self) -> Result<()> {
        let geometry = self.geometry()?;
        if self.mc == 0 {
            return Err(DoaError::Config("mc must be at least 1".into()));
        }
        if self.n_snapshots == 0 {
            return Err(DoaError::Config("n_snapshots must be at least 1".into()));
        }
        let k = self.k_true();
        if k == 0 {
            return Err(DoaError::Config("at least one source is required".into()));
        }
        if let Some(p) = &self.powers {
            if p.len() != k || p.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(DoaError::Config(format!("powers must be {k} positive numbers")));
            }
        }
        match &self.sources {
            SourceSpec::Fixed { thetas_deg, jitter_deg } => {
                if !(*jitter_deg >= 0.0) {
                    return Err(DoaError::Config("jitter_deg must be non-negative".into()));
                }
                for &t in thetas_deg {
                    if !(t - jitter_deg > 0.0 && t + jitter_deg < 180.0) {
                        return Err(DoaError::Config(format!("DOA {t}° ± {jitter_deg}° leaves (0°, 180°)")));
                    }
                }
            }
            SourceSpec::Random { k, min_sep_cos, range_deg } => {
                let sep = min_sep_cos.unwrap_or(4.0 / geometry.sensor_grid_len() as f64);
                let [lo, hi] = *range_deg;
                if !(lo > 0.0 && hi < 180.0 && lo < hi) {
                    return Err(DoaError::Config(format!("DOA range [{lo}, {hi}] must lie inside (0, 180)")));
                }
                let span = lo.to_radians().cos() - hi.to_radians().cos();
                if (*k as f64 - 1.0) * sep > span {
                    return Err(DoaError::Config(format!(
                        "cannot place {k} sources {sep} apart in cosine; span is {span:.4}"
                    )));
                }
            }
            SourceSpec::Spread { .. } => {}
        }
        if self.k_extract() < k {
            return Err(DoaError::Config(format!("k_est = {} is below the true K = {k}", self.k_extract())));
        }
        if !(self.solver_tol > 0.0) || self.max_iter == 0 {
            return Err(DoaError::Config("solver_tol must be positive and max_iter non-zero".into()));
        }
        if self.grid_points < 3 {
            return Err(DoaError::Config("grid_points must be at least 3".into()));
        }
        if let Some(s) = &self.snr_db {
            if !s.is_finite() {
                return Err(DoaError::Config("snr_db must be finite".into()));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() {
                return Err(DoaError::Config("sweep needs at least one value".into()));
            }
            for &v in &sw.values {
                self.with_sweep_value(sw.axis, v)?.validate_point()?;
            }
        } else {
            self.validate_point()?;
        }
        Ok(())
    }

    /// Checks that depend on the concrete geometry of one sweep point.
    fn validate_point(&self) -> Result<()> {
        let geometry = self.geometry()?;
        let n_rows = match self.estimator {
            Estimator::FastPrimal => geometry.space_freq_set().len(),
            Estimator::FullPrimal => {
                if !geometry.is_uniform() {
                    return Err(DoaError::Unsupported(
                        "full_primal needs sensors 0..N_M and frequencies 1..N_F".into(),
                    ));
                }
                geometry.lifted_len()
            }
        };
        if self.k_extract() >= n_rows {
            return Err(DoaError::SubspaceDimension { k: self.k_extract(), dim: n_rows });
        }
        Ok(())
    }
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v.is_finite() {
        Ok(v as usize)
    } else {
        Err(DoaError::Config(format!("{what} sweep values must be positive integers, got {v}")))
    }
}
