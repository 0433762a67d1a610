//! Array and frequency geometry, angle conventions, manifold vectors and
//! multi-frequency multi-snapshot signal synthesis.
//!
//! Sensors sit on the grid `{0, …, N_M−1}·d` and temporal frequencies on
//! `{1, …, N_F}·F1`, with `d = c/(2·F1)`. Under that spacing the directional
//! cosine is `w = cos(θ)/2` and the manifold vector for frequency index `f`
//! has entries `z^{f·m}` with `z = e^{−j2πw}`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, C64};

/// Seedable generator used for every stochastic operation in the crate.
pub type DoaRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> DoaRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent child seed; used to split one trial seed into
/// streams for source draws, amplitudes and noise.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One draw from CN(0, 1).
pub fn complex_gaussian(rng: &mut impl Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    sensor_indices: Vec<usize>,
    freq_indices: Vec<usize>,
    base_freq_hz: f64,
    speed: f64,
}

impl GeometryConfig {
    pub fn new(sensor_indices: Vec<usize>, freq_indices: Vec<usize>, base_freq_hz: f64, speed: f64) -> Result<Self> {
        if sensor_indices.is_empty() {
            return Err(DoaError::InvalidGeometry("sensor set is empty".into()));
        }
        if freq_indices.is_empty() {
            return Err(DoaError::InvalidGeometry("frequency set is empty".into()));
        }
        if sensor_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DoaError::InvalidGeometry("sensor indices must be strictly increasing".into()));
        }
        if freq_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DoaError::InvalidGeometry("frequency indices must be strictly increasing".into()));
        }
        if freq_indices[0] == 0 {
            return Err(DoaError::InvalidGeometry("frequency indices start at 1".into()));
        }
        if !(base_freq_hz > 0.0 && base_freq_hz.is_finite()) {
            return Err(DoaError::InvalidGeometry(format!("base frequency must be positive, got {base_freq_hz}")));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(DoaError::InvalidGeometry(format!("propagation speed must be positive, got {speed}")));
        }
        Ok(Self { sensor_indices, freq_indices, base_freq_hz, speed })
    }

    /// Uniform linear array with `n_sensors` sensors and frequencies `1..=n_freqs`.
    pub fn uniform(n_sensors: usize, n_freqs: usize) -> Result<Self> {
        Self::new((0..n_sensors).collect(), (1..=n_freqs).collect(), 100.0, 343.0)
    }

    pub fn sensor_indices(&self) -> &[usize] {
        &self.sensor_indices
    }

    pub fn freq_indices(&self) -> &[usize] {
        &self.freq_indices
    }

    pub fn base_freq_hz(&self) -> f64 {
        self.base_freq_hz
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// Sensor spacing unit `d = c/(2·F1)` in metres.
    pub fn spacing(&self) -> f64 {
        self.speed / (2.0 * self.base_freq_hz)
    }

    /// `N_m = |ℳ|`
    pub fn n_sensors(&self) -> usize {
        self.sensor_indices.len()
    }

    /// `N_M = max(ℳ) + 1`
    pub fn sensor_grid_len(&self) -> usize {
        self.sensor_indices[self.sensor_indices.len() - 1] + 1
    }

    /// `N_f = |ℱ|`
    pub fn n_freqs(&self) -> usize {
        self.freq_indices.len()
    }

    /// `N_F = max(ℱ)`
    pub fn freq_grid_len(&self) -> usize {
        self.freq_indices[self.freq_indices.len() - 1]
    }

    /// Length of the full lifted axis, `N = N_F·(N_M − 1) + 1`.
    pub fn lifted_len(&self) -> usize {
        self.freq_grid_len() * (self.sensor_grid_len() - 1) + 1
    }

    /// Sorted, deduplicated space-frequency products `{m·f}`.
    pub fn space_freq_set(&self) -> Vec<usize> {
        let mut u: Vec<usize> = self
            .freq_indices
            .iter()
            .flat_map(|&f| self.sensor_indices.iter().map(move |&m| m * f))
            .collect();
        u.sort_unstable();
        u.dedup();
        u
    }

    /// True for a full ULA with uniform frequencies `1..=N_F`.
    pub fn is_uniform(&self) -> bool {
        self.sensor_indices.iter().copied().eq(0..self.sensor_grid_len())
            && self.freq_indices.iter().copied().eq(1..=self.freq_grid_len())
    }

    /// Position of frequency index `f` inside ℱ.
    pub fn freq_position(&self, f: usize) -> Result<usize> {
        self.freq_indices.binary_search(&f).map_err(|_| DoaError::InvalidFrequency(f))
    }
}

/// Sources with their directions, powers and unit-norm amplitude blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSet {
    thetas_deg: Vec<f64>,
    powers: Vec<f64>,
    /// Per source an `N_f × N_l` block with unit Frobenius norm.
    amplitudes: Vec<CMatrix>,
}

impl SourceSet {
    pub fn new(thetas_deg: Vec<f64>, powers: Vec<f64>, amplitudes: Vec<CMatrix>) -> Result<Self> {
        let k = thetas_deg.len();
        if k == 0 {
            return Err(DoaError::Config("at least one source is required".into()));
        }
        if powers.len() != k || amplitudes.len() != k {
            return Err(DoaError::DimensionMismatch {
                expected: format!("{k} powers and amplitude blocks"),
                got: format!("{} powers, {} blocks", powers.len(), amplitudes.len()),
            });
        }
        for &t in &thetas_deg {
            theta_to_w(t)?;
        }
        if powers.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(DoaError::Config("source powers must be positive".into()));
        }
        let shape = amplitudes[0].shape();
        let mut normalized = Vec::with_capacity(k);
        for a in amplitudes {
            if a.shape() != shape {
                return Err(DoaError::DimensionMismatch {
                    expected: format!("{}x{}", shape.0, shape.1),
                    got: format!("{}x{}", a.rows(), a.cols()),
                });
            }
            let norm = a.frobenius_norm();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(DoaError::Config("amplitude block must be non-zero".into()));
            }
            normalized.push(a.scale(1.0 / norm));
        }
        Ok(Self { thetas_deg, powers, amplitudes: normalized })
    }

    /// i.i.d. CN(0,1) amplitude entries, normalized per source.
    pub fn with_gaussian_amplitudes(
        thetas_deg: Vec<f64>,
        powers: Vec<f64>,
        n_freqs: usize,
        n_snapshots: usize,
        seed: u64,
    ) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let amplitudes = (0..thetas_deg.len())
            .map(|_| CMatrix::from_fn(n_freqs, n_snapshots, |_, _| complex_gaussian(&mut rng)))
            .collect();
        Self::new(thetas_deg, powers, amplitudes)
    }

    /// All amplitude entries equal (uniform and deterministic across
    /// frequencies and snapshots).
    pub fn with_deterministic_amplitudes(
        thetas_deg: Vec<f64>,
        powers: Vec<f64>,
        n_freqs: usize,
        n_snapshots: usize,
    ) -> Result<Self> {
        let amplitudes = (0..thetas_deg.len())
            .map(|_| CMatrix::from_fn(n_freqs, n_snapshots, |_, _| C64::new(1.0, 0.0)))
            .collect();
        Self::new(thetas_deg, powers, amplitudes)
    }

    pub fn count(&self) -> usize {
        self.thetas_deg.len()
    }

    pub fn thetas_deg(&self) -> &[f64] {
        &self.thetas_deg
    }

    pub fn w(&self) -> Vec<f64> {
        self.thetas_deg.iter().map(|&t| (t * PI / 180.0).cos() / 2.0).collect()
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }

    pub fn amplitudes(&self) -> &[CMatrix] {
        &self.amplitudes
    }

    pub fn sorted_thetas(&self) -> Vec<f64> {
        let mut t = self.thetas_deg.clone();
        t.sort_by(|a, b| a.partial_cmp(b).unwrap());
        t
    }

    /// Union of two source sets (concatenation).
    pub fn union(&self, other: &SourceSet) -> Result<SourceSet> {
        let mut thetas = self.thetas_deg.clone();
        thetas.extend_from_slice(&other.thetas_deg);
        let mut powers = self.powers.clone();
        powers.extend_from_slice(&other.powers);
        let mut amps = self.amplitudes.clone();
        amps.extend(other.amplitudes.iter().cloned());
        SourceSet::new(thetas, powers, amps)
    }
}

/// Received data `N_m × N_l × N_f`, stored as one `N_m × N_l` slice per
/// frequency in ascending frequency order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTensor {
    pub slices: Vec<CMatrix>,
    pub geometry: GeometryConfig,
    pub truth: Option<SourceSet>,
    pub noise_snr_db: Option<f64>,
}

impl MeasurementTensor {
    pub fn new(slices: Vec<CMatrix>, geometry: GeometryConfig) -> Result<Self> {
        if slices.len() != geometry.n_freqs() {
            return Err(DoaError::DimensionMismatch {
                expected: format!("{} frequency slices", geometry.n_freqs()),
                got: format!("{}", slices.len()),
            });
        }
        let n_l = slices[0].cols();
        for s in &slices {
            if s.rows() != geometry.n_sensors() || s.cols() != n_l {
                return Err(DoaError::DimensionMismatch {
                    expected: format!("{}x{}", geometry.n_sensors(), n_l),
                    got: format!("{}x{}", s.rows(), s.cols()),
                });
            }
        }
        Ok(Self { slices, geometry, truth: None, noise_snr_db: None })
    }

    pub fn n_snapshots(&self) -> usize {
        self.slices[0].cols()
    }

    /// Hilbert–Schmidt norm of the whole tensor.
    pub fn hs_norm(&self) -> f64 {
        self.slices.iter().map(|s| s.frobenius_norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            slices: self.slices.iter().map(|m| m.scale(s)).collect(),
            geometry: self.geometry.clone(),
            truth: self.truth.clone(),
            noise_snr_db: self.noise_snr_db,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.geometry != other.geometry || self.n_snapshots() != other.n_snapshots() {
            return Err(DoaError::DimensionMismatch {
                expected: "matching geometry".into(),
                got: "different geometry".into(),
            });
        }
        let slices = self.slices.iter().zip(&other.slices).map(|(a, b)| a.add(b)).collect();
        Ok(Self { slices, geometry: self.geometry.clone(), truth: None, noise_snr_db: None })
    }
}

/// Manifold vector `a(f, w)` over the sensors in ℳ: entries `e^{−j2π w f m}`.
///
/// `w` is not range-checked so that the aliasing identity
/// `a(f, w) = a(f, w + 1/f)` can be evaluated.
pub fn manifold_vector(geometry: &GeometryConfig, f: usize, w: f64) -> Result<Vec<C64>> {
    geometry.freq_position(f)?;
    if !w.is_finite() {
        return Err(DoaError::Domain { value: w, domain: "finite directional cosines" });
    }
    Ok(geometry
        .sensor_indices()
        .iter()
        .map(|&m| C64::from_polar(1.0, -2.0 * PI * w * (f * m) as f64))
        .collect())
}

/// Noise-free part of the measurement, `Σ_w c_w [a(f,w) x_w^T(f)]_f`.
fn noise_free(geometry: &GeometryConfig, sources: &SourceSet, n_snapshots: usize) -> Result<Vec<CMatrix>> {
    let (nf, nl) = sources.amplitudes()[0].shape();
    if nf != geometry.n_freqs() || nl != n_snapshots {
        return Err(DoaError::DimensionMismatch {
            expected: format!("amplitude blocks {}x{}", geometry.n_freqs(), n_snapshots),
            got: format!("{nf}x{nl}"),
        });
    }
    let ws = sources.w();
    let mut slices = Vec::with_capacity(geometry.n_freqs());
    for (fi, &f) in geometry.freq_indices().iter().enumerate() {
        let mut slice = CMatrix::zeros(geometry.n_sensors(), n_snapshots);
        for (k, &w) in ws.iter().enumerate() {
            let a = manifold_vector(geometry, f, w)?;
            let c = sources.powers()[k];
            let x = &sources.amplitudes()[k];
            for (mi, am) in a.iter().enumerate() {
                for l in 0..n_snapshots {
                    slice[(mi, l)] += am * x[(fi, l)] * c;
                }
            }
        }
        slices.push(slice);
    }
    Ok(slices)
}

/// Synthesizes `𝒴 = 𝒳 + 𝒩`. With `snr_db` set, CN(0,1) noise is drawn and
/// scaled globally so that `20·log10(‖𝒳‖_HS/‖𝒩‖_HS)` equals `snr_db`.
pub fn synthesize(
    geometry: &GeometryConfig,
    sources: &SourceSet,
    n_snapshots: usize,
    snr_db: Option<f64>,
    rng_seed: u64,
) -> Result<MeasurementTensor> {
    if n_snapshots == 0 {
        return Err(DoaError::Config("at least one snapshot is required".into()));
    }
    let mut slices = noise_free(geometry, sources, n_snapshots)?;
    if let Some(snr) = snr_db {
        if !snr.is_finite() {
            return Err(DoaError::Config(format!("SNR must be finite, got {snr}")));
        }
        let mut rng = rng_from_seed(rng_seed);
        let noise: Vec<CMatrix> = slices
            .iter()
            .map(|s| CMatrix::from_fn(s.rows(), s.cols(), |_, _| complex_gaussian(&mut rng)))
            .collect();
        let signal_norm = slices.iter().map(|s| s.frobenius_norm().powi(2)).sum::<f64>().sqrt();
        let noise_norm = noise.iter().map(|s| s.frobenius_norm().powi(2)).sum::<f64>().sqrt();
        let scale = signal_norm / (noise_norm * 10f64.powf(snr / 20.0));
        for (s, n) in slices.iter_mut().zip(&noise) {
            *s = s.add(&n.scale(scale));
        }
    }
    let mut y = MeasurementTensor::new(slices, geometry.clone())?;
    y.truth = Some(sources.clone());
    y.noise_snr_db = snr_db;
    Ok(y)
}

/// Realized SNR of a measurement against its noise-free counterpart.
pub fn realized_snr_db(noisy: &MeasurementTensor, clean: &MeasurementTensor) -> f64 {
    let signal = clean.hs_norm();
    let noise: f64 = noisy
        .slices
        .iter()
        .zip(&clean.slices)
        .map(|(a, b)| a.sub(b).frobenius_norm().powi(2))
        .sum::<f64>()
        .sqrt();
    20.0 * (signal / noise).log10()
}

pub fn theta_to_w(theta_deg: f64) -> Result<f64> {
    if !(theta_deg > 0.0 && theta_deg < 180.0) {
        return Err(DoaError::Domain { value: theta_deg, domain: "(0, 180) degrees" });
    }
    Ok((theta_deg * PI / 180.0).cos() / 2.0)
}

pub fn w_to_theta(w: f64) -> Result<f64> {
    if !(-0.5..=0.5).contains(&w) {
        return Err(DoaError::Domain { value: w, domain: "[-1/2, 1/2]" });
    }
    Ok((2.0 * w).acos() * 180.0 / PI)
}

/// `z = e^{−j2πw}`
pub fn w_to_z(w: f64) -> Result<C64> {
    if !(-0.5..=0.5).contains(&w) {
        return Err(DoaError::Domain { value: w, domain: "[-1/2, 1/2]" });
    }
    Ok(C64::from_polar(1.0, -2.0 * PI * w))
}

/// `w = −∠z / 2π`
pub fn z_to_w(z: C64) -> Result<f64> {
    check_unit(z)?;
    Ok(-z.arg() / (2.0 * PI))
}

/// `θ = cos⁻¹(−∠z/π)` in degrees.
pub fn z_to_theta(z: C64) -> Result<f64> {
    check_unit(z)?;
    Ok((-z.arg() / PI).clamp(-1.0, 1.0).acos() * 180.0 / PI)
}

pub fn theta_to_z(theta_deg: f64) -> Result<C64> {
    w_to_z(theta_to_w(theta_deg)?)
}

fn check_unit(z: C64) -> Result<()> {
    let r = z.norm();
    if !((r - 1.0).abs() <= 1e-9) {
        return Err(DoaError::Domain { value: r, domain: "unit-modulus complex numbers" });
    }
    Ok(())
}

/// One (near) collision: `| |w_i − w_j| − k/f | ≤ tol` at frequency index `f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionPair {
    pub i: usize,
    pub j: usize,
    pub f: usize,
    pub k: usize,
    pub residual: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub pairs: Vec<CollisionPair>,
}

impl CollisionReport {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Default near-collision tolerance in `w` units.
pub const DEFAULT_NEAR_TOL: f64 = 0.01;

/// Scans all source pairs and frequencies `f ∈ ℱ, f > 1` for integers
/// `1 ≤ k < f` with `| |w_i − w_j| − k/f | ≤ near_tol`.
pub fn collision_scan(sources: &SourceSet, geometry: &GeometryConfig, near_tol: f64) -> Result<CollisionReport> {
    if !(near_tol >= 0.0) {
        return Err(DoaError::Domain { value: near_tol, domain: "non-negative tolerances" });
    }
    let ws = sources.w();
    let mut pairs = Vec::new();
    for i in 0..ws.len() {
        for j in i + 1..ws.len() {
            let gap = (ws[i] - ws[j]).abs();
            for &f in geometry.freq_indices().iter().filter(|&&f| f > 1) {
                for k in 1..f {
                    let residual = gap - k as f64 / f as f64;
                    if residual.abs() <= near_tol {
                        pairs.push(CollisionPair { i, j, f, k, residual, exact: residual == 0.0 });
                    }
                }
            }
        }
    }
    Ok(CollisionReport { pairs })
}

/// Maximum number of rejection rounds in [`random_doas`].
pub const MAX_DOA_RETRIES: usize = 100_000;

/// Draws `k` angles uniformly on `range_deg` until every pair satisfies
/// `|cos θ_i − cos θ_j| ≥ min_sep_cos`.
pub fn random_doas(k: usize, range_deg: [f64; 2], min_sep_cos: f64, rng_seed: u64) -> Result<Vec<f64>> {
    let [lo, hi] = range_deg;
    if k == 0 {
        return Err(DoaError::Config("K must be at least 1".into()));
    }
    if !(lo > 0.0 && hi < 180.0 && lo < hi) {
        return Err(DoaError::Config(format!("DOA range [{lo}, {hi}] must lie inside (0, 180)")));
    }
    let span = (lo * PI / 180.0).cos() - (hi * PI / 180.0).cos();
    if (k - 1) as f64 * min_sep_cos > span {
        return Err(DoaError::Config(format!(
            "cannot place {k} sources {min_sep_cos} apart in a cosine span of {span:.4}"
        )));
    }
    let mut rng = rng_from_seed(rng_seed);
    for _ in 0..MAX_DOA_RETRIES {
        let thetas: Vec<f64> = (0..k).map(|_| rng.random_range(lo..hi)).collect();
        let cosines: Vec<f64> = thetas.iter().map(|t| (t * PI / 180.0).cos()).collect();
        let ok = (0..k).all(|i| (i + 1..k).all(|j| (cosines[i] - cosines[j]).abs() >= min_sep_cos));
        if ok {
            return Ok(thetas);
        }
    }
    Err(DoaError::Config(format!("no admissible draw of {k} DOAs after {MAX_DOA_RETRIES} attempts")))
}
