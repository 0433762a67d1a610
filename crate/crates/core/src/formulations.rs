//! SDP builders for gridless multi-frequency DOA estimation, the matching
//! dual programs, dual-polynomial evaluation and duality checks.
//!
//! Primal block layout: `[[T, Ỹ], [Ỹ^H, W]]` where `T` is `n_γ × n_γ`
//! (`n_γ = N_u` for the fast program, `N` for the full one) and the columns
//! of `Ỹ` are ordered `[Ỹ_{f_1} | Ỹ_{f_2} | …]`, `N_l` columns per
//! frequency. Dual block layout: `[[P, Q̃], [Q̃^H, I]]` with the same
//! ordering.
//!
//! Objective scaling: with unit-modulus manifold entries the primal value
//! `Tr(T) + Tr(W)` equals `2·√n_γ` times the dual value `⟨Q, Y⟩_ℝ` at
//! optimality. The minimizers are unaffected; [`verify_duality_gap`]
//! divides by this factor before comparing.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::eig::hermitian_eig;
use crate::error::{DoaError, Result};
use crate::lifting::{irregular_toep, lift_r, toep, LiftingPlan, ToeplitzVector};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::model::{manifold_vector, synthesize, MeasurementTensor, SourceSet};
use crate::solver::{solve, ConicProblem, ConicSolution, LinearForm, SolveOptions, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    FastPrimal,
    FullPrimal,
}

impl std::str::FromStr for Estimator {
    type Err = DoaError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast_primal" | "fast" => Ok(Self::FastPrimal),
            "full_primal" | "full" => Ok(Self::FullPrimal),
            other => Err(DoaError::Config(format!("unknown estimator '{other}' (fast_primal | full_primal)"))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::FastPrimal => "fast_primal",
            Self::FullPrimal => "full_primal",
        })
    }
}

/// Solver diagnostics carried by every formulation result.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveInfo {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub solve_ms: f64,
    /// Factor the data were divided by before solving (`‖𝒴‖_HS`).
    pub data_scale: f64,
}

impl SolveInfo {
    fn from_solution(s: &ConicSolution, data_scale: f64) -> Self {
        Self {
            status: s.status,
            iterations: s.iterations,
            primal_residual: s.primal_residual,
            dual_residual: s.dual_residual,
            gap: s.gap,
            solve_ms: s.solve_ms,
            data_scale,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalSdpResult {
    pub estimator: Estimator,
    pub u: ToeplitzVector,
    pub w: CMatrix,
    pub y_tilde: CMatrix,
    /// `Tr(T) + Tr(W)` in data units.
    pub objective: f64,
    /// Lifted indices of the rows of `T`: 𝒰 (fast) or `0..N` (full).
    pub gamma: Vec<usize>,
    pub info: SolveInfo,
    /// Solved upper-left block (before Toeplitz averaging), data units.
    pub t_raw: CMatrix,
    /// Smallest eigenvalue of the solved PSD block, data units.
    pub min_block_eig: f64,
}

impl PrimalSdpResult {
    /// The structured matrix whose null spectrum gives the DOAs:
    /// `T(u)` for the fast program, `Toep(u)` for the full one.
    pub fn t_matrix(&self, plan: &LiftingPlan) -> Result<CMatrix> {
        match self.estimator {
            Estimator::FastPrimal => irregular_toep(&self.u, plan),
            Estimator::FullPrimal => Ok(toep(&self.u.values)),
        }
    }

    /// Largest entrywise deviation of `t_raw` from the averaged Toeplitz
    /// structure.
    pub fn tying_defect(&self, plan: &LiftingPlan) -> Result<f64> {
        Ok(self.t_raw.max_abs_diff(&self.t_matrix(plan)?))
    }

    /// Largest deviation between the measured data and the lifted rows of `Ỹ`.
    pub fn recovery_defect(&self, y: &MeasurementTensor, plan: &LiftingPlan) -> Result<f64> {
        let geometry = plan.geometry();
        let n_l = y.n_snapshots();
        let mut worst: f64 = 0.0;
        for fi in 0..geometry.n_freqs() {
            let rows = match self.estimator {
                Estimator::FastPrimal => plan.rows_r1(fi),
                Estimator::FullPrimal => plan.rows_r(fi),
            };
            for (mi, &r) in rows.iter().enumerate() {
                for l in 0..n_l {
                    let d = self.y_tilde[(r, fi * n_l + l)] - y.slices[fi][(mi, l)];
                    worst = worst.max(d.norm());
                }
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    /// One `N_m × N_l` matrix per frequency.
    pub q: Vec<CMatrix>,
    /// Upper-left block `P` (size `n_γ`).
    pub p0: CMatrix,
    /// `⟨Q, Y⟩_ℝ` in data units.
    pub objective: f64,
    pub gamma: Vec<usize>,
    pub info: SolveInfo,
    pub min_block_eig: f64,
}

impl DualCertificate {
    /// Largest violation of `Σ_{γ_j − γ_i = k} P(i, j) = δ_k` over the
    /// constrained offsets.
    pub fn trace_pattern_defect(&self, plan: &LiftingPlan) -> f64 {
        let g = &self.gamma;
        let n = plan.n();
        let mut sums = vec![ZERO; n];
        for i in 0..g.len() {
            for j in i..g.len() {
                sums[g[j] - g[i]] += self.p0[(i, j)];
            }
        }
        let mut worst: f64 = 0.0;
        for (k, s) in sums.iter().enumerate() {
            let target = if k == 0 { C64::new(1.0, 0.0) } else { ZERO };
            if k == 0 || plan.mask()[k] {
                worst = worst.max((s - target).norm());
            }
        }
        worst
    }
}

fn check_measurement(y: &MeasurementTensor, plan: &LiftingPlan) -> Result<()> {
    if y.geometry != *plan.geometry() {
        return Err(DoaError::DimensionMismatch {
            expected: "measurement geometry equal to the plan geometry".into(),
            got: "a different geometry".into(),
        });
    }
    Ok(())
}

fn require_uniform(plan: &LiftingPlan) -> Result<()> {
    if !plan.geometry().is_uniform() {
        return Err(DoaError::Unsupported(
            "the full-dimension program needs sensors 0..N_M and frequencies 1..N_F".into(),
        ));
    }
    Ok(())
}

/// Pairs `(i, j)`, `i ≤ j`, grouped by offset `γ_j − γ_i`.
fn offset_groups(gamma: &[usize], n: usize) -> Vec<Vec<(usize, usize)>> {
    let mut groups = vec![Vec::new(); n];
    for i in 0..gamma.len() {
        for j in i..gamma.len() {
            groups[gamma[j] - gamma[i]].push((i, j));
        }
    }
    groups
}

fn build_primal(y: &MeasurementTensor, plan: &LiftingPlan, gamma: &[usize], rows: &dyn Fn(usize) -> Vec<usize>) -> ConicProblem {
    let n_g = gamma.len();
    let n_l = y.n_snapshots();
    let n_f = plan.geometry().n_freqs();
    let size = n_g + n_l * n_f;
    let mut p = ConicProblem::new(vec![size], 0);
    for i in 0..size {
        p.objective.add_re(0, i, i, 1.0);
    }
    for group in offset_groups(gamma, plan.n()) {
        if let Some((&first, rest)) = group.split_first() {
            for &other in rest {
                p.tie_entries(0, first, other);
            }
        }
    }
    for fi in 0..n_f {
        for (mi, r) in rows(fi).into_iter().enumerate() {
            for l in 0..n_l {
                p.fix_entry(0, r, n_g + fi * n_l + l, y.slices[fi][(mi, l)]);
            }
        }
    }
    p
}

/// Fast primal program over `T(u)` (size `N_u`). Rows of `Ỹ` that no
/// sensor maps to are left free.
pub fn build_fast_primal(y: &MeasurementTensor, plan: &LiftingPlan) -> Result<ConicProblem> {
    check_measurement(y, plan)?;
    Ok(build_primal(y, plan, plan.u_set(), &|fi| plan.rows_r1(fi).to_vec()))
}

/// Full-dimension primal program over `Toep(u)` (size `N`); uniform
/// geometry only.
pub fn build_full_primal(y: &MeasurementTensor, plan: &LiftingPlan) -> Result<ConicProblem> {
    check_measurement(y, plan)?;
    require_uniform(plan)?;
    let gamma: Vec<usize> = (0..plan.n()).collect();
    Ok(build_primal(y, plan, &gamma, &|fi| plan.rows_r(fi).to_vec()))
}

fn build_dual(y: &MeasurementTensor, plan: &LiftingPlan, gamma: &[usize], rows: &dyn Fn(usize) -> Vec<usize>) -> ConicProblem {
    let n_g = gamma.len();
    let n_l = y.n_snapshots();
    let n_f = plan.geometry().n_freqs();
    let n_c = n_l * n_f;
    let mut p = ConicProblem::new(vec![n_g + n_c], 0);

    // identity in the lower-right block
    for a in 0..n_c {
        for b in a..n_c {
            let v = if a == b { C64::new(1.0, 0.0) } else { ZERO };
            p.fix_entry(0, n_g + a, n_g + b, v);
        }
    }
    // Q̃ vanishes outside the lifted rows; objective −⟨Q, Y⟩ on the lifted rows
    for fi in 0..n_f {
        let lifted = rows(fi);
        let mut used = vec![false; n_g];
        for &r in &lifted {
            used[r] = true;
        }
        for l in 0..n_l {
            let col = n_g + fi * n_l + l;
            for (r, &u) in used.iter().enumerate() {
                if !u {
                    p.fix_entry(0, r, col, ZERO);
                }
            }
            for (mi, &r) in lifted.iter().enumerate() {
                p.objective.add(0, r, col, -y.slices[fi][(mi, l)]);
            }
        }
    }
    // Σ_{γ_j − γ_i = k} P(i, j) = δ_k
    for (k, group) in offset_groups(gamma, plan.n()).into_iter().enumerate() {
        if group.is_empty() {
            continue;
        }
        let mut re = LinearForm::new();
        for &(i, j) in &group {
            re.add_re(0, i, j, 1.0);
        }
        p.add_constraint(re, if k == 0 { 1.0 } else { 0.0 });
        if k > 0 {
            let mut im = LinearForm::new();
            for &(i, j) in &group {
                im.add_im(0, i, j, 1.0);
            }
            p.add_constraint(im, 0.0);
        }
    }
    p
}

/// Dual of the full-dimension program (uniform geometry only).
pub fn build_dual_uniform(y: &MeasurementTensor, plan: &LiftingPlan) -> Result<ConicProblem> {
    check_measurement(y, plan)?;
    require_uniform(plan)?;
    let gamma: Vec<usize> = (0..plan.n()).collect();
    Ok(build_dual(y, plan, &gamma, &|fi| plan.rows_r(fi).to_vec()))
}

/// Dual of the fast program; trace-pattern constraints only on realized
/// offsets.
pub fn build_dual_fast(y: &MeasurementTensor, plan: &LiftingPlan) -> Result<ConicProblem> {
    check_measurement(y, plan)?;
    Ok(build_dual(y, plan, plan.u_set(), &|fi| plan.rows_r1(fi).to_vec()))
}

fn normalized(y: &MeasurementTensor) -> (MeasurementTensor, f64) {
    let s = y.hs_norm();
    if s > 0.0 && s.is_finite() {
        (y.scaled(1.0 / s), s)
    } else {
        (y.clone(), 1.0)
    }
}

fn min_eig(m: &CMatrix) -> Result<f64> {
    Ok(hermitian_eig(m)?.values.first().copied().unwrap_or(0.0))
}

/// Builds and solves the selected primal program. The data are normalized
/// to unit Hilbert–Schmidt norm for the solve and the outputs rescaled.
pub fn solve_primal(
    y: &MeasurementTensor,
    plan: &LiftingPlan,
    estimator: Estimator,
    opts: &SolveOptions,
) -> Result<PrimalSdpResult> {
    let (yn, scale) = normalized(y);
    let (problem, gamma) = match estimator {
        Estimator::FastPrimal => (build_fast_primal(&yn, plan)?, plan.u_set().to_vec()),
        Estimator::FullPrimal => (build_full_primal(&yn, plan)?, (0..plan.n()).collect()),
    };
    let sol = solve(&problem, opts)?;
    let x = &sol.x[0];
    let n_g = gamma.len();
    let n_c = x.rows() - n_g;

    let mut sums = vec![ZERO; plan.n()];
    let mut counts = vec![0usize; plan.n()];
    for i in 0..n_g {
        for j in i..n_g {
            let k = gamma[j] - gamma[i];
            sums[k] += x[(i, j)];
            counts[k] += 1;
        }
    }
    let values: Vec<C64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s * (scale / c as f64) } else { ZERO })
        .collect();
    let u = match estimator {
        Estimator::FastPrimal => ToeplitzVector::irregular(values, plan)?,
        Estimator::FullPrimal => ToeplitzVector::full(values),
    };
    Ok(PrimalSdpResult {
        estimator,
        u,
        w: x.submatrix(n_g, n_g, n_c, n_c).scale(scale),
        y_tilde: x.submatrix(0, n_g, n_g, n_c).scale(scale),
        objective: sol.objective * scale,
        gamma,
        info: SolveInfo::from_solution(&sol, scale),
        t_raw: x.submatrix(0, 0, n_g, n_g).scale(scale),
        min_block_eig: min_eig(x)? * scale,
    })
}

/// Solves the dual matching `estimator` (fast dual or uniform dual).
pub fn solve_dual(
    y: &MeasurementTensor,
    plan: &LiftingPlan,
    estimator: Estimator,
    opts: &SolveOptions,
) -> Result<DualCertificate> {
    let (yn, scale) = normalized(y);
    let (problem, gamma) = match estimator {
        Estimator::FastPrimal => (build_dual_fast(&yn, plan)?, plan.u_set().to_vec()),
        Estimator::FullPrimal => (build_dual_uniform(&yn, plan)?, (0..plan.n()).collect()),
    };
    let sol = solve(&problem, opts)?;
    let x = &sol.x[0];
    let n_g = gamma.len();
    let n_l = y.n_snapshots();
    let geometry = plan.geometry();
    let q = (0..geometry.n_freqs())
        .map(|fi| {
            let rows = match estimator {
                Estimator::FastPrimal => plan.rows_r1(fi),
                Estimator::FullPrimal => plan.rows_r(fi),
            };
            CMatrix::from_fn(rows.len(), n_l, |mi, l| x[(rows[mi], n_g + fi * n_l + l)])
        })
        .collect();
    Ok(DualCertificate {
        q,
        p0: x.submatrix(0, 0, n_g, n_g),
        objective: -sol.objective * scale,
        gamma,
        info: SolveInfo::from_solution(&sol, scale),
        min_block_eig: min_eig(x)?,
    })
}

/// `⟨Q, Y⟩_ℝ = Σ_f Re tr(Q_f^H Y_f)`.
pub fn dual_objective(q: &[CMatrix], y: &MeasurementTensor) -> f64 {
    q.iter().zip(&y.slices).map(|(a, b)| a.inner_real(b)).sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualPolynomial {
    /// `N_f × N_l`, row `fi` holds `Q_f^H a(f, w)`.
    pub psi: CMatrix,
    pub frob_norm: f64,
    /// `1 − ‖Ψ‖_F²`
    pub r_w: f64,
    /// Largest deviation between the direct and lifted evaluations.
    pub path_defect: f64,
}

/// Evaluates the dual polynomial at `w` both directly from the manifold
/// vectors and through the lifted form `Q̃_f^H [z^0 … z^{N−1}]ᵀ`.
pub fn dual_polynomial(q: &[CMatrix], w: f64, plan: &LiftingPlan) -> Result<DualPolynomial> {
    let geometry = plan.geometry();
    if q.len() != geometry.n_freqs() {
        return Err(DoaError::DimensionMismatch {
            expected: format!("{} frequency blocks", geometry.n_freqs()),
            got: q.len().to_string(),
        });
    }
    let n_l = q[0].cols();
    let zpow: Vec<C64> = (0..plan.n()).map(|k| C64::from_polar(1.0, -2.0 * PI * w * k as f64)).collect();
    let mut psi = CMatrix::zeros(geometry.n_freqs(), n_l);
    let mut defect: f64 = 0.0;
    for (fi, &f) in geometry.freq_indices().iter().enumerate() {
        let a = manifold_vector(geometry, f, w)?;
        let lifted = lift_r(plan, &q[fi], f)?;
        for l in 0..n_l {
            let direct: C64 = (0..a.len()).map(|m| q[fi][(m, l)].conj() * a[m]).sum();
            let via: C64 = (0..plan.n()).map(|k| lifted[(k, l)].conj() * zpow[k]).sum();
            psi[(fi, l)] = direct;
            defect = defect.max((direct - via).norm());
        }
    }
    let frob_norm = psi.frobenius_norm();
    Ok(DualPolynomial { psi, frob_norm, r_w: 1.0 - frob_norm * frob_norm, path_defect: defect })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualityReport {
    /// Primal objective divided by `2·√n_γ`, normalized data.
    pub primal_scaled: f64,
    /// Dual value, normalized data.
    pub dual: f64,
    /// `|primal_scaled − dual| / max(1, |primal_scaled|)`
    pub relative_gap: f64,
    pub primal_status: SolveStatus,
    pub dual_status: SolveStatus,
}

/// Solves a primal program and its dual on the normalized data and compares
/// the two optimal values.
pub fn verify_duality_gap(
    y: &MeasurementTensor,
    plan: &LiftingPlan,
    estimator: Estimator,
    opts: &SolveOptions,
) -> Result<DualityReport> {
    let scale = {
        let s = y.hs_norm();
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    };
    let primal = solve_primal(y, plan, estimator, opts)?;
    let dual = solve_dual(y, plan, estimator, opts)?;
    let n_g = primal.gamma.len() as f64;
    let p = primal.objective / scale / (2.0 * n_g.sqrt());
    let d = dual.objective / scale;
    Ok(DualityReport {
        primal_scaled: p,
        dual: d,
        relative_gap: (p - d).abs() / p.abs().max(1.0),
        primal_status: primal.info.status,
        dual_status: dual.info.status,
    })
}

/// Shared numerical-rank rule: eigenvalues above `max(1e−6, 1e−8·λ_max)`.
pub fn numerical_rank(values: &[f64]) -> usize {
    let lmax = values.iter().copied().fold(0.0, f64::max);
    let thr = rank_threshold(lmax);
    values.iter().filter(|&&v| v > thr).count()
}

pub fn rank_threshold(lambda_max: f64) -> f64 {
    1e-6f64.max(1e-8 * lambda_max)
}

/// Noise-free single-snapshot check of the rank / atomic-ℓ0 relation:
/// synthesizes the measurement, solves the full program and returns
/// `(rank Toep(u), K)`. The rank is taken on the normalized solve.
pub fn atomic_l0_ranktest(sources: &SourceSet, plan: &LiftingPlan, opts: &SolveOptions) -> Result<(usize, usize)> {
    require_uniform(plan)?;
    let n_l = sources.amplitudes()[0].cols();
    let y = synthesize(plan.geometry(), sources, n_l, None, 0)?;
    let k = sources.count();
    rank_of_solution(&y, plan, opts).map(|r| (r, k))
}

/// Numerical rank of `Toep(u)` from the full program on normalized data.
pub fn rank_of_solution(y: &MeasurementTensor, plan: &LiftingPlan, opts: &SolveOptions) -> Result<usize> {
    if y.hs_norm() == 0.0 {
        return Ok(0);
    }
    let res = solve_primal(y, plan, Estimator::FullPrimal, opts)?;
    let t = toep(&res.u.values).scale(1.0 / res.info.data_scale);
    Ok(numerical_rank(&hermitian_eig(&t)?.values))
}
