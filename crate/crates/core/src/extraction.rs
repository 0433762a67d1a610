//! DOA extraction from a solved Toeplitz-structured matrix: signal/noise
//! split, null spectrum on the unit circle, local-minimum search, angle
//! conversion and power fitting. Also the regular Vandermonde decomposition
//! and its irregular counterpart.
//!
//! With `φ = ∠z` and `w_i = e^{jγ_iφ}` the null spectrum is
//! `D(φ) = wᴴ G w = Σ_k c_k e^{jkφ}`, `c_k = Σ_{γ_j − γ_i = k} G_ij`, so the
//! whole grid is one inverse FFT of the offset sums.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::eig::hermitian_eig;
use crate::error::{DoaError, Result};
use crate::formulations::numerical_rank;
use crate::lifting::{irregular_toep, toep, LiftingPlan, ToeplitzVector};
use crate::linalg::{CMatrix, C64, ZERO};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenSplit {
    /// `N_u × K`, columns ordered by descending eigenvalue.
    pub u_s: CMatrix,
    pub lambda_s: Vec<f64>,
    /// `N_u × (N_u − K)`
    pub u_n: CMatrix,
    pub lambda_n: Vec<f64>,
    /// `U_N U_Nᴴ`
    pub g: CMatrix,
}

pub fn eigen_split(t: &CMatrix, k: usize) -> Result<EigenSplit> {
    let n = t.rows();
    if k == 0 || k >= n {
        return Err(DoaError::SubspaceDimension { k, dim: n });
    }
    let eig = hermitian_eig(t)?;
    // ascending → descending
    let order: Vec<usize> = (0..n).rev().collect();
    let cols: Vec<Vec<C64>> = order.iter().map(|&i| eig.vectors.column(i)).collect();
    let values: Vec<f64> = order.iter().map(|&i| eig.values[i]).collect();
    let u_s = CMatrix::from_columns(n, &cols[..k]);
    let u_n = CMatrix::from_columns(n, &cols[k..]);
    let g = u_n.matmul(&u_n.adjoint());
    Ok(EigenSplit { u_s, lambda_s: values[..k].to_vec(), u_n, lambda_n: values[k..].to_vec(), g })
}

/// `‖U_Nᴴ w(γ, z)‖²`; `z` is projected onto the unit circle.
pub fn null_spectrum(split: &EigenSplit, gamma: &[usize], z: C64) -> f64 {
    null_spectrum_at(split, gamma, z.arg())
}

fn null_spectrum_at(split: &EigenSplit, gamma: &[usize], phi: f64) -> f64 {
    let w: Vec<C64> = gamma.iter().map(|&g| C64::from_polar(1.0, g as f64 * phi)).collect();
    let mut acc = 0.0;
    for c in 0..split.u_n.cols() {
        let s: C64 = (0..w.len()).map(|i| split.u_n[(i, c)].conj() * w[i]).sum();
        acc += s.norm_sqr();
    }
    acc
}

/// Offset sums `c_k`, `k = 0..=max γ`.
fn offset_coefficients(g: &CMatrix, gamma: &[usize]) -> Vec<C64> {
    let span = gamma.iter().copied().max().unwrap_or(0) - gamma.iter().copied().min().unwrap_or(0);
    let mut c = vec![ZERO; span + 1];
    for i in 0..gamma.len() {
        for j in 0..gamma.len() {
            if gamma[j] >= gamma[i] {
                c[gamma[j] - gamma[i]] += g[(i, j)];
            }
        }
    }
    // the k = 0 sum is the trace, already real; for k > 0 only i < j appear
    c
}

/// `D(φ)` and its first two derivatives from the offset sums.
fn spectrum_derivatives(c: &[C64], phi: f64) -> (f64, f64, f64) {
    let mut d = c[0].re;
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for (k, ck) in c.iter().enumerate().skip(1) {
        let e = ck * C64::from_polar(1.0, k as f64 * phi);
        let kf = k as f64;
        d += 2.0 * e.re;
        d1 -= 2.0 * kf * e.im;
        d2 -= 2.0 * kf * kf * e.re;
    }
    (d, d1, d2)
}

/// `D` on the grid `φ_i = −π + 2πi/G`.
fn spectrum_grid(c: &[C64], grid: usize) -> Vec<f64> {
    let max_k = c.len() - 1;
    if grid <= 2 * max_k {
        return (0..grid).map(|i| spectrum_derivatives(c, -PI + 2.0 * PI * i as f64 / grid as f64).0).collect();
    }
    let mut buf = vec![ZERO; grid];
    for (k, ck) in c.iter().enumerate().skip(1) {
        buf[k] = if k % 2 == 0 { *ck } else { -ck };
    }
    let fft = FftPlanner::new().plan_fft_inverse(grid);
    fft.process(&mut buf);
    buf.iter().map(|v| c[0].re + 2.0 * v.re).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub grid_points: usize,
    pub refine_iters: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { grid_points: 1 << 16, refine_iters: 30 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub k: usize,
    pub z_hat: Vec<C64>,
    pub w_hat: Vec<f64>,
    pub thetas_deg: Vec<f64>,
    pub powers: Vec<f64>,
    pub null_spectrum_minima: Vec<f64>,
}

impl DoaEstimate {
    /// Keeps the `k` estimates with the smallest null-spectrum values
    /// (ties broken by angle), still sorted by angle.
    pub fn truncated(&self, k: usize) -> DoaEstimate {
        if k >= self.k {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.k).collect();
        idx.sort_by(|&a, &b| {
            self.null_spectrum_minima[a]
                .total_cmp(&self.null_spectrum_minima[b])
                .then(self.thetas_deg[a].total_cmp(&self.thetas_deg[b]))
        });
        let mut keep = idx[..k].to_vec();
        keep.sort_by(|&a, &b| self.thetas_deg[a].total_cmp(&self.thetas_deg[b]));
        DoaEstimate {
            k,
            z_hat: keep.iter().map(|&i| self.z_hat[i]).collect(),
            w_hat: keep.iter().map(|&i| self.w_hat[i]).collect(),
            thetas_deg: keep.iter().map(|&i| self.thetas_deg[i]).collect(),
            powers: keep.iter().map(|&i| self.powers[i]).collect(),
            null_spectrum_minima: keep.iter().map(|&i| self.null_spectrum_minima[i]).collect(),
        }
    }
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

/// Newton steps on `D'(φ) = 0` inside `[lo, hi]`; stops on any step that
/// leaves the bracket or increases `D` beyond rounding level.
fn newton_polish(c: &[C64], mut phi: f64, lo: f64, hi: f64) -> f64 {
    let slack = 1e-13 * (1.0 + c[0].re.abs());
    let (mut d, _, _) = spectrum_derivatives(c, phi);
    for _ in 0..8 {
        let (_, d1, d2) = spectrum_derivatives(c, phi);
        if !(d2 > 0.0) {
            break;
        }
        let next = phi - d1 / d2;
        if !(next > lo && next < hi) {
            break;
        }
        let (dn, _, _) = spectrum_derivatives(c, next);
        if dn > d + slack {
            break;
        }
        let step = (next - phi).abs();
        phi = next;
        d = dn;
        if step < 1e-15 {
            break;
        }
    }
    phi
}

fn wrap_angle(phi: f64) -> f64 {
    let mut p = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if p < -PI {
        p = -PI;
    }
    p
}

/// Local minima of the null spectrum, refined, as `(φ, D(φ))` sorted by
/// value then angle.
fn spectrum_minima(split: &EigenSplit, gamma: &[usize], opts: &ExtractOptions) -> Result<Vec<(f64, f64)>> {
    let grid = opts.grid_points;
    if grid < 3 {
        return Err(DoaError::Config(format!("grid needs at least 3 points, got {grid}")));
    }
    let c = offset_coefficients(&split.g, gamma);
    let d = spectrum_grid(&c, grid);
    let step = 2.0 * PI / grid as f64;
    let mut out = Vec::new();
    for i in 0..grid {
        let prev = d[(i + grid - 1) % grid];
        let next = d[(i + 1) % grid];
        if d[i] <= prev && d[i] < next {
            let center = -PI + step * i as f64;
            let (lo, hi) = (center - step, center + step);
            let f = |p: f64| spectrum_derivatives(&c, p).0;
            let mut phi = golden_section(f, lo, hi, opts.refine_iters);
            phi = newton_polish(&c, phi, lo, hi);
            let phi = wrap_angle(phi);
            let value = null_spectrum_at(split, gamma, phi).max(0.0);
            out.push((phi, value));
        }
    }
    out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    Ok(out)
}

/// Lawson–Hanson non-negative least squares `min ‖Ax − b‖, x ≥ 0` for a
/// small dense real `A` (row-major, `m × n`).
pub fn nnls(a: &[f64], m: usize, n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let col = |j: usize, i: usize| a[i * n + j];
    let gradient = |x: &[f64]| -> Vec<f64> {
        let r: Vec<f64> = (0..m).map(|i| b[i] - (0..n).map(|j| a[i * n + j] * x[j]).sum::<f64>()).collect();
        (0..n).map(|j| (0..m).map(|i| col(j, i) * r[i]).sum()).collect()
    };
    let scale: f64 = b.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    let tol = 1e-12 * scale * (m as f64);
    for _ in 0..(3 * n + 10) {
        let w = gradient(&x);
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&p, &q| w[p].total_cmp(&w[q]));
        let Some(j) = cand else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let s = least_squares_subset(a, m, n, b, &idx);
            if s.iter().all(|&v| v > 0.0) {
                x.iter_mut().for_each(|v| *v = 0.0);
                for (&j, &v) in idx.iter().zip(&s) {
                    x[j] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&j, &v) in idx.iter().zip(&s) {
                if v <= 0.0 {
                    alpha = alpha.min(x[j] / (x[j] - v));
                }
            }
            for (&j, &v) in idx.iter().zip(&s) {
                x[j] += alpha * (v - x[j]);
            }
            for &j in &idx {
                if x[j] <= 1e-15 * scale {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if idx.iter().all(|&j| !passive[j]) {
                break;
            }
        }
    }
    x
}

/// Unconstrained least squares on a column subset via normal equations
/// (Cholesky with a tiny ridge for safety).
fn least_squares_subset(a: &[f64], m: usize, n: usize, b: &[f64], idx: &[usize]) -> Vec<f64> {
    let p = idx.len();
    let mut g = vec![0.0; p * p];
    let mut h = vec![0.0; p];
    for (r, &jr) in idx.iter().enumerate() {
        for (s, &js) in idx.iter().enumerate() {
            g[r * p + s] = (0..m).map(|i| a[i * n + jr] * a[i * n + js]).sum();
        }
        h[r] = (0..m).map(|i| a[i * n + jr] * b[i]).sum();
    }
    let ridge = 1e-14 * (0..p).map(|i| g[i * p + i]).fold(0.0, f64::max);
    for i in 0..p {
        g[i * p + i] += ridge;
    }
    // Cholesky
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = g[i * p + j];
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                l[i * p + i] = s.max(f64::MIN_POSITIVE).sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut y = h;
    for i in 0..p {
        for k in 0..i {
            y[i] -= l[i * p + k] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            y[i] -= l[k * p + i] * y[k];
        }
        y[i] /= l[i * p + i];
    }
    y
}

/// Non-negative powers `d` with `u_k ≈ Σ_i d_i z_i^{−k}` over the offsets
/// realized by `gamma`. Offsets are weighted by the square root of their
/// multiplicity, which matches a fit to the full matrix entries.
fn fit_powers(t: &CMatrix, gamma: &[usize], nodes: &[C64]) -> Vec<f64> {
    let span = gamma.iter().copied().max().unwrap_or(0);
    let mut sums = vec![ZERO; span + 1];
    let mut counts = vec![0usize; span + 1];
    for i in 0..gamma.len() {
        for j in 0..gamma.len() {
            if gamma[j] >= gamma[i] {
                sums[gamma[j] - gamma[i]] += t[(i, j)];
                counts[gamma[j] - gamma[i]] += 1;
            }
        }
    }
    let n = nodes.len();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for k in 0..=span {
        if counts[k] == 0 {
            continue;
        }
        let wt = (counts[k] as f64).sqrt();
        let uk = sums[k] / counts[k] as f64;
        let row: Vec<C64> = nodes.iter().map(|z| z.powi(-(k as i32))).collect();
        a.extend(row.iter().map(|v| v.re * wt));
        b.push(uk.re * wt);
        if k > 0 {
            a.extend(row.iter().map(|v| v.im * wt));
            b.push(uk.im * wt);
        }
    }
    nnls(&a, b.len(), n, &b)
}

fn estimate_from_angles(picked: &[(f64, f64)], t: &CMatrix, gamma: &[usize]) -> DoaEstimate {
    let mut sel = picked.to_vec();
    // θ = acos(−φ/π) increases with φ
    sel.sort_by(|a, b| a.0.total_cmp(&b.0));
    let z_hat: Vec<C64> = sel.iter().map(|&(phi, _)| C64::from_polar(1.0, phi)).collect();
    let w_hat: Vec<f64> = sel.iter().map(|&(phi, _)| -phi / (2.0 * PI)).collect();
    let thetas_deg: Vec<f64> = w_hat.iter().map(|&w| (2.0 * w).clamp(-1.0, 1.0).acos().to_degrees()).collect();
    let powers = fit_powers(t, gamma, &z_hat);
    DoaEstimate {
        k: sel.len(),
        z_hat,
        w_hat,
        thetas_deg,
        powers,
        null_spectrum_minima: sel.iter().map(|&(_, d)| d).collect(),
    }
}

/// Full extraction on a Hermitian `T` with lifted row indices `gamma`.
pub fn extract_doas(t: &CMatrix, gamma: &[usize], k: usize, opts: &ExtractOptions) -> Result<DoaEstimate> {
    if gamma.len() != t.rows() {
        return Err(DoaError::DimensionMismatch {
            expected: format!("{} lifted indices", t.rows()),
            got: gamma.len().to_string(),
        });
    }
    let split = eigen_split(t, k)?;
    let minima = spectrum_minima(&split, gamma, opts)?;
    if minima.len() < k {
        return Err(DoaError::DegenerateSpectrum {
            wanted: k,
            found: minima.len(),
            minima: minima.iter().map(|m| m.0).collect(),
        });
    }
    Ok(estimate_from_angles(&minima[..k], t, gamma))
}

/// `(φ, D̃(φ))` on the uniform grid, as CSV with columns
/// `phi_rad,w,d_value`.
pub fn null_spectrum_csv(t: &CMatrix, gamma: &[usize], k: usize, grid: usize) -> Result<String> {
    let split = eigen_split(t, k)?;
    let c = offset_coefficients(&split.g, gamma);
    let d = spectrum_grid(&c, grid.max(3));
    let mut out = String::from("phi_rad,w,d_value\n");
    let step = 2.0 * PI / d.len() as f64;
    for (i, v) in d.iter().enumerate() {
        let phi = -PI + step * i as f64;
        let _ = writeln!(out, "{:.9},{:.9},{:.9e}", phi, -phi / (2.0 * PI), v.max(0.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VandermondeDecomposition {
    pub k: usize,
    pub nodes: Vec<C64>,
    pub powers: Vec<f64>,
    /// `‖T − V D Vᴴ‖_F / ‖T‖_F`
    pub residual: f64,
}

fn vandermonde_residual(t: &CMatrix, gamma: &[usize], nodes: &[C64], powers: &[f64]) -> f64 {
    let mut r = t.clone();
    for (z, &d) in nodes.iter().zip(powers) {
        let w: Vec<C64> = gamma.iter().map(|&g| z.powi(g as i32)).collect();
        for i in 0..w.len() {
            for j in 0..w.len() {
                r[(i, j)] -= w[i] * w[j].conj() * d;
            }
        }
    }
    let norm = t.frobenius_norm();
    if norm == 0.0 {
        r.frobenius_norm()
    } else {
        r.frobenius_norm() / norm
    }
}

/// `T = V(z) D V(z)ᴴ` for a PSD Toeplitz `T`, with `K` the numerical rank.
pub fn vandermonde_decompose(t: &CMatrix, opts: &ExtractOptions) -> Result<VandermondeDecomposition> {
    let n = t.rows();
    let eig = hermitian_eig(t)?;
    let lmax = eig.values.last().copied().unwrap_or(0.0);
    let lmin = eig.values.first().copied().unwrap_or(0.0);
    if lmin < -1e-8 * lmax.max(1.0) {
        return Err(DoaError::Indefinite { min_eig: lmin });
    }
    let k = numerical_rank(&eig.values);
    if k == n {
        return Err(DoaError::FullRank);
    }
    if k == 0 {
        return Ok(VandermondeDecomposition { k: 0, nodes: vec![], powers: vec![], residual: vandermonde_residual(t, &[], &[], &[]) });
    }
    let gamma: Vec<usize> = (0..n).collect();
    let est = extract_doas(t, &gamma, k, opts)?;
    let residual = vandermonde_residual(t, &gamma, &est.z_hat, &est.powers);
    Ok(VandermondeDecomposition { k, nodes: est.z_hat, powers: est.powers, residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrregularDecomposition {
    pub nodes: Vec<C64>,
    pub powers: Vec<f64>,
    /// `W(γ, z)` with `γ = 𝒰`, one column per node.
    pub w: CMatrix,
    /// `‖T(u) − W D Wᴴ‖_F / ‖T(u)‖_F`
    pub residual: f64,
}

/// Decomposition of `T(u) = W(γ, z) D W(γ, z)ᴴ`.
///
/// A full-form generator goes through the regular decomposition of
/// `Toep(u)` restricted to 𝒰; an irregular one is decomposed directly with
/// `k` nodes.
pub fn ivd_reconstruct(u: &ToeplitzVector, plan: &LiftingPlan, k: usize, opts: &ExtractOptions) -> Result<IrregularDecomposition> {
    let t_irr = irregular_toep(u, plan)?;
    let gamma = plan.u_set();
    let (nodes, powers) = if u.is_full_form() {
        let reg = vandermonde_decompose(&toep(&u.values), opts)?;
        (reg.nodes, reg.powers)
    } else {
        let est = extract_doas(&t_irr, gamma, k, opts)?;
        (est.z_hat, est.powers)
    };
    let cols: Vec<Vec<C64>> = nodes.iter().map(|z| gamma.iter().map(|&g| z.powi(g as i32)).collect()).collect();
    let w = CMatrix::from_columns(gamma.len(), &cols);
    let residual = vandermonde_residual(&t_irr, gamma, &nodes, &powers);
    Ok(IrregularDecomposition { nodes, powers, w, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_matches_direct_evaluation() {
        let c = vec![C64::new(2.0, 0.0), C64::new(0.3, -0.2), C64::new(0.0, 0.1), C64::new(-0.4, 0.05)];
        let fast = spectrum_grid(&c, 64);
        for (i, v) in fast.iter().enumerate() {
            let phi = -PI + 2.0 * PI * i as f64 / 64.0;
            assert!((v - spectrum_derivatives(&c, phi).0).abs() < 1e-12);
        }
        let small = spectrum_grid(&c, 5);
        assert_eq!(small.len(), 5);
    }

    #[test]
    fn nnls_simple() {
        // columns e1, e2; target (1, −1) → (1, 0)
        let x = nnls(&[1.0, 0.0, 0.0, 1.0], 2, 2, &[1.0, -1.0]);
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1] == 0.0);
    }
}
