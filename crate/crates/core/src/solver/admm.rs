//! Operator-splitting solver for [`ConicProblem`].
//!
//! Variables are stacked into one real vector: per Hermitian block the
//! diagonal, then `√2·Re` and `√2·Im` of each upper-triangle entry, then the
//! free scalars. With this scaling the Euclidean inner product equals
//! `⟨·,·⟩_ℝ`, so the PSD cone stays self-dual in vector form.
//!
//! Iteration (scaled ADMM on `x ∈ {Ax = b}`, `z ∈ 𝒦`, `x = z`):
//!
//! ```text
//! x = Π_aff(z − u − c/ρ)
//! w = α·x + (1 − α)·z + u
//! z = Π_𝒦(w)
//! u = w − z
//! ```
//!
//! The equality multipliers are `y = ρ·λ` from the affine projection and the
//! dual slack is `S = −ρ·u`. Stopping uses
//! `‖Az − b‖/max(1,‖b‖)`, `‖c − Aᵀy − S‖/max(1,‖c‖)` and the relative gap
//! `|cᵀz − bᵀy|/(1 + |cᵀz| + |bᵀy|)`.

use std::f64::consts::SQRT_2;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::problem::{ConicProblem, LinearForm};
use crate::eig::project_psd_in_place;
use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub over_relaxation: f64,
    pub rho: f64,
    pub adaptive_rho: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 50_000, over_relaxation: 1.6, rho: 1.0, adaptive_rho: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    InfeasibleSuspected,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicSolution {
    pub x: Vec<CMatrix>,
    pub free: Vec<f64>,
    /// One multiplier per constraint.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub solve_ms: f64,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

struct Layout {
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    free_offset: usize,
    dim: usize,
}

impl Layout {
    fn new(blocks: &[usize], n_free: usize) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut at = 0;
        for &n in blocks {
            offsets.push(at);
            at += n * n;
        }
        Self { offsets, sizes: blocks.to_vec(), free_offset: at, dim: at + n_free }
    }

    /// Index of `Re X[i, j]` (`i ≤ j`); the imaginary part follows at `+1`.
    fn index(&self, block: usize, i: usize, j: usize) -> usize {
        let n = self.sizes[block];
        let base = self.offsets[block];
        if i == j {
            base + i
        } else {
            // pairs (i, j), i < j, enumerated row by row
            let before = i * n - i * (i + 1) / 2;
            base + n + 2 * (before + (j - i - 1))
        }
    }

    fn unpack_block(&self, v: &[f64], block: usize, out: &mut [C64]) {
        let n = self.sizes[block];
        let base = self.offsets[block];
        for i in 0..n {
            out[i * n + i] = C64::new(v[base + i], 0.0);
        }
        let mut k = base + n;
        for i in 0..n {
            for j in i + 1..n {
                let z = C64::new(v[k], v[k + 1]) / SQRT_2;
                out[i * n + j] = z;
                out[j * n + i] = z.conj();
                k += 2;
            }
        }
    }

    fn pack_block(&self, a: &[C64], block: usize, v: &mut [f64]) {
        let n = self.sizes[block];
        let base = self.offsets[block];
        for i in 0..n {
            v[base + i] = a[i * n + i].re;
        }
        let mut k = base + n;
        for i in 0..n {
            for j in i + 1..n {
                let z = a[i * n + j] * SQRT_2;
                v[k] = z.re;
                v[k + 1] = z.im;
                k += 2;
            }
        }
    }
}

type SparseRow = Vec<(usize, f64)>;

fn compile_form(layout: &Layout, form: &LinearForm) -> SparseRow {
    let mut row: SparseRow = Vec::with_capacity(form.entries.len() * 2 + form.free.len());
    for e in &form.entries {
        let k = layout.index(e.block, e.i, e.j);
        if e.i == e.j {
            row.push((k, e.coef.re));
        } else {
            row.push((k, e.coef.re / SQRT_2));
            row.push((k + 1, e.coef.im / SQRT_2));
        }
    }
    for &(k, c) in &form.free {
        row.push((layout.free_offset + k, c));
    }
    row.sort_unstable_by_key(|&(k, _)| k);
    let mut merged: SparseRow = Vec::with_capacity(row.len());
    for (k, c) in row {
        match merged.last_mut() {
            Some((last, acc)) if *last == k => *acc += c,
            _ => merged.push((k, c)),
        }
    }
    merged.retain(|&(_, c)| c != 0.0);
    merged
}

/// Dense Cholesky factor of `A_c A_cᵀ` for one connected group of
/// constraints (constraints linked through shared variables).
struct Component {
    rows: Vec<usize>,
    /// Lower-triangular factor, row-major `m×m`.
    l: Vec<f64>,
}

impl Component {
    fn solve(&self, rhs: &mut [f64]) {
        let m = self.rows.len();
        for i in 0..m {
            let mut s = rhs[i];
            for k in 0..i {
                s -= self.l[i * m + k] * rhs[k];
            }
            rhs[i] = s / self.l[i * m + i];
        }
        for i in (0..m).rev() {
            let mut s = rhs[i];
            for k in i + 1..m {
                s -= self.l[k * m + i] * rhs[k];
            }
            rhs[i] = s / self.l[i * m + i];
        }
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Pre-factorized projection onto `{x : Ax = b}`.
struct AffineProjector {
    a: Vec<SparseRow>,
    b: Vec<f64>,
    components: Vec<Component>,
}

/// Relative pivot threshold for declaring the constraint set rank deficient.
const RANK_TOL: f64 = 1e-10;

impl AffineProjector {
    fn new(a: Vec<SparseRow>, b: Vec<f64>, dim: usize) -> Result<Self> {
        let m = a.len();
        // union constraints that share a variable
        let mut parent: Vec<usize> = (0..m).collect();
        let mut owner = vec![usize::MAX; dim];
        for (r, row) in a.iter().enumerate() {
            for &(k, _) in row {
                if owner[k] == usize::MAX {
                    owner[k] = r;
                } else {
                    let (ra, rb) = (find(&mut parent, owner[k]), find(&mut parent, r));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of = vec![usize::MAX; m];
        for r in 0..m {
            let root = find(&mut parent, r);
            if group_of[root] == usize::MAX {
                group_of[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[group_of[root]].push(r);
        }

        let mut dense = vec![0.0; dim];
        let mut components = Vec::with_capacity(groups.len());
        for rows in groups {
            let mm = rows.len();
            let mut g = vec![0.0; mm * mm];
            for (p, &ri) in rows.iter().enumerate() {
                for &(k, c) in &a[ri] {
                    dense[k] = c;
                }
                for (q, &rj) in rows.iter().enumerate().take(p + 1) {
                    let s: f64 = a[rj].iter().map(|&(k, c)| c * dense[k]).sum();
                    g[p * mm + q] = s;
                    g[q * mm + p] = s;
                }
                for &(k, _) in &a[ri] {
                    dense[k] = 0.0;
                }
            }
            let max_diag = (0..mm).map(|i| g[i * mm + i]).fold(0.0, f64::max);
            let mut l = vec![0.0; mm * mm];
            for i in 0..mm {
                for j in 0..=i {
                    let mut s = g[i * mm + j];
                    for k in 0..j {
                        s -= l[i * mm + k] * l[j * mm + k];
                    }
                    if i == j {
                        if !(s > RANK_TOL * max_diag) {
                            return Err(DoaError::RankDeficient { pivot: s / max_diag.max(f64::MIN_POSITIVE) });
                        }
                        l[i * mm + i] = s.sqrt();
                    } else {
                        l[i * mm + j] = s / l[j * mm + j];
                    }
                }
            }
            components.push(Component { rows, l });
        }
        Ok(Self { a, b, components })
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.a.iter().map(|row| row.iter().map(|&(k, c)| c * x[k]).sum()).collect()
    }

    fn add_transpose(&self, lambda: &[f64], out: &mut [f64]) {
        for (row, &l) in self.a.iter().zip(lambda) {
            if l != 0.0 {
                for &(k, c) in row {
                    out[k] += c * l;
                }
            }
        }
    }

    /// Projects `v` in place and returns `λ` with `x = v + Aᵀλ`.
    fn project(&self, v: &mut [f64], lambda: &mut [f64]) {
        let av = self.apply(v);
        let mut buf = Vec::new();
        for comp in &self.components {
            buf.clear();
            buf.extend(comp.rows.iter().map(|&r| self.b[r] - av[r]));
            comp.solve(&mut buf);
            for (&r, &l) in comp.rows.iter().zip(&buf) {
                lambda[r] = l;
            }
        }
        self.add_transpose(lambda, v);
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

/// Multiplier norm (relative to the data) above which the problem is
/// reported as likely infeasible.
const DIVERGENCE: f64 = 1e12;

/// Iterations between two step-size updates.
const RHO_INTERVAL: usize = 25;

pub fn solve(problem: &ConicProblem, opts: &SolveOptions) -> Result<ConicSolution> {
    let start = Instant::now();
    problem.validate()?;
    if !(opts.tol > 0.0) || opts.max_iter == 0 || !(opts.over_relaxation > 0.0 && opts.over_relaxation < 2.0) {
        return Err(DoaError::Config(format!("invalid solver options {opts:?}")));
    }
    let layout = Layout::new(&problem.blocks, problem.n_free);
    let dim = layout.dim;
    let c_vec = {
        let mut c = vec![0.0; dim];
        for &(k, v) in &compile_form(&layout, &problem.objective) {
            c[k] += v;
        }
        c
    };
    let rows: Vec<SparseRow> = problem.constraints.iter().map(|c| compile_form(&layout, &c.form)).collect();
    let b: Vec<f64> = problem.constraints.iter().map(|c| c.rhs).collect();
    let proj = AffineProjector::new(rows, b.clone(), dim)?;
    let m = b.len();

    let b_scale = norm(&b).max(1.0);
    let c_scale = norm(&c_vec).max(1.0);
    let alpha = opts.over_relaxation;
    let mut rho = opts.rho;

    let mut z = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut lambda = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut work: Vec<Vec<C64>> = layout.sizes.iter().map(|&n| vec![C64::new(0.0, 0.0); n * n]).collect();

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Residuals, usize)> = None;
    let mut status = SolveStatus::MaxIter;
    let mut iterations = opts.max_iter;
    let mut last = None;

    for iter in 1..=opts.max_iter {
        for k in 0..dim {
            v[k] = z[k] - u[k] - c_vec[k] / rho;
        }
        proj.project(&mut v, &mut lambda);
        // v now holds x
        for k in 0..dim {
            v[k] = alpha * v[k] + (1.0 - alpha) * z[k] + u[k];
        }
        // v now holds w; z = Π_𝒦(w)
        z.copy_from_slice(&v);
        for (blk, buf) in work.iter_mut().enumerate() {
            layout.unpack_block(&z, blk, buf);
            project_psd_in_place(buf, layout.sizes[blk])?;
            layout.pack_block(buf, blk, &mut z);
        }
        for k in 0..dim {
            u[k] = v[k] - z[k];
        }
        for (yk, lk) in y.iter_mut().zip(&lambda) {
            *yk = rho * lk;
        }

        let az = proj.apply(&z);
        let primal = norm(&az.iter().zip(&b).map(|(a, bb)| a - bb).collect::<Vec<_>>()) / b_scale;
        let mut dres = c_vec.clone();
        for k in 0..dim {
            dres[k] += rho * u[k];
        }
        let mut aty = vec![0.0; dim];
        proj.add_transpose(&y, &mut aty);
        for k in 0..dim {
            dres[k] -= aty[k];
        }
        let dual = norm(&dres) / c_scale;
        let pobj = dot(&c_vec, &z);
        let dobj = dot(&b, &y);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let res = Residuals { primal, dual, gap, pobj, dobj };

        if !(res.worst().is_finite()) {
            return Err(DoaError::NonFinite("solver iterate"));
        }
        if norm(&y) > DIVERGENCE * (1.0 + c_scale) * b_scale {
            status = SolveStatus::InfeasibleSuspected;
            iterations = iter;
            last = Some((z.clone(), y.clone(), res));
            break;
        }
        let done = res.primal <= opts.tol && res.dual <= opts.tol && res.gap <= opts.tol;
        if done {
            status = SolveStatus::Optimal;
            iterations = iter;
            last = Some((z.clone(), y.clone(), res));
            break;
        }
        let (rp, rd) = (res.primal, res.dual);
        if best.as_ref().is_none_or(|b| res.worst() < b.0) {
            best = Some((res.worst(), z.clone(), y.clone(), res, iter));
        }

        if opts.adaptive_rho && iter % RHO_INTERVAL == 0 && rp > 0.0 && rd > 0.0 {
            let ratio = rp / rd;
            if !(0.2..=5.0).contains(&ratio) {
                let new_rho = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
                for uk in u.iter_mut() {
                    *uk *= rho / new_rho;
                }
                rho = new_rho;
            }
        }
    }

    let (zf, yf, res) = match last {
        Some(l) => l,
        None => {
            let (_, zb, yb, rb, _) = best.expect("at least one iteration ran");
            (zb, yb, rb)
        }
    };
    let mut x = Vec::with_capacity(layout.sizes.len());
    for (blk, &n) in layout.sizes.iter().enumerate() {
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        layout.unpack_block(&zf, blk, &mut buf);
        x.push(CMatrix::from_row_major(n, n, buf)?);
    }
    let free = zf[layout.free_offset..].to_vec();
    Ok(ConicSolution {
        x,
        free,
        y: yf,
        objective: res.pobj,
        dual_objective: res.dobj,
        primal_residual: res.primal,
        dual_residual: res.dual,
        gap: res.gap,
        iterations,
        status,
        solve_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Checks that the constraints are linearly independent without solving.
pub fn check_constraints(problem: &ConicProblem) -> Result<()> {
    problem.validate()?;
    let layout = Layout::new(&problem.blocks, problem.n_free);
    let rows: Vec<SparseRow> = problem.constraints.iter().map(|c| compile_form(&layout, &c.form)).collect();
    let b = vec![0.0; rows.len()];
    AffineProjector::new(rows, b, layout.dim).map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_round_trip() {
        let layout = Layout::new(&[3, 2], 1);
        assert_eq!(layout.dim, 9 + 4 + 1);
        let a = vec![
            C64::new(1.0, 0.0),
            C64::new(2.0, 1.0),
            C64::new(0.5, -3.0),
            C64::new(2.0, -1.0),
            C64::new(4.0, 0.0),
            C64::new(0.0, 7.0),
            C64::new(0.5, 3.0),
            C64::new(0.0, -7.0),
            C64::new(-1.0, 0.0),
        ];
        let mut v = vec![0.0; layout.dim];
        layout.pack_block(&a, 0, &mut v);
        let mut back = vec![C64::new(0.0, 0.0); 9];
        layout.unpack_block(&v, 0, &mut back);
        for (p, q) in a.iter().zip(&back) {
            assert!((p - q).norm() < 1e-14);
        }
        assert_eq!(layout.index(0, 1, 2), 3 + 2 * 2);
        assert_eq!(layout.index(1, 0, 1), 9 + 2);
    }
}
