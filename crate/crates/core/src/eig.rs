//! Hermitian eigendecomposition and the complex-to-real embedding.
//!
//! `hermitian_eig` reduces the matrix to a real symmetric tridiagonal form
//! with complex Householder reflections, then runs the implicit QL iteration
//! (the tql2 scheme) while accumulating the rotations into the complex
//! eigenvector basis. `jacobi_symmetric_eig` is a cyclic Jacobi solver on real
//! symmetric matrices; it is slower but simple and serves as an independent
//! check through [`real_embed`].

use std::ops::{Index, IndexMut};

use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, C64, ZERO};

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut out = CMatrix::zeros(n, n);
        for (k, &lam) in self.values.iter().enumerate() {
            for i in 0..n {
                let vi = self.vectors[(i, k)] * lam;
                for j in 0..n {
                    out[(i, j)] += vi * self.vectors[(j, k)].conj();
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as `(M + M^H)/2` after checking that the
/// Hermitian defect is below `1e-10·‖M‖_F`.
pub fn hermitian_eig(m: &CMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(DoaError::DimensionMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    if !m.is_finite() {
        return Err(DoaError::NonFinite("hermitian_eig input"));
    }
    let scale = m.frobenius_norm();
    let defect = m.hermitian_defect();
    if defect > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(DoaError::Domain { value: defect, domain: "Hermitian matrices" });
    }
    let n = m.rows();
    let mut work = m.hermitian_part().as_slice().to_vec();
    let (values, rows) = eig_rows(&mut work, n)?;
    // rows[k] holds eigenvector k; transpose into columns.
    let vectors = CMatrix::from_fn(n, n, |i, k| rows[k * n + i]);
    Ok(HermitianEigen { values, vectors })
}

/// Core routine. `a` is a row-major Hermitian n×n matrix and is destroyed.
/// Returns ascending eigenvalues and eigenvectors stored row-wise
/// (`out[k*n..(k+1)*n]` is the k-th eigenvector).
pub(crate) fn eig_rows(a: &mut [C64], n: usize) -> Result<(Vec<f64>, Vec<C64>)> {
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let (mut d, mut e, mut vt) = tridiagonalize(a, n);
    tql2(&mut d, &mut e, &mut vt, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut rows = Vec::with_capacity(n * n);
    for &i in &order {
        rows.extend_from_slice(&vt[i * n..(i + 1) * n]);
    }
    Ok((values, rows))
}

/// Householder reduction `A = V T V^H` with `T` real symmetric tridiagonal.
/// Returns (diagonal, subdiagonal padded with a trailing zero, V^T row-major).
fn tridiagonalize(a: &mut [C64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<C64>) {
    let mut sub = vec![ZERO; n];
    let mut reflectors: Vec<(usize, Vec<C64>, f64)> = Vec::with_capacity(n.saturating_sub(2));
    let mut p = vec![ZERO; n];

    for k in 0..n.saturating_sub(1) {
        let m = n - k - 1;
        let x0 = a[(k + 1) * n + k];
        let sigma: f64 = (k + 2..n).map(|i| a[i * n + k].norm_sqr()).sum();
        if sigma == 0.0 {
            sub[k] = x0;
            continue;
        }
        let xnorm = (x0.norm_sqr() + sigma).sqrt();
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        let alpha = -phase * xnorm;
        let mut v: Vec<C64> = (k + 1..n).map(|i| a[i * n + k]).collect();
        v[0] -= alpha;
        let vnorm2 = v[0].norm_sqr() + sigma;
        let beta = 2.0 / vnorm2;

        // p = beta * A22 v
        for (ii, i) in (k + 1..n).enumerate() {
            let row = &a[i * n + k + 1..i * n + n];
            let s: C64 = row.iter().zip(&v).map(|(x, y)| x * y).sum();
            p[ii] = s * beta;
        }
        let vhp: C64 = v.iter().zip(&p[..m]).map(|(x, y)| x.conj() * y).sum();
        let kk = 0.5 * beta * vhp.re;
        for ii in 0..m {
            p[ii] -= v[ii] * kk;
        }
        // A22 -= v q^H + q v^H
        for (ii, i) in (k + 1..n).enumerate() {
            let vi = v[ii];
            let qi = p[ii];
            let row = &mut a[i * n + k + 1..i * n + n];
            for (jj, r) in row.iter_mut().enumerate() {
                *r -= vi * p[jj].conj() + qi * v[jj].conj();
            }
        }
        sub[k] = alpha;
        for i in k + 2..n {
            a[i * n + k] = ZERO;
            a[k * n + i] = ZERO;
        }
        a[(k + 1) * n + k] = alpha;
        a[k * n + k + 1] = alpha.conj();
        reflectors.push((k, v, beta));
    }

    let d: Vec<f64> = (0..n).map(|i| a[i * n + i].re).collect();

    // Q = H_0 H_1 ... accumulated backwards, row-major.
    let mut q = vec![ZERO; n * n];
    for i in 0..n {
        q[i * n + i] = C64::new(1.0, 0.0);
    }
    let mut w = vec![ZERO; n];
    for (k, v, beta) in reflectors.iter().rev() {
        let start = k + 1;
        // w^T = v^H Q_sub   (over rows start..n, columns start..n)
        for x in w.iter_mut() {
            *x = ZERO;
        }
        for (ii, i) in (start..n).enumerate() {
            let vc = v[ii].conj();
            let row = &q[i * n..i * n + n];
            for j in start..n {
                w[j] += vc * row[j];
            }
        }
        for (ii, i) in (start..n).enumerate() {
            let bv = v[ii] * *beta;
            let row = &mut q[i * n..i * n + n];
            for j in start..n {
                row[j] -= bv * w[j];
            }
        }
    }

    // Phase scaling makes the subdiagonal real and non-negative.
    let mut phases = vec![C64::new(1.0, 0.0); n];
    let mut e = vec![0.0; n];
    for k in 0..n - 1 {
        let mag = sub[k].norm();
        e[k] = mag;
        phases[k + 1] = if mag > 0.0 { phases[k] * (sub[k] / mag) } else { phases[k] };
    }

    // vt[j] = column j of (Q D)
    let mut vt = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            vt[j * n + i] = q[i * n + j] * phases[j];
        }
    }
    (d, e, vt)
}

/// Implicit QL on a real symmetric tridiagonal matrix. `e[i]` is the entry
/// below `d[i]`, `e[n-1] = 0`. Rotations are applied to the rows of `vt`.
fn tql2(d: &mut [f64], e: &mut [f64], vt: &mut [C64], n: usize) -> Result<()> {
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(DoaError::NotConverged("tridiagonal QL iteration".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    let (lo, hi) = vt.split_at_mut((i + 1) * n);
                    let vi = &mut lo[i * n..];
                    let vi1 = &mut hi[..n];
                    for (a, b) in vi.iter_mut().zip(vi1.iter_mut()) {
                        let hb = *b;
                        *b = *a * s + hb * c;
                        *a = *a * c - hb * s;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Projection onto the PSD cone: eigenvalues clipped at zero.
pub fn project_psd(m: &CMatrix) -> Result<CMatrix> {
    let n = m.rows();
    let mut work = m.hermitian_part().as_slice().to_vec();
    project_psd_in_place(&mut work, n)?;
    CMatrix::from_row_major(n, n, work)
}

/// In-place PSD projection of a row-major Hermitian matrix. Returns the
/// number of positive eigenvalues kept.
pub(crate) fn project_psd_in_place(a: &mut [C64], n: usize) -> Result<usize> {
    let mut work = a.to_vec();
    let (values, rows) = eig_rows(&mut work, n)?;
    let n_pos = values.iter().filter(|&&v| v > 0.0).count();
    let n_neg = values.iter().filter(|&&v| v < 0.0).count();
    if n_pos <= n_neg {
        a.iter_mut().for_each(|x| *x = ZERO);
        for (k, &lam) in values.iter().enumerate() {
            if lam > 0.0 {
                add_outer(a, n, &rows[k * n..(k + 1) * n], lam);
            }
        }
    } else {
        for (k, &lam) in values.iter().enumerate() {
            if lam < 0.0 {
                add_outer(a, n, &rows[k * n..(k + 1) * n], -lam);
            }
        }
    }
    Ok(n_pos)
}

/// `a += s · v v^H`, keeping the result exactly Hermitian.
fn add_outer(a: &mut [C64], n: usize, v: &[C64], s: f64) {
    for i in 0..n {
        let vi = v[i] * s;
        a[i * n + i].re += (vi * v[i].conj()).re;
        for j in i + 1..n {
            let x = vi * v[j].conj();
            a[i * n + j] += x;
            a[j * n + i] += x.conj();
        }
    }
}

/// Dense real symmetric matrix (row-major), used for the real embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMatrix {
    n: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// `A + jB  ↦  [[A, −B], [B, A]]`.
pub fn real_embed(h: &CMatrix) -> RealMatrix {
    let n = h.rows();
    let mut out = RealMatrix::zeros(2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            out[(i, j)] = v.re;
            out[(i + n, j + n)] = v.re;
            out[(i, j + n)] = -v.im;
            out[(i + n, j)] = v.im;
        }
    }
    out
}

/// Inverse of [`real_embed`]; reads the left block column.
pub fn real_extract(s: &RealMatrix) -> Result<CMatrix> {
    if s.n % 2 != 0 {
        return Err(DoaError::DimensionMismatch { expected: "even dimension".into(), got: s.n.to_string() });
    }
    let n = s.n / 2;
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(s[(i, j)], s[(i + n, j)])))
}

/// Cyclic Jacobi eigensolver for real symmetric matrices.
///
/// Sweeps until the off-diagonal Frobenius norm falls below
/// `1e-12 · ‖S‖_F`. Returns ascending eigenvalues and eigenvectors as the
/// columns of a row-major matrix.
pub fn jacobi_symmetric_eig(s: &RealMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    let n = s.n;
    let mut a = s.clone();
    let mut v = RealMatrix::zeros(n);
    for i in 0..n {
        v[(i, i)] = 1.0;
    }
    let total: f64 = a.data.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = 1e-12 * total.max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap());
            let values = order.iter().map(|&i| a[(i, i)]).collect();
            let mut vecs = RealMatrix::zeros(n);
            for (c, &k) in order.iter().enumerate() {
                for r in 0..n {
                    vecs[(r, c)] = v[(r, k)];
                }
            }
            return Ok((values, vecs));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq.abs() < f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    Err(DoaError::NotConverged("Jacobi sweeps".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_eigenvalues_are_one() {
        let e = hermitian_eig(&CMatrix::identity(4)).unwrap();
        for v in e.values {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }
}
