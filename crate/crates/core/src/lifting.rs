//! Maps between the per-frequency measurement space and the lifted
//! Toeplitz space.
//!
//! Sensor `m` observed at frequency index `f` lands on lifted position `f·m`.
//! The `R` maps use the full axis `0..N`; the `R1` maps use only the
//! positions that occur, i.e. the sorted product set 𝒰.

use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, C64, ZERO};
use crate::model::GeometryConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftingPlan {
    geometry: GeometryConfig,
    n: usize,
    u: Vec<usize>,
    /// `rows_r[fi][mi] = f·m`
    rows_r: Vec<Vec<usize>>,
    /// `rows_r1[fi][mi]` = position of `f·m` inside 𝒰
    rows_r1: Vec<Vec<usize>>,
    mask: Vec<bool>,
}

impl LiftingPlan {
    pub fn new(geometry: &GeometryConfig) -> Self {
        let n = geometry.lifted_len();
        let u = geometry.space_freq_set();
        let mut pos = vec![usize::MAX; n];
        for (p, &g) in u.iter().enumerate() {
            pos[g] = p;
        }
        let rows_r: Vec<Vec<usize>> = geometry
            .freq_indices()
            .iter()
            .map(|&f| geometry.sensor_indices().iter().map(|&m| f * m).collect())
            .collect();
        let rows_r1 = rows_r.iter().map(|r| r.iter().map(|&g| pos[g]).collect()).collect();
        let mut mask = vec![false; n];
        for &a in &u {
            for &b in &u {
                if b >= a {
                    mask[b - a] = true;
                }
            }
        }
        Self { geometry: geometry.clone(), n, u, rows_r, rows_r1, mask }
    }

    pub fn geometry(&self) -> &GeometryConfig {
        &self.geometry
    }

    /// `N`
    pub fn n(&self) -> usize {
        self.n
    }

    /// `N_u = |𝒰|`
    pub fn n_u(&self) -> usize {
        self.u.len()
    }

    /// The sorted index set 𝒰.
    pub fn u_set(&self) -> &[usize] {
        &self.u
    }

    /// Offsets `k` that occur as `𝒰_j − 𝒰_i`.
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Offsets in `0..N` that never occur as a difference of 𝒰 entries.
    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|&k| !self.mask[k]).collect()
    }

    /// Lifted rows `f·m` for the frequency at position `fi` of ℱ.
    pub fn rows_r(&self, fi: usize) -> &[usize] {
        &self.rows_r[fi]
    }

    /// Positions inside 𝒰 for the frequency at position `fi` of ℱ.
    pub fn rows_r1(&self, fi: usize) -> &[usize] {
        &self.rows_r1[fi]
    }

    /// Position of `f` inside ℱ, or `InvalidFrequency`.
    pub fn freq_position(&self, f: usize) -> Result<usize> {
        self.geometry.freq_position(f)
    }
}

/// Generator of a Hermitian Toeplitz matrix. `mask[k]` is false for offsets
/// that no entry of the irregular matrix refers to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzVector {
    pub values: Vec<C64>,
    pub mask: Vec<bool>,
}

impl ToeplitzVector {
    /// Full form: every offset is in use.
    pub fn full(mut values: Vec<C64>) -> Self {
        if let Some(v0) = values.first_mut() {
            v0.im = 0.0;
        }
        let mask = vec![true; values.len()];
        Self { values, mask }
    }

    /// Irregular form: mask taken from the plan, unused entries set to zero.
    pub fn irregular(mut values: Vec<C64>, plan: &LiftingPlan) -> Result<Self> {
        check_len(values.len(), plan.n(), "Toeplitz generator")?;
        values[0].im = 0.0;
        for (v, &m) in values.iter_mut().zip(plan.mask()) {
            if !m {
                *v = ZERO;
            }
        }
        Ok(Self { values, mask: plan.mask().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_full_form(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }
}

fn check_len(got: usize, expected: usize, what: &str) -> Result<()> {
    if got != expected {
        return Err(DoaError::DimensionMismatch { expected: format!("{what} of length {expected}"), got: got.to_string() });
    }
    Ok(())
}

fn check_shape(m: &CMatrix, rows: usize, cols: Option<usize>) -> Result<()> {
    if m.rows() != rows || cols.is_some_and(|c| c != m.cols()) {
        return Err(DoaError::DimensionMismatch {
            expected: format!("{rows} rows"),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    Ok(())
}

fn scatter(q: &CMatrix, rows: &[usize], out_rows: usize) -> CMatrix {
    let mut out = CMatrix::zeros(out_rows, q.cols());
    for (mi, &r) in rows.iter().enumerate() {
        out.row_mut(r).copy_from_slice(q.row(mi));
    }
    out
}

fn gather(y: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), y.cols(), |mi, l| y[(rows[mi], l)])
}

/// `𝓡`: places row `m` of `Q_f` at row `f·m` of an `N × N_l` matrix.
pub fn lift_r(plan: &LiftingPlan, q: &CMatrix, f: usize) -> Result<CMatrix> {
    let fi = plan.freq_position(f)?;
    check_shape(q, plan.geometry().n_sensors(), None)?;
    Ok(scatter(q, plan.rows_r(fi), plan.n()))
}

/// `𝓡*`: selects rows `f·m` of an `N × N_l` matrix.
pub fn adjoint_r(plan: &LiftingPlan, y: &CMatrix, f: usize) -> Result<CMatrix> {
    let fi = plan.freq_position(f)?;
    check_shape(y, plan.n(), None)?;
    Ok(gather(y, plan.rows_r(fi)))
}

/// `𝓡₁`: as [`lift_r`] but rows indexed by position inside 𝒰.
pub fn lift_r1(plan: &LiftingPlan, q: &CMatrix, f: usize) -> Result<CMatrix> {
    let fi = plan.freq_position(f)?;
    check_shape(q, plan.geometry().n_sensors(), None)?;
    Ok(scatter(q, plan.rows_r1(fi), plan.n_u()))
}

pub fn adjoint_r1(plan: &LiftingPlan, y: &CMatrix, f: usize) -> Result<CMatrix> {
    let fi = plan.freq_position(f)?;
    check_shape(y, plan.n_u(), None)?;
    Ok(gather(y, plan.rows_r1(fi)))
}

#[inline]
fn toep_entry(u: &[C64], i: usize, j: usize) -> C64 {
    if j >= i {
        u[j - i]
    } else {
        u[i - j].conj()
    }
}

/// Hermitian Toeplitz matrix with first row `u` (the imaginary part of
/// `u[0]` is ignored).
pub fn toep(u: &[C64]) -> CMatrix {
    let n = u.len();
    let mut m = CMatrix::from_fn(n, n, |i, j| toep_entry(u, i, j));
    for i in 0..n {
        m[(i, i)].im = 0.0;
    }
    m
}

/// `T(u)(i, j) = u[𝒰_j − 𝒰_i]` (conjugated below the diagonal).
pub fn irregular_toep(u: &ToeplitzVector, plan: &LiftingPlan) -> Result<CMatrix> {
    check_len(u.len(), plan.n(), "Toeplitz generator")?;
    let g = plan.u_set();
    let mut m = CMatrix::from_fn(g.len(), g.len(), |i, j| toep_entry(&u.values, g[i], g[j]));
    for i in 0..g.len() {
        m[(i, i)].im = 0.0;
    }
    Ok(m)
}

/// `P_𝒰 M P_𝒰^H`: keeps the rows and columns indexed by 𝒰.
pub fn select_pu(m: &CMatrix, plan: &LiftingPlan) -> Result<CMatrix> {
    if m.shape() != (plan.n(), plan.n()) {
        return Err(DoaError::DimensionMismatch {
            expected: format!("{0}x{0}", plan.n()),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    let g = plan.u_set();
    Ok(CMatrix::from_fn(g.len(), g.len(), |i, j| m[(g[i], g[j])]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_plan() {
        let g = GeometryConfig::new(vec![0, 1, 3, 4], vec![1, 3, 4], 100.0, 343.0).unwrap();
        let plan = LiftingPlan::new(&g);
        assert_eq!(plan.n(), 17);
        assert_eq!(plan.n_u(), 7);
        assert_eq!(plan.free_indices(), vec![10, 14]);
        assert_eq!(plan.rows_r1(2), &[0, 3, 5, 6]);
    }

    #[test]
    fn uniform_plan_has_no_free_entries() {
        let plan = LiftingPlan::new(&GeometryConfig::uniform(4, 2).unwrap());
        assert_eq!(plan.n(), 7);
        assert_eq!(plan.u_set(), &[0, 1, 2, 3, 4, 6]);
        assert!(plan.free_indices().is_empty());
    }

    #[test]
    fn toeplitz_vector_forms() {
        let full = ToeplitzVector::full(vec![C64::new(1.0, 3.0), C64::new(0.0, 1.0)]);
        assert!(full.is_full_form());
        assert_eq!(full.values[0].im, 0.0);
        let g = GeometryConfig::new(vec![0, 1, 3, 4], vec![1, 3, 4], 100.0, 343.0).unwrap();
        let plan = LiftingPlan::new(&g);
        let v = ToeplitzVector::irregular(vec![C64::new(1.0, 0.0); 17], &plan).unwrap();
        assert!(!v.is_full_form());
        assert_eq!(v.values[10], ZERO);
        assert!(ToeplitzVector::irregular(vec![ZERO; 3], &plan).is_err());
    }
}
