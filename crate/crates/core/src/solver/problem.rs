//! Standard-form conic problem over Hermitian PSD blocks plus free scalars.
//!
//! A linear functional of the variables is stored sparsely as a list of
//! [`Entry`] terms. Entry `(b, i, j, c)` with `i ≤ j` contributes
//! `Re(conj(c)·X_b[i, j])`; on the diagonal only `Re(c)·X_b[i, i]` counts.
//! A Hermitian coefficient matrix `A` therefore becomes entries `A_ii` and
//! `2·A_ij` (`i < j`), which reproduces `⟨A, X⟩_ℝ = Re tr(A^H X)`.

use serde::{Deserialize, Serialize};

use crate::error::{DoaError, Result};
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub coef: C64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearForm {
    pub entries: Vec<Entry>,
    /// `(free variable index, coefficient)`
    pub free: Vec<(usize, f64)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `Re(conj(c)·X[i, j])`; indices are swapped (and `c` conjugated)
    /// when `i > j`, which leaves the value unchanged for Hermitian `X`.
    pub fn add(&mut self, block: usize, i: usize, j: usize, coef: C64) -> &mut Self {
        if i <= j {
            self.entries.push(Entry { block, i, j, coef });
        } else {
            self.entries.push(Entry { block, i: j, j: i, coef: coef.conj() });
        }
        self
    }

    /// `Re X[i, j]`
    pub fn add_re(&mut self, block: usize, i: usize, j: usize, scale: f64) -> &mut Self {
        self.add(block, i.min(j), i.max(j), C64::new(scale, 0.0))
    }

    /// `Im X[i, j]` for `i < j`.
    pub fn add_im(&mut self, block: usize, i: usize, j: usize, scale: f64) -> &mut Self {
        debug_assert!(i < j);
        self.add(block, i, j, C64::new(0.0, scale))
    }

    pub fn add_free(&mut self, index: usize, coef: f64) -> &mut Self {
        self.free.push((index, coef));
        self
    }

    /// Adds `⟨A, X_block⟩_ℝ` for a Hermitian coefficient matrix `A`.
    pub fn add_hermitian(&mut self, block: usize, a: &CMatrix) -> &mut Self {
        for i in 0..a.rows() {
            if a[(i, i)].re != 0.0 {
                self.add(block, i, i, C64::new(a[(i, i)].re, 0.0));
            }
            for j in i + 1..a.cols() {
                let c = a[(i, j)];
                if c.re != 0.0 || c.im != 0.0 {
                    self.add(block, i, j, c * 2.0);
                }
            }
        }
        self
    }

    /// Evaluates the form at Hermitian block values and free scalars.
    pub fn evaluate(&self, x: &[CMatrix], free: &[f64]) -> f64 {
        let mut s = 0.0;
        for e in &self.entries {
            let v = x[e.block][(e.i, e.j)];
            s += if e.i == e.j { e.coef.re * v.re } else { (e.coef.conj() * v).re };
        }
        for &(k, c) in &self.free {
            s += c * free[k];
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub form: LinearForm,
    pub rhs: f64,
}

/// `min ⟨C, X⟩ + cᵀs  s.t.  ⟨A_i, X⟩ + a_iᵀs = b_i,  X_b ⪰ 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProblem {
    pub blocks: Vec<usize>,
    pub n_free: usize,
    pub objective: LinearForm,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new(blocks: Vec<usize>, n_free: usize) -> Self {
        Self { blocks, n_free, objective: LinearForm::new(), constraints: Vec::new() }
    }

    pub fn add_constraint(&mut self, form: LinearForm, rhs: f64) {
        self.constraints.push(Constraint { form, rhs });
    }

    /// `X[i, j] = value` as one real constraint on the diagonal or two
    /// (real and imaginary part) above it.
    pub fn fix_entry(&mut self, block: usize, i: usize, j: usize, value: C64) {
        let (i, j, value) = if i <= j { (i, j, value) } else { (j, i, value.conj()) };
        let mut re = LinearForm::new();
        re.add_re(block, i, j, 1.0);
        self.add_constraint(re, value.re);
        if i != j {
            let mut im = LinearForm::new();
            im.add_im(block, i, j, 1.0);
            self.add_constraint(im, value.im);
        }
    }

    /// `X[a] = X[b]` for two upper-triangle positions, split into real and
    /// imaginary parts (only the real part for two diagonal positions).
    pub fn tie_entries(&mut self, block: usize, a: (usize, usize), b: (usize, usize)) {
        let mut re = LinearForm::new();
        re.add_re(block, a.0, a.1, 1.0).add_re(block, b.0, b.1, -1.0);
        self.add_constraint(re, 0.0);
        let a_off = a.0 != a.1;
        let b_off = b.0 != b.1;
        if a_off || b_off {
            let mut im = LinearForm::new();
            if a_off {
                im.add_im(block, a.0, a.1, 1.0);
            }
            if b_off {
                im.add_im(block, b.0, b.1, -1.0);
            }
            self.add_constraint(im, 0.0);
        }
    }

    pub fn n_constraints(&self) -> usize {
        self.constraints.len()
    }

    /// Checks index ranges and finiteness.
    pub fn validate(&self) -> Result<()> {
        let check_form = |f: &LinearForm, what: &str| -> Result<()> {
            for e in &f.entries {
                let n = *self.blocks.get(e.block).ok_or_else(|| {
                    DoaError::MalformedProblem(format!("{what}: block {} does not exist", e.block))
                })?;
                if e.i > e.j || e.j >= n {
                    return Err(DoaError::MalformedProblem(format!(
                        "{what}: entry ({}, {}) invalid for block of size {n}",
                        e.i, e.j
                    )));
                }
                if !(e.coef.re.is_finite() && e.coef.im.is_finite()) {
                    return Err(DoaError::NonFinite("problem coefficients"));
                }
            }
            for &(k, c) in &f.free {
                if k >= self.n_free {
                    return Err(DoaError::MalformedProblem(format!("{what}: free variable {k} out of range")));
                }
                if !c.is_finite() {
                    return Err(DoaError::NonFinite("problem coefficients"));
                }
            }
            Ok(())
        };
        check_form(&self.objective, "objective")?;
        for (k, c) in self.constraints.iter().enumerate() {
            check_form(&c.form, &format!("constraint {k}"))?;
            if !c.rhs.is_finite() {
                return Err(DoaError::NonFinite("constraint right-hand side"));
            }
        }
        Ok(())
    }
}
