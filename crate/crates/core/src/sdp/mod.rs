//! Small dense semidefinite programs over complex-Hermitian and scalar blocks.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    Σ_b ⟨C_b, X_b⟩
//! subject to  Σ_b ⟨A_ib, X_b⟩ (≥ | ≤) r_i,   X_b ⪰ 0
//! ```
//!
//! where a Hermitian block is an `n×n` complex PSD matrix and a scalar block
//! is a non-negative real. Internally every Hermitian block is embedded as a
//! `2n×2n` real symmetric block and the interior-point core in [`ipm`] works
//! on the embedded problem only.

mod ipm;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, symmetrized, CMat};

pub use ipm::solve_sdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    /// `n×n` complex Hermitian PSD block.
    Hermitian(usize),
    /// Non-negative real scalar.
    Scalar,
}

/// Coefficient of one block in a linear functional.
#[derive(Debug, Clone, PartialEq)]
pub enum Coef {
    Hermitian(CMat),
    Scalar(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub block: usize,
    pub coef: Coef,
}

impl Term {
    pub fn herm(block: usize, a: CMat) -> Self {
        Term { block, coef: Coef::Hermitian(a) }
    }

    pub fn scalar(block: usize, a: f64) -> Self {
        Term { block, coef: Coef::Scalar(a) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub terms: Vec<Term>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<BlockKind>,
    pub objective: Vec<Term>,
    pub constraints: Vec<Constraint>,
}

/// Value of one block in a primal or dual solution.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Hermitian(CMat),
    Scalar(f64),
}

impl BlockValue {
    pub fn as_hermitian(&self) -> Option<&CMat> {
        match self {
            BlockValue::Hermitian(m) => Some(m),
            BlockValue::Scalar(_) => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            BlockValue::Scalar(x) => Some(*x),
            BlockValue::Hermitian(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal blocks `X_b`.
    pub primal: Vec<BlockValue>,
    /// Dual slack blocks `Z_b = C_b − Σ_i y_i A_ib` (sign-adjusted so that
    /// `Z_b ⪰ 0` at optimality).
    pub dual_slack: Vec<BlockValue>,
    /// Constraint multipliers, non-negative for both senses.
    pub multipliers: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `|primal − dual objective|`.
    pub gap: f64,
    /// Largest constraint violation (in the problem's own units).
    pub max_violation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Relative tolerance on primal residual, dual residual and gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Ratio that certifies a ray (infeasibility or unboundedness).
    pub infeasibility_ratio: f64,
    /// Looser tolerance accepted as optimal when progress stops for numerical
    /// reasons before `tol` is reached.
    pub reduced_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            tol: 1e-8,
            max_iter: 200,
            infeasibility_ratio: 1e8,
            reduced_tol: 1e-7,
        }
    }
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::DimensionMismatch("SDP needs at least one block".into()));
        }
        let check = |t: &Term| -> Result<()> {
            let kind = self
                .blocks
                .get(t.block)
                .ok_or_else(|| Error::DimensionMismatch(format!("term refers to missing block {}", t.block)))?;
            match (kind, &t.coef) {
                (BlockKind::Hermitian(n), Coef::Hermitian(a)) => {
                    if a.nrows() != *n || a.ncols() != *n {
                        return Err(Error::DimensionMismatch(format!(
                            "block {} is {n}x{n}, coefficient is {}x{}",
                            t.block,
                            a.nrows(),
                            a.ncols()
                        )));
                    }
                    symmetrized(a).map(|_| ())
                }
                (BlockKind::Scalar, Coef::Scalar(x)) if x.is_finite() => Ok(()),
                (BlockKind::Scalar, Coef::Scalar(_)) => {
                    Err(Error::NumericalFailure("non-finite scalar coefficient".into()))
                }
                _ => Err(Error::DimensionMismatch(format!("coefficient kind mismatch on block {}", t.block))),
            }
        };
        self.objective.iter().try_for_each(check)?;
        for con in &self.constraints {
            con.terms.iter().try_for_each(check)?;
            if !con.rhs.is_finite() {
                return Err(Error::NumericalFailure("non-finite right-hand side".into()));
            }
        }
        Ok(())
    }

    /// Evaluates `Σ_b ⟨A_b, X_b⟩` for a list of terms.
    pub fn evaluate(terms: &[Term], x: &[BlockValue]) -> f64 {
        terms
            .iter()
            .map(|t| match (&t.coef, &x[t.block]) {
                (Coef::Hermitian(a), BlockValue::Hermitian(v)) => crate::numerics::trace_prod(a, v),
                (Coef::Scalar(a), BlockValue::Scalar(v)) => a * v,
                _ => 0.0,
            })
            .sum()
    }

    /// JSON document for cross-solver validation; coefficients as `re`/`im` arrays.
    pub fn to_json(&self) -> serde_json::Value {
        let term = |t: &Term| match &t.coef {
            Coef::Hermitian(a) => serde_json::json!({
                "block": t.block,
                "re": rows(a, |z| z.re),
                "im": rows(a, |z| z.im),
            }),
            Coef::Scalar(x) => serde_json::json!({ "block": t.block, "value": x }),
        };
        serde_json::json!({
            "blocks": self.blocks.iter().map(|b| match b {
                BlockKind::Hermitian(n) => serde_json::json!({ "field": "hermitian", "dim": n }),
                BlockKind::Scalar => serde_json::json!({ "field": "scalar", "dim": 1 }),
            }).collect::<Vec<_>>(),
            "objective": self.objective.iter().map(term).collect::<Vec<_>>(),
            "constraints": self.constraints.iter().map(|con| serde_json::json!({
                "sense": con.sense,
                "rhs": con.rhs,
                "terms": con.terms.iter().map(term).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn rows(a: &CMat, f: impl Fn(&num_complex::Complex64) -> f64) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|col| f(&a[(r, col)])).collect())
        .collect()
}

/// `[[Re X, −Im X], [Im X, Re X]]`.
///
/// For Hermitian `A`, `B`: `tr(embed(A) embed(B)) = 2 tr(AB)`, and `X ⪰ 0`
/// exactly when `embed(X) ⪰ 0`.
pub fn embed_complex(x: &CMat) -> Result<DMatrix<f64>> {
    let x = symmetrized(x)?;
    Ok(embed_unchecked(&x))
}

pub(crate) fn embed_unchecked(x: &CMat) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = x[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of the embedding, averaging the two copies: the orthogonal
/// projection of a real symmetric `2n×2n` matrix onto embedded form.
pub fn collapse_embedded(y: &DMatrix<f64>) -> CMat {
    let n = y.nrows() / 2;
    CMat::from_fn(n, n, |i, j| {
        let re = 0.5 * (y[(i, j)] + y[(i + n, j + n)]);
        let im = 0.5 * (y[(i + n, j)] - y[(i, j + n)]);
        c(re, im)
    })
}

#[cfg(test)]
mod tests;
