//! Linear programs in sparse triplet form and revised-simplex solvers.
//!
//! Two basis representations share one simplex driver:
//!
//! * [`Backend::Dense`] keeps an explicit basis inverse. It is simple and
//!   serves as the reference solver for small problems and cross-checks.
//! * [`Backend::Sparse`] keeps a sparse LU factorization plus an eta file of
//!   product-form updates, which is what makes grid-sized problems tractable.
//!
//! Problems are solved in a row-scaled standard form; see [`standard`].

mod dense;
mod simplex;
mod sparse;
pub mod standard;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use simplex::{Pricing, SimplexStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSense {
    Eq,
    Le,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub sense: RowSense,
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// `maximize objective . x  s.t.  rows, x >= 0`, with the constraint matrix
/// as (row, col, value) triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearProgram {
    pub n_vars: usize,
    pub objective: Vec<f64>,
    pub rows: Vec<RowSpec>,
    pub entries: Vec<Entry>,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        LinearProgram {
            n_vars,
            objective: vec![0.0; n_vars],
            rows: Vec::new(),
            entries: Vec::new(),
        }
    }

    /// Appends a row and returns its index.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let row = self.rows.len();
        self.rows.push(RowSpec { sense, rhs });
        for &(col, value) in coeffs {
            if value != 0.0 {
                self.entries.push(Entry { row, col, value });
            }
        }
        row
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.n_vars {
            return Err(Error::Dimension(format!(
                "objective has {} entries for {} variables",
                self.objective.len(),
                self.n_vars
            )));
        }
        for e in &self.entries {
            if e.row >= self.rows.len() || e.col >= self.n_vars {
                return Err(Error::Dimension(format!(
                    "entry ({}, {}) outside {}x{}",
                    e.row,
                    e.col,
                    self.rows.len(),
                    self.n_vars
                )));
            }
            if !e.value.is_finite() {
                return Err(Error::InvalidModel(format!("non-finite entry at ({}, {})", e.row, e.col)));
            }
        }
        Ok(())
    }

    /// Row activities `A x`.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows.len()];
        for e in &self.entries {
            out[e.row] += e.value * x[e.col];
        }
        out
    }

    /// Largest violation of any row or sign constraint at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let act = self.activities(x);
        let rows = self.rows.iter().zip(&act).map(|(r, &a)| match r.sense {
            RowSense::Eq => (a - r.rhs).abs(),
            RowSense::Le => (a - r.rhs).max(0.0),
            RowSense::Ge => (r.rhs - a).max(0.0),
        });
        let signs = x.iter().map(|&v| (-v).max(0.0));
        rows.chain(signs).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lp: LinearProgram = serde_json::from_str(text)?;
        lp.validate()?;
        Ok(lp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Dense,
    Sparse,
    /// Dense below [`AUTO_DENSE_MAX_ROWS`] rows, sparse above.
    Auto,
}

pub const AUTO_DENSE_MAX_ROWS: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LpOptions {
    pub backend: Backend,
    pub pricing: Pricing,
    /// Primal feasibility tolerance in the scaled problem.
    pub feasibility_tol: f64,
    /// Reduced-cost tolerance in the scaled problem.
    pub optimality_tol: f64,
    /// `None` picks a limit from the problem size.
    pub max_iter: Option<usize>,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            backend: Backend::Auto,
            pricing: Pricing::Dantzig,
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            max_iter: None,
        }
    }
}

/// A column to start the simplex from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintColumn {
    Structural(usize),
    /// The slack variable of an inequality row.
    Slack(usize),
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals of the original (unscaled) problem.
    pub duals: Vec<f64>,
    pub stats: SimplexStats,
}

/// Solves `lp`, optionally warm-starting from a basis of exactly one column
/// per row. An unusable hint (singular or infeasible) falls back to phase one.
pub fn solve(lp: &LinearProgram, opts: &LpOptions, hint: Option<&[HintColumn]>) -> Result<LpSolution> {
    lp.validate()?;
    let sf = standard::StandardForm::new(lp);
    let backend = match opts.backend {
        Backend::Auto if sf.m <= AUTO_DENSE_MAX_ROWS => Backend::Dense,
        Backend::Auto => Backend::Sparse,
        b => b,
    };
    let hint_cols = hint.and_then(|h| sf.hint_columns(h));
    let result = match backend {
        Backend::Dense => simplex::run(&sf, dense::DenseInverse::new(sf.m), opts, hint_cols),
        Backend::Sparse | Backend::Auto => {
            simplex::run(&sf, sparse::LuEta::new(sf.m), opts, hint_cols)
        }
    }?;
    let x = sf.structural_values(&result.basis, &result.x_basic);
    let duals = sf.unscale_duals(&result.duals);
    Ok(LpSolution {
        objective: lp.objective_value(&x),
        x,
        duals,
        stats: result.stats,
    })
}
