//! Two-phase revised primal simplex over a [`StandardForm`].

use super::standard::{ColKind, StandardForm};
use super::LpOptions;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pricing {
    /// Largest reduced cost.
    Dantzig,
    /// Smallest eligible index.
    Bland,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimplexStats {
    pub iterations: usize,
    pub phase_one_iterations: usize,
    pub refactorizations: usize,
    pub degenerate_pivots: usize,
    pub warm_started: bool,
}

/// Basis representation used by the driver.
pub(crate) trait Factor {
    /// Factors the basis from scratch; `false` if it is singular.
    fn refactor(&mut self, sf: &StandardForm, basis: &[usize]) -> bool;
    /// `B z = v`: row-indexed in, position-indexed out.
    fn ftran(&self, v: &mut [f64]);
    /// `B^T y = c`: position-indexed in, row-indexed out.
    fn btran(&self, v: &mut [f64]);
    /// Replaces the column at position `r`; `d` is `B^-1 a_q`.
    fn update(&mut self, r: usize, d: &[f64]);
    fn wants_refactor(&self) -> bool;
}

pub(crate) struct RunResult {
    pub basis: Vec<usize>,
    pub x_basic: Vec<f64>,
    /// Duals of the scaled problem, indexed by row.
    pub duals: Vec<f64>,
    pub stats: SimplexStats,
}

/// Consecutive degenerate pivots after which the ratio test breaks ties by
/// a perturbation of the right-hand side, for the rest of the phase.
const DEGENERATE_SWITCH: usize = 50;
const PIVOT_TOL: f64 = 1e-9;
const PHASE_ONE_TOL: f64 = 1e-8;

enum Outcome {
    Optimal,
    Unbounded,
}

struct State<'a, F: Factor> {
    sf: &'a StandardForm,
    f: F,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    x: Vec<f64>,
    opts: &'a LpOptions,
    max_iter: usize,
    stats: SimplexStats,
}

const NONE: usize = usize::MAX;

impl<'a, F: Factor> State<'a, F> {
    fn set_basis(&mut self, basis: Vec<usize>) -> bool {
        self.pos_of.iter_mut().for_each(|p| *p = NONE);
        for (i, &j) in basis.iter().enumerate() {
            self.pos_of[j] = i;
        }
        self.basis = basis;
        self.refactor()
    }

    fn refactor(&mut self) -> bool {
        self.stats.refactorizations += 1;
        if !self.f.refactor(self.sf, &self.basis) {
            return false;
        }
        self.x.copy_from_slice(&self.sf.b);
        self.f.ftran(&mut self.x);
        true
    }

    fn column_into(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(r, v) in &self.sf.cols[j] {
            out[r] = v;
        }
    }

    fn iterate(&mut self, cost: &[f64], phase_one: bool) -> Result<Outcome> {
        let m = self.sf.m;
        let n = self.sf.n_cols();
        let mut y = vec![0.0; m];
        let mut d = vec![0.0; m];
        let mut degenerate_run = 0usize;
        let bland = self.opts.pricing == Pricing::Bland;
        // Perturbation of the basic values, `x + eps w`, used to break ties
        // in the ratio test once pivots stall.
        let mut w: Option<Vec<f64>> = None;
        loop {
            if self.stats.iterations >= self.max_iter {
                return Err(Error::IterationLimit(self.max_iter));
            }
            if self.f.wants_refactor() && !self.refactor() {
                return Err(Error::Singular);
            }
            for (i, &j) in self.basis.iter().enumerate() {
                y[i] = cost[j];
            }
            self.f.btran(&mut y);

            if w.is_none() && degenerate_run >= DEGENERATE_SWITCH {
                w = Some((0..m).map(|i| 1.0 + (i as f64 * 0.618_033_988_749_895).fract()).collect());
            }
            let mut entering = NONE;
            let mut best = self.opts.optimality_tol;
            for j in 0..n {
                if self.pos_of[j] != NONE || self.sf.kind[j] == ColKind::Artificial {
                    continue;
                }
                let mut dj = cost[j];
                for &(r, v) in &self.sf.cols[j] {
                    dj -= y[r] * v;
                }
                if dj > best {
                    entering = j;
                    if bland {
                        break;
                    }
                    best = dj;
                }
            }
            if entering == NONE {
                return Ok(Outcome::Optimal);
            }

            self.column_into(entering, &mut d);
            self.f.ftran(&mut d);
            let dmax = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let piv_tol = PIVOT_TOL * dmax.max(1.0);
            let tol = self.opts.feasibility_tol;

            // Harris two-pass ratio test; ties go to the largest pivot, or
            // to the smallest perturbed ratio once perturbed
            let mut tmax = f64::INFINITY;
            for i in 0..m {
                if d[i] > piv_tol {
                    tmax = tmax.min((self.x[i].max(0.0) + tol) / d[i]);
                }
            }
            let mut leave = NONE;
            let mut best_key = f64::INFINITY;
            for i in 0..m {
                if d[i] > piv_tol && self.x[i].max(0.0) / d[i] <= tmax {
                    let key = match &w {
                        Some(w) => w[i] / d[i],
                        None => -d[i],
                    };
                    if key < best_key {
                        best_key = key;
                        leave = i;
                    }
                }
            }
            if leave == NONE {
                return Ok(Outcome::Unbounded);
            }
            let theta = (self.x[leave].max(0.0) / d[leave]).max(0.0);
            for i in 0..m {
                if i != leave && d[i] != 0.0 {
                    let v = self.x[i] - theta * d[i];
                    self.x[i] = if v < 0.0 && v > -tol { 0.0 } else { v };
                }
            }
            self.x[leave] = theta;
            if let Some(w) = &mut w {
                let step = w[leave] / d[leave];
                for i in 0..m {
                    w[i] -= step * d[i];
                }
                w[leave] = step;
            }
            let old = self.basis[leave];
            self.pos_of[old] = NONE;
            self.pos_of[entering] = leave;
            self.basis[leave] = entering;
            self.f.update(leave, &d);

            self.stats.iterations += 1;
            if phase_one {
                self.stats.phase_one_iterations += 1;
            }
            if theta * d[leave] <= tol {
                self.stats.degenerate_pivots += 1;
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
    }

    /// Pivots basic artificials out on any nonzero non-artificial entry of
    /// their row of `B^-1 A`; rows where none exists are redundant and keep
    /// the artificial at zero.
    fn drive_out_artificials(&mut self) -> Result<()> {
        let m = self.sf.m;
        let mut e = vec![0.0; m];
        let mut d = vec![0.0; m];
        for pos in 0..m {
            if self.sf.kind[self.basis[pos]] != ColKind::Artificial {
                continue;
            }
            e.iter_mut().for_each(|v| *v = 0.0);
            e[pos] = 1.0;
            self.f.btran(&mut e);
            let mut pick = NONE;
            let mut pick_abs = 1e-7;
            for j in 0..self.sf.n_cols() {
                if self.pos_of[j] != NONE || self.sf.kind[j] == ColKind::Artificial {
                    continue;
                }
                let alpha: f64 = self.sf.cols[j].iter().map(|&(r, v)| e[r] * v).sum();
                if alpha.abs() > pick_abs {
                    pick_abs = alpha.abs();
                    pick = j;
                }
            }
            if pick == NONE {
                continue;
            }
            self.column_into(pick, &mut d);
            self.f.ftran(&mut d);
            let old = self.basis[pos];
            self.pos_of[old] = NONE;
            self.pos_of[pick] = pos;
            self.basis[pos] = pick;
            self.f.update(pos, &d);
            if self.f.wants_refactor() && !self.refactor() {
                return Err(Error::Singular);
            }
        }
        if !self.refactor() {
            return Err(Error::Singular);
        }
        Ok(())
    }
}

pub(crate) fn run<F: Factor>(
    sf: &StandardForm,
    f: F,
    opts: &LpOptions,
    hint: Option<Vec<usize>>,
) -> Result<RunResult> {
    let m = sf.m;
    let max_iter = opts.max_iter.unwrap_or(50 * (m + sf.n_cols()) + 1000);
    let mut st = State {
        sf,
        f,
        basis: Vec::new(),
        pos_of: vec![NONE; sf.n_cols()],
        x: vec![0.0; m],
        opts,
        max_iter,
        stats: SimplexStats::default(),
    };

    let mut warm = false;
    if let Some(h) = hint {
        if st.set_basis(h) && st.x.iter().all(|&v| v >= -opts.feasibility_tol) {
            st.x.iter_mut().for_each(|v| *v = v.max(0.0));
            warm = true;
        } else {
            log::debug!("simplex hint rejected, running phase one");
        }
    }
    if !warm {
        if !st.set_basis(sf.phase_one_basis()) {
            return Err(Error::Singular);
        }
        if st.basis.iter().any(|&j| sf.kind[j] == ColKind::Artificial) {
            let mut cost1 = vec![0.0; sf.n_cols()];
            for &j in &sf.artificial_col {
                cost1[j] = -1.0;
            }
            st.iterate(&cost1, true)?;
            let infeas: f64 = st
                .basis
                .iter()
                .zip(&st.x)
                .filter(|(&j, _)| sf.kind[j] == ColKind::Artificial)
                .map(|(_, &v)| v.max(0.0))
                .sum();
            let bmax = sf.b.iter().fold(1.0f64, |a, v| a.max(v.abs()));
            if infeas > PHASE_ONE_TOL * bmax {
                return Err(Error::Infeasible);
            }
            st.drive_out_artificials()?;
        }
    }
    st.stats.warm_started = warm;

    match st.iterate(&sf.cost, false)? {
        Outcome::Unbounded => return Err(Error::Unbounded),
        Outcome::Optimal => {}
    }
    if !st.refactor() {
        return Err(Error::Singular);
    }
    let mut y: Vec<f64> = st.basis.iter().map(|&j| sf.cost[j]).collect();
    st.f.btran(&mut y);
    let x_basic = st.x.iter().map(|v| v.max(0.0)).collect();
    Ok(RunResult {
        basis: st.basis,
        x_basic,
        duals: y,
        stats: st.stats,
    })
}
