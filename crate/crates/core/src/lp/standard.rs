//! Conversion of a [`LinearProgram`] into the computational form
//! `maximize c.x  s.t.  A x = b, x >= 0, b >= 0`.
//!
//! Each row is scaled to unit max structural coefficient and negated if its
//! right-hand side is negative. Inequality rows get a slack column; every row
//! also gets an artificial column used only by phase one.

use super::{HintColumn, LinearProgram, RowSense};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColKind {
    Structural,
    Slack,
    Artificial,
}

#[derive(Debug, Clone)]
pub struct StandardForm {
    pub m: usize,
    pub n_struct: usize,
    /// Columns as (row, value) lists: structural, then slack, then artificial.
    pub cols: Vec<Vec<(usize, f64)>>,
    pub kind: Vec<ColKind>,
    /// Row of each column's largest-magnitude entry.
    pub preferred_row: Vec<usize>,
    pub b: Vec<f64>,
    /// Phase-two costs (scaled objective, zero off the structural columns).
    pub cost: Vec<f64>,
    pub slack_col: Vec<Option<usize>>,
    pub artificial_col: Vec<usize>,
    /// Multiplier applied to each original row (scale times sign).
    pub row_factor: Vec<f64>,
    pub obj_scale: f64,
}

impl StandardForm {
    pub fn new(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.n_vars;
        let mut row_max = vec![0.0f64; m];
        for e in &lp.entries {
            row_max[e.row] = row_max[e.row].max(e.value.abs());
        }
        let row_factor: Vec<f64> = lp
            .rows
            .iter()
            .zip(&row_max)
            .map(|(r, &mx)| {
                let scale = if mx > 0.0 { 1.0 / mx } else { 1.0 };
                if r.rhs < 0.0 {
                    -scale
                } else {
                    scale
                }
            })
            .collect();

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in &lp.entries {
            cols[e.col].push((e.row, e.value * row_factor[e.row]));
        }
        for c in &mut cols {
            c.sort_by_key(|x| x.0);
            // merge duplicate triplets
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(c.len());
            for &(r, v) in c.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => merged.push((r, v)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *c = merged;
        }
        let mut kind = vec![ColKind::Structural; n];
        let b: Vec<f64> = lp
            .rows
            .iter()
            .zip(&row_factor)
            .map(|(r, f)| r.rhs * f)
            .collect();

        let mut slack_col = vec![None; m];
        for (i, r) in lp.rows.iter().enumerate() {
            let sign = match r.sense {
                RowSense::Eq => continue,
                RowSense::Le => 1.0,
                RowSense::Ge => -1.0,
            };
            let coef = if row_factor[i] < 0.0 { -sign } else { sign };
            slack_col[i] = Some(cols.len());
            cols.push(vec![(i, coef)]);
            kind.push(ColKind::Slack);
        }
        let mut artificial_col = Vec::with_capacity(m);
        for i in 0..m {
            artificial_col.push(cols.len());
            cols.push(vec![(i, 1.0)]);
            kind.push(ColKind::Artificial);
        }

        let obj_max = lp.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let obj_scale = if obj_max > 0.0 { obj_max } else { 1.0 };
        let mut cost = vec![0.0; cols.len()];
        for (j, c) in lp.objective.iter().enumerate() {
            cost[j] = c / obj_scale;
        }
        let preferred_row = cols
            .iter()
            .map(|c| {
                c.iter()
                    .fold((usize::MAX, 0.0f64), |best, &(r, v)| {
                        if v.abs() > best.1 {
                            (r, v.abs())
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect();

        StandardForm {
            m,
            n_struct: n,
            cols,
            kind,
            preferred_row,
            b,
            cost,
            slack_col,
            artificial_col,
            row_factor,
            obj_scale,
        }
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    /// Slack where it has a `+1` coefficient, otherwise the artificial.
    pub fn phase_one_basis(&self) -> Vec<usize> {
        (0..self.m)
            .map(|i| match self.slack_col[i] {
                Some(j) if self.cols[j][0].1 > 0.0 => j,
                _ => self.artificial_col[i],
            })
            .collect()
    }

    pub fn hint_columns(&self, hint: &[HintColumn]) -> Option<Vec<usize>> {
        if hint.len() != self.m {
            return None;
        }
        let mut seen = vec![false; self.n_cols()];
        let mut out = Vec::with_capacity(self.m);
        for h in hint {
            let j = match *h {
                HintColumn::Structural(j) if j < self.n_struct => j,
                HintColumn::Slack(row) if row < self.m => self.slack_col[row]?,
                _ => return None,
            };
            if std::mem::replace(&mut seen[j], true) {
                return None;
            }
            out.push(j);
        }
        Some(out)
    }

    pub fn structural_values(&self, basis: &[usize], x_basic: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (&j, &v) in basis.iter().zip(x_basic) {
            if j < self.n_struct {
                x[j] = v.max(0.0);
            }
        }
        x
    }

    pub fn unscale_duals(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.row_factor)
            .map(|(v, f)| v * f * self.obj_scale)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_are_scaled_and_sign_normalised() {
        let mut lp = LinearProgram::new(2);
        lp.add_row(&[(0, 4.0), (1, -2.0)], RowSense::Ge, -8.0);
        let sf = StandardForm::new(&lp);
        // scaled by 1/4 and negated: -x0 + 0.5 x1 (+ slack) = 2
        assert_eq!(sf.cols[0], vec![(0, -1.0)]);
        assert_eq!(sf.cols[1], vec![(0, 0.5)]);
        assert_eq!(sf.b, vec![2.0]);
        // Ge slack has -1, negated row makes it +1 and usable as a start basis
        let slack = sf.slack_col[0].unwrap();
        assert_eq!(sf.cols[slack], vec![(0, 1.0)]);
        assert_eq!(sf.phase_one_basis(), vec![slack]);
    }
}
