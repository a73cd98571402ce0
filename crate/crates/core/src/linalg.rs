//! Sparse LU factorization of square matrices given column by column.
//!
//! Left-looking (Gilbert-Peierls) elimination: each column is solved against
//! the part of `L` built so far, with the nonzero pattern found by a
//! depth-first search over `L`'s column graph. Pivots are chosen by threshold
//! partial pivoting, preferring a caller-supplied row when it is large enough.

const NONE: usize = usize::MAX;

/// Pivot candidates within this factor of the column maximum are acceptable.
const PIVOT_THRESHOLD: f64 = 0.1;
/// Absolute pivot magnitude below which the matrix is treated as singular.
const SINGULAR_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularColumn(pub usize);

#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// Row pivoted at each elimination step.
    pivot_row: Vec<usize>,
    /// Elimination step of each row.
    row_step: Vec<usize>,
    /// Column position eliminated at each step.
    step_col: Vec<usize>,
    l_ptr: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    u_ptr: Vec<usize>,
    u_step: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
}

impl SparseLu {
    /// Factors the `n x n` matrix whose column `j` is `column(j)` (pairs of
    /// row index and value, duplicates not allowed).
    ///
    /// `order` fixes the elimination order of columns (identity when `None`);
    /// `preferred_row[j]` names a row to pivot column `j` on when acceptable.
    pub fn factor<'a, F>(
        n: usize,
        column: F,
        order: Option<&[usize]>,
        preferred_row: Option<&[usize]>,
    ) -> Result<Self, SingularColumn>
    where
        F: Fn(usize) -> &'a [(usize, f64)],
    {
        let mut lu = SparseLu {
            n,
            pivot_row: vec![NONE; n],
            row_step: vec![NONE; n],
            step_col: vec![NONE; n],
            l_ptr: Vec::with_capacity(n + 1),
            l_row: Vec::new(),
            l_val: Vec::new(),
            u_ptr: Vec::with_capacity(n + 1),
            u_step: Vec::new(),
            u_val: Vec::new(),
            u_diag: vec![0.0; n],
        };
        lu.l_ptr.push(0);
        lu.u_ptr.push(0);

        let mut x = vec![0.0; n];
        let mut touched = vec![false; n];
        let mut pattern: Vec<usize> = Vec::new();
        let mut visited = vec![NONE; n];
        let mut topo: Vec<usize> = Vec::new();
        let mut stack: Vec<(usize, usize)> = Vec::new();

        for k in 0..n {
            let col = order.map_or(k, |o| o[k]);
            lu.step_col[k] = col;
            pattern.clear();
            topo.clear();
            for &(r, v) in column(col) {
                x[r] = v;
                if !touched[r] {
                    touched[r] = true;
                    pattern.push(r);
                }
            }
            // reach of the column pattern through already-built L columns,
            // collected in postorder; reversed it is a topological order
            for idx in 0..pattern.len() {
                let r = pattern[idx];
                let s0 = lu.row_step[r];
                if s0 == NONE || visited[s0] == k {
                    continue;
                }
                visited[s0] = k;
                stack.push((s0, lu.l_ptr[s0]));
                while let Some(top) = stack.last_mut() {
                    let s = top.0;
                    let end = lu.l_ptr[s + 1];
                    let mut next = NONE;
                    while top.1 < end {
                        let i = lu.l_row[top.1];
                        top.1 += 1;
                        let t = lu.row_step[i];
                        if t != NONE && visited[t] != k {
                            next = t;
                            break;
                        }
                    }
                    if next != NONE {
                        visited[next] = k;
                        stack.push((next, lu.l_ptr[next]));
                    } else {
                        topo.push(s);
                        stack.pop();
                    }
                }
            }
            for &s in topo.iter().rev() {
                let xs = x[lu.pivot_row[s]];
                if xs == 0.0 {
                    continue;
                }
                for p in lu.l_ptr[s]..lu.l_ptr[s + 1] {
                    let i = lu.l_row[p];
                    x[i] -= lu.l_val[p] * xs;
                    if !touched[i] {
                        touched[i] = true;
                        pattern.push(i);
                    }
                }
            }
            // U column: reached steps, in step order
            let mut reached: Vec<usize> = topo.clone();
            reached.sort_unstable();
            for s in reached {
                let v = x[lu.pivot_row[s]];
                if v != 0.0 {
                    lu.u_step.push(s);
                    lu.u_val.push(v);
                }
            }
            lu.u_ptr.push(lu.u_step.len());

            // pivot among rows not yet pivoted
            let mut best = NONE;
            let mut best_abs = 0.0;
            for &r in &pattern {
                if lu.row_step[r] == NONE && x[r].abs() > best_abs {
                    best_abs = x[r].abs();
                    best = r;
                }
            }
            if let Some(pref) = preferred_row.map(|p| p[col]) {
                if pref < n
                    && lu.row_step[pref] == NONE
                    && touched[pref]
                    && x[pref].abs() >= PIVOT_THRESHOLD * best_abs
                {
                    best = pref;
                    best_abs = x[pref].abs();
                }
            }
            if best == NONE || best_abs < SINGULAR_TOL {
                for &r in &pattern {
                    x[r] = 0.0;
                    touched[r] = false;
                }
                return Err(SingularColumn(col));
            }
            let piv = x[best];
            lu.u_diag[k] = piv;
            lu.pivot_row[k] = best;
            lu.row_step[best] = k;
            for &r in &pattern {
                if lu.row_step[r] == NONE && x[r] != 0.0 {
                    lu.l_row.push(r);
                    lu.l_val.push(x[r] / piv);
                }
                x[r] = 0.0;
                touched[r] = false;
            }
            lu.l_ptr.push(lu.l_row.len());
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal entries in `L` and `U`.
    pub fn nnz(&self) -> usize {
        self.l_row.len() + self.u_step.len()
    }

    /// Solves `M z = b` in place: `rhs` holds `b` indexed by row on entry and
    /// `z` indexed by column position on exit.
    pub fn solve(&self, rhs: &mut [f64]) {
        let n = self.n;
        for s in 0..n {
            let xs = rhs[self.pivot_row[s]];
            if xs != 0.0 {
                for p in self.l_ptr[s]..self.l_ptr[s + 1] {
                    rhs[self.l_row[p]] -= self.l_val[p] * xs;
                }
            }
        }
        // y_k = rhs[pivot_row[k]]; back substitution column-oriented
        let mut w = vec![0.0; n];
        for k in (0..n).rev() {
            let yk = rhs[self.pivot_row[k]];
            if yk == 0.0 {
                continue;
            }
            let wk = yk / self.u_diag[k];
            w[k] = wk;
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                rhs[self.pivot_row[self.u_step[p]]] -= self.u_val[p] * wk;
            }
        }
        for k in 0..n {
            rhs[self.step_col[k]] = w[k];
        }
    }

    /// Solves `M^T y = c` in place: `rhs` holds `c` indexed by column position
    /// on entry and `y` indexed by row on exit.
    pub fn solve_transpose(&self, rhs: &mut [f64]) {
        let n = self.n;
        let mut v = vec![0.0; n];
        for k in 0..n {
            let mut acc = rhs[self.step_col[k]];
            for p in self.u_ptr[k]..self.u_ptr[k + 1] {
                acc -= self.u_val[p] * v[self.u_step[p]];
            }
            v[k] = acc / self.u_diag[k];
        }
        for j in (0..n).rev() {
            let mut acc = v[j];
            for p in self.l_ptr[j]..self.l_ptr[j + 1] {
                acc -= self.l_val[p] * v[self.row_step[self.l_row[p]]];
            }
            v[j] = acc;
        }
        for j in 0..n {
            rhs[self.pivot_row[j]] = v[j];
        }
    }
}
