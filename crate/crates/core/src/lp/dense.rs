//! Explicit dense basis inverse with Gauss-Jordan refactorization.

use super::simplex::Factor;
use super::standard::StandardForm;

const REFACTOR_EVERY: usize = 100;

pub(crate) struct DenseInverse {
    m: usize,
    /// Row-major `B^-1`: entry `(pos, row)`.
    inv: Vec<f64>,
    updates: usize,
}

impl DenseInverse {
    pub fn new(m: usize) -> Self {
        DenseInverse {
            m,
            inv: vec![0.0; m * m],
            updates: 0,
        }
    }
}

impl Factor for DenseInverse {
    fn refactor(&mut self, sf: &StandardForm, basis: &[usize]) -> bool {
        let m = self.m;
        // augmented [B | I] reduced to [I | B^-1], row-major over rows of B
        let w = 2 * m;
        let mut a = vec![0.0; m * w];
        for (pos, &j) in basis.iter().enumerate() {
            for &(r, v) in &sf.cols[j] {
                a[r * w + pos] = v;
            }
        }
        for r in 0..m {
            a[r * w + m + r] = 1.0;
        }
        for c in 0..m {
            let (mut p, mut best) = (c, 0.0);
            for r in c..m {
                let v = a[r * w + c].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best < 1e-13 {
                return false;
            }
            if p != c {
                for k in 0..w {
                    a.swap(p * w + k, c * w + k);
                }
            }
            let piv = a[c * w + c];
            for k in 0..w {
                a[c * w + k] /= piv;
            }
            let (head, tail) = a.split_at_mut(c * w);
            let (pivot_row, tail) = tail.split_at_mut(w);
            for row in head.chunks_mut(w).chain(tail.chunks_mut(w)) {
                let f = row[c];
                if f != 0.0 {
                    for k in 0..w {
                        row[k] -= f * pivot_row[k];
                    }
                }
            }
        }
        for pos in 0..m {
            self.inv[pos * m..(pos + 1) * m].copy_from_slice(&a[pos * w + m..(pos + 1) * w]);
        }
        self.updates = 0;
        true
    }

    fn ftran(&self, v: &mut [f64]) {
        let m = self.m;
        let src = v.to_vec();
        for pos in 0..m {
            let row = &self.inv[pos * m..(pos + 1) * m];
            v[pos] = row.iter().zip(&src).map(|(a, b)| a * b).sum();
        }
    }

    fn btran(&self, v: &mut [f64]) {
        let m = self.m;
        let src = v.to_vec();
        v.iter_mut().for_each(|x| *x = 0.0);
        for pos in 0..m {
            let c = src[pos];
            if c != 0.0 {
                for (out, a) in v.iter_mut().zip(&self.inv[pos * m..(pos + 1) * m]) {
                    *out += c * a;
                }
            }
        }
    }

    fn update(&mut self, r: usize, d: &[f64]) {
        let m = self.m;
        let dr = d[r];
        for k in 0..m {
            self.inv[r * m + k] /= dr;
        }
        let pivot: Vec<f64> = self.inv[r * m..(r + 1) * m].to_vec();
        for i in 0..m {
            if i != r && d[i] != 0.0 {
                let f = d[i];
                for (a, p) in self.inv[i * m..(i + 1) * m].iter_mut().zip(&pivot) {
                    *a -= f * p;
                }
            }
        }
        self.updates += 1;
    }

    fn wants_refactor(&self) -> bool {
        self.updates >= REFACTOR_EVERY
    }
}
