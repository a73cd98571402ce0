//! Sparse LU basis factorization with product-form (eta) updates.

use super::simplex::Factor;
use super::standard::StandardForm;
use crate::linalg::SparseLu;

const MAX_ETAS: usize = 80;
const DROP_TOL: f64 = 1e-14;

struct Eta {
    pos: usize,
    pivot: f64,
    idx: Vec<usize>,
    val: Vec<f64>,
}

pub(crate) struct LuEta {
    m: usize,
    lu: Option<SparseLu>,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl LuEta {
    pub fn new(m: usize) -> Self {
        LuEta {
            m,
            lu: None,
            etas: Vec::new(),
            eta_nnz: 0,
        }
    }
}

impl Factor for LuEta {
    fn refactor(&mut self, sf: &StandardForm, basis: &[usize]) -> bool {
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by_key(|&p| sf.cols[basis[p]].len());
        let pref: Vec<usize> = basis.iter().map(|&j| sf.preferred_row[j]).collect();
        self.etas.clear();
        self.eta_nnz = 0;
        match SparseLu::factor(self.m, |p| sf.cols[basis[p]].as_slice(), Some(&order), Some(&pref)) {
            Ok(lu) => {
                self.lu = Some(lu);
                true
            }
            Err(_) => {
                self.lu = None;
                false
            }
        }
    }

    fn ftran(&self, v: &mut [f64]) {
        self.lu.as_ref().expect("factored").solve(v);
        for e in &self.etas {
            let z = v[e.pos] / e.pivot;
            v[e.pos] = z;
            if z != 0.0 {
                for (&i, &di) in e.idx.iter().zip(&e.val) {
                    v[i] -= di * z;
                }
            }
        }
    }

    fn btran(&self, v: &mut [f64]) {
        for e in self.etas.iter().rev() {
            let mut acc = v[e.pos];
            for (&i, &di) in e.idx.iter().zip(&e.val) {
                acc -= di * v[i];
            }
            v[e.pos] = acc / e.pivot;
        }
        self.lu.as_ref().expect("factored").solve_transpose(v);
    }

    fn update(&mut self, r: usize, d: &[f64]) {
        let mut idx = Vec::new();
        let mut val = Vec::new();
        for (i, &di) in d.iter().enumerate() {
            if i != r && di.abs() > DROP_TOL {
                idx.push(i);
                val.push(di);
            }
        }
        self.eta_nnz += idx.len();
        self.etas.push(Eta {
            pos: r,
            pivot: d[r],
            idx,
            val,
        });
    }

    fn wants_refactor(&self) -> bool {
        let base = self.lu.as_ref().map_or(0, |lu| lu.nnz()) + self.m;
        self.etas.len() >= MAX_ETAS || self.eta_nnz > 4 * base
    }
}
