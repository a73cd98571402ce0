//! Beliefs with finitely many atoms: a weighted list of MDPs sharing one
//! state-action structure. Everything is computed exactly, which makes this
//! the reference belief for tests.

use rand::Rng as _;

use super::{Belief, BeliefModel, ModelSampler, UpdateSummary};
use crate::error::{Error, Result};
use crate::mdp::{self, Mdp, StochasticPolicy, ValueFunction};
use crate::rng::{self, Rng};

#[derive(Debug, Clone)]
pub struct AtomicBelief {
    atoms: Vec<(f64, Mdp)>,
    bonus: Vec<f64>,
}

impl AtomicBelief {
    pub fn new(atoms: Vec<(f64, Mdp)>) -> Result<Self> {
        let first = atoms
            .first()
            .ok_or_else(|| Error::InvalidModel("belief has no atoms".into()))?;
        let (apps, n_pairs) = (first.1.actions_per_state(), first.1.n_pairs());
        let mut total = 0.0;
        for (w, m) in &atoms {
            if !(*w >= 0.0) {
                return Err(Error::InvalidModel(format!("negative atom weight {w}")));
            }
            if m.actions_per_state() != apps {
                return Err(Error::InvalidModel("atoms differ in state-action structure".into()));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidModel(format!("atom weights sum to {total}")));
        }
        Ok(AtomicBelief {
            atoms,
            bonus: vec![0.0; n_pairs],
        })
    }

    pub fn with_bonus(mut self, bonus: Vec<f64>) -> Result<Self> {
        if bonus.len() != self.bonus.len() || bonus.iter().any(|&b| !(b >= 0.0)) {
            return Err(Error::InvalidModel("bonus must be nonnegative, one per pair".into()));
        }
        self.bonus = bonus;
        Ok(self)
    }

    pub fn atoms(&self) -> &[(f64, Mdp)] {
        &self.atoms
    }

    fn structure(&self) -> &Mdp {
        &self.atoms[0].1
    }

    pub fn mean_mdp(&self) -> Mdp {
        let base = self.structure();
        let mut rows = Vec::with_capacity(base.n_pairs());
        let mut rewards = vec![0.0; base.n_pairs()];
        for sa in 0..base.n_pairs() {
            let mut row: Vec<(usize, f64)> = Vec::new();
            for (w, m) in &self.atoms {
                row.extend(m.row(sa).map(|(t, p)| (t, w * p)));
                rewards[sa] += w * m.reward(sa);
            }
            rows.push(row);
        }
        Mdp::from_rows(&base.actions_per_state(), rows, rewards).expect("atoms share structure")
    }

    /// Exact correction `sum_t sum_w w min(0, P_w[s,a,t] - p[s,a,t])`.
    pub fn sigma(&self) -> Vec<f64> {
        let mean = self.mean_mdp();
        (0..mean.n_pairs())
            .map(|sa| {
                let mut total = 0.0;
                // targets absent from the mean row have P_w = p = 0
                for (t, p) in mean.row(sa) {
                    for (w, m) in &self.atoms {
                        total += w * (m.prob(sa, t) - p).min(0.0);
                    }
                }
                total
            })
            .collect()
    }

    /// Per-atom values of `policy`, using each atom's own rewards.
    pub fn atom_values(&self, policy: &StochasticPolicy) -> Result<Vec<ValueFunction>> {
        self.atoms
            .iter()
            .map(|(_, m)| mdp::policy_value_exact(m, policy))
            .collect()
    }

    /// `E_w V_w`, the belief-expected value of `policy`.
    pub fn expected_value(&self, policy: &StochasticPolicy) -> Result<Vec<f64>> {
        let values = self.atom_values(policy)?;
        let n = self.structure().n_states();
        let mut out = vec![0.0; n];
        for ((w, _), v) in self.atoms.iter().zip(&values) {
            for s in 0..n {
                out[s] += w * v[s];
            }
        }
        Ok(out)
    }

    /// The policy-dependent correction
    /// `sum_t sum_w w (P_w[s,a,t] - p[s,a,t]) V_w[t]`, under which the mean
    /// model reproduces the belief-expected value exactly.
    ///
    /// Logs a warning when some atom's values leave `[0, 1]`, where the
    /// policy-independent bound no longer applies.
    pub fn exact_correction(&self, policy: &StochasticPolicy) -> Result<Vec<f64>> {
        let values = self.atom_values(policy)?;
        if values.iter().flat_map(|v| v.iter()).any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            log::warn!("atom values outside [0, 1]; the sigma bound does not apply");
        }
        let mean = self.mean_mdp();
        Ok((0..mean.n_pairs())
            .map(|sa| {
                let mut total = 0.0;
                for ((w, m), v) in self.atoms.iter().zip(&values) {
                    for (t, p) in m.row(sa) {
                        total += w * p * v[t];
                    }
                    for (t, p) in mean.row(sa) {
                        total -= w * p * v[t];
                    }
                }
                total
            })
            .collect())
    }
}

impl Belief for AtomicBelief {
    type Observation = ();

    fn model(&self) -> BeliefModel {
        BeliefModel {
            mean: self.mean_mdp(),
            sigma: self.sigma(),
            bonus: self.bonus.clone(),
        }
    }

    fn update(&mut self, _obs: &()) -> UpdateSummary {
        UpdateSummary::default()
    }

    fn revision(&self) -> u64 {
        0
    }

    fn sampler(&self) -> Box<dyn ModelSampler + Send + '_> {
        Box::new(AtomSampler {
            belief: self,
            current: 0,
        })
    }

    fn sample_mdp(&self, seed: u64) -> Mdp {
        let mut rng = rng::rng_from(seed);
        self.atoms[pick_atom(&self.atoms, rng.random())].1.clone()
    }

    fn known_count(&self) -> usize {
        self.structure().n_states()
    }
}

fn pick_atom(atoms: &[(f64, Mdp)], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, (w, _)) in atoms.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    atoms.iter().rposition(|(w, _)| *w > 0.0).unwrap_or(0)
}

struct AtomSampler<'a> {
    belief: &'a AtomicBelief,
    current: usize,
}

impl ModelSampler for AtomSampler<'_> {
    fn resample(&mut self, rng: &mut Rng) {
        self.current = pick_atom(&self.belief.atoms, rng.random());
    }

    fn step(&mut self, s: usize, a: usize, rng: &mut Rng) -> Option<usize> {
        let m = &self.belief.atoms[self.current].1;
        let sa = m.sa(s, a);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (t, p) in m.row(sa) {
            acc += p;
            if u < acc {
                return Some(t);
            }
        }
        None
    }

    fn deterministic(&self) -> bool {
        self.belief.atoms.iter().all(|(_, m)| {
            (0..m.n_pairs()).all(|sa| {
                let probs = m.row_probs(sa);
                probs.is_empty() || (probs.len() == 1 && probs[0] == 1.0)
            })
        })
    }
}
