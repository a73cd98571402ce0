//! Beliefs over MDP dynamics.
//!
//! A belief exposes its mean model `p = E[P]`, `r = E[R]`, the pessimistic
//! correction `sigma[s,a] = sum_t E[min(0, P[s,a,t] - p[s,a,t])]`, an
//! exploration bonus, Bayesian updates and model sampling.

pub mod atomic;
pub mod grid;
pub mod terrain;

pub use atomic::AtomicBelief;
pub use grid::{Cell, GridHeightBelief, GridObservation};
pub use terrain::{GaussianTerrainBelief, SensingModel, TerrainObservation};

use crate::mdp::Mdp;
use crate::rng::Rng;

/// Immutable snapshot of everything the planner reads from a belief.
#[derive(Debug, Clone)]
pub struct BeliefModel {
    /// Mean transitions and mean rewards.
    pub mean: Mdp,
    /// Pair-indexed correction, always `<= 0`.
    pub sigma: Vec<f64>,
    /// Pair-indexed exploration bonus, always `>= 0`.
    pub bonus: Vec<f64>,
}

/// What changed in a belief update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateSummary {
    /// Cells (or states) that became known or were visited for the first time.
    pub newly_revealed: usize,
    /// Whether the belief changed at all.
    pub changed: bool,
}

pub trait Belief {
    type Observation;

    fn model(&self) -> BeliefModel;

    fn update(&mut self, obs: &Self::Observation) -> UpdateSummary;

    /// Increases whenever the belief changes.
    fn revision(&self) -> u64;

    /// A fresh sampler of models drawn from this belief.
    fn sampler(&self) -> Box<dyn ModelSampler + Send + '_>;

    /// One full model drawn with `seed`.
    fn sample_mdp(&self, seed: u64) -> Mdp;

    /// Number of cells or states considered known.
    fn known_count(&self) -> usize;

    /// No bonus left anywhere.
    fn fully_explored(&self) -> bool {
        self.model().bonus.iter().all(|&b| b == 0.0)
    }
}

/// Lazily drawn models: each [`resample`](ModelSampler::resample) starts a
/// new independent draw from the belief, and [`step`](ModelSampler::step)
/// simulates one transition in the current draw.
pub trait ModelSampler {
    fn resample(&mut self, rng: &mut Rng);

    /// Next state, or `None` when the row's missing mass ends the episode.
    fn step(&mut self, s: usize, a: usize, rng: &mut Rng) -> Option<usize>;

    /// Whether every drawn model has deterministic transitions.
    fn deterministic(&self) -> bool;
}

/// `-factor * q * (1 - q)`, the correction of a two-outcome row.
pub fn bernoulli_sigma(q: f64, factor: f64) -> f64 {
    -factor * q * (1.0 - q)
}

/// Row mass `q` to `dest` and `1 - q` to `src`.
pub(crate) fn bernoulli_row(src: usize, dest: usize, q: f64) -> Vec<(usize, f64)> {
    if src == dest || q >= 1.0 {
        vec![(dest, 1.0)]
    } else if q <= 0.0 {
        vec![(src, 1.0)]
    } else {
        vec![(dest, q), (src, 1.0 - q)]
    }
}
