//! Finite MDPs with sparse, possibly sub-stochastic transition measures.
//!
//! Missing row mass goes to an implicit absorbing end state with value zero.
//! Discounting is never a separate parameter: callers scale the transition
//! measure (see [`Mdp::scaled`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseLu;

/// Tolerance on row sums above one before a row is reported as invalid.
pub const ROW_SUM_SLACK: f64 = 1e-12;

pub const DEFAULT_TOLERANCE: f64 = 1e-9;
pub const DEFAULT_MAX_ITER: usize = 100_000;
pub const DEFAULT_VALUE_FLOOR: f64 = -1e6;

/// Relative tolerance under which two action values count as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    n_states: usize,
    /// `action_offsets[s]..action_offsets[s + 1]` are the pair indices of `s`.
    action_offsets: Vec<usize>,
    pair_state: Vec<usize>,
    /// CSR layout of the transition rows, one row per state-action pair.
    row_ptr: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
    rewards: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl Mdp {
    /// Builds an MDP from one transition row per state-action pair, listed in
    /// state-major order. Duplicate targets within a row are merged.
    pub fn from_rows(
        actions_per_state: &[usize],
        rows: Vec<Vec<(usize, f64)>>,
        rewards: Vec<f64>,
    ) -> Result<Self> {
        let n_states = actions_per_state.len();
        let mut action_offsets = Vec::with_capacity(n_states + 1);
        let mut pair_state = Vec::new();
        action_offsets.push(0);
        for (s, &k) in actions_per_state.iter().enumerate() {
            if k == 0 {
                return Err(Error::InvalidModel(format!("state {s} has no actions")));
            }
            pair_state.extend(std::iter::repeat_n(s, k));
            action_offsets.push(pair_state.len());
        }
        let n_pairs = pair_state.len();
        if rows.len() != n_pairs || rewards.len() != n_pairs {
            return Err(Error::Dimension(format!(
                "expected {n_pairs} rows and rewards, got {} rows and {} rewards",
                rows.len(),
                rewards.len()
            )));
        }
        let mut row_ptr = Vec::with_capacity(n_pairs + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        row_ptr.push(0);
        for (sa, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(t, _)| t);
            let start = targets.len();
            for (t, p) in row {
                if t >= n_states {
                    return Err(Error::InvalidModel(format!(
                        "pair {sa} transitions to state {t} out of {n_states}"
                    )));
                }
                if targets.len() > start && *targets.last().unwrap() == t {
                    *probs.last_mut().unwrap() += p;
                } else {
                    targets.push(t);
                    probs.push(p);
                }
            }
            row_ptr.push(targets.len());
        }
        Ok(Mdp {
            n_states,
            action_offsets,
            pair_state,
            row_ptr,
            targets,
            probs,
            rewards,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_states {
            return Err(Error::Dimension(format!(
                "{} labels for {} states",
                labels.len(),
                self.n_states
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_pairs(&self) -> usize {
        self.pair_state.len()
    }

    pub fn n_actions(&self, s: usize) -> usize {
        self.action_offsets[s + 1] - self.action_offsets[s]
    }

    pub fn actions_per_state(&self) -> Vec<usize> {
        (0..self.n_states).map(|s| self.n_actions(s)).collect()
    }

    pub fn action_offsets(&self) -> &[usize] {
        &self.action_offsets
    }

    /// Pair index of `(s, a)`.
    #[inline]
    pub fn sa(&self, s: usize, a: usize) -> usize {
        debug_assert!(a < self.n_actions(s));
        self.action_offsets[s] + a
    }

    #[inline]
    pub fn pairs(&self, s: usize) -> std::ops::Range<usize> {
        self.action_offsets[s]..self.action_offsets[s + 1]
    }

    /// `(state, action)` of a pair index.
    #[inline]
    pub fn pair(&self, sa: usize) -> (usize, usize) {
        let s = self.pair_state[sa];
        (s, sa - self.action_offsets[s])
    }

    #[inline]
    pub fn pair_state(&self, sa: usize) -> usize {
        self.pair_state[sa]
    }

    #[inline]
    pub fn row(&self, sa: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[sa]..self.row_ptr[sa + 1];
        self.targets[r.clone()]
            .iter()
            .copied()
            .zip(self.probs[r].iter().copied())
    }

    #[inline]
    pub fn row_targets(&self, sa: usize) -> &[usize] {
        &self.targets[self.row_ptr[sa]..self.row_ptr[sa + 1]]
    }

    #[inline]
    pub fn row_probs(&self, sa: usize) -> &[f64] {
        &self.probs[self.row_ptr[sa]..self.row_ptr[sa + 1]]
    }

    pub fn row_sum(&self, sa: usize) -> f64 {
        self.row_probs(sa).iter().sum()
    }

    pub fn prob(&self, sa: usize, to: usize) -> f64 {
        let t = self.row_targets(sa);
        match t.binary_search(&to) {
            Ok(i) => self.row_probs(sa)[i],
            Err(_) => 0.0,
        }
    }

    #[inline]
    pub fn reward(&self, sa: usize) -> f64 {
        self.rewards[sa]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    /// Same dynamics with a different reward vector.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self> {
        if rewards.len() != self.n_pairs() {
            return Err(Error::Dimension(format!(
                "{} rewards for {} pairs",
                rewards.len(),
                self.n_pairs()
            )));
        }
        Ok(Mdp {
            rewards,
            ..self.clone()
        })
    }

    /// Multiplies every transition probability by `factor` (e.g. a discount).
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.probs.iter_mut().for_each(|p| *p *= factor);
        out
    }

    /// Replaces the rows of every pair at `state` by certain termination.
    pub fn terminate_at(&self, state: usize) -> Self {
        let rows = (0..self.n_pairs())
            .map(|sa| {
                if self.pair_state[sa] == state {
                    Vec::new()
                } else {
                    self.row(sa).collect()
                }
            })
            .collect();
        let mut out = Mdp::from_rows(&self.actions_per_state(), rows, self.rewards.clone())
            .expect("same structure");
        out.labels = self.labels.clone();
        out
    }

    /// Largest row sum over all pairs.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.n_pairs())
            .map(|sa| self.row_sum(sa))
            .fold(0.0, f64::max)
    }

    /// States reachable from `start` along positive-probability transitions.
    pub fn reachable_from(&self, start: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n_states];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(s) = stack.pop() {
            for sa in self.pairs(s) {
                for (t, p) in self.row(sa) {
                    if p > 0.0 && !seen[t] {
                        seen[t] = true;
                        stack.push(t);
                    }
                }
            }
        }
        seen
    }
}

/// One failed invariant of an [`Mdp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub state: usize,
    pub action: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    NegativeProbability { to: usize, p: f64 },
    NonFiniteProbability { to: usize },
    RowSumAboveOne { sum: f64 },
    NonFiniteReward,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(s={}, a={}): ", self.state, self.action)?;
        match &self.kind {
            ViolationKind::NegativeProbability { to, p } => {
                write!(f, "negative probability {p} to state {to}")
            }
            ViolationKind::NonFiniteProbability { to } => {
                write!(f, "non-finite probability to state {to}")
            }
            ViolationKind::RowSumAboveOne { sum } => write!(f, "row sum > 1 ({sum})"),
            ViolationKind::NonFiniteReward => write!(f, "non-finite reward"),
        }
    }
}

/// Lists every violated invariant; empty iff the MDP is valid.
pub fn validate(mdp: &Mdp) -> Vec<Violation> {
    let mut out = Vec::new();
    for sa in 0..mdp.n_pairs() {
        let (state, action) = mdp.pair(sa);
        let mut push = |kind| {
            out.push(Violation {
                state,
                action,
                kind,
            })
        };
        let mut sum = 0.0;
        for (to, p) in mdp.row(sa) {
            if !p.is_finite() {
                push(ViolationKind::NonFiniteProbability { to });
            } else if p < 0.0 {
                push(ViolationKind::NegativeProbability { to, p });
            }
            sum += p;
        }
        if sum.is_finite() && sum > 1.0 + ROW_SUM_SLACK {
            push(ViolationKind::RowSumAboveOne { sum });
        }
        if !mdp.reward(sa).is_finite() {
            push(ViolationKind::NonFiniteReward);
        }
    }
    out
}

/// Per-state probability vectors over that state's actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticPolicy {
    action_offsets: Vec<usize>,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn deterministic(mdp: &Mdp, actions: &[usize]) -> Self {
        assert_eq!(actions.len(), mdp.n_states());
        let mut probs = vec![0.0; mdp.n_pairs()];
        for (s, &a) in actions.iter().enumerate() {
            probs[mdp.sa(s, a)] = 1.0;
        }
        StochasticPolicy {
            action_offsets: mdp.action_offsets.clone(),
            probs,
        }
    }

    pub fn uniform(mdp: &Mdp) -> Self {
        let mut probs = vec![0.0; mdp.n_pairs()];
        for s in 0..mdp.n_states() {
            let k = mdp.n_actions(s) as f64;
            for sa in mdp.pairs(s) {
                probs[sa] = 1.0 / k;
            }
        }
        StochasticPolicy {
            action_offsets: mdp.action_offsets.clone(),
            probs,
        }
    }

    /// Wraps a pair-indexed probability vector, checking normalisation.
    pub fn from_pair_probs(mdp: &Mdp, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != mdp.n_pairs() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} pairs",
                probs.len(),
                mdp.n_pairs()
            )));
        }
        let policy = StochasticPolicy {
            action_offsets: mdp.action_offsets.clone(),
            probs,
        };
        for s in 0..mdp.n_states() {
            let p = policy.state_probs(s);
            let sum: f64 = p.iter().sum();
            if p.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!(
                    "policy at state {s} is not a probability vector"
                )));
            }
        }
        Ok(policy)
    }

    pub fn n_states(&self) -> usize {
        self.action_offsets.len() - 1
    }

    pub fn state_probs(&self, s: usize) -> &[f64] {
        &self.probs[self.action_offsets[s]..self.action_offsets[s + 1]]
    }

    pub fn pair_probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.state_probs(s)[a]
    }

    /// Actions with probability above `eps` at `s`.
    pub fn support(&self, s: usize, eps: f64) -> Vec<usize> {
        self.state_probs(s)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > eps)
            .map(|(a, _)| a)
            .collect()
    }

    pub fn is_deterministic(&self) -> bool {
        (0..self.n_states()).all(|s| self.state_probs(s).iter().filter(|&&p| p > 0.0).count() == 1)
    }

    /// The most likely action at `s` (lowest index on ties).
    pub fn mode(&self, s: usize) -> usize {
        let p = self.state_probs(s);
        let mut best = 0;
        for a in 1..p.len() {
            if p[a] > p[best] {
                best = a;
            }
        }
        best
    }

    /// Samples an action at `s` from a uniform draw `u` in `[0, 1)`.
    #[inline]
    pub fn sample_with(&self, s: usize, u: f64) -> usize {
        let p = self.state_probs(s);
        let mut acc = 0.0;
        for (a, &pa) in p.iter().enumerate() {
            acc += pa;
            if u < acc {
                return a;
            }
        }
        // rounding: fall back to the last action with positive mass
        p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
    }

    pub fn matches(&self, mdp: &Mdp) -> bool {
        self.action_offsets == mdp.action_offsets
    }
}

/// Per-state values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction(pub Vec<f64>);

impl std::ops::Deref for ValueFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl ValueFunction {
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_policy(mdp: &Mdp, policy: &StochasticPolicy) -> Result<()> {
    if !policy.matches(mdp) {
        return Err(Error::Dimension("policy does not match MDP structure".into()));
    }
    Ok(())
}

/// One-step backups `q[sa] = r[sa] + sum_t p[sa, t] v[t]`.
pub fn q_values(mdp: &Mdp, values: &[f64]) -> Vec<f64> {
    (0..mdp.n_pairs())
        .map(|sa| backup(mdp, sa, values))
        .collect()
}

#[inline]
fn backup(mdp: &Mdp, sa: usize, values: &[f64]) -> f64 {
    let mut q = mdp.reward(sa);
    for (t, p) in mdp.row(sa) {
        q += p * values[t];
    }
    q
}

/// Max-norm residual of the policy fixed-point equation.
pub fn policy_residual(mdp: &Mdp, policy: &StochasticPolicy, values: &[f64]) -> f64 {
    (0..mdp.n_states())
        .map(|s| {
            let target: f64 = mdp
                .pairs(s)
                .zip(policy.state_probs(s))
                .filter(|(_, &pi)| pi > 0.0)
                .map(|(sa, &pi)| pi * backup(mdp, sa, values))
                .sum();
            (target - values[s]).abs()
        })
        .fold(0.0, f64::max)
}

/// Iterative policy evaluation (Gauss-Seidel sweeps from zero) with the
/// default iteration cap.
pub fn policy_value(mdp: &Mdp, policy: &StochasticPolicy, tolerance: f64) -> Result<ValueFunction> {
    policy_value_capped(mdp, policy, tolerance, DEFAULT_MAX_ITER)
}

pub fn policy_value_capped(
    mdp: &Mdp,
    policy: &StochasticPolicy,
    tolerance: f64,
    max_iter: usize,
) -> Result<ValueFunction> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    for _ in 0..max_iter {
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let mut next = 0.0;
            for (sa, &pi) in mdp.pairs(s).zip(policy.state_probs(s)) {
                if pi > 0.0 {
                    next += pi * backup(mdp, sa, &v);
                }
            }
            delta = delta.max((next - v[s]).abs());
            v[s] = next;
        }
        if !delta.is_finite() {
            break;
        }
        if delta < tolerance && policy_residual(mdp, policy, &v) < tolerance {
            return Ok(ValueFunction(v));
        }
    }
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: policy_residual(mdp, policy, &v),
    })
}

/// Policy evaluation by a sparse direct solve of `(I - P_pi) v = r_pi`.
///
/// Fails with [`Error::NotConverged`] when the system is singular, i.e. the
/// policy never leaks mass from some closed set of states.
pub fn policy_value_exact(mdp: &Mdp, policy: &StochasticPolicy) -> Result<ValueFunction> {
    check_policy(mdp, policy)?;
    let n = mdp.n_states();
    // column s of (I - P_pi)^T, i.e. row s of (I - P_pi), stored as a column of
    // the transposed system so the solve below is a transpose solve.
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut rhs = vec![0.0; n];
    for s in 0..n {
        let mut entries: Vec<(usize, f64)> = vec![(s, 1.0)];
        for (sa, &pi) in mdp.pairs(s).zip(policy.state_probs(s)) {
            if pi <= 0.0 {
                continue;
            }
            rhs[s] += pi * mdp.reward(sa);
            for (t, p) in mdp.row(sa) {
                entries.push((t, -pi * p));
            }
        }
        entries.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (t, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == t => last.1 += v,
                _ => merged.push((t, v)),
            }
        }
        cols[s] = merged;
    }
    // cols[s] holds row s of A = I - P_pi; factor A^T (columns = rows of A)
    // and solve A v = r via the transpose solve.
    let preferred: Vec<usize> = (0..n).collect();
    let lu = SparseLu::factor(n, |j| cols[j].as_slice(), None, Some(&preferred)).map_err(|_| {
        Error::NotConverged {
            iterations: 0,
            residual: f64::INFINITY,
        }
    })?;
    let mut v = rhs;
    lu.solve_transpose(&mut v);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotConverged {
            iterations: 0,
            residual: f64::INFINITY,
        });
    }
    Ok(ValueFunction(v))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub tolerance: f64,
    pub max_iter: usize,
    pub value_floor: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            value_floor: DEFAULT_VALUE_FLOOR,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimalSolution {
    pub policy: StochasticPolicy,
    pub values: ValueFunction,
    /// Per action index chosen by the greedy policy.
    pub actions: Vec<usize>,
    /// States whose value hit `value_floor`.
    pub floored: Vec<usize>,
    pub iterations: usize,
}

/// Optimal values by value iteration (in-place sweeps in index order, from the
/// zero vector) and the greedy deterministic policy.
///
/// Values are floored at `value_floor`; floored states are listed in the
/// result instead of making the solve fail.
pub fn solve_optimal(mdp: &Mdp, opts: &SolveOptions) -> Result<OptimalSolution> {
    let n = mdp.n_states();
    let mut v = vec![0.0; n];
    let mut floored = vec![false; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut delta: f64 = 0.0;
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for sa in mdp.pairs(s) {
                best = best.max(backup(mdp, sa, &v));
            }
            if best < opts.value_floor {
                best = opts.value_floor;
                floored[s] = true;
            }
            delta = delta.max((best - v[s]).abs());
            v[s] = best;
        }
        if !delta.is_finite() {
            break;
        }
        if delta < opts.tolerance {
            converged = true;
            break;
        }
    }
    let actions = greedy_actions(mdp, &v);
    if !converged {
        let policy = StochasticPolicy::deterministic(mdp, &actions);
        return Err(Error::NotConverged {
            iterations,
            residual: policy_residual(mdp, &policy, &v),
        });
    }
    Ok(OptimalSolution {
        policy: StochasticPolicy::deterministic(mdp, &actions),
        values: ValueFunction(v),
        actions,
        floored: floored
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(|(s, _)| s)
            .collect(),
        iterations,
    })
}

/// Policy iteration with exact sparse evaluation.
///
/// Every deterministic policy must leak mass from every closed set of states
/// (true for any MDP scaled by a discount below one); otherwise evaluation
/// fails with [`Error::NotConverged`]. Returns the greedy policy of the final
/// values, so ties still go to the lowest action index.
pub fn policy_iteration(mdp: &Mdp, max_iter: usize) -> Result<OptimalSolution> {
    let start = greedy_actions(mdp, &vec![0.0; mdp.n_states()]);
    policy_iteration_from(mdp, start, max_iter)
}

/// [`policy_iteration`] starting from the given actions.
pub fn policy_iteration_from(mdp: &Mdp, mut actions: Vec<usize>, max_iter: usize) -> Result<OptimalSolution> {
    let n = mdp.n_states();
    if actions.len() != n || actions.iter().enumerate().any(|(s, &a)| a >= mdp.n_actions(s)) {
        return Err(Error::Dimension("start actions do not fit the model".into()));
    }
    for it in 1..=max_iter {
        let policy = StochasticPolicy::deterministic(mdp, &actions);
        let v = policy_value_exact(mdp, &policy)?;
        let mut changed = false;
        for s in 0..n {
            let current = backup(mdp, mdp.sa(s, actions[s]), &v);
            let mut best = current;
            for (a, sa) in mdp.pairs(s).enumerate() {
                let q = backup(mdp, sa, &v);
                if q > best + 1e-12 * best.abs().max(1.0) {
                    best = q;
                    actions[s] = a;
                    changed = true;
                }
            }
        }
        if !changed {
            let actions = greedy_actions(mdp, &v);
            return Ok(OptimalSolution {
                policy: StochasticPolicy::deterministic(mdp, &actions),
                values: v,
                actions,
                floored: Vec::new(),
                iterations: it,
            });
        }
    }
    let policy = StochasticPolicy::deterministic(mdp, &actions);
    let v = policy_value_exact(mdp, &policy)?;
    Err(Error::NotConverged {
        iterations: max_iter,
        residual: policy_residual(mdp, &policy, &v),
    })
}

/// Greedy actions w.r.t. `values`, lowest action index on (near-)ties.
pub fn greedy_actions(mdp: &Mdp, values: &[f64]) -> Vec<usize> {
    (0..mdp.n_states())
        .map(|s| {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for (a, sa) in mdp.pairs(s).enumerate() {
                let q = backup(mdp, sa, values);
                if a == 0 || q > best_q + TIE_EPS * best_q.abs().max(1.0) {
                    best_q = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

// --- serialization -------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionRecord {
    pub s: usize,
    pub a: usize,
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardRecord {
    pub s: usize,
    pub a: usize,
    pub r: f64,
}

/// JSON document form of an [`Mdp`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpDocument {
    pub n_states: usize,
    pub actions: Vec<usize>,
    pub transitions: Vec<TransitionRecord>,
    pub rewards: Vec<RewardRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

impl From<&Mdp> for MdpDocument {
    fn from(mdp: &Mdp) -> Self {
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for sa in 0..mdp.n_pairs() {
            let (s, a) = mdp.pair(sa);
            for (to, p) in mdp.row(sa) {
                transitions.push(TransitionRecord { s, a, to, p });
            }
            if mdp.reward(sa) != 0.0 {
                rewards.push(RewardRecord {
                    s,
                    a,
                    r: mdp.reward(sa),
                });
            }
        }
        MdpDocument {
            n_states: mdp.n_states(),
            actions: mdp.actions_per_state(),
            transitions,
            rewards,
            labels: mdp.labels.clone(),
        }
    }
}

impl TryFrom<MdpDocument> for Mdp {
    type Error = Error;

    fn try_from(doc: MdpDocument) -> Result<Self> {
        if doc.actions.len() != doc.n_states {
            return Err(Error::Parse(format!(
                "`actions` lists {} states but n_states is {}",
                doc.actions.len(),
                doc.n_states
            )));
        }
        let mut offsets = vec![0usize];
        for &k in &doc.actions {
            offsets.push(offsets.last().unwrap() + k);
        }
        let n_pairs = *offsets.last().unwrap();
        let index = |s: usize, a: usize| -> Result<usize> {
            if s >= doc.n_states || a >= doc.actions[s] {
                return Err(Error::Parse(format!("pair (s={s}, a={a}) out of range")));
            }
            Ok(offsets[s] + a)
        };
        let mut rows = vec![Vec::new(); n_pairs];
        for t in &doc.transitions {
            rows[index(t.s, t.a)?].push((t.to, t.p));
        }
        let mut rewards = vec![0.0; n_pairs];
        for r in &doc.rewards {
            rewards[index(r.s, r.a)?] = r.r;
        }
        let mdp = Mdp::from_rows(&doc.actions, rows, rewards)?;
        match doc.labels {
            Some(l) => mdp.with_labels(l),
            None => Ok(mdp),
        }
    }
}

impl Mdp {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MdpDocument::from(self)).expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MdpDocument = serde_json::from_str(text)?;
        Mdp::try_from(doc)
    }
}
