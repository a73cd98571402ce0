//! Random instances and small dense oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng as _;
use safex::belief::AtomicBelief;
use safex::cmdp::ConstrainedMdp;
use safex::rng::Rng;
use safex::{Mdp, StochasticPolicy};

/// Rows with total mass in `[lo, hi]` over up to `n` random targets, and a
/// reward no larger than the missing mass so every value lies in `[0, 1]`.
pub fn random_mdp_with(rng: &mut Rng, actions: &[usize], lo: f64, hi: f64) -> Mdp {
    let n = actions.len();
    let mut rows = Vec::new();
    let mut rewards = Vec::new();
    for &k in actions {
        for _ in 0..k {
            let mass = rng.random_range(lo..=hi);
            let m = rng.random_range(1..=n);
            let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 1e-3).collect();
            let total: f64 = raw.iter().sum();
            let mut row: Vec<(usize, f64)> = Vec::new();
            for r in raw {
                let t = rng.random_range(0..n);
                match row.iter_mut().find(|(u, _)| *u == t) {
                    Some(e) => e.1 += mass * r / total,
                    None => row.push((t, mass * r / total)),
                }
            }
            let sum: f64 = row.iter().map(|e| e.1).sum();
            rewards.push(rng.random::<f64>() * (1.0 - sum).max(0.0));
            rows.push(row);
        }
    }
    Mdp::from_rows(actions, rows, rewards).unwrap()
}

pub fn random_actions(rng: &mut Rng, max_states: usize, max_actions: usize) -> Vec<usize> {
    let n = rng.random_range(1..=max_states);
    (0..n).map(|_| rng.random_range(1..=max_actions)).collect()
}

pub fn random_mdp(rng: &mut Rng, max_states: usize, max_actions: usize) -> Mdp {
    let actions = random_actions(rng, max_states, max_actions);
    random_mdp_with(rng, &actions, 0.3, 0.97)
}

/// Up to `max_atoms` atoms on one random structure, random weights.
pub fn random_belief(rng: &mut Rng, max_states: usize, max_actions: usize, max_atoms: usize) -> AtomicBelief {
    let actions = random_actions(rng, max_states, max_actions);
    let k = rng.random_range(1..=max_atoms);
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms: Vec<(f64, Mdp)> = raw
        .iter()
        .map(|w| (w / total, random_mdp_with(rng, &actions, 0.3, 0.97)))
        .collect();
    let sum: f64 = atoms.iter().map(|a| a.0).sum();
    atoms[0].0 += 1.0 - sum;
    AtomicBelief::new(atoms).unwrap()
}

pub fn random_policy(rng: &mut Rng, m: &Mdp) -> StochasticPolicy {
    let mut probs = Vec::with_capacity(m.n_pairs());
    for s in 0..m.n_states() {
        let raw: Vec<f64> = (0..m.n_actions(s)).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|r| r / total));
    }
    StochasticPolicy::from_pair_probs(m, probs).unwrap()
}

/// Gaussian elimination with partial pivoting on a dense copy.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Value of `policy` by a dense solve of `(I - P_pi) v = r_pi`, with the
/// given pair rewards.
pub fn dense_value(m: &Mdp, policy: &StochasticPolicy, rewards: &[f64]) -> Vec<f64> {
    let n = m.n_states();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        a[s][s] += 1.0;
        for (sa, &pi) in m.pairs(s).zip(policy.state_probs(s)) {
            b[s] += pi * rewards[sa];
            for (t, p) in m.row(sa) {
                a[s][t] -= pi * p;
            }
        }
    }
    dense_solve(a, b)
}

/// Best value over all deterministic policies, by enumeration.
pub fn brute_force_optimum(m: &Mdp) -> Vec<f64> {
    let counts = m.actions_per_state();
    let mut best = vec![f64::NEG_INFINITY; m.n_states()];
    let mut actions = vec![0; counts.len()];
    loop {
        let v = dense_value(m, &StochasticPolicy::deterministic(m, &actions), m.rewards());
        for s in 0..v.len() {
            best[s] = best[s].max(v[s]);
        }
        let mut i = 0;
        loop {
            if i == counts.len() {
                return best;
            }
            actions[i] += 1;
            if actions[i] < counts[i] {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
    }
}

/// A random constrained MDP whose bound is met by some random policy.
pub fn random_cmdp(rng: &mut Rng, max_states: usize, max_actions: usize) -> ConstrainedMdp {
    let base = random_mdp(rng, max_states, max_actions);
    let objective: Vec<f64> = (0..base.n_pairs()).map(|_| rng.random::<f64>()).collect();
    let constraint: Vec<f64> = (0..base.n_pairs())
        .map(|sa| (1.0 - base.row_sum(sa)) * rng.random::<f64>())
        .collect();
    let s0 = rng.random_range(0..base.n_states());
    let witness = random_policy(rng, &base);
    let reach = dense_value(&base, &witness, &constraint)[s0];
    let bound = (reach * rng.random::<f64>()).clamp(0.0, 1.0);
    ConstrainedMdp {
        base,
        objective_rewards: objective,
        constraint_rewards: Some(constraint),
        bound,
        initial_state: s0,
    }
}

/// Atoms that mix one shared base model with their own random rows:
/// `(1 - spread) base + spread own`. Rows keep total mass `mass`.
pub fn concentrated_belief(rng: &mut Rng, max_states: usize, max_actions: usize, max_atoms: usize, mass: f64, spread: f64) -> AtomicBelief {
    let actions = random_actions(rng, max_states, max_actions);
    let base = random_mdp_with(rng, &actions, mass, mass);
    let k = rng.random_range(1..=max_atoms);
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let mut atoms = Vec::new();
    for w in &raw {
        let own = random_mdp_with(rng, &actions, mass, mass);
        let rows = (0..base.n_pairs())
            .map(|sa| {
                let mut row: Vec<(usize, f64)> = base.row(sa).map(|(t, p)| (t, (1.0 - spread) * p)).collect();
                for (t, p) in own.row(sa) {
                    match row.iter_mut().find(|(u, _)| *u == t) {
                        Some(e) => e.1 += spread * p,
                        None => row.push((t, spread * p)),
                    }
                }
                row
            })
            .collect();
        atoms.push((w / total, Mdp::from_rows(&actions, rows, base.rewards().to_vec()).unwrap()));
    }
    let sum: f64 = atoms.iter().map(|a| a.0).sum();
    atoms[0].0 += 1.0 - sum;
    AtomicBelief::new(atoms).unwrap()
}
