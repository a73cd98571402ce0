//! Single-constraint MDPs solved through the occupation-measure LP
//!
//! ```text
//! maximize   sum o[s,a] x[s,a]
//! subject to sum_a x[s,a] - sum p[s',a',s] x[s',a'] = 1{s = s0}   for every s
//!            sum c[s,a] x[s,a] >= bound
//!            x >= 0
//! ```
//!
//! The transition measure must already include discounting, so the flow
//! system is nonsingular for every policy.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{self, HintColumn, LinearProgram, LpOptions, Pricing, RowSense, SimplexStats};
use crate::mdp::{self, Mdp, MdpDocument, StochasticPolicy, ValueFunction};

/// JSON form of a [`ConstrainedMdp`]: the base model plus pair-indexed reward
/// vectors in state-major order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmdpDocument {
    pub mdp: MdpDocument,
    pub objective: Vec<f64>,
    #[serde(default)]
    pub constraint: Option<Vec<f64>>,
    #[serde(default)]
    pub bound: f64,
    pub initial_state: usize,
}

impl ConstrainedMdp {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CmdpDocument = serde_json::from_str(text)?;
        let cmdp = ConstrainedMdp {
            base: Mdp::try_from(doc.mdp)?,
            objective_rewards: doc.objective,
            constraint_rewards: doc.constraint,
            bound: doc.bound,
            initial_state: doc.initial_state,
        };
        cmdp.validate()?;
        Ok(cmdp)
    }

    pub fn to_json(&self) -> String {
        let doc = CmdpDocument {
            mdp: MdpDocument::from(&self.base),
            objective: self.objective_rewards.clone(),
            constraint: self.constraint_rewards.clone(),
            bound: self.bound,
            initial_state: self.initial_state,
        };
        serde_json::to_string_pretty(&doc).expect("serializable")
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedMdp {
    pub base: Mdp,
    /// Pair-indexed objective rewards.
    pub objective_rewards: Vec<f64>,
    /// Pair-indexed constraint rewards; `None` drops the constraint row.
    pub constraint_rewards: Option<Vec<f64>>,
    pub bound: f64,
    pub initial_state: usize,
}

impl ConstrainedMdp {
    pub fn validate(&self) -> Result<()> {
        let violations = mdp::validate(&self.base);
        if let Some(v) = violations.first() {
            return Err(Error::InvalidModel(v.to_string()));
        }
        let n = self.base.n_pairs();
        if self.objective_rewards.len() != n {
            return Err(Error::Dimension(format!(
                "{} objective rewards for {n} pairs",
                self.objective_rewards.len()
            )));
        }
        if let Some(c) = &self.constraint_rewards {
            if c.len() != n {
                return Err(Error::Dimension(format!("{} constraint rewards for {n} pairs", c.len())));
            }
        }
        if !(0.0..=1.0).contains(&self.bound) {
            return Err(Error::config("bound", format!("{} is outside [0, 1]", self.bound)));
        }
        if self.initial_state >= self.base.n_states() {
            return Err(Error::Dimension(format!("initial state {} out of range", self.initial_state)));
        }
        Ok(())
    }
}

/// Pair-indexed discounted visitation mass.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupationMeasure(pub Vec<f64>);

impl OccupationMeasure {
    pub fn total_mass(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Max-norm violation of the flow equations from `initial_state`.
    pub fn flow_residual(&self, mdp: &Mdp, initial_state: usize) -> f64 {
        let mut r = vec![0.0; mdp.n_states()];
        r[initial_state] = -1.0;
        for sa in 0..mdp.n_pairs() {
            let x = self.0[sa];
            r[mdp.pair_state(sa)] += x;
            for (t, p) in mdp.row(sa) {
                r[t] -= p * x;
            }
        }
        r.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// `sum rewards . x`.
    pub fn dot(&self, rewards: &[f64]) -> f64 {
        self.0.iter().zip(rewards).map(|(x, r)| x * r).sum()
    }
}

/// Layout of an LP built over a subset of states: variable `k` is pair
/// `pairs[k]`, flow row `i` belongs to `states[i]`, and the constraint row
/// (if any) comes last.
#[derive(Debug, Clone)]
pub struct LpLayout {
    pub pairs: Vec<usize>,
    pub states: Vec<usize>,
    pub constraint_row: Option<usize>,
}

/// The LP over all states.
pub fn build_lp(cmdp: &ConstrainedMdp) -> (LinearProgram, LpLayout) {
    build_lp_over(cmdp, &vec![true; cmdp.base.n_states()])
}

/// The LP restricted to the states flagged in `keep`, which must be closed
/// under transitions (as the reachable set from the initial state is).
pub fn build_lp_over(cmdp: &ConstrainedMdp, keep: &[bool]) -> (LinearProgram, LpLayout) {
    let m = &cmdp.base;
    let states: Vec<usize> = (0..m.n_states()).filter(|&s| keep[s]).collect();
    let mut row_of = vec![usize::MAX; m.n_states()];
    for (i, &s) in states.iter().enumerate() {
        row_of[s] = i;
    }
    let pairs: Vec<usize> = states.iter().flat_map(|&s| m.pairs(s)).collect();
    let mut lp = LinearProgram::new(pairs.len());
    lp.objective = pairs.iter().map(|&sa| cmdp.objective_rewards[sa]).collect();
    lp.rows = states
        .iter()
        .map(|&s| lp::RowSpec {
            sense: RowSense::Eq,
            rhs: if s == cmdp.initial_state { 1.0 } else { 0.0 },
        })
        .collect();
    for (k, &sa) in pairs.iter().enumerate() {
        let s = m.pair_state(sa);
        let mut diag = 1.0;
        let mut off: Vec<(usize, f64)> = Vec::new();
        for (t, p) in m.row(sa) {
            if t == s {
                diag -= p;
            } else {
                debug_assert!(row_of[t] != usize::MAX, "kept states must be closed");
                off.push((row_of[t], -p));
            }
        }
        lp.entries.push(lp::Entry {
            row: row_of[s],
            col: k,
            value: diag,
        });
        for (row, value) in off {
            lp.entries.push(lp::Entry { row, col: k, value });
        }
    }
    let constraint_row = cmdp.constraint_rewards.as_ref().map(|c| {
        let coeffs: Vec<(usize, f64)> = pairs.iter().enumerate().map(|(k, &sa)| (k, c[sa])).collect();
        lp.add_row(&coeffs, RowSense::Ge, cmdp.bound)
    });
    lp.entries.retain(|e| e.value != 0.0);
    (
        lp,
        LpLayout {
            pairs,
            states,
            constraint_row,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CmdpOptions {
    /// Feasibility tolerance on the constraint and flow rows.
    pub tolerance: f64,
    pub lp: LpOptions,
    /// Start the simplex from a basis built from a deterministic policy.
    pub warm_start: bool,
    /// Restrict the LP to states reachable from the initial state.
    pub restrict_reachable: bool,
    /// States with less total occupation than this fall back to action 0.
    pub mass_epsilon: f64,
}

impl Default for CmdpOptions {
    fn default() -> Self {
        CmdpOptions {
            tolerance: 1e-6,
            // occupation LPs are massively degenerate (every state a policy
            // never visits is a zero basic), which stalls Dantzig pricing
            lp: LpOptions {
                pricing: Pricing::Bland,
                ..LpOptions::default()
            },
            warm_start: true,
            restrict_reachable: true,
            mass_epsilon: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub policy: StochasticPolicy,
    pub v_xi: ValueFunction,
    /// Values under the constraint rewards; `None` when unconstrained.
    pub v_sigma: Option<ValueFunction>,
    pub occupation: OccupationMeasure,
    /// LP objective at the optimum.
    pub objective: f64,
    /// `c . x` at the optimum (`None` when unconstrained).
    pub constraint_value: Option<f64>,
    pub lp_stats: SimplexStats,
    pub lp_variables: usize,
    pub seconds: f64,
}

/// `x[s,a] / sum_a x[s,a]`, with states of (near-)zero mass getting action 0.
pub fn policy_from_occupation(mdp: &Mdp, x: &OccupationMeasure, mass_epsilon: f64) -> StochasticPolicy {
    let mut probs = vec![0.0; mdp.n_pairs()];
    for s in 0..mdp.n_states() {
        let range = mdp.pairs(s);
        let total: f64 = x.0[range.clone()].iter().map(|v| v.max(0.0)).sum();
        if total > mass_epsilon {
            for sa in range {
                probs[sa] = x.0[sa].max(0.0) / total;
            }
        } else {
            probs[range.start] = 1.0;
        }
    }
    StochasticPolicy::from_pair_probs(mdp, probs).expect("normalised by construction")
}

/// Values of `policy` under `rewards`, by direct solve with an iterative
/// fallback for non-leaking models.
pub fn evaluate(base: &Mdp, rewards: &[f64], policy: &StochasticPolicy, tolerance: f64) -> Result<ValueFunction> {
    let m = base.with_rewards(rewards.to_vec())?;
    match mdp::policy_value_exact(&m, policy) {
        Ok(v) => Ok(v),
        Err(_) => mdp::policy_value(&m, policy, tolerance),
    }
}

/// Best deterministic policy for `rewards` on `base` and its value at `s0`.
fn best_policy(base: &Mdp, rewards: &[f64], tolerance: f64) -> Result<mdp::OptimalSolution> {
    let m = base.with_rewards(rewards.to_vec())?;
    match mdp::policy_iteration(&m, 1000) {
        Ok(sol) => Ok(sol),
        Err(_) => mdp::solve_optimal(
            &m,
            &mdp::SolveOptions {
                tolerance,
                ..Default::default()
            },
        ),
    }
}

/// Largest constraint value any policy achieves from the initial state.
pub fn max_constraint_value(cmdp: &ConstrainedMdp, tolerance: f64) -> Result<f64> {
    match &cmdp.constraint_rewards {
        Some(c) => Ok(best_policy(&cmdp.base, c, tolerance)?.values[cmdp.initial_state]),
        None => Ok(f64::INFINITY),
    }
}

/// A starting basis: one action per state, plus optionally a second action
/// at one state in place of the constraint slack.
struct StartBasis {
    actions: Vec<usize>,
    mixed: Option<(usize, usize)>,
}

fn hint_for(start: &StartBasis, cmdp: &ConstrainedMdp, layout: &LpLayout) -> Vec<HintColumn> {
    let m = &cmdp.base;
    let mut var_of = vec![usize::MAX; m.n_pairs()];
    for (k, &sa) in layout.pairs.iter().enumerate() {
        var_of[sa] = k;
    }
    let mut hint: Vec<HintColumn> = layout
        .states
        .iter()
        .map(|&s| HintColumn::Structural(var_of[m.sa(s, start.actions[s])]))
        .collect();
    if let Some(r) = layout.constraint_row {
        match start.mixed {
            Some((s, a)) if var_of[m.sa(s, a)] != usize::MAX => hint.push(HintColumn::Structural(var_of[m.sa(s, a)])),
            _ => hint.push(HintColumn::Slack(r)),
        }
    }
    hint
}

fn constraint_at(m: &Mdp, c: &[f64], actions: &[usize], s0: usize, tolerance: f64) -> Result<f64> {
    Ok(evaluate(m, c, &StochasticPolicy::deterministic(m, actions), tolerance)?[s0])
}

/// Brackets the multiplier of the relaxation `objective + lambda c` between a
/// policy that misses the bound and one that meets it, then switches the
/// feasible policy towards the other one state at a time. The state whose
/// switch breaks the bound is where the optimal policy mixes.
fn lagrangian_start(
    cmdp: &ConstrainedMdp,
    c: &[f64],
    infeasible: Vec<usize>,
    safest: Vec<usize>,
    tolerance: f64,
) -> Result<StartBasis> {
    let m = &cmdp.base;
    let (s0, bound) = (cmdp.initial_state, cmdp.bound);
    let relaxed = |lambda: f64, start: Vec<usize>| -> Result<Vec<usize>> {
        let r = cmdp.objective_rewards.iter().zip(c).map(|(o, c)| o + lambda * c).collect();
        Ok(mdp::policy_iteration_from(&m.with_rewards(r)?, start, 1000)?.actions)
    };
    let magnitude = |v: &[f64]| v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let mut lambda = magnitude(&cmdp.objective_rewards) / magnitude(c).max(1e-300);
    let mut lo = (0.0, infeasible);
    let mut hi = None;
    for _ in 0..60 {
        let a = relaxed(lambda, lo.1.clone())?;
        if constraint_at(m, c, &a, s0, tolerance)? >= bound {
            hi = Some((lambda, a));
            break;
        }
        lo = (lambda, a);
        lambda *= 4.0;
    }
    let Some(mut hi) = hi else {
        return Ok(StartBasis {
            actions: safest,
            mixed: None,
        });
    };
    for _ in 0..40 {
        if lo.1.iter().zip(&hi.1).filter(|(a, b)| a != b).count() <= 1 {
            break;
        }
        let mid = 0.5 * (lo.0 + hi.0);
        let a = relaxed(mid, hi.1.clone())?;
        if constraint_at(m, c, &a, s0, tolerance)? >= bound {
            hi = (mid, a);
        } else {
            lo = (mid, a);
        }
    }
    let mut cur = hi.1;
    for s in 0..cur.len() {
        if cur[s] == lo.1[s] {
            continue;
        }
        let kept = cur[s];
        cur[s] = lo.1[s];
        if constraint_at(m, c, &cur, s0, tolerance)? < bound {
            cur[s] = kept;
            // a switch with no effect on the constraint only crossed the
            // bound through evaluation error; its column would make the
            // basis singular
            let v = evaluate(m, c, &StochasticPolicy::deterministic(m, &cur), 1e-12)?;
            let sa = m.sa(s, lo.1[s]);
            let advantage = c[sa] + m.row(sa).map(|(t, p)| p * v[t]).sum::<f64>() - v[s];
            let mixed = (advantage.abs() > 1e-9).then_some((s, lo.1[s]));
            return Ok(StartBasis { actions: cur, mixed });
        }
    }
    Ok(StartBasis {
        actions: cur,
        mixed: None,
    })
}

/// Solves the constrained MDP.
///
/// Fails with [`Error::SafetyInfeasible`] (carrying the best achievable
/// constraint value) when no policy meets the bound.
pub fn solve_constrained(cmdp: &ConstrainedMdp, opts: &CmdpOptions) -> Result<ConstrainedSolution> {
    cmdp.validate()?;
    let started = Instant::now();
    let m = &cmdp.base;
    let s0 = cmdp.initial_state;

    // Warm start: the objective-greedy policy when it already satisfies the
    // constraint (then it is optimal), otherwise a basis built from the
    // Lagrangian relaxation.
    let greedy = best_policy(m, &cmdp.objective_rewards, opts.tolerance)?;
    let mut start = StartBasis {
        actions: greedy.actions.clone(),
        mixed: None,
    };
    if let Some(c) = &cmdp.constraint_rewards {
        let greedy_c = evaluate(m, c, &greedy.policy, opts.tolerance)?[s0];
        if greedy_c < cmdp.bound {
            let safest = best_policy(m, c, opts.tolerance)?;
            let best = safest.values[s0];
            if best < cmdp.bound - opts.tolerance {
                return Err(Error::SafetyInfeasible {
                    delta: cmdp.bound,
                    best,
                });
            }
            start = match opts.warm_start {
                true => lagrangian_start(cmdp, c, greedy.actions, safest.actions.clone(), opts.tolerance)
                    .unwrap_or(StartBasis {
                        actions: safest.actions,
                        mixed: None,
                    }),
                false => StartBasis {
                    actions: safest.actions,
                    mixed: None,
                },
            };
        }
    }

    let keep = if opts.restrict_reachable {
        m.reachable_from(s0)
    } else {
        vec![true; m.n_states()]
    };
    let (lp, layout) = build_lp_over(cmdp, &keep);
    let hint = opts.warm_start.then(|| hint_for(&start, cmdp, &layout));
    let sol = match lp::solve(&lp, &opts.lp, hint.as_deref()) {
        Ok(sol) => sol,
        Err(Error::Infeasible) => {
            let best = max_constraint_value(cmdp, opts.tolerance)?;
            return Err(Error::SafetyInfeasible {
                delta: cmdp.bound,
                best,
            });
        }
        Err(e) => return Err(e),
    };
    let mut x = vec![0.0; m.n_pairs()];
    for (k, &sa) in layout.pairs.iter().enumerate() {
        x[sa] = sol.x[k];
    }
    let occupation = OccupationMeasure(x);
    let policy = policy_from_occupation(m, &occupation, opts.mass_epsilon);
    let v_xi = evaluate(m, &cmdp.objective_rewards, &policy, opts.tolerance)?;
    let (v_sigma, constraint_value) = match &cmdp.constraint_rewards {
        Some(c) => (
            Some(evaluate(m, c, &policy, opts.tolerance)?),
            Some(occupation.dot(c)),
        ),
        None => (None, None),
    };
    Ok(ConstrainedSolution {
        policy,
        v_xi,
        v_sigma,
        objective: sol.objective,
        constraint_value,
        occupation,
        lp_stats: sol.stats,
        lp_variables: lp.n_vars,
        seconds: started.elapsed().as_secs_f64(),
    })
}
