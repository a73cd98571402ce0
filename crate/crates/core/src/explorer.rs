//! The safe explorer.
//!
//! Every step plans from scratch on the current belief:
//!
//! 1. Return problem: the mean model with every row out of the home state
//!    `s0` cut off, reward 1 for being at `s0` and the correction `sigma`
//!    everywhere else. Its optimal values `v*` lower-bound the belief
//!    probability of getting back to `s0` with the optimal return policy.
//! 2. Exploration problem: the discounted mean model with the exploration
//!    bonus as objective and the constraint reward
//!    `c[s,a] = (1 - gamma) v*[s] + gamma sigma[s,a]`, whose value must stay
//!    above `delta`.
//!
//! The stochastic solution of step two is collapsed to the supported action
//! at `s0` with the largest safety q-value.

use std::collections::HashSet;
use std::fmt;
use std::io::Write;
use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::belief::{AtomicBelief, Belief, BeliefModel};
use crate::cmdp::{self, CmdpOptions, ConstrainedMdp};
use crate::env::Environment;
use crate::error::{Error, Result};
use crate::mdp::{self, Mdp, SolveOptions, StochasticPolicy, ValueFunction};
use crate::par::{self, Execution};
use crate::rng;

/// Actions with less probability than this are not in a policy's support.
pub const SUPPORT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyConfig {
    /// Required belief probability of being able to return home.
    pub delta: f64,
    pub gamma: f64,
    /// Replace negative return values by zero.
    pub clamp_return_values: bool,
    /// Drop the correction: plan as if the mean model were the truth.
    pub naive_baseline: bool,
    /// Drop the safety constraint altogether.
    pub unsafe_baseline: bool,
    pub step_budget: usize,
    /// Halt as stuck after this many steps without revealing anything new.
    pub stuck_window: Option<usize>,
    /// Recall after exactly this many steps instead of at a geometric time.
    pub recall_horizon: Option<usize>,
    pub return_solver: SolveOptions,
    pub cmdp: CmdpOptions,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig {
            delta: 0.9,
            gamma: 0.99,
            clamp_return_values: true,
            naive_baseline: false,
            unsafe_baseline: false,
            step_budget: 1000,
            stuck_window: None,
            recall_horizon: None,
            return_solver: SolveOptions {
                tolerance: 1e-10,
                max_iter: 200_000,
                ..SolveOptions::default()
            },
            cmdp: CmdpOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Safe,
    Naive,
    Unsafe,
}

impl SafetyConfig {
    pub fn safe(delta: f64) -> Self {
        SafetyConfig {
            delta,
            ..Default::default()
        }
    }

    pub fn unsafe_baseline() -> Self {
        SafetyConfig {
            unsafe_baseline: true,
            ..Default::default()
        }
    }

    pub fn mode(&self) -> Mode {
        match (self.naive_baseline, self.unsafe_baseline) {
            (_, true) => Mode::Unsafe,
            (true, false) => Mode::Naive,
            _ => Mode::Safe,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::config("delta", format!("{} is outside [0, 1]", self.delta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma", format!("{} is outside (0, 1)", self.gamma)));
        }
        if self.naive_baseline && self.unsafe_baseline {
            return Err(Error::config(
                "unsafe_baseline",
                "naive_baseline and unsafe_baseline are mutually exclusive",
            ));
        }
        if self.stuck_window == Some(0) {
            return Err(Error::config("stuck_window", "must be positive"));
        }
        if self.recall_horizon == Some(0) {
            return Err(Error::config("recall_horizon", "must be positive"));
        }
        Ok(())
    }

    fn sigma_of<'a>(&self, model: &'a BeliefModel) -> std::borrow::Cow<'a, [f64]> {
        if self.naive_baseline {
            std::borrow::Cow::Owned(vec![0.0; model.sigma.len()])
        } else {
            std::borrow::Cow::Borrowed(&model.sigma)
        }
    }
}

/// Step one's MDP: mean transitions cut off at `s0`, reward 1 at `s0` and
/// `sigma` elsewhere. Undiscounted.
pub fn return_mdp(model: &BeliefModel, s0: usize, sigma: &[f64]) -> Result<Mdp> {
    let mean = &model.mean;
    if s0 >= mean.n_states() {
        return Err(Error::Dimension(format!("home state {s0} out of range")));
    }
    let rewards = (0..mean.n_pairs())
        .map(|sa| if mean.pair_state(sa) == s0 { 1.0 } else { sigma[sa] })
        .collect();
    mean.terminate_at(s0).with_rewards(rewards)
}

#[derive(Debug, Clone)]
pub struct ReturnSolution {
    pub actions: Vec<usize>,
    /// Values after clamping (if enabled).
    pub values: ValueFunction,
    /// States whose raw value was negative.
    pub clamped: usize,
    pub floored: Vec<usize>,
}

impl ReturnSolution {
    pub fn policy(&self, mdp: &Mdp) -> StochasticPolicy {
        StochasticPolicy::deterministic(mdp, &self.actions)
    }
}

/// Optimal return policy and its values `v*`.
pub fn solve_return(model: &BeliefModel, s0: usize, config: &SafetyConfig) -> Result<ReturnSolution> {
    let sigma = config.sigma_of(model);
    let m = return_mdp(model, s0, &sigma)?;
    let sol = mdp::solve_optimal(&m, &config.return_solver)?;
    let actions = homing_actions(&m, &sol.values, s0, &sol.actions);
    let mut values = sol.values.into_inner();
    let mut clamped = 0;
    if config.clamp_return_values {
        for v in &mut values {
            if *v < 0.0 {
                *v = 0.0;
                clamped += 1;
            }
        }
    }
    Ok(ReturnSolution {
        actions,
        values: ValueFunction(values),
        clamped,
        floored: sol.floored,
    })
}

/// Greedy actions that make progress towards `home`.
///
/// Without discounting, waiting in place is exactly as good as walking home
/// when waiting costs nothing, so plain greedy tie-breaking can pick a
/// policy that never returns. Among the (near-)optimal actions this prefers
/// those on a shortest path to `home`; states with no such path keep
/// `fallback`.
pub fn homing_actions(m: &Mdp, values: &[f64], home: usize, fallback: &[usize]) -> Vec<usize> {
    let q = mdp::q_values(m, values);
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); m.n_states()];
    for sa in 0..m.n_pairs() {
        let s = m.pair_state(sa);
        if q[sa] >= values[s] - 1e-8 * values[s].abs().max(1.0) {
            for (t, p) in m.row(sa) {
                if p > 0.0 && t != s {
                    rev[t].push(sa);
                }
            }
        }
    }
    let mut actions = fallback.to_vec();
    let mut ranked = vec![false; m.n_states()];
    ranked[home] = true;
    let mut queue = std::collections::VecDeque::from([home]);
    while let Some(t) = queue.pop_front() {
        for &sa in &rev[t] {
            let (s, a) = m.pair(sa);
            if !ranked[s] {
                ranked[s] = true;
                actions[s] = a;
                queue.push_back(s);
            }
        }
    }
    actions
}

/// Step two's constrained MDP.
pub fn exploration_cmdp(model: &BeliefModel, s0: usize, v_star: &[f64], config: &SafetyConfig) -> Result<ConstrainedMdp> {
    let mean = &model.mean;
    let g = config.gamma;
    let objective_rewards = mean.rewards().iter().zip(&model.bonus).map(|(r, b)| r + b).collect();
    let constraint_rewards = if config.unsafe_baseline {
        None
    } else {
        let sigma = config.sigma_of(model);
        Some(
            (0..mean.n_pairs())
                .map(|sa| (1.0 - g) * v_star[mean.pair_state(sa)] + g * sigma[sa])
                .collect(),
        )
    };
    let cmdp = ConstrainedMdp {
        base: mean.scaled(g),
        objective_rewards,
        constraint_rewards,
        bound: config.delta,
        initial_state: s0,
    };
    cmdp.validate()?;
    Ok(cmdp)
}

/// Time-expanded variant for a fixed recall horizon `h`: state `t * n + s` is
/// `s` at time `t`, layer `h` has a single terminating action worth `v*` in
/// the constraint. The objective is discounted by `gamma^t`.
pub fn exploration_cmdp_horizon(
    model: &BeliefModel,
    s0: usize,
    v_star: &[f64],
    config: &SafetyConfig,
    h: usize,
) -> Result<ConstrainedMdp> {
    let mean = &model.mean;
    let n = mean.n_states();
    let sigma = config.sigma_of(model);
    let mut actions = Vec::with_capacity(n * (h + 1));
    let mut rows = Vec::new();
    let mut objective = Vec::new();
    let mut constraint = Vec::new();
    for t in 0..=h {
        let disc = config.gamma.powi(t as i32);
        for s in 0..n {
            if t == h {
                actions.push(1);
                rows.push(Vec::new());
                objective.push(0.0);
                constraint.push(v_star[s]);
                continue;
            }
            actions.push(mean.n_actions(s));
            for sa in mean.pairs(s) {
                rows.push(mean.row(sa).map(|(to, p)| ((t + 1) * n + to, p)).collect());
                objective.push(disc * (mean.reward(sa) + model.bonus[sa]));
                constraint.push(sigma[sa]);
            }
        }
    }
    let base = Mdp::from_rows(&actions, rows, vec![0.0; objective.len()])?;
    let cmdp = ConstrainedMdp {
        base,
        objective_rewards: objective,
        constraint_rewards: (!config.unsafe_baseline).then_some(constraint),
        bound: config.delta,
        initial_state: s0,
    };
    cmdp.validate()?;
    Ok(cmdp)
}

/// `q[s,a] = c[s,a] + sum_t base[s,a,t] v_sigma[t]` for every pair.
pub fn q_sigma(cmdp: &ConstrainedMdp, v_sigma: &[f64]) -> Vec<f64> {
    let c = cmdp.constraint_rewards.as_deref().expect("constrained problem");
    let m = &cmdp.base;
    (0..m.n_pairs())
        .map(|sa| c[sa] + m.row(sa).map(|(t, p)| p * v_sigma[t]).sum::<f64>())
        .collect()
}

/// The supported action at `s` with the largest `q`, lowest index on ties.
pub fn derandomize(mdp: &Mdp, policy: &StochasticPolicy, q: &[f64], s: usize) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for a in policy.support(s, SUPPORT_EPS) {
        let qa = q[mdp.sa(s, a)];
        if best.is_none_or(|(_, b)| qa > b) {
            best = Some((a, qa));
        }
    }
    best.map(|(a, _)| a).ok_or(Error::EmptySupport(s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanStatus {
    Optimal,
    Unconstrained,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics {
    pub state: usize,
    pub action: usize,
    /// Objective value at the home state.
    pub v_xi: f64,
    /// Constraint value of the stochastic policy at the home state.
    pub v_sigma: Option<f64>,
    /// Safety q-value of every supported action at the home state.
    pub q_sigma: Vec<(usize, f64)>,
    /// Return-problem value at the home state.
    pub return_value: f64,
    pub status: PlanStatus,
    pub lp_iterations: usize,
    pub lp_variables: usize,
    pub planning_seconds: f64,
}

/// The policies behind one executed action: what the safety check replays.
#[derive(Debug, Clone)]
pub struct PolicyLog {
    pub home: usize,
    pub first_action: usize,
    /// Outbound policy per time step; the last entry repeats forever.
    pub outbound: Vec<StochasticPolicy>,
    pub return_actions: Vec<usize>,
    pub recall: Recall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Recall {
    /// Recall time `T` with `P(T = t) = (1 - gamma) gamma^t`.
    Geometric(f64),
    Horizon(usize),
}

impl Recall {
    fn of(config: &SafetyConfig) -> Recall {
        match config.recall_horizon {
            Some(h) => Recall::Horizon(h),
            None => Recall::Geometric(config.gamma),
        }
    }
}

/// One planning step from home state `s0`.
pub fn step<B: Belief>(belief: &B, s0: usize, config: &SafetyConfig) -> Result<(usize, PlanDiagnostics, PolicyLog)> {
    plan(&belief.model(), s0, config)
}

/// [`step`] on an already extracted belief model.
pub fn plan(model: &BeliefModel, s0: usize, config: &SafetyConfig) -> Result<(usize, PlanDiagnostics, PolicyLog)> {
    config.validate()?;
    let started = Instant::now();
    let mean = &model.mean;
    let n = mean.n_states();
    if config.unsafe_baseline {
        let cmdp = exploration_cmdp(model, s0, &vec![0.0; n], config)?;
        let m = cmdp.base.with_rewards(cmdp.objective_rewards.clone())?;
        let sol = match mdp::policy_iteration(&m, 1000) {
            Ok(sol) => sol,
            Err(_) => mdp::solve_optimal(&m, &SolveOptions::default())?,
        };
        let action = sol.actions[s0];
        let diag = PlanDiagnostics {
            state: s0,
            action,
            v_xi: sol.values[s0],
            v_sigma: None,
            q_sigma: Vec::new(),
            return_value: f64::NAN,
            status: PlanStatus::Unconstrained,
            lp_iterations: 0,
            lp_variables: 0,
            planning_seconds: started.elapsed().as_secs_f64(),
        };
        let log = PolicyLog {
            home: s0,
            first_action: action,
            outbound: vec![sol.policy],
            return_actions: vec![0; n],
            recall: Recall::of(config),
        };
        return Ok((action, diag, log));
    }

    let ret = solve_return(model, s0, config)?;
    let cmdp = match config.recall_horizon {
        Some(h) => exploration_cmdp_horizon(model, s0, &ret.values, config, h)?,
        None => exploration_cmdp(model, s0, &ret.values, config)?,
    };
    let sol = cmdp::solve_constrained(&cmdp, &config.cmdp)?;
    let v_sigma = sol.v_sigma.as_ref().expect("constrained");
    let q = q_sigma(&cmdp, v_sigma);
    let action = derandomize(&cmdp.base, &sol.policy, &q, s0)?;
    let q_supported = sol
        .policy
        .support(s0, SUPPORT_EPS)
        .into_iter()
        .map(|a| (a, q[cmdp.base.sa(s0, a)]))
        .collect();
    let outbound = match config.recall_horizon {
        None => vec![sol.policy.clone()],
        Some(h) => layer_policies(mean, &sol.policy, h),
    };
    let diag = PlanDiagnostics {
        state: s0,
        action,
        v_xi: sol.v_xi[s0],
        v_sigma: Some(v_sigma[s0]),
        q_sigma: q_supported,
        return_value: ret.values[s0],
        status: PlanStatus::Optimal,
        lp_iterations: sol.lp_stats.iterations,
        lp_variables: sol.lp_variables,
        planning_seconds: started.elapsed().as_secs_f64(),
    };
    let log = PolicyLog {
        home: s0,
        first_action: action,
        outbound,
        return_actions: ret.actions,
        recall: Recall::of(config),
    };
    Ok((action, diag, log))
}

fn layer_policies(mean: &Mdp, policy: &StochasticPolicy, h: usize) -> Vec<StochasticPolicy> {
    let n = mean.n_states();
    (0..h)
        .map(|t| {
            let mut probs = Vec::with_capacity(mean.n_pairs());
            for s in 0..n {
                probs.extend_from_slice(policy.state_probs(t * n + s));
            }
            StochasticPolicy::from_pair_probs(mean, probs).expect("same structure")
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HaltReason {
    Explored,
    Budget,
    Infeasible,
    Stuck,
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HaltReason::Explored => "explored",
            HaltReason::Budget => "budget",
            HaltReason::Infeasible => "infeasible",
            HaltReason::Stuck => "stuck",
        })
    }
}

/// One line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub v_xi: f64,
    pub v_sigma: Option<f64>,
    pub q_sigma: Vec<(usize, f64)>,
    pub planning_seconds: f64,
    pub lp_iterations: usize,
    /// Known cells or visited states after the step.
    pub revealed: usize,
    pub newly_revealed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: usize,
    pub steps: Vec<StepRecord>,
    pub halted_by: HaltReason,
    /// Largest achievable constraint value when halted as infeasible.
    pub infeasible_best: Option<f64>,
    pub initial_revealed: usize,
    pub final_revealed: usize,
}

impl Trajectory {
    pub fn planning_seconds(&self) -> f64 {
        self.steps.iter().map(|s| s.planning_seconds).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.start).chain(self.steps.iter().map(|s| s.next_state))
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for s in &self.steps {
            serde_json::to_writer(&mut out, s)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(text: &str) -> Result<Vec<StepRecord>> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| Ok(serde_json::from_str(l)?))
            .collect()
    }
}

/// What a [`run`] hook sees before each action is executed.
pub struct StepView<'a, B> {
    pub step: usize,
    pub belief: &'a B,
    pub diagnostics: &'a PlanDiagnostics,
    pub log: &'a PolicyLog,
}

/// Explores until nothing is left, the budget runs out, the constraint
/// cannot be met, or the explorer is stuck.
///
/// Stuck means either returning to a state already planned from under an
/// unchanged belief (planning is deterministic, so the explorer would cycle
/// forever) or, with a `stuck_window`, that many steps without anything
/// newly revealed.
pub fn run<E, B>(env: &mut E, belief: &mut B, config: &SafetyConfig) -> Result<Trajectory>
where
    E: Environment,
    B: Belief<Observation = E::Observation>,
{
    run_with(env, belief, config, |_| {})
}

pub fn run_with<E, B, F>(env: &mut E, belief: &mut B, config: &SafetyConfig, mut hook: F) -> Result<Trajectory>
where
    E: Environment,
    B: Belief<Observation = E::Observation>,
    F: FnMut(StepView<'_, B>),
{
    config.validate()?;
    let start = env.position();
    let obs = env.observe();
    belief.update(&obs);
    let initial_revealed = belief.known_count();
    let mut steps = Vec::new();
    let mut planned: HashSet<(u64, usize)> = HashSet::new();
    let mut last_news = 0;
    let mut infeasible_best = None;
    let halted_by = loop {
        let model = belief.model();
        if model.bonus.iter().all(|&b| b == 0.0) {
            break HaltReason::Explored;
        }
        if steps.len() >= config.step_budget {
            break HaltReason::Budget;
        }
        let s0 = env.position();
        if !planned.insert((belief.revision(), s0)) {
            break HaltReason::Stuck;
        }
        if config.stuck_window.is_some_and(|w| steps.len() - last_news >= w) {
            break HaltReason::Stuck;
        }
        let (action, diag, log) = match plan(&model, s0, config) {
            Ok(p) => p,
            Err(Error::SafetyInfeasible { best, .. }) => {
                infeasible_best = Some(best);
                break HaltReason::Infeasible;
            }
            Err(e) => return Err(e),
        };
        drop(model);
        hook(StepView {
            step: steps.len(),
            belief,
            diagnostics: &diag,
            log: &log,
        });
        let obs = env.step(action);
        let summary = belief.update(&obs);
        if summary.newly_revealed > 0 {
            last_news = steps.len() + 1;
        }
        log::debug!("step {} at {s0}: action {action}, v_xi {:.4}", steps.len(), diag.v_xi);
        steps.push(StepRecord {
            step: steps.len(),
            state: s0,
            action,
            next_state: env.position(),
            v_xi: diag.v_xi,
            v_sigma: diag.v_sigma,
            q_sigma: diag.q_sigma,
            planning_seconds: diag.planning_seconds,
            lp_iterations: diag.lp_iterations,
            revealed: belief.known_count(),
            newly_revealed: summary.newly_revealed,
        });
    };
    Ok(Trajectory {
        start,
        steps,
        halted_by,
        infeasible_best,
        initial_revealed,
        final_revealed: belief.known_count(),
    })
}

/// Which return policy backs the guarantee at recall time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReturnMode {
    /// The return policy computed when the action was chosen.
    #[default]
    Logged,
    /// The best return policy for the drawn model (an optimistic oracle).
    Fresh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SafetyCheck {
    pub n_samples: usize,
    /// Return steps allowed; `None` means `4 n + 100`.
    pub horizon: Option<usize>,
    pub seed: u64,
    pub return_mode: ReturnMode,
    pub execution: Execution,
}

impl Default for SafetyCheck {
    fn default() -> Self {
        SafetyCheck {
            n_samples: 10_000,
            horizon: None,
            seed: 0,
            return_mode: ReturnMode::Logged,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

const CHUNK: usize = 512;

/// Monte-Carlo estimate of the probability that, with a model drawn from the
/// belief and a recall at time `T`, the logged policies bring the agent home.
pub fn evaluate_safety<B: Belief + Sync>(belief: &B, log: &PolicyLog, check: &SafetyCheck) -> SafetyEstimate {
    let n = check.n_samples;
    if n == 0 {
        return SafetyEstimate {
            mean: f64::NAN,
            std_error: f64::NAN,
            n: 0,
        };
    }
    let n_states = log.return_actions.len();
    let horizon = check.horizon.unwrap_or(4 * n_states + 100);
    let chunks = n.div_ceil(CHUNK);
    let sums = par::map_range(check.execution, chunks, |c| {
        let range = c * CHUNK..((c + 1) * CHUNK).min(n);
        match check.return_mode {
            ReturnMode::Logged => logged_chunk(belief, log, check.seed, horizon, range),
            ReturnMode::Fresh => fresh_chunk(belief, log, check.seed, range),
        }
    });
    let (s, s2) = sums.into_iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let mean = s / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    SafetyEstimate {
        mean,
        std_error: (var / n as f64).sqrt(),
        n,
    }
}

fn recall_time(recall: Recall, rng: &mut rng::Rng) -> usize {
    match recall {
        Recall::Horizon(h) => h,
        Recall::Geometric(g) => {
            let k: u64 = Geometric::new(1.0 - g).expect("gamma in (0, 1)").sample(rng);
            k.min(usize::MAX as u64) as usize
        }
    }
}

fn outbound_action(log: &PolicyLog, t: usize, s: usize, rng: &mut rng::Rng) -> usize {
    if t == 0 && s == log.home {
        return log.first_action;
    }
    let layer = &log.outbound[t.min(log.outbound.len() - 1)];
    layer.sample_with(s, rng.random())
}

fn logged_chunk<B: Belief>(belief: &B, log: &PolicyLog, seed: u64, horizon: usize, range: std::ops::Range<usize>) -> (f64, f64) {
    let mut sampler = belief.sampler();
    let deterministic = sampler.deterministic();
    let n_states = log.return_actions.len();
    let mut stamp = vec![0u32; n_states];
    let mut hits = 0usize;
    for (k, i) in range.enumerate() {
        let mut rng = rng::stream(seed, i as u64);
        sampler.resample(&mut rng);
        let t_recall = recall_time(log.recall, &mut rng);
        let mut s = log.home;
        let mut alive = true;
        for t in 0..t_recall {
            let a = outbound_action(log, t, s, &mut rng);
            match sampler.step(s, a, &mut rng) {
                Some(next) => s = next,
                None => {
                    alive = false;
                    break;
                }
            }
        }
        if !alive {
            continue;
        }
        let mark = k as u32 + 1;
        let mut home = s == log.home;
        let mut steps = 0;
        while !home && steps < horizon {
            if deterministic {
                if stamp[s] == mark {
                    break;
                }
                stamp[s] = mark;
            }
            match sampler.step(s, log.return_actions[s], &mut rng) {
                Some(next) => s = next,
                None => break,
            }
            home = s == log.home;
            steps += 1;
        }
        hits += home as usize;
    }
    (hits as f64, hits as f64)
}

fn fresh_chunk<B: Belief>(belief: &B, log: &PolicyLog, seed: u64, range: std::ops::Range<usize>) -> (f64, f64) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for i in range {
        let model_seed = rng::derive_seed(seed, i as u64);
        let m = belief.sample_mdp(model_seed);
        let mut rng = rng::stream(seed ^ 0x5eed, i as u64);
        let t_recall = recall_time(log.recall, &mut rng);
        let mut s = Some(log.home);
        for t in 0..t_recall {
            let Some(cur) = s else { break };
            let a = outbound_action(log, t, cur, &mut rng);
            s = sample_next(&m, m.sa(cur, a), rng.random());
        }
        let p = match s {
            None => 0.0,
            Some(x) if x == log.home => 1.0,
            Some(x) => best_return_probability(&m, log.home)[x],
        };
        s1 += p;
        s2 += p * p;
    }
    (s1, s2)
}

fn sample_next(m: &Mdp, sa: usize, u: f64) -> Option<usize> {
    let mut acc = 0.0;
    for (t, p) in m.row(sa) {
        acc += p;
        if u < acc {
            return Some(t);
        }
    }
    None
}

/// Largest probability of reaching `home` from each state of `m`.
pub fn best_return_probability(m: &Mdp, home: usize) -> Vec<f64> {
    let rewards = (0..m.n_pairs())
        .map(|sa| if m.pair_state(sa) == home { 1.0 } else { 0.0 })
        .collect();
    let r = m.terminate_at(home).with_rewards(rewards).expect("same structure");
    let opts = SolveOptions {
        tolerance: 1e-12,
        max_iter: 1_000_000,
        ..Default::default()
    };
    mdp::solve_optimal(&r, &opts).map(|s| s.values.into_inner()).unwrap_or_else(|_| vec![0.0; m.n_states()])
}

/// Exact belief safety of a policy log under a finite belief, for checking
/// the Monte-Carlo estimate and the lower bound.
pub fn exact_safety(belief: &AtomicBelief, log: &PolicyLog) -> Result<f64> {
    let mut total = 0.0;
    for (w, m) in belief.atoms() {
        if *w == 0.0 {
            continue;
        }
        let ret = return_probability(m, log.home, &log.return_actions)?;
        let first = m.sa(log.home, log.first_action);
        let p = match log.recall {
            Recall::Geometric(gamma) => {
                if log.outbound.len() != 1 {
                    return Err(Error::InvalidModel("geometric recall needs a stationary outbound policy".into()));
                }
                let rewards = (0..m.n_pairs()).map(|sa| (1.0 - gamma) * ret[m.pair_state(sa)]).collect();
                let discounted = m.scaled(gamma).with_rewards(rewards)?;
                let v = mdp::policy_value_exact(&discounted, &log.outbound[0])?;
                (1.0 - gamma) * ret[log.home] + gamma * m.row(first).map(|(t, p)| p * v[t]).sum::<f64>()
            }
            Recall::Horizon(h) => {
                let mut d = vec![0.0; m.n_states()];
                d[log.home] = 1.0;
                for t in 0..h {
                    let mut next = vec![0.0; m.n_states()];
                    for s in (0..m.n_states()).filter(|&s| d[s] > 0.0) {
                        if t == 0 && s == log.home {
                            m.row(first).for_each(|(u, p)| next[u] += d[s] * p);
                            continue;
                        }
                        let layer = &log.outbound[t.min(log.outbound.len() - 1)];
                        for (sa, &pi) in m.pairs(s).zip(layer.state_probs(s)) {
                            m.row(sa).for_each(|(u, p)| next[u] += d[s] * pi * p);
                        }
                    }
                    d = next;
                }
                d.iter().zip(&ret).map(|(a, b)| a * b).sum()
            }
        };
        total += w * p;
    }
    Ok(total)
}

/// Probability of reaching `home` in `m` by following `actions`.
pub fn return_probability(m: &Mdp, home: usize, actions: &[usize]) -> Result<Vec<f64>> {
    let rewards = (0..m.n_pairs())
        .map(|sa| if m.pair_state(sa) == home { 1.0 } else { 0.0 })
        .collect();
    let r = m.terminate_at(home).with_rewards(rewards)?;
    let policy = StochasticPolicy::deterministic(&r, actions);
    Ok(mdp::policy_value_capped(&r, &policy, 1e-13, 10_000_000)?.into_inner())
}
