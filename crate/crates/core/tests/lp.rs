mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng as _;
use safex::cmdp::{self, build_lp, CmdpOptions, ConstrainedMdp};
use safex::lp::{self, Backend, LinearProgram, LpOptions, Pricing, RowSense};
use safex::mdp::{self, SolveOptions};
use safex::rng::{rng_from, Rng};
use safex::belief::grid::GridBeliefConfig;
use safex::belief::{Belief, GridHeightBelief};
use safex::env::{gen_random_grid, GridEnv};
use safex::explorer::{self, SafetyConfig};
use safex::lattice::Visibility;
use safex::Error;

/// Rows built around a nonnegative point so the problem is feasible, plus a
/// box row that keeps it bounded.
fn random_lp(rng: &mut Rng) -> LinearProgram {
    let n = rng.random_range(1..=8);
    let m = rng.random_range(1..=8);
    let x0: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() * 3.0 }).collect();
    let mut lp = LinearProgram::new(n);
    lp.objective = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.random_bool(0.6) {
                coeffs.push((j, rng.random_range(-2.0..2.0)));
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let slack = if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() };
        match rng.random_range(0..3) {
            0 => lp.add_row(&coeffs, RowSense::Le, act + slack),
            1 => lp.add_row(&coeffs, RowSense::Ge, act - slack),
            _ => lp.add_row(&coeffs, RowSense::Eq, act),
        };
    }
    let all: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
    lp.add_row(&all, RowSense::Le, 10.0 + x0.iter().sum::<f64>());
    lp
}

fn opts(backend: Backend, pricing: Pricing) -> LpOptions {
    LpOptions {
        backend,
        pricing,
        ..Default::default()
    }
}

/// Dual feasibility for `max c x, A x (sense) b, x >= 0` and a zero duality
/// gap certify optimality without trusting the primal pivots.
fn check_certificate(lp: &LinearProgram, sol: &lp::LpSolution) -> Result<(), TestCaseError> {
    let y = &sol.duals;
    prop_assert!(lp.max_violation(&sol.x) < 1e-7, "primal violation {}", lp.max_violation(&sol.x));
    let mut reduced = lp.objective.clone();
    for e in &lp.entries {
        reduced[e.col] -= e.value * y[e.row];
    }
    prop_assert!(reduced.iter().all(|&d| d < 1e-7), "dual infeasible: {reduced:?}");
    for (r, &yi) in lp.rows.iter().zip(y) {
        match r.sense {
            RowSense::Le => prop_assert!(yi > -1e-7),
            RowSense::Ge => prop_assert!(yi < 1e-7),
            RowSense::Eq => {}
        }
    }
    let dual: f64 = lp.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum();
    prop_assert!((dual - sol.objective).abs() < 1e-7 * (1.0 + dual.abs()), "gap {dual} vs {}", sol.objective);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn backends_and_pricing_rules_agree(seed in any::<u64>()) {
        let lp = random_lp(&mut rng_from(seed));
        let reference = lp::solve(&lp, &opts(Backend::Dense, Pricing::Bland), None).unwrap();
        check_certificate(&lp, &reference)?;
        for (b, p) in [(Backend::Dense, Pricing::Dantzig), (Backend::Sparse, Pricing::Dantzig), (Backend::Sparse, Pricing::Bland)] {
            let sol = lp::solve(&lp, &opts(b, p), None).unwrap();
            prop_assert!((sol.objective - reference.objective).abs() < 1e-7, "{b:?} {p:?}");
            check_certificate(&lp, &sol)?;
        }
    }

    #[test]
    fn lp_json_round_trip(seed in any::<u64>()) {
        let lp = random_lp(&mut rng_from(seed));
        prop_assert_eq!(LinearProgram::from_json(&lp.to_json()).unwrap(), lp);
    }

    #[test]
    fn unconstrained_cmdp_matches_value_iteration(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let mut c = random_cmdp(&mut rng, 7, 3);
        c.constraint_rewards = None;
        let sol = cmdp::solve_constrained(&c, &CmdpOptions::default()).unwrap();
        let m = c.base.with_rewards(c.objective_rewards.clone()).unwrap();
        let vi = mdp::solve_optimal(&m, &SolveOptions { tolerance: 1e-13, ..Default::default() }).unwrap();
        prop_assert!((sol.objective - vi.values[c.initial_state]).abs() < 1e-7);
    }

    #[test]
    fn constrained_optimum_is_bracketed(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let c = random_cmdp(&mut rng, 7, 3);
        let sol = cmdp::solve_constrained(&c, &CmdpOptions::default()).unwrap();
        prop_assert!(sol.occupation.flow_residual(&c.base, c.initial_state) < 1e-6);
        prop_assert!(sol.constraint_value.unwrap() >= c.bound - 1e-6);
        let m = c.base.with_rewards(c.objective_rewards.clone()).unwrap();
        let best = mdp::solve_optimal(&m, &SolveOptions { tolerance: 1e-13, ..Default::default() }).unwrap();
        prop_assert!(sol.objective <= best.values[c.initial_state] + 1e-7);
        // the extracted policy earns what the occupation measure promises
        let v = dense_value(&c.base, &sol.policy, &c.objective_rewards);
        prop_assert!((v[c.initial_state] - sol.objective).abs() < 1e-6);
        let w = dense_value(&c.base, &sol.policy, c.constraint_rewards.as_ref().unwrap());
        prop_assert!(w[c.initial_state] >= c.bound - 1e-6);
    }
}

#[test]
fn warm_and_cold_starts_agree() {
    let mut rng = rng_from(31);
    for _ in 0..200 {
        let c = random_cmdp(&mut rng, 8, 3);
        let warm = cmdp::solve_constrained(&c, &CmdpOptions::default()).unwrap();
        let cold = cmdp::solve_constrained(
            &c,
            &CmdpOptions {
                warm_start: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((warm.objective - cold.objective).abs() < 1e-7, "{} vs {}", warm.objective, cold.objective);
    }
}

/// Planning LPs along safe runs on random grids at delta = 1: the bound
/// equals the best constraint value and most occupations are zero, so nearly
/// every pivot is degenerate.
#[test]
fn degenerate_planning_lps_solve_under_every_rule() {
    let safe = SafetyConfig {
        step_budget: 25,
        ..SafetyConfig::safe(1.0)
    };
    let mut solved = 0;
    for seed in 0..6 {
        let world = gen_random_grid(20, 20, 0.1, seed).unwrap();
        let mut belief = GridHeightBelief::new(world.lattice, GridBeliefConfig::default());
        let mut env = GridEnv::new(world, Visibility::N4);
        explorer::run_with(&mut env, &mut belief, &safe, |v| {
            let model = v.belief.model();
            let s0 = v.diagnostics.state;
            let ret = explorer::solve_return(&model, s0, &safe).unwrap();
            let c = explorer::exploration_cmdp(&model, s0, &ret.values, &safe).unwrap();
            let mut objectives = Vec::new();
            for warm_start in [true, false] {
                for pricing in [Pricing::Dantzig, Pricing::Bland] {
                    let o = CmdpOptions {
                        warm_start,
                        lp: opts(Backend::Sparse, pricing),
                        ..Default::default()
                    };
                    let sol = cmdp::solve_constrained(&c, &o)
                        .unwrap_or_else(|e| panic!("seed {seed} step {}: {pricing:?} {warm_start}: {e}", v.step));
                    assert!(sol.constraint_value.unwrap() >= c.bound - 1e-6);
                    objectives.push(sol.objective);
                }
            }
            let spread = objectives.iter().copied().fold(f64::NEG_INFINITY, f64::max)
                - objectives.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(spread < 1e-7, "seed {seed} step {}: {objectives:?}", v.step);
            solved += 1;
        })
        .unwrap();
    }
    assert!(solved >= 20, "{solved}");
}

#[test]
fn cmdp_lp_matches_independent_resolve() {
    let mut rng = rng_from(8);
    for _ in 0..100 {
        let c = random_cmdp(&mut rng, 8, 3);
        let sol = cmdp::solve_constrained(&c, &CmdpOptions::default()).unwrap();
        let (program, _) = build_lp(&c);
        let other = lp::solve(&program, &opts(Backend::Dense, Pricing::Bland), None).unwrap();
        assert!((sol.objective - other.objective).abs() < 1e-6, "{} vs {}", sol.objective, other.objective);
    }
}

#[test]
fn unattainable_bound_reports_best_value() {
    let m = safex::Mdp::from_rows(&[2], vec![vec![(0, 0.5)], vec![(0, 0.5)]], vec![0.0, 0.0]).unwrap();
    let c = ConstrainedMdp {
        base: m,
        objective_rewards: vec![1.0, 0.0],
        constraint_rewards: Some(vec![0.1, 0.3]),
        bound: 0.9,
        initial_state: 0,
    };
    match cmdp::solve_constrained(&c, &CmdpOptions::default()) {
        Err(Error::SafetyInfeasible { best, .. }) => assert!((best - 0.6).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn infeasible_lp_is_reported() {
    let mut lp = LinearProgram::new(1);
    lp.add_row(&[(0, 1.0)], RowSense::Le, -1.0);
    for b in [Backend::Dense, Backend::Sparse] {
        assert!(matches!(lp::solve(&lp, &opts(b, Pricing::Dantzig), None), Err(Error::Infeasible)));
    }
}

#[test]
fn unbounded_lp_is_reported() {
    let mut lp = LinearProgram::new(2);
    lp.objective = vec![1.0, 0.0];
    lp.add_row(&[(0, 1.0), (1, -1.0)], RowSense::Le, 1.0);
    assert!(matches!(lp::solve(&lp, &LpOptions::default(), None), Err(Error::Unbounded)));
}
