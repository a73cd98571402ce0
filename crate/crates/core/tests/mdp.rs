mod common;

use common::*;
use proptest::prelude::*;
use safex::mdp::{self, SolveOptions};
use safex::rng::rng_from;
use safex::{Mdp, StochasticPolicy};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn policy_values_match_dense_solve(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let m = random_mdp(&mut rng, 8, 3);
        let pol = random_policy(&mut rng, &m);
        let oracle = dense_value(&m, &pol, m.rewards());
        let exact = mdp::policy_value_exact(&m, &pol).unwrap();
        let iterative = mdp::policy_value(&m, &pol, 1e-12).unwrap();
        for s in 0..m.n_states() {
            prop_assert!((exact[s] - oracle[s]).abs() < 1e-10);
            prop_assert!((iterative[s] - oracle[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn value_iteration_finds_the_best_deterministic_policy(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let m = random_mdp(&mut rng, 5, 3);
        let best = brute_force_optimum(&m);
        let vi = mdp::solve_optimal(&m, &SolveOptions { tolerance: 1e-13, ..Default::default() }).unwrap();
        let pi = mdp::policy_iteration(&m, 1000).unwrap();
        for s in 0..m.n_states() {
            prop_assert!((vi.values[s] - best[s]).abs() < 1e-9, "vi {} vs {}", vi.values[s], best[s]);
            prop_assert!((pi.values[s] - best[s]).abs() < 1e-10);
        }
        // the greedy policy of the optimal values attains them
        let greedy = dense_value(&m, &vi.policy, m.rewards());
        for s in 0..m.n_states() {
            prop_assert!((greedy[s] - best[s]).abs() < 1e-8);
        }
    }

    #[test]
    fn values_of_leaky_models_with_unit_rewards_stay_in_unit_interval(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let m = random_mdp(&mut rng, 8, 3);
        let pol = random_policy(&mut rng, &m);
        let v = mdp::policy_value_exact(&m, &pol).unwrap();
        prop_assert!(v.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    }

    #[test]
    fn document_round_trip(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let m = random_mdp(&mut rng, 6, 3);
        let back = Mdp::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back.actions_per_state(), m.actions_per_state());
        for sa in 0..m.n_pairs() {
            prop_assert_eq!(back.reward(sa), m.reward(sa));
            for (t, p) in m.row(sa) {
                prop_assert_eq!(back.prob(sa, t), p);
            }
        }
    }

    #[test]
    fn scaling_scales_values(seed in any::<u64>(), g in 0.1f64..1.0) {
        let mut rng = rng_from(seed);
        let m = random_mdp(&mut rng, 6, 2);
        let pol = random_policy(&mut rng, &m);
        let scaled = m.scaled(g);
        prop_assert!(scaled.max_row_sum() <= g * m.max_row_sum() + 1e-15);
        let v = dense_value(&scaled, &pol, m.rewards());
        let w = mdp::policy_value_exact(&scaled, &pol).unwrap();
        for s in 0..m.n_states() {
            prop_assert!((v[s] - w[s]).abs() < 1e-10);
        }
    }
}

#[test]
fn terminated_state_has_only_its_reward() {
    let m = Mdp::from_rows(&[1, 1], vec![vec![(1, 1.0)], vec![(0, 1.0)]], vec![0.5, 0.0]).unwrap();
    let t = m.terminate_at(0);
    let pol = StochasticPolicy::deterministic(&t, &[0, 0]);
    let v = mdp::policy_value_exact(&t, &pol).unwrap();
    assert_eq!(v[0], 0.5);
    assert_eq!(v[1], 0.5);
}

#[test]
fn non_leaking_cycle_is_reported() {
    let m = Mdp::from_rows(&[1, 1], vec![vec![(1, 1.0)], vec![(0, 1.0)]], vec![0.0, 0.0]).unwrap();
    let pol = StochasticPolicy::deterministic(&m, &[0, 0]);
    assert!(mdp::policy_value_exact(&m, &pol).is_err());
}
