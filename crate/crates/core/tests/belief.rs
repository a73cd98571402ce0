mod common;

use common::*;
use proptest::prelude::*;
use safex::belief::grid::{Cell, GridBeliefConfig};
use safex::belief::terrain::{TerrainConfig, TerrainObservation};
use safex::belief::{AtomicBelief, Belief, GaussianTerrainBelief, GridHeightBelief};
use safex::harness::entropy_reduction;
use safex::lattice::{Lattice, Move, N_ACTIONS};
use safex::mdp;
use safex::rng::rng_from;
use safex::Mdp;

/// Every completion of the unknown cells as one equally weighted atom.
fn enumerate_completions(b: &GridHeightBelief) -> AtomicBelief {
    let unknown: Vec<usize> = (0..b.cells().len()).filter(|&c| b.cell(c) == Cell::Unknown).collect();
    let total = 5usize.pow(unknown.len() as u32);
    let mut atoms: Vec<(f64, Mdp)> = Vec::new();
    for k in 0..total {
        let mut cells = b.cells().to_vec();
        let mut code = k;
        for &c in &unknown {
            cells[c] = Cell::Height((code % 5) as u8 + 1);
            code /= 5;
        }
        let known = GridHeightBelief::from_cells(*b.lattice(), cells, *b.config()).unwrap();
        atoms.push((1.0 / total as f64, known.mean_mdp()));
    }
    AtomicBelief::new(atoms).unwrap()
}

#[test]
fn grid_correction_matches_enumerated_belief() {
    let lattice = Lattice::new(3, 2);
    let cells = vec![
        Cell::Height(3),
        Cell::Unknown,
        Cell::Wall,
        Cell::Height(1),
        Cell::Height(5),
        Cell::Unknown,
    ];
    let grid = GridHeightBelief::from_cells(lattice, cells, GridBeliefConfig::default()).unwrap();
    let atomic = enumerate_completions(&grid);
    let (g, a) = (grid.model(), atomic.model());
    for sa in 0..g.mean.n_pairs() {
        for t in 0..lattice.n_cells() {
            assert!((g.mean.prob(sa, t) - a.mean.prob(sa, t)).abs() < 1e-12, "pair {sa} target {t}");
        }
        assert!((g.sigma[sa] - a.sigma[sa]).abs() < 1e-12, "pair {sa}: {} vs {}", g.sigma[sa], a.sigma[sa]);
    }
}

#[test]
fn grid_success_probability_counts_height_pairs() {
    let lattice = Lattice::new(2, 1);
    let b = GridHeightBelief::new(lattice, GridBeliefConfig::default());
    // climbable (from, to) pairs among the 25 equally likely ones
    let ok = (1..=5).flat_map(|f| (1..=5).map(move |t| (f, t))).filter(|&(f, t)| t <= f + 1).count();
    assert!((b.success_probability(0, Move::East) - ok as f64 / 25.0).abs() < 1e-15);
    assert_eq!(b.success_probability(0, Move::West), 0.0);
    assert_eq!(b.success_probability(0, Move::Stay), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn corrected_mean_value_is_a_lower_bound(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let belief = random_belief(&mut rng, 6, 3, 4);
        let model = belief.model();
        let pol = random_policy(&mut rng, &model.mean);
        let exact = belief.expected_value(&pol).unwrap();
        let rewards: Vec<f64> = model.mean.rewards().iter().zip(&model.sigma).map(|(r, s)| r + s).collect();
        let bound = dense_value(&model.mean, &pol, &rewards);
        for s in 0..exact.len() {
            prop_assert!(bound[s] <= exact[s] + 1e-9, "state {s}: {} > {}", bound[s], exact[s]);
        }
    }

    #[test]
    fn policy_correction_is_exact(seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let belief = random_belief(&mut rng, 6, 3, 4);
        let model = belief.model();
        let pol = random_policy(&mut rng, &model.mean);
        let exact = belief.expected_value(&pol).unwrap();
        let corr = belief.exact_correction(&pol).unwrap();
        let rewards: Vec<f64> = model.mean.rewards().iter().zip(&corr).map(|(r, s)| r + s).collect();
        let v = dense_value(&model.mean, &pol, &rewards);
        for s in 0..exact.len() {
            prop_assert!((v[s] - exact[s]).abs() < 1e-8);
        }
        // the policy-independent correction is never larger
        let v_sigma = mdp::policy_value_exact(&model.mean.with_rewards(
            model.mean.rewards().iter().zip(&model.sigma).map(|(r, s)| r + s).collect()).unwrap(), &pol).unwrap();
        for s in 0..exact.len() {
            prop_assert!(v_sigma[s] <= v[s] + 1e-9);
        }
    }

    #[test]
    fn sigma_is_nonpositive_and_bounded(seed in any::<u64>()) {
        let belief = random_belief(&mut rng_from(seed), 6, 3, 4);
        let m = belief.model();
        for (sa, &s) in m.sigma.iter().enumerate() {
            // sum_t E[min(0, P - p)] >= -sum_t p = -row mass
            prop_assert!(s <= 0.0 && s >= -m.mean.row_sum(sa) - 1e-12);
        }
    }

    #[test]
    fn gaussian_fusion_matches_closed_form(p in 0.01f64..10.0, n in 0.01f64..10.0, mu in -5.0f64..5.0, z in -5.0f64..5.0) {
        let l = Lattice::new(1, 1);
        let mut b = GaussianTerrainBelief::new(l, vec![mu], vec![p], TerrainConfig::default()).unwrap();
        b.observe_cell(0, z, n);
        prop_assert!((b.variance()[0] - p * n / (p + n)).abs() < 1e-12);
        prop_assert!((b.mean()[0] - (mu * n + z * p) / (p + n)).abs() < 1e-10);
    }

    #[test]
    fn entropy_reduction_adds_over_update_sequences(seed in any::<u64>()) {
        use rand::Rng as _;
        let mut rng = rng_from(seed);
        let l = Lattice::new(4, 3);
        let prior = GaussianTerrainBelief::new(l, vec![0.0; 12], vec![4.0; 12], TerrainConfig::default()).unwrap();
        let obs = |rng: &mut safex::rng::Rng| TerrainObservation {
            position: rng.random_range(0..12),
            measurements: (0..5).map(|_| (rng.random_range(0..12), rng.random_range(-1.0..1.0), rng.random_range(0.1..3.0))).collect(),
        };
        let mut mid = prior.clone();
        for _ in 0..3 {
            mid.update(&obs(&mut rng));
        }
        let mut post = mid.clone();
        for _ in 0..3 {
            post.update(&obs(&mut rng));
        }
        let whole = entropy_reduction(&prior, &post).unwrap();
        let parts = entropy_reduction(&prior, &mid).unwrap() + entropy_reduction(&mid, &post).unwrap();
        prop_assert!((whole - parts).abs() < 1e-9);
        prop_assert!(whole >= 0.0);
    }
}

#[test]
fn grid_updates_never_forget() {
    let l = Lattice::new(3, 3);
    let mut b = GridHeightBelief::new(l, GridBeliefConfig::default());
    let r0 = b.revision();
    let s = b.update(&safex::belief::GridObservation {
        position: 4,
        cells: vec![(4, Cell::Height(2)), (1, Cell::Wall)],
    });
    assert_eq!(s.newly_revealed, 2);
    assert!(b.revision() > r0);
    let s = b.update(&safex::belief::GridObservation {
        position: 4,
        cells: vec![(4, Cell::Height(5)), (1, Cell::Unknown)],
    });
    assert_eq!(s.newly_revealed, 0);
    assert_eq!(b.cell(4), Cell::Height(2));
    assert_eq!(b.cell(1), Cell::Wall);
}

#[test]
fn sampled_grid_models_match_success_probabilities() {
    let l = Lattice::new(3, 1);
    let cells = vec![Cell::Height(2), Cell::Unknown, Cell::Unknown];
    let b = GridHeightBelief::from_cells(l, cells, GridBeliefConfig::default()).unwrap();
    let n = 20_000;
    let mut hits = [0usize; 2];
    for seed in 0..n {
        let m = b.sample_mdp(seed);
        hits[0] += (m.prob(Move::East.index(), 1) == 1.0) as usize;
        hits[1] += (m.prob(N_ACTIONS + Move::East.index(), 2) == 1.0) as usize;
    }
    for (k, &(s, mv)) in [(0usize, Move::East), (1, Move::East)].iter().enumerate() {
        let q = b.success_probability(s, mv);
        let f = hits[k] as f64 / n as f64;
        let se = (q * (1.0 - q) / n as f64).sqrt();
        assert!((f - q).abs() < 5.0 * se + 1e-12, "{k}: {f} vs {q}");
    }
}
