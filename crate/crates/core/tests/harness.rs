use std::fs;

use proptest::prelude::*;
use safex::belief::grid::{Cell, GridBeliefConfig};
use safex::belief::terrain::TerrainConfig;
use safex::belief::{Belief, GridHeightBelief};
use safex::env::{fixtures, gen_random_grid, synthetic_crater, Environment, GridEnv, GridWorld, TerrainEnv, TerrainWorld};
use safex::explorer::{self, Mode, SafetyConfig, Trajectory};
use safex::harness::{self, BenchmarkSpec, ScenarioConfig, ScenarioMode, WorldSource};
use safex::lattice::{Lattice, Move, Visibility};
use safex::par::Execution;

fn random_scenario(seed: u64, explorer: SafetyConfig) -> ScenarioConfig {
    ScenarioConfig::grid(
        WorldSource::Random {
            width: 7,
            height: 6,
            wall_fraction: 0.2,
        },
        explorer,
        seed,
    )
}

#[test]
fn reruns_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let mut cfg = random_scenario(11, SafetyConfig::safe(0.9));
        cfg.output.metrics = Some(dir.path().join(format!("m{run}.csv")));
        cfg.output.trajectory = Some(dir.path().join(format!("t{run}.jsonl")));
        cfg.output.omit_timing = true;
        harness::run_scenario(&cfg).unwrap();
        let t = fs::read_to_string(cfg.output.trajectory.as_ref().unwrap()).unwrap();
        // planning time is wall-clock; everything else must match
        let t: Vec<serde_json::Value> = t
            .lines()
            .map(|l| {
                let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
                v.as_object_mut().unwrap().remove("planning_seconds");
                v
            })
            .collect();
        outputs.push((fs::read(cfg.output.metrics.as_ref().unwrap()).unwrap(), t));
    }
    assert_eq!(outputs[0], outputs[1]);
    assert!(!outputs[0].1.is_empty());
}

#[test]
fn config_paths_are_relative_to_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("worlds")).unwrap();
    fs::create_dir(dir.path().join("configs")).unwrap();
    let world = gen_random_grid(4, 4, 0.0, 1).unwrap();
    fs::write(dir.path().join("worlds/w.world"), world.to_text()).unwrap();
    let cfg_path = dir.path().join("configs/run.json");
    fs::write(
        &cfg_path,
        r#"{"version": 1, "mode": "grid", "world": {"file": "../worlds/w.world"}, "output": {"metrics": "m.csv"}}"#,
    )
    .unwrap();
    let cfg = ScenarioConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.world, WorldSource::File(dir.path().join("configs/../worlds/w.world")));
    assert_eq!(cfg.output.metrics, Some(dir.path().join("configs/m.csv")));
}

#[test]
fn metrics_append_keeps_one_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.csv");
    for seed in 0..3 {
        let mut cfg = random_scenario(seed, SafetyConfig::unsafe_baseline());
        cfg.output.metrics = Some(path.clone());
        harness::run_scenario(&cfg).unwrap();
    }
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("scenario,")).count(), 1);
    let rows = harness::read_metrics(&text).unwrap();
    assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2]);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.fraction_uncovered)));
}

#[test]
fn trajectory_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = random_scenario(4, SafetyConfig::safe(0.8));
    cfg.output.trajectory = Some(dir.path().join("t.jsonl"));
    let out = harness::run_scenario(&cfg).unwrap();
    let read = Trajectory::read_jsonl(&fs::read_to_string(cfg.output.trajectory.unwrap()).unwrap()).unwrap();
    assert_eq!(read, out.trajectory.steps);
}

#[test]
fn flat_world_is_fully_explored_by_both_explorers() {
    let lattice = Lattice::new(5, 4);
    let world = GridWorld::new(lattice, vec![Cell::Height(3); 20], 0).unwrap();
    for cfg in [SafetyConfig::safe(1.0), SafetyConfig::unsafe_baseline()] {
        let mut belief = GridHeightBelief::new(lattice, GridBeliefConfig::default());
        let mut env = GridEnv::new(world.clone(), Visibility::N4);
        let t = explorer::run(&mut env, &mut belief, &cfg).unwrap();
        assert_eq!(harness::fraction_uncovered(&world, &belief), 1.0, "{:?}", cfg.mode());
        assert_eq!(t.halted_by, explorer::HaltReason::Explored);
    }
}

#[test]
fn benchmark_is_order_and_execution_invariant() {
    let spec = BenchmarkSpec {
        sizes: vec![(6, 5)],
        wall_fractions: vec![0.1, 0.3],
        deltas: vec![1.0],
        seeds: (0..6).collect(),
        explorers: vec![Mode::Safe, Mode::Unsafe],
        ..Default::default()
    };
    let par = harness::run_benchmark(&BenchmarkSpec {
        execution: Execution::Parallel,
        ..spec.clone()
    });
    let seq = harness::run_benchmark(&BenchmarkSpec {
        execution: Execution::Sequential,
        ..spec
    });
    assert_eq!(par.rows, seq.rows);
    assert_eq!(par.rows.len(), 2 * 2 * 6);
    assert!(par.rows.iter().all(|r| r.error.is_empty()));
    let mut reversed = par.rows.clone();
    reversed.reverse();
    let mut a = harness::summarize(&par.rows);
    let mut b = harness::summarize(&reversed);
    let key = |s: &harness::SummaryRow| (s.explorer.clone(), (s.wall_fraction * 100.0) as i64);
    a.sort_by_key(key);
    b.sort_by_key(key);
    assert_eq!(a, b);
    for s in &a {
        assert!(s.q1 <= s.median && s.median <= s.q3);
        assert_eq!(s.runs, 6);
    }
}

#[test]
fn failing_runs_are_recorded_not_fatal() {
    let spec = BenchmarkSpec {
        sizes: vec![(4, 4)],
        wall_fractions: vec![0.1],
        deltas: vec![1.0],
        seeds: vec![0, 1],
        explorers: vec![Mode::Safe],
        base: SafetyConfig {
            gamma: 0.9,
            return_solver: safex::mdp::SolveOptions {
                max_iter: 1,
                tolerance: 1e-300,
                ..Default::default()
            },
            ..Default::default()
        },
        ..Default::default()
    };
    let t = harness::run_benchmark(&spec);
    assert_eq!(t.rows.len(), 2);
    assert!(t.rows.iter().all(|r| !r.error.is_empty() && r.halted_by == "error"));
    assert_eq!(t.summary[0].errors, 2);
}

#[test]
fn small_crater_scenario_runs() {
    let cfg = ScenarioConfig {
        mode: ScenarioMode::Terrain,
        world: WorldSource::Crater { width: 200, height: 200 },
        explorer: SafetyConfig {
            step_budget: 15,
            ..SafetyConfig::safe(0.9)
        },
        terrain: harness::TerrainSettings {
            start: (5, 5),
            ..Default::default()
        },
        ..random_scenario(3, SafetyConfig::default())
    };
    let out = harness::run_scenario(&cfg).unwrap();
    let e = out.row.entropy_reduction.unwrap();
    assert!(e > 0.0, "{e}");
    assert!(out.row.steps > 0 && out.row.steps <= 15);
    assert!((0.0..=1.0).contains(&out.row.fraction_uncovered));
}

#[test]
fn committed_crater_matches_its_generator() {
    let map = harness::load_heightmap(std::path::Path::new(fixtures::CRATER_FILE)).unwrap();
    let fresh = synthetic_crater(2000, 1000, fixtures::CRATER_SEED);
    assert_eq!((map.width, map.height), (2000, 1000));
    let lo = fresh.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fresh.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let half_level = 0.5 * (hi - lo) / 65535.0;
    let worst = map.data.iter().zip(&fresh.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst <= half_level * 1.001, "{worst} > {half_level}");
}

#[test]
fn terrain_env_is_reproducible() {
    let map = synthetic_crater(100, 100, 2);
    let world = TerrainWorld::from_heightmap(&map, 20, (2, 2), TerrainConfig::default()).unwrap();
    let mut a = TerrainEnv::new(world.clone(), 5);
    let mut b = TerrainEnv::new(world, 5);
    assert_eq!(a.observe(), b.observe());
    for m in [Move::East, Move::South, Move::Stay] {
        assert_eq!(a.step(m.index()), b.step(m.index()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn random_grids_are_well_formed(seed in any::<u64>(), w in 1usize..12, h in 1usize..12, wf in 0.0f64..0.9) {
        let world = gen_random_grid(w, h, wf, seed).unwrap();
        prop_assert_ne!(world.cells[world.start], Cell::Wall);
        prop_assert!(world.recurrent_region()[world.start]);
        let back = GridWorld::parse(&world.to_text()).unwrap();
        prop_assert_eq!(&back, &world);
        prop_assert_eq!(gen_random_grid(w, h, wf, seed).unwrap(), world);
    }

    #[test]
    fn grid_moves_follow_the_climbing_rule(seed in any::<u64>()) {
        let world = gen_random_grid(6, 6, 0.2, seed).unwrap();
        for c in 0..world.cells.len() {
            if world.cells[c] == Cell::Wall {
                continue;
            }
            for m in Move::ALL {
                let next = world.next_cell(c, m);
                let target = world.lattice.neighbor(c, m);
                let ok = match (world.cells[c], target.map(|t| world.cells[t])) {
                    (_, None) => false,
                    (Cell::Height(a), Some(Cell::Height(b))) => b <= a + 1,
                    _ => false,
                };
                prop_assert_eq!(next, if ok && m != Move::Stay { target.unwrap() } else { c });
            }
        }
    }

    #[test]
    fn observations_reveal_the_truth(seed in any::<u64>()) {
        let world = gen_random_grid(5, 5, 0.2, seed).unwrap();
        let mut env = GridEnv::new(world.clone(), Visibility::N8);
        let mut belief = GridHeightBelief::new(world.lattice, GridBeliefConfig { visibility: Visibility::N8, ..Default::default() });
        belief.update(&env.observe());
        for m in [Move::East, Move::South, Move::West] {
            belief.update(&env.step(m.index()));
        }
        for (c, cell) in belief.cells().iter().enumerate() {
            if cell.is_known() {
                prop_assert_eq!(*cell, world.cells[c]);
            }
        }
    }
}
