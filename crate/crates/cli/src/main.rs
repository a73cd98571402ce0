//! `safex`: run safe explorers, benchmark sweeps and one-shot solves.
//!
//! Exit codes: 0 ok, 1 other failure, 2 config error, 3 halted infeasible,
//! 4 halted on the step budget.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Args, Parser, Subcommand, ValueEnum};
use safex::belief::terrain::{ingest_heightmap, IngestOptions, TerrainConfig};
use safex::cmdp::{self, CmdpOptions, ConstrainedMdp};
use safex::explorer::Mode;
use safex::harness::{
    self, BenchmarkSpec, OutputPaths, ScenarioConfig, ScenarioMode, TerrainBeliefFile, WorldSource, SCHEMA_VERSION,
};
use safex::lattice::Visibility;
use safex::lp::{self, Backend, LinearProgram, LpOptions};
use safex::par::Execution;
use safex::Error;

#[derive(Parser)]
#[command(name = "safex", version, about = "Safe exploration under model uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one exploration scenario.
    Explore(ExploreArgs),
    /// Run a sweep over random grids and summarise the fraction uncovered.
    Bench(BenchArgs),
    /// Solve a constrained MDP (or a raw LP) from a JSON file.
    Solve(SolveArgs),
    /// Turn a heightmap into a terrain belief file.
    Ingest(IngestArgs),
    /// Check the properties of the bundled fixtures.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ExploreArgs {
    /// Scenario config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Grid text file, or heightmap (.pgm / .csv) in terrain mode.
    #[arg(long, conflicts_with_all = ["fixture", "random", "crater"])]
    world: Option<PathBuf>,
    /// Bundled grid fixture.
    #[arg(long, conflicts_with_all = ["random", "crater"])]
    fixture: Option<String>,
    /// Random grid, WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_size, conflicts_with = "crater")]
    random: Option<(usize, usize)>,
    #[arg(long, requires = "random")]
    wall_fraction: Option<f64>,
    /// Synthetic crater heightmap, WIDTHxHEIGHT pixels.
    #[arg(long, value_parser = parse_size)]
    crater: Option<(usize, usize)>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Plan without the safety constraint.
    #[arg(long = "unsafe", conflicts_with = "naive")]
    unsafe_baseline: bool,
    /// Plan with the uncorrected mean model.
    #[arg(long)]
    naive: bool,
    #[arg(long)]
    step_budget: Option<usize>,
    #[arg(long)]
    stuck_window: Option<usize>,
    #[arg(long)]
    recall_horizon: Option<usize>,
    #[arg(long, value_enum)]
    visibility: Option<VisibilityArg>,
    /// Terrain start cell, X,Y.
    #[arg(long, value_parser = parse_pair)]
    start: Option<(usize, usize)>,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV file the metrics row is appended to (default: print to stdout).
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// JSON-lines trajectory output.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    /// Leave planning time out of the metrics row.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Grid,
    Terrain,
    Fixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum VisibilityArg {
    N4,
    N8,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ExplorerArg {
    Safe,
    Naive,
    Unsafe,
}

#[derive(Args)]
struct BenchArgs {
    /// Sweep config (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid sizes, e.g. 10x10,20x20.
    #[arg(long, value_parser = parse_size, value_delimiter = ',')]
    sizes: Vec<(usize, usize)>,
    #[arg(long, value_delimiter = ',')]
    wall_fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    deltas: Vec<f64>,
    /// Number of seeds, 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    explorers: Vec<ExplorerArg>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    step_budget: Option<usize>,
    /// Per-run metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
    /// Per-setting quartiles CSV (default: print to stdout).
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct SolveArgs {
    /// Constrained MDP document, or a linear program with --lp.
    input: PathBuf,
    #[arg(long)]
    lp: bool,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Override the constraint bound.
    #[arg(long)]
    bound: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Dense,
    Sparse,
    Auto,
}

#[derive(Args)]
struct IngestArgs {
    /// Heightmap, binary/ASCII PGM or CSV, one value per metre.
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    block: Option<usize>,
    #[arg(long)]
    blur_sigma: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    #[arg(long)]
    cell_size: Option<f64>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    Ok((w.trim().parse().map_err(|e| format!("{e}"))?, h.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got {s:?}"))?;
    Ok((x.trim().parse().map_err(|e| format!("{e}"))?, y.trim().parse().map_err(|e| format!("{e}"))?))
}

fn config_error(field: &str, message: impl Into<String>) -> anyhow::Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
    .into()
}

fn scenario_from_args(args: &ExploreArgs) -> anyhow::Result<ScenarioConfig> {
    let mut cfg = match &args.config {
        Some(p) => Some(ScenarioConfig::load(p)?),
        None => None,
    };
    let world = if let Some(p) = &args.world {
        Some(WorldSource::File(p.clone()))
    } else if let Some(name) = &args.fixture {
        Some(WorldSource::Fixture(name.clone()))
    } else if let Some((width, height)) = args.random {
        let wall_fraction = args.wall_fraction.unwrap_or(0.2);
        Some(WorldSource::Random { width, height, wall_fraction })
    } else {
        args.crater.map(|(width, height)| WorldSource::Crater { width, height })
    };
    let inferred = match &world {
        Some(WorldSource::Fixture(_)) => Some(ScenarioMode::Fixture),
        Some(WorldSource::Crater { .. }) => Some(ScenarioMode::Terrain),
        Some(WorldSource::Random { .. }) => Some(ScenarioMode::Grid),
        Some(WorldSource::File(p)) => match p.extension().and_then(|e| e.to_str()) {
            Some("pgm" | "csv") => Some(ScenarioMode::Terrain),
            _ => Some(ScenarioMode::Grid),
        },
        None => None,
    };
    let mode = args.mode.map(|m| match m {
        ModeArg::Grid => ScenarioMode::Grid,
        ModeArg::Terrain => ScenarioMode::Terrain,
        ModeArg::Fixture => ScenarioMode::Fixture,
    });
    if let Some(w) = world {
        let c = cfg.get_or_insert_with(|| ScenarioConfig {
            version: SCHEMA_VERSION,
            mode: ScenarioMode::Grid,
            world: w.clone(),
            explorer: Default::default(),
            grid: Default::default(),
            terrain: Default::default(),
            output: OutputPaths::default(),
            seed: 0,
        });
        c.world = w;
        c.mode = mode.or(inferred).unwrap_or(c.mode);
    } else if let (Some(c), Some(m)) = (&mut cfg, mode) {
        c.mode = m;
    }
    let Some(mut cfg) = cfg else {
        return Err(config_error("world", "give --config or one of --world, --fixture, --random, --crater"));
    };
    let e = &mut cfg.explorer;
    if let Some(d) = args.delta {
        e.delta = d;
    }
    if let Some(g) = args.gamma {
        e.gamma = g;
    }
    if args.unsafe_baseline {
        e.unsafe_baseline = true;
        e.naive_baseline = false;
    }
    if args.naive {
        e.naive_baseline = true;
        e.unsafe_baseline = false;
    }
    if let Some(b) = args.step_budget {
        e.step_budget = b;
    }
    if args.stuck_window.is_some() {
        e.stuck_window = args.stuck_window;
    }
    if args.recall_horizon.is_some() {
        e.recall_horizon = args.recall_horizon;
    }
    if let Some(v) = args.visibility {
        cfg.grid.visibility = match v {
            VisibilityArg::N4 => Visibility::N4,
            VisibilityArg::N8 => Visibility::N8,
        };
    }
    if let Some(s) = args.start {
        cfg.terrain.start = s;
    }
    if let Some(b) = args.block {
        cfg.terrain.ingest.block = b;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.metrics.is_some() {
        cfg.output.metrics = args.metrics.clone();
    }
    if args.trajectory.is_some() {
        cfg.output.trajectory = args.trajectory.clone();
    }
    cfg.output.omit_timing |= args.omit_timing;
    cfg.validate()?;
    Ok(cfg)
}

fn explore(args: &ExploreArgs) -> anyhow::Result<u8> {
    let cfg = scenario_from_args(args)?;
    let out = harness::run_scenario(&cfg)?;
    if cfg.output.metrics.is_none() {
        print!("{}", harness::metrics_to_csv(std::slice::from_ref(&out.row))?);
    }
    log::info!(
        "{} steps, halted by {}, fraction uncovered {:.4}",
        out.row.steps,
        out.row.halted_by,
        out.row.fraction_uncovered
    );
    Ok(out.exit_code() as u8)
}

fn bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let mut spec = match &args.config {
        Some(p) => BenchmarkSpec::load(p)?,
        None => BenchmarkSpec::default(),
    };
    if !args.sizes.is_empty() {
        spec.sizes = args.sizes.clone();
    }
    if !args.wall_fractions.is_empty() {
        spec.wall_fractions = args.wall_fractions.clone();
    }
    if !args.deltas.is_empty() {
        spec.deltas = args.deltas.clone();
    }
    if let Some(n) = args.seeds {
        spec.seeds = (0..n).collect();
    }
    if !args.explorers.is_empty() {
        spec.explorers = args
            .explorers
            .iter()
            .map(|e| match e {
                ExplorerArg::Safe => Mode::Safe,
                ExplorerArg::Naive => Mode::Naive,
                ExplorerArg::Unsafe => Mode::Unsafe,
            })
            .collect();
    }
    if let Some(g) = args.gamma {
        spec.base.gamma = g;
    }
    if let Some(b) = args.step_budget {
        spec.base.step_budget = b;
    }
    if args.metrics.is_some() {
        spec.metrics = args.metrics.clone();
    }
    if args.summary.is_some() {
        spec.summary = args.summary.clone();
    }
    if args.sequential {
        spec.execution = Execution::Sequential;
    }
    spec.validate()?;
    let table = harness::run_benchmark(&spec);
    if let Some(p) = &spec.metrics {
        write_file(p, &harness::metrics_to_csv(&table.rows)?)?;
    }
    let summary = harness::summary_to_csv(&table.summary)?;
    match &spec.summary {
        Some(p) => write_file(p, &summary)?,
        None => print!("{summary}"),
    }
    let failed = table.rows.iter().filter(|r| !r.error.is_empty()).count();
    if failed > 0 {
        log::warn!("{failed} of {} runs failed; see the error column", table.rows.len());
    }
    Ok(0)
}

fn write_file(path: &Path, text: &str) -> anyhow::Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn backend(arg: Option<BackendArg>) -> Backend {
    match arg {
        Some(BackendArg::Dense) => Backend::Dense,
        Some(BackendArg::Sparse) => Backend::Sparse,
        Some(BackendArg::Auto) | None => Backend::Auto,
    }
}

fn solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let lp_opts = LpOptions {
        backend: backend(args.backend),
        ..Default::default()
    };
    if args.lp {
        let program = LinearProgram::from_json(&text)?;
        let sol = match lp::solve(&program, &lp_opts, None) {
            Err(Error::Infeasible) => {
                println!("{}", serde_json::json!({"status": "infeasible"}));
                return Ok(3);
            }
            r => r?,
        };
        let out = serde_json::json!({
            "status": "optimal",
            "objective": sol.objective,
            "x": sol.x,
            "duals": sol.duals,
            "iterations": sol.stats.iterations,
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(0);
    }
    let mut problem = ConstrainedMdp::from_json(&text)?;
    if let Some(b) = args.bound {
        problem.bound = b;
    }
    let opts = CmdpOptions {
        lp: lp_opts,
        ..Default::default()
    };
    let sol = match cmdp::solve_constrained(&problem, &opts) {
        Err(Error::SafetyInfeasible { delta, best }) => {
            println!("{}", serde_json::json!({"status": "infeasible", "bound": delta, "best": best}));
            return Ok(3);
        }
        r => r?,
    };
    let policy: Vec<&[f64]> = (0..sol.policy.n_states()).map(|s| sol.policy.state_probs(s)).collect();
    let out = serde_json::json!({
        "status": "optimal",
        "objective": sol.objective,
        "constraint_value": sol.constraint_value,
        "policy": policy,
        "objective_values": sol.v_xi.0,
        "constraint_values": sol.v_sigma.as_ref().map(|v| &v.0),
        "occupation": sol.occupation.0,
        "lp_iterations": sol.lp_stats.iterations,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn ingest(args: &IngestArgs) -> anyhow::Result<u8> {
    let map = harness::load_heightmap(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mut opts = IngestOptions::default();
    if let Some(b) = args.block {
        opts.block = b;
    }
    if let Some(s) = args.blur_sigma {
        opts.blur_sigma = s;
    }
    if let Some(v) = args.v0 {
        opts.v0 = v;
    }
    let mut config = TerrainConfig::default();
    if let Some(c) = args.cell_size {
        config.cell_size = c;
    }
    if opts.block == 0 || map.width % opts.block != 0 || map.height % opts.block != 0 {
        return Err(config_error(
            "block",
            format!("{}x{} pixels is not a multiple of {}", map.width, map.height, opts.block),
        ));
    }
    let belief = ingest_heightmap(&map, &opts, config)?;
    write_file(&args.out, &serde_json::to_string(&TerrainBeliefFile::from(&belief))?)?;
    log::info!("wrote {}x{} cells", belief.lattice().width, belief.lattice().height);
    Ok(0)
}

fn verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    if !(args.gamma > 0.0 && args.gamma < 1.0) {
        return Err(config_error("gamma", format!("{} is outside (0, 1)", args.gamma)));
    }
    let checks = harness::verify_fixtures(args.gamma)?;
    let mut failed = 0;
    for c in &checks {
        println!("{} {}: {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.fixture, c.check, c.detail);
        failed += !c.passed as usize;
    }
    if failed > 0 {
        bail!("{failed} fixture checks failed");
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Explore(a) => explore(a),
        Command::Bench(a) => bench(a),
        Command::Solve(a) => solve(a),
        Command::Ingest(a) => ingest(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config { .. })));
            ExitCode::from(if config { 2 } else { 1 })
        }
    }
}
