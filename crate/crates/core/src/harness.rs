//! Scenarios, benchmark sweeps and metrics files.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::belief::grid::{Cell, GridBeliefConfig};
use crate::belief::terrain::{ingest_heightmap, Heightmap, IngestOptions, TerrainConfig};
use crate::belief::{AtomicBelief, Belief, GaussianTerrainBelief, GridHeightBelief};
use crate::env::fixtures::{self, Fixture};
use crate::env::{gen_random_grid, synthetic_crater, GridEnv, GridWorld, TerrainEnv, TerrainWorld};
use crate::error::{Error, Result};
use crate::explorer::{
    self, best_return_probability, exact_safety, return_probability, HaltReason, Mode, PolicyLog, Recall, SafetyConfig,
    Trajectory,
};
use crate::lattice::{Lattice, Move, Visibility};
use crate::mdp::Mdp;
use crate::par::{self, Execution};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioMode {
    Grid,
    Terrain,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum WorldSource {
    /// A grid text file, or a heightmap (`.pgm` or CSV) in terrain mode.
    File(PathBuf),
    /// A random grid drawn with the scenario seed.
    Random {
        width: usize,
        height: usize,
        wall_fraction: f64,
    },
    /// A bundled grid fixture.
    Fixture(String),
    /// A generated crater heightmap, in pixels.
    Crater { width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainSettings {
    pub config: TerrainConfig,
    pub ingest: IngestOptions,
    /// Start cell `(x, y)`.
    pub start: (usize, usize),
    /// Steps without visiting a new cell before a run counts as stuck.
    pub stuck_window: usize,
}

impl Default for TerrainSettings {
    fn default() -> Self {
        TerrainSettings {
            config: TerrainConfig::default(),
            ingest: IngestOptions::default(),
            start: (0, 0),
            stuck_window: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputPaths {
    /// CSV file the metrics row is appended to.
    pub metrics: Option<PathBuf>,
    /// JSON-lines trajectory file (overwritten).
    pub trajectory: Option<PathBuf>,
    /// Leave the planning-time column empty so reruns are byte-identical.
    pub omit_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub version: u32,
    pub mode: ScenarioMode,
    pub world: WorldSource,
    #[serde(default)]
    pub explorer: SafetyConfig,
    #[serde(default)]
    pub grid: GridBeliefConfig,
    #[serde(default)]
    pub terrain: TerrainSettings,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn grid(world: WorldSource, explorer: SafetyConfig, seed: u64) -> Self {
        ScenarioConfig {
            version: SCHEMA_VERSION,
            mode: ScenarioMode::Grid,
            world,
            explorer,
            grid: GridBeliefConfig::default(),
            terrain: TerrainSettings::default(),
            output: OutputPaths::default(),
            seed,
        }
    }

    fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths in it are relative to the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let WorldSource::File(p) = &mut self.world {
            fix(p);
        }
        if let Some(p) = &mut self.output.metrics {
            fix(p);
        }
        if let Some(p) = &mut self.output.trajectory {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config(
                "version",
                format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.version),
            ));
        }
        self.explorer.validate()?;
        match (&self.mode, &self.world) {
            (_, WorldSource::File(p)) if !p.exists() => {
                return Err(Error::config("world.file", format!("{} does not exist", p.display())));
            }
            (ScenarioMode::Grid, WorldSource::Random { wall_fraction, width, height }) => {
                if !(0.0..1.0).contains(wall_fraction) {
                    return Err(Error::config("world.random.wall_fraction", format!("{wall_fraction} is outside [0, 1)")));
                }
                if *width == 0 || *height == 0 {
                    return Err(Error::config("world.random", "grid dimensions must be positive"));
                }
            }
            (ScenarioMode::Fixture, WorldSource::Fixture(name)) => {
                if !fixtures::NAMES.contains(&name.as_str()) {
                    return Err(Error::config("world.fixture", format!("unknown fixture {name:?}")));
                }
            }
            (ScenarioMode::Terrain, WorldSource::Crater { width, height }) => {
                let b = self.terrain.ingest.block;
                if b == 0 || width % b != 0 || height % b != 0 || *width == 0 || *height == 0 {
                    return Err(Error::config("world.crater", format!("{width}x{height} is not a multiple of {b}")));
                }
            }
            (ScenarioMode::Grid, WorldSource::File(_)) | (ScenarioMode::Terrain, WorldSource::File(_)) => {}
            (mode, world) => {
                return Err(Error::config("world", format!("{world:?} cannot be used in {mode:?} mode")));
            }
        }
        if self.terrain.stuck_window == 0 {
            return Err(Error::config("terrain.stuck_window", "must be positive"));
        }
        Ok(())
    }
}

/// One line of a metrics file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub explorer: String,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub wall_fraction: f64,
    pub delta: f64,
    pub steps: usize,
    pub fraction_uncovered: f64,
    pub entropy_reduction: Option<f64>,
    pub planning_seconds: Option<f64>,
    pub halted_by: String,
    pub error: String,
}

pub const METRICS_HEADER: [&str; 13] = [
    "scenario",
    "explorer",
    "seed",
    "width",
    "height",
    "wall_fraction",
    "delta",
    "steps",
    "fraction_uncovered",
    "entropy_reduction",
    "planning_seconds",
    "halted_by",
    "error",
];

pub fn explorer_label(cfg: &SafetyConfig) -> String {
    match cfg.mode() {
        Mode::Safe => "safe".into(),
        Mode::Naive => "naive".into(),
        Mode::Unsafe => "unsafe".into(),
    }
}

/// Appends rows to `path`, writing the header if the file is new or empty.
pub fn append_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if fresh {
        w.write_record(METRICS_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(METRICS_HEADER)?;
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn read_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize().map(|row| Ok(row?)).collect()
}

/// `sum 0.5 ln(prior_var / posterior_var)` over cells.
pub fn entropy_reduction(prior: &GaussianTerrainBelief, posterior: &GaussianTerrainBelief) -> Result<f64> {
    if prior.lattice() != posterior.lattice() {
        return Err(Error::Dimension("prior and posterior cover different lattices".into()));
    }
    Ok(prior
        .variance()
        .iter()
        .zip(posterior.variance())
        .map(|(p, q)| 0.5 * (p / q).ln())
        .sum())
}

/// Cells an explorer could see from somewhere it can reach.
pub fn observable_cells(world: &GridWorld, vis: Visibility) -> Vec<bool> {
    let mut out = vec![false; world.cells.len()];
    for (c, r) in world.reachable_from(world.start).into_iter().enumerate() {
        if r {
            for v in world.lattice.visible(c, vis) {
                out[v] = true;
            }
        }
    }
    out
}

/// Share of the observable cells that are known to `belief`.
pub fn fraction_uncovered(world: &GridWorld, belief: &GridHeightBelief) -> f64 {
    let obs = observable_cells(world, belief.config().visibility);
    let total = obs.iter().filter(|&&o| o).count();
    let known = obs
        .iter()
        .zip(belief.cells())
        .filter(|(&o, c)| o && c.is_known())
        .count();
    known as f64 / total as f64
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub row: MetricsRow,
    pub trajectory: Trajectory,
}

impl ScenarioOutcome {
    /// 0 ok, 3 halted infeasible, 4 out of budget.
    pub fn exit_code(&self) -> i32 {
        match self.trajectory.halted_by {
            HaltReason::Infeasible => 3,
            HaltReason::Budget => 4,
            HaltReason::Explored | HaltReason::Stuck => 0,
        }
    }
}

fn scenario_name(cfg: &ScenarioConfig) -> String {
    match &cfg.world {
        WorldSource::File(p) => p.file_stem().map_or("file".into(), |s| s.to_string_lossy().into_owned()),
        WorldSource::Random { width, height, .. } => format!("random{width}x{height}"),
        WorldSource::Fixture(n) => n.clone(),
        WorldSource::Crater { width, height } => format!("crater{width}x{height}"),
    }
}

fn load_grid_world(cfg: &ScenarioConfig) -> Result<(GridWorld, Option<GridHeightBelief>)> {
    match &cfg.world {
        WorldSource::File(p) => Ok((GridWorld::parse(&fs::read_to_string(p)?)?, None)),
        WorldSource::Random {
            width,
            height,
            wall_fraction,
        } => Ok((gen_random_grid(*width, *height, *wall_fraction, cfg.seed)?, None)),
        WorldSource::Fixture(name) => match fixtures::fixture(name)? {
            Fixture::Grid(f) => {
                let b = f.initial_belief(cfg.grid);
                Ok((f.world, Some(b)))
            }
            Fixture::Atomic(_) => Err(Error::config("world.fixture", format!("{name} is not a grid fixture"))),
        },
        WorldSource::Crater { .. } => Err(Error::config("world", "a crater is a terrain world")),
    }
}

/// Reads a heightmap: binary or ASCII graymap by magic number, CSV otherwise.
pub fn load_heightmap(path: &Path) -> Result<Heightmap> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        Heightmap::from_pgm(&bytes)
    } else {
        Heightmap::from_csv(&String::from_utf8_lossy(&bytes))
    }
}

fn finish(cfg: &ScenarioConfig, row: MetricsRow, trajectory: Trajectory) -> Result<ScenarioOutcome> {
    if let Some(p) = &cfg.output.trajectory {
        let file = fs::File::create(p)?;
        let mut w = std::io::BufWriter::new(file);
        trajectory.write_jsonl(&mut w)?;
        w.flush()?;
    }
    if let Some(p) = &cfg.output.metrics {
        append_metrics(p, std::slice::from_ref(&row))?;
    }
    Ok(ScenarioOutcome { row, trajectory })
}

/// Runs one exploration and writes its outputs.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let (row, trajectory) = match cfg.mode {
        ScenarioMode::Grid | ScenarioMode::Fixture => run_grid(cfg)?,
        ScenarioMode::Terrain => run_terrain(cfg)?,
    };
    finish(cfg, row, trajectory)
}

fn base_row(cfg: &ScenarioConfig, lattice: Lattice, trajectory: &Trajectory) -> MetricsRow {
    MetricsRow {
        scenario: scenario_name(cfg),
        explorer: explorer_label(&cfg.explorer),
        seed: cfg.seed,
        width: lattice.width,
        height: lattice.height,
        wall_fraction: match cfg.world {
            WorldSource::Random { wall_fraction, .. } => wall_fraction,
            _ => 0.0,
        },
        delta: if cfg.explorer.unsafe_baseline { 0.0 } else { cfg.explorer.delta },
        steps: trajectory.steps.len(),
        fraction_uncovered: 0.0,
        entropy_reduction: None,
        planning_seconds: (!cfg.output.omit_timing).then(|| trajectory.planning_seconds()),
        halted_by: trajectory.halted_by.to_string(),
        error: String::new(),
    }
}

fn run_grid(cfg: &ScenarioConfig) -> Result<(MetricsRow, Trajectory)> {
    let (world, belief) = load_grid_world(cfg)?;
    let mut belief = belief.unwrap_or_else(|| GridHeightBelief::new(world.lattice, cfg.grid));
    let mut explorer_cfg = cfg.explorer;
    if explorer_cfg.stuck_window.is_none() {
        explorer_cfg.stuck_window = Some(4 * world.lattice.perimeter());
    }
    let mut env = GridEnv::new(world.clone(), cfg.grid.visibility);
    let trajectory = explorer::run(&mut env, &mut belief, &explorer_cfg)?;
    let mut row = base_row(cfg, world.lattice, &trajectory);
    row.fraction_uncovered = fraction_uncovered(&world, &belief);
    Ok((row, trajectory))
}

/// The true world and the prior for a terrain scenario.
pub fn terrain_setup(cfg: &ScenarioConfig) -> Result<(TerrainWorld, GaussianTerrainBelief)> {
    let map = match &cfg.world {
        WorldSource::File(p) => load_heightmap(p)?,
        WorldSource::Crater { width, height } => synthetic_crater(*width, *height, cfg.seed),
        other => return Err(Error::config("world", format!("{other:?} is not a terrain source"))),
    };
    let t = &cfg.terrain;
    let world = TerrainWorld::from_heightmap(&map, t.ingest.block, t.start, t.config)?;
    let prior = ingest_heightmap(&map, &t.ingest, t.config)?;
    Ok((world, prior))
}

fn run_terrain(cfg: &ScenarioConfig) -> Result<(MetricsRow, Trajectory)> {
    let (world, prior) = terrain_setup(cfg)?;
    let mut belief = prior.clone();
    let mut explorer_cfg = cfg.explorer;
    if explorer_cfg.stuck_window.is_none() {
        explorer_cfg.stuck_window = Some(cfg.terrain.stuck_window);
    }
    let lattice = world.lattice;
    let mut env = TerrainEnv::new(world, cfg.seed);
    let trajectory = explorer::run(&mut env, &mut belief, &explorer_cfg)?;
    let mut row = base_row(cfg, lattice, &trajectory);
    row.fraction_uncovered = belief.known_count() as f64 / lattice.n_cells() as f64;
    row.entropy_reduction = Some(entropy_reduction(&prior, &belief)?);
    Ok((row, trajectory))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSpec {
    pub version: u32,
    pub sizes: Vec<(usize, usize)>,
    pub wall_fractions: Vec<f64>,
    /// Safety levels for the safe and naive explorers.
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub explorers: Vec<Mode>,
    /// Settings shared by every run; `delta` and the mode are overridden.
    pub base: SafetyConfig,
    pub grid: GridBeliefConfig,
    pub execution: Execution,
    /// Per-run metrics CSV (overwritten).
    pub metrics: Option<PathBuf>,
    /// Per-setting quartiles CSV (overwritten).
    pub summary: Option<PathBuf>,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            version: SCHEMA_VERSION,
            sizes: vec![(10, 10)],
            wall_fractions: vec![0.2],
            deltas: vec![1.0],
            seeds: (0..10).collect(),
            explorers: vec![Mode::Safe, Mode::Unsafe],
            base: SafetyConfig::default(),
            grid: GridBeliefConfig::default(),
            execution: Execution::default(),
            metrics: None,
            summary: None,
        }
    }
}

impl BenchmarkSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        let mut spec: BenchmarkSpec = serde_json::from_str(&text).map_err(|e| Error::config("config", e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.metrics, &mut spec.summary].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::config("version", format!("unsupported schema version {}", self.version)));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is needed"));
        }
        if let Some(wf) = self.wall_fractions.iter().find(|w| !(0.0..1.0).contains(*w)) {
            return Err(Error::config("wall_fractions", format!("{wf} is outside [0, 1)")));
        }
        if self.sizes.iter().any(|&(w, h)| w == 0 || h == 0) {
            return Err(Error::config("sizes", "grid dimensions must be positive"));
        }
        for cfg in self.explorer_configs() {
            cfg.validate()?;
        }
        self.base.validate()
    }

    /// Every explorer configuration in the sweep, in a fixed order.
    pub fn explorer_configs(&self) -> Vec<SafetyConfig> {
        let mut out = Vec::new();
        for &mode in &self.explorers {
            let base = SafetyConfig {
                naive_baseline: mode == Mode::Naive,
                unsafe_baseline: mode == Mode::Unsafe,
                ..self.base
            };
            match mode {
                Mode::Unsafe => out.push(base),
                Mode::Safe | Mode::Naive => out.extend(self.deltas.iter().map(|&delta| SafetyConfig { delta, ..base })),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub width: usize,
    pub height: usize,
    pub wall_fraction: f64,
    pub explorer: String,
    pub delta: f64,
    pub runs: usize,
    pub errors: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkTable {
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SummaryRow>,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Random-grid sweep over sizes, wall fractions, explorers and seeds. A
/// failing run is recorded in its row and does not stop the sweep.
pub fn run_benchmark(spec: &BenchmarkSpec) -> BenchmarkTable {
    let explorers = spec.explorer_configs();
    let mut jobs = Vec::new();
    for &(w, h) in &spec.sizes {
        for &wf in &spec.wall_fractions {
            for (e, _) in explorers.iter().enumerate() {
                for &seed in &spec.seeds {
                    jobs.push((w, h, wf, e, seed));
                }
            }
        }
    }
    let rows = par::map_slice(spec.execution, &jobs, |&(w, h, wf, e, seed)| {
        let mut cfg = ScenarioConfig::grid(
            WorldSource::Random {
                width: w,
                height: h,
                wall_fraction: wf,
            },
            explorers[e],
            seed,
        );
        cfg.grid = spec.grid;
        cfg.output.omit_timing = true;
        match run_scenario(&cfg) {
            Ok(out) => out.row,
            Err(err) => MetricsRow {
                scenario: scenario_name(&cfg),
                explorer: explorer_label(&cfg.explorer),
                seed,
                width: w,
                height: h,
                wall_fraction: wf,
                delta: cfg.explorer.delta,
                steps: 0,
                fraction_uncovered: f64::NAN,
                entropy_reduction: None,
                planning_seconds: None,
                halted_by: "error".into(),
                error: err.to_string(),
            },
        }
    });
    let summary = summarize(&rows);
    BenchmarkTable { rows, summary }
}

/// Quartiles of `fraction_uncovered` per setting, in first-seen order.
pub fn summarize(rows: &[MetricsRow]) -> Vec<SummaryRow> {
    let mut out: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for r in rows {
        let key = |s: &SummaryRow| {
            s.width == r.width
                && s.height == r.height
                && s.wall_fraction == r.wall_fraction
                && s.explorer == r.explorer
                && s.delta == r.delta
        };
        let idx = match out.iter().position(|(s, _)| key(s)) {
            Some(i) => i,
            None => {
                out.push((
                    SummaryRow {
                        width: r.width,
                        height: r.height,
                        wall_fraction: r.wall_fraction,
                        explorer: r.explorer.clone(),
                        delta: r.delta,
                        runs: 0,
                        errors: 0,
                        q1: f64::NAN,
                        median: f64::NAN,
                        q3: f64::NAN,
                    },
                    Vec::new(),
                ));
                out.len() - 1
            }
        };
        out[idx].0.runs += 1;
        if r.error.is_empty() {
            out[idx].1.push(r.fraction_uncovered);
        } else {
            out[idx].0.errors += 1;
        }
    }
    out.into_iter()
        .map(|(mut s, mut v)| {
            v.sort_by(f64::total_cmp);
            s.q1 = quantile(&v, 0.25);
            s.median = quantile(&v, 0.5);
            s.q3 = quantile(&v, 0.75);
            s
        })
        .collect()
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// A terrain prior as written by `ingest`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TerrainBeliefFile {
    pub width: usize,
    pub height: usize,
    pub config: TerrainConfig,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl From<&GaussianTerrainBelief> for TerrainBeliefFile {
    fn from(b: &GaussianTerrainBelief) -> Self {
        TerrainBeliefFile {
            width: b.lattice().width,
            height: b.lattice().height,
            config: *b.config(),
            mean: b.mean().to_vec(),
            variance: b.variance().to_vec(),
        }
    }
}

impl TryFrom<TerrainBeliefFile> for GaussianTerrainBelief {
    type Error = Error;

    fn try_from(f: TerrainBeliefFile) -> Result<Self> {
        GaussianTerrainBelief::new(Lattice::new(f.width, f.height), f.mean, f.variance, f.config)
    }
}

/// Outcome of one fixture property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureCheck {
    pub fixture: String,
    pub check: String,
    pub passed: bool,
    pub detail: String,
}

fn check(fixture: &str, name: &str, passed: bool, detail: String) -> FixtureCheck {
    FixtureCheck {
        fixture: fixture.into(),
        check: name.into(),
        passed,
        detail,
    }
}

fn atomic_log(f: &fixtures::AtomicFixture, outbound: &str, ret: &str, gamma: f64) -> Result<PolicyLog> {
    let missing = |n: &str| Error::UnknownFixture(format!("policy {n}"));
    let out = f.policy(outbound).ok_or_else(|| missing(outbound))?;
    Ok(PolicyLog {
        home: f.home,
        first_action: out.mode(f.home),
        outbound: vec![out],
        return_actions: f.actions(ret).ok_or_else(|| missing(ret))?.to_vec(),
        recall: Recall::Geometric(gamma),
    })
}

/// Every deterministic policy of `m`, by mixed-radix enumeration.
fn all_deterministic(m: &Mdp) -> Vec<Vec<usize>> {
    let counts = m.actions_per_state();
    let mut out = vec![vec![0; counts.len()]];
    for (s, &k) in counts.iter().enumerate() {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k.max(1)).map(move |a| {
                    let mut q = p.clone();
                    q[s] = a;
                    q
                })
            })
            .collect();
    }
    out
}

fn verify_atomic(gamma: f64) -> Result<Vec<FixtureCheck>> {
    let mut out = Vec::new();

    let f1 = fixtures::atomic_fixture("fig1")?;
    let safe = exact_safety(&f1.belief, &atomic_log(&f1, "safe", "return", gamma)?)?;
    let risky = exact_safety(&f1.belief, &atomic_log(&f1, "unsafe", "return", gamma)?)?;
    out.push(check("fig1", "safe policy returns", safe >= 0.8, format!("safety {safe:.6} >= 0.8")));
    out.push(check("fig1", "unsafe policy fails", risky < 0.05, format!("safety {risky:.6} < 0.05")));
    let (s, b) = (f1.home, f1.state("B").unwrap_or(1));
    let same_start = f1.actions("safe").map(|p| p[s]) == f1.actions("unsafe").map(|p| p[s]);
    let differ_at_b = f1.actions("safe").map(|p| p[b]) != f1.actions("unsafe").map(|p| p[b]);
    out.push(check(
        "fig1",
        "shared first action",
        same_start && differ_at_b,
        "both policies start with the same action and split at B".into(),
    ));

    let f2 = fixtures::atomic_fixture("fig2")?;
    let b = f2.state("B").unwrap_or(1);
    let per_atom: Vec<f64> = f2.belief.atoms().iter().map(|(_, m)| best_return_probability(m, f2.home)[b]).collect();
    out.push(check(
        "fig2",
        "each atom has a sure return",
        per_atom.iter().all(|&p| (p - 1.0).abs() < 1e-9),
        format!("best return probability from B per atom {per_atom:?}"),
    ));
    let structure = &f2.belief.atoms()[0].1;
    let mut best = 0.0f64;
    for actions in all_deterministic(structure) {
        let mut p = 0.0;
        for (w, m) in f2.belief.atoms() {
            p += w * return_probability(m, f2.home, &actions)?[b];
        }
        best = best.max(p);
    }
    out.push(check(
        "fig2",
        "no shared return policy",
        best <= 0.5 + 1e-9,
        format!("best single policy returns from B with probability {best:.9}"),
    ));

    let f3 = fixtures::atomic_fixture("fig3")?;
    let log = atomic_log(&f3, "aaa", "aaa", gamma)?;
    let mean = AtomicBelief::new(vec![(1.0, f3.belief.mean_mdp())])?;
    let under_mean = exact_safety(&mean, &log)?;
    let truth = exact_safety(&f3.belief, &log)?;
    let expected = 0.5 + 0.5 * (1.0 - gamma);
    out.push(check(
        "fig3",
        "mean model is misleading",
        (under_mean - 1.0).abs() < 1e-9 && (truth - expected).abs() < 1e-9,
        format!("mean-model safety {under_mean:.9}, belief safety {truth:.9}, expected {expected:.9}"),
    ));
    Ok(out)
}

fn grid_run(name: &str, cfg: &SafetyConfig) -> Result<(fixtures::GridFixture, Trajectory, GridHeightBelief)> {
    let f = fixtures::grid_fixture(name)?;
    let mut belief = f.initial_belief(GridBeliefConfig::default());
    let mut env = GridEnv::new(f.world.clone(), Visibility::N4);
    let mut cfg = *cfg;
    cfg.stuck_window.get_or_insert(4 * f.world.lattice.perimeter());
    let t = explorer::run(&mut env, &mut belief, &cfg)?;
    Ok((f, t, belief))
}

fn verify_grids() -> Result<Vec<FixtureCheck>> {
    let mut out = Vec::new();
    let east = Move::East.index();

    let (f, safe, safe_belief) = grid_run("fig5_row1", &SafetyConfig::safe(1.0))?;
    let pit = f.world.lattice.neighbor(f.world.start, Move::South).expect("pit below start");
    let entered = safe.states().any(|s| s == pit);
    out.push(check(
        "fig5_row1",
        "safe explorer uncovers everything",
        !entered && safe.halted_by == HaltReason::Explored && safe_belief.revealed() == f.world.cells.len(),
        format!("{} steps, {:?}, {} of {} cells revealed", safe.steps.len(), safe.halted_by, safe_belief.revealed(), f.world.cells.len()),
    ));
    let (_, risky, risky_belief) = grid_run("fig5_row1", &SafetyConfig::unsafe_baseline())?;
    let first = risky.steps.first().map(|s| s.next_state);
    out.push(check(
        "fig5_row1",
        "unsafe explorer falls in",
        first == Some(pit) && risky.halted_by == HaltReason::Stuck && 2 * risky_belief.revealed() < f.world.cells.len(),
        format!("first move to {first:?}, {:?}, {} cells revealed", risky.halted_by, risky_belief.revealed()),
    ));

    let (f, safe, final_belief) = grid_run("fig5_row2", &SafetyConfig::safe(1.0))?;
    let start = f.world.start;
    let ledge = f.world.lattice.neighbor(start, Move::East).expect("east of start");
    let mut first_belief = f.initial_belief(GridBeliefConfig::default());
    first_belief.update(&f.world.observe(start, Visibility::N4));
    let bound_at = |b: &GridHeightBelief| -> Result<f64> {
        Ok(explorer::solve_return(&b.model(), start, &SafetyConfig::safe(1.0))?.values[ledge])
    };
    let (before, after) = (bound_at(&first_belief)?, bound_at(&final_belief)?);
    let first_east = safe.steps.first().map(|s| s.action == east);
    out.push(check(
        "fig5_row2",
        "safe explorer waits for a way back",
        first_east == Some(false) && before < 1.0 - 1e-9 && after >= 1.0 - 1e-9 && safe.states().any(|s| s == ledge),
        format!("return bound from the ledge {before:.4} at the start, {after:.4} at the end"),
    ));
    let (_, risky, _) = grid_run("fig5_row2", &SafetyConfig::unsafe_baseline())?;
    let recurrent = f.world.recurrent_region();
    let leaves: Vec<bool> = risky.steps.iter().take(3).map(|s| !recurrent[s.next_state]).collect();
    out.push(check(
        "fig5_row2",
        "unsafe explorer loses its way back",
        leaves == [false, false, true] && risky.halted_by == HaltReason::Stuck,
        format!("first three moves leave the start region: {leaves:?}, {:?}", risky.halted_by),
    ));

    let f = fixtures::grid_fixture("fig5_row3")?;
    let belief = f.initial_belief(GridBeliefConfig::default());
    let lattice = f.world.lattice;
    let start = f.world.start;
    let below = lattice.neighbor(start, Move::East).expect("east of start");
    let unknown = lattice.cell(1, 2);
    let model = belief.model();
    let ret = explorer::solve_return(&model, start, &SafetyConfig::safe(1.0))?;
    let bound = ret.values[below];
    let mut ok = 0;
    for h in 1..=5u8 {
        let mut cells = f.world.cells.clone();
        cells[unknown] = Cell::Height(h);
        let w = GridWorld::new(lattice, cells, start)?;
        ok += w.reachable_from(below)[start] as usize;
    }
    let truth = ok as f64 / 5.0;
    out.push(check(
        "fig5_row3",
        "bound and truth",
        (bound - 0.6).abs() <= 0.02 && (truth - 0.8).abs() < 1e-12,
        format!("return bound {bound:.6}, true return probability {truth}"),
    ));
    let mut chosen = Vec::new();
    for delta in [1.0, 0.7, 0.6] {
        let (a, _, _) = explorer::step(&belief, start, &SafetyConfig::safe(delta))?;
        chosen.push((delta, Move::from_index(a).map_or("?", Move::name)));
    }
    let expected = [(1.0, "stay"), (0.7, "stay"), (0.6, "east")];
    out.push(check(
        "fig5_row3",
        "refuse then take the risky move",
        chosen.iter().zip(&expected).all(|(c, e)| c.1 == e.1),
        format!("{chosen:?}"),
    ));
    Ok(out)
}

/// Checks the property of every bundled fixture, recall factor `gamma` for
/// the atomic ones.
pub fn verify_fixtures(gamma: f64) -> Result<Vec<FixtureCheck>> {
    let mut out = verify_atomic(gamma)?;
    out.extend(verify_grids()?);
    Ok(out)
}
