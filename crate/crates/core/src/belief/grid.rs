//! Grid worlds with unknown integer heights.
//!
//! Every cell holds a height in `1..=5` or a wall. Unknown cells have the
//! uniform prior over heights. A move succeeds iff the destination is on the
//! grid, not a wall, and at most one level higher than the source; otherwise
//! the agent stays put.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{bernoulli_row, bernoulli_sigma, Belief, BeliefModel, ModelSampler, UpdateSummary};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Move, Visibility, N_ACTIONS};
use crate::mdp::Mdp;
use crate::rng::{self, Rng};

pub const MIN_HEIGHT: u8 = 1;
pub const MAX_HEIGHT: u8 = 5;
const N_HEIGHTS: usize = (MAX_HEIGHT - MIN_HEIGHT + 1) as usize;
/// Largest upward step a move can take.
pub const MAX_CLIMB: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Unknown,
    Height(u8),
    Wall,
}

impl Cell {
    pub fn is_known(self) -> bool {
        self != Cell::Unknown
    }

    pub fn to_char(self) -> char {
        match self {
            Cell::Unknown => '?',
            Cell::Wall => '#',
            Cell::Height(h) => (b'0' + h) as char,
        }
    }

    pub fn from_char(c: char) -> Option<Cell> {
        match c {
            '?' => Some(Cell::Unknown),
            '#' => Some(Cell::Wall),
            '1'..='5' => Some(Cell::Height(c as u8 - b'0')),
            _ => None,
        }
    }
}

/// Whether a move between two known cells succeeds.
pub fn climbable(from: u8, to: u8) -> bool {
    to <= from + MAX_CLIMB
}

/// Parses rows of `1`-`5`, `#` and `?`. Blank lines and lines starting with
/// `%` are skipped.
pub fn parse_cells(text: &str) -> Result<(Lattice, Vec<Cell>)> {
    let mut cells = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let row: Vec<Cell> = line
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                Cell::from_char(c)
                    .ok_or_else(|| Error::Parse(format!("line {}: unexpected character {c:?}", lineno + 1)))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse(format!(
                    "line {}: {} cells, expected {w}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        cells.extend(row);
        rows += 1;
    }
    let width = width.ok_or_else(|| Error::Parse("empty grid".into()))?;
    Ok((Lattice::new(width, rows), cells))
}

pub fn format_cells(lattice: &Lattice, cells: &[Cell]) -> String {
    let mut out = String::with_capacity(cells.len() + lattice.height);
    for row in cells.chunks(lattice.width) {
        out.extend(row.iter().map(|c| c.to_char()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridBeliefConfig {
    pub visibility: Visibility,
    /// Multiplier `k` in `sigma = -k q (1 - q)`.
    pub sigma_factor: f64,
    pub bonus_scale: f64,
}

impl Default for GridBeliefConfig {
    fn default() -> Self {
        GridBeliefConfig {
            visibility: Visibility::N4,
            sigma_factor: 2.0,
            bonus_scale: 1.0,
        }
    }
}

/// Cells revealed on entering `position`, with their true contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridObservation {
    pub position: usize,
    pub cells: Vec<(usize, Cell)>,
}

#[derive(Debug, Clone)]
pub struct GridHeightBelief {
    lattice: Lattice,
    cells: Vec<Cell>,
    config: GridBeliefConfig,
    revision: u64,
}

/// Height distribution of a cell, `None` for walls.
fn height_dist(c: Cell) -> Option<[f64; N_HEIGHTS]> {
    match c {
        Cell::Wall => None,
        Cell::Unknown => Some([1.0 / N_HEIGHTS as f64; N_HEIGHTS]),
        Cell::Height(h) => {
            let mut d = [0.0; N_HEIGHTS];
            d[(h - MIN_HEIGHT) as usize] = 1.0;
            Some(d)
        }
    }
}

impl GridHeightBelief {
    /// Everything unknown.
    pub fn new(lattice: Lattice, config: GridBeliefConfig) -> Self {
        GridHeightBelief {
            cells: vec![Cell::Unknown; lattice.n_cells()],
            lattice,
            config,
            revision: 0,
        }
    }

    pub fn from_cells(lattice: Lattice, cells: Vec<Cell>, config: GridBeliefConfig) -> Result<Self> {
        if cells.len() != lattice.n_cells() {
            return Err(Error::Dimension(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                lattice.width,
                lattice.height
            )));
        }
        Ok(GridHeightBelief {
            lattice,
            cells,
            config,
            revision: 0,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, c: usize) -> Cell {
        self.cells[c]
    }

    pub fn config(&self) -> &GridBeliefConfig {
        &self.config
    }

    /// Belief probability that move `a` from `s` succeeds.
    pub fn success_probability(&self, s: usize, m: Move) -> f64 {
        if m == Move::Stay {
            return 1.0;
        }
        let Some(d) = self.lattice.neighbor(s, m) else {
            return 0.0;
        };
        let (Some(ps), Some(pd)) = (height_dist(self.cells[s]), height_dist(self.cells[d])) else {
            return 0.0;
        };
        let mut q = 0.0;
        for (i, &wi) in ps.iter().enumerate() {
            for (j, &wj) in pd.iter().enumerate() {
                if wi > 0.0 && wj > 0.0 && climbable(i as u8, j as u8) {
                    q += wi * wj;
                }
            }
        }
        q
    }

    fn success_table(&self) -> Vec<f64> {
        let n = self.lattice.n_cells();
        let mut q = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for m in Move::ALL {
                q.push(self.success_probability(s, m));
            }
        }
        q
    }

    pub fn sigma_correction(&self) -> Vec<f64> {
        self.success_table()
            .into_iter()
            .map(|q| bernoulli_sigma(q, self.config.sigma_factor))
            .collect()
    }

    /// `bonus_scale` times the number of unknown cells that entering the
    /// destination would reveal; zero for `Stay` and for moves that cannot
    /// succeed.
    pub fn adapted_rmax_bonus(&self) -> Vec<f64> {
        let q = self.success_table();
        let n = self.lattice.n_cells();
        let mut out = vec![0.0; n * N_ACTIONS];
        for s in 0..n {
            for m in Move::ALL.into_iter().skip(1) {
                let sa = s * N_ACTIONS + m.index();
                if q[sa] <= 0.0 {
                    continue;
                }
                let d = self.lattice.neighbor(s, m).expect("q > 0 implies in bounds");
                let unknown = self
                    .lattice
                    .visible(d, self.config.visibility)
                    .into_iter()
                    .filter(|&c| self.cells[c] == Cell::Unknown)
                    .count();
                out[sa] = self.config.bonus_scale * unknown as f64;
            }
        }
        out
    }

    pub fn mean_mdp(&self) -> Mdp {
        let q = self.success_table();
        let n = self.lattice.n_cells();
        let mut rows = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for m in Move::ALL {
                let d = self.lattice.neighbor(s, m).unwrap_or(s);
                rows.push(bernoulli_row(s, d, q[s * N_ACTIONS + m.index()]));
            }
        }
        Mdp::from_rows(&vec![N_ACTIONS; n], rows, vec![0.0; n * N_ACTIONS]).expect("well-formed grid")
    }

    pub fn revealed(&self) -> usize {
        self.cells.iter().filter(|c| c.is_known()).count()
    }
}

impl Belief for GridHeightBelief {
    type Observation = GridObservation;

    fn model(&self) -> BeliefModel {
        let q = self.success_table();
        let sigma = q.iter().map(|&q| bernoulli_sigma(q, self.config.sigma_factor)).collect();
        BeliefModel {
            mean: self.mean_mdp(),
            sigma,
            bonus: self.adapted_rmax_bonus(),
        }
    }

    /// Reveals the observed cells. Known cells never revert.
    fn update(&mut self, obs: &GridObservation) -> UpdateSummary {
        let mut newly = 0;
        for &(c, content) in &obs.cells {
            if self.cells[c] == Cell::Unknown && content.is_known() {
                self.cells[c] = content;
                newly += 1;
            }
        }
        if newly > 0 {
            self.revision += 1;
        }
        UpdateSummary {
            newly_revealed: newly,
            changed: newly > 0,
        }
    }

    fn revision(&self) -> u64 {
        self.revision
    }

    fn sampler(&self) -> Box<dyn ModelSampler + Send + '_> {
        Box::new(GridSampler {
            belief: self,
            drawn: vec![0; self.cells.len()],
            stamp: vec![0; self.cells.len()],
            generation: 0,
        })
    }

    fn sample_mdp(&self, seed: u64) -> Mdp {
        let mut rng = rng::rng_from(seed);
        let cells: Vec<Cell> = self
            .cells
            .iter()
            .map(|&c| match c {
                Cell::Unknown => Cell::Height(rng.random_range(MIN_HEIGHT..=MAX_HEIGHT)),
                c => c,
            })
            .collect();
        GridHeightBelief {
            lattice: self.lattice,
            cells,
            config: self.config,
            revision: 0,
        }
        .mean_mdp()
    }

    fn known_count(&self) -> usize {
        self.revealed()
    }
}

/// Draws unknown heights on first use within each model draw.
struct GridSampler<'a> {
    belief: &'a GridHeightBelief,
    drawn: Vec<u8>,
    stamp: Vec<u32>,
    generation: u32,
}

impl GridSampler<'_> {
    #[inline]
    fn content(&mut self, c: usize, rng: &mut Rng) -> Option<u8> {
        match self.belief.cells[c] {
            Cell::Height(h) => Some(h),
            Cell::Wall => None,
            Cell::Unknown => {
                if self.stamp[c] != self.generation {
                    self.stamp[c] = self.generation;
                    self.drawn[c] = rng.random_range(MIN_HEIGHT..=MAX_HEIGHT);
                }
                Some(self.drawn[c])
            }
        }
    }
}

impl ModelSampler for GridSampler<'_> {
    fn resample(&mut self, _rng: &mut Rng) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = u32::MAX);
            self.generation = 1;
        }
    }

    fn step(&mut self, s: usize, a: usize, rng: &mut Rng) -> Option<usize> {
        let m = Move::from_index(a).expect("grid action");
        let Some(d) = self.belief.lattice.neighbor(s, m) else {
            return Some(s);
        };
        if d == s {
            return Some(s);
        }
        match (self.content(s, rng), self.content(d, rng)) {
            (Some(hs), Some(hd)) if climbable(hs, hd) => Some(d),
            _ => Some(s),
        }
    }

    fn deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn belief(text: &str) -> GridHeightBelief {
        let (l, cells) = parse_cells(text).unwrap();
        GridHeightBelief::from_cells(l, cells, GridBeliefConfig::default()).unwrap()
    }

    #[test]
    fn success_probabilities() {
        let b = belief("51\n1?\n#?\n");
        let l = *b.lattice();
        // downhill always allowed
        assert_eq!(b.success_probability(l.cell(0, 0), Move::East), 1.0);
        // height 1 into unknown: heights {1, 2} of five
        assert_abs_diff_eq!(b.success_probability(l.cell(0, 1), Move::East), 0.4);
        assert_abs_diff_eq!(b.sigma_correction()[l.cell(0, 1) * N_ACTIONS + 2], -0.48, epsilon = 1e-15);
        // into a wall
        assert_eq!(b.success_probability(l.cell(0, 1), Move::South), 0.0);
        assert_eq!(b.sigma_correction()[l.cell(0, 1) * N_ACTIONS + 3], 0.0);
        // off grid
        assert_eq!(b.success_probability(0, Move::North), 0.0);
        // both unknown: 19 of 25 height pairs are climbable
        assert_abs_diff_eq!(b.success_probability(l.cell(1, 1), Move::South), 19.0 / 25.0, epsilon = 1e-15);
    }

    #[test]
    fn bonus_counts_revealed_cells() {
        let b = GridHeightBelief::new(Lattice::new(5, 5), GridBeliefConfig::default());
        let bonus = b.adapted_rmax_bonus();
        // from (2,1) south into the interior cell (2,2): itself plus 4 neighbours
        assert_eq!(bonus[b.lattice().cell(2, 1) * N_ACTIONS + Move::South.index()], 5.0);
        assert_eq!(bonus[b.lattice().cell(2, 1) * N_ACTIONS + Move::Stay.index()], 0.0);
        let known = belief("111\n111\n111\n");
        assert!(known.adapted_rmax_bonus().iter().all(|&x| x == 0.0));
        assert!(known.fully_explored());
    }

    #[test]
    fn updates_are_monotone_and_idempotent() {
        let mut b = GridHeightBelief::new(Lattice::new(3, 3), GridBeliefConfig::default());
        let obs = GridObservation {
            position: 0,
            cells: vec![(0, Cell::Height(2)), (1, Cell::Wall), (3, Cell::Height(4))],
        };
        let first = b.update(&obs);
        assert_eq!(first.newly_revealed, 3);
        let rev = b.revision();
        let again = b.update(&obs);
        assert_eq!(again.newly_revealed, 0);
        assert_eq!(b.revision(), rev);
        assert_eq!(b.revealed(), 3);
    }

    #[test]
    fn text_round_trip() {
        let text = "12#\n?45\n";
        let (l, cells) = parse_cells(text).unwrap();
        assert_eq!(format_cells(&l, &cells), text);
        assert!(parse_cells("12\n3\n").is_err());
        assert!(parse_cells("1x\n").is_err());
    }

    #[test]
    fn sampled_models_respect_known_cells() {
        let b = belief("1#\n??\n");
        for seed in 0..20 {
            let m = b.sample_mdp(seed);
            // known wall East of the known cell: never enterable
            assert_eq!(m.prob(m.sa(0, Move::East.index()), 1), 0.0);
            for sa in 0..m.n_pairs() {
                assert_eq!(m.row_probs(sa), &[1.0]);
            }
        }
    }
}
