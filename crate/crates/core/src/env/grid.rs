//! Grid worlds with known true heights.

use rand::Rng as _;

use super::Environment;
use crate::belief::grid::{climbable, format_cells, parse_cells, GridObservation, MAX_HEIGHT, MIN_HEIGHT};
use crate::belief::Cell;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Move, Visibility};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridWorld {
    pub lattice: Lattice,
    pub cells: Vec<Cell>,
    pub start: usize,
}

impl GridWorld {
    pub fn new(lattice: Lattice, cells: Vec<Cell>, start: usize) -> Result<Self> {
        if cells.len() != lattice.n_cells() {
            return Err(Error::Dimension("cell count does not match the grid".into()));
        }
        if cells.contains(&Cell::Unknown) {
            return Err(Error::InvalidModel("a world cannot contain unknown cells".into()));
        }
        if start >= cells.len() || cells[start] == Cell::Wall {
            return Err(Error::InvalidModel("start cell must be an open cell".into()));
        }
        Ok(GridWorld { lattice, cells, start })
    }

    /// First open cell in row-major order from (0, 0).
    pub fn default_start(cells: &[Cell]) -> Option<usize> {
        cells.iter().position(|&c| c != Cell::Wall)
    }

    /// Grid text with an optional `% start <x> <y>` line.
    pub fn parse(text: &str) -> Result<Self> {
        let (lattice, cells) = parse_cells(text)?;
        let start = match parse_start(text)? {
            Some((x, y)) if x < lattice.width && y < lattice.height => lattice.cell(x, y),
            Some((x, y)) => return Err(Error::Parse(format!("start ({x}, {y}) outside the grid"))),
            None => Self::default_start(&cells).ok_or_else(|| Error::InvalidModel("grid has no open cell".into()))?,
        };
        GridWorld::new(lattice, cells, start)
    }

    pub fn to_text(&self) -> String {
        let (x, y) = self.lattice.xy(self.start);
        format!("% start {x} {y}\n{}", format_cells(&self.lattice, &self.cells))
    }

    /// Next cell after attempting `m` from `cell`.
    pub fn next_cell(&self, cell: usize, m: Move) -> usize {
        let Some(d) = self.lattice.neighbor(cell, m) else {
            return cell;
        };
        match (self.cells[cell], self.cells[d]) {
            (Cell::Height(hs), Cell::Height(hd)) if climbable(hs, hd) => d,
            _ => cell,
        }
    }

    pub fn observe(&self, cell: usize, vis: Visibility) -> GridObservation {
        GridObservation {
            position: cell,
            cells: self.lattice.visible(cell, vis).into_iter().map(|c| (c, self.cells[c])).collect(),
        }
    }

    /// Cells reachable from `from` under the true dynamics.
    pub fn reachable_from(&self, from: usize) -> Vec<bool> {
        let mut seen = vec![false; self.cells.len()];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(c) = stack.pop() {
            for m in Move::ALL {
                let d = self.next_cell(c, m);
                if !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
        seen
    }

    /// Cells that can both be reached from the start and return to it.
    pub fn recurrent_region(&self) -> Vec<bool> {
        let fwd = self.reachable_from(self.start);
        (0..self.cells.len())
            .map(|c| fwd[c] && self.reachable_from(c)[self.start])
            .collect()
    }

    /// Cells visible from some cell of the start's recurrent region: what a
    /// perfectly safe explorer can hope to uncover.
    pub fn safely_observable(&self, vis: Visibility) -> Vec<bool> {
        let mut out = vec![false; self.cells.len()];
        for (c, r) in self.recurrent_region().into_iter().enumerate() {
            if r {
                for v in self.lattice.visible(c, vis) {
                    out[v] = true;
                }
            }
        }
        out
    }

    pub fn wall_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == Cell::Wall).count()
    }
}

pub fn parse_start(text: &str) -> Result<Option<(usize, usize)>> {
    for line in text.lines() {
        let rest = line.trim().strip_prefix('%').map(str::trim);
        if let Some(args) = rest.and_then(|r| r.strip_prefix("start")) {
            let nums: Vec<usize> = args
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad start line {line:?}"))))
                .collect::<Result<_>>()?;
            if nums.len() != 2 {
                return Err(Error::Parse(format!("bad start line {line:?}")));
            }
            return Ok(Some((nums[0], nums[1])));
        }
    }
    Ok(None)
}

/// Independent cells: a wall with probability `wall_fraction`, otherwise a
/// uniform height. The start is the first open cell in row-major order; an
/// all-wall draw gets cell 0 reopened.
pub fn gen_random_grid(width: usize, height: usize, wall_fraction: f64, seed: u64) -> Result<GridWorld> {
    if !(0.0..1.0).contains(&wall_fraction) {
        return Err(Error::config("wall_fraction", format!("{wall_fraction} is outside [0, 1)")));
    }
    if width == 0 || height == 0 {
        return Err(Error::config("size", "grid dimensions must be positive"));
    }
    let mut rng = rng::rng_from(seed);
    let lattice = Lattice::new(width, height);
    let mut cells: Vec<Cell> = (0..lattice.n_cells())
        .map(|_| {
            if rng.random::<f64>() < wall_fraction {
                Cell::Wall
            } else {
                Cell::Height(rng.random_range(MIN_HEIGHT..=MAX_HEIGHT))
            }
        })
        .collect();
    let start = match GridWorld::default_start(&cells) {
        Some(s) => s,
        None => {
            cells[0] = Cell::Height(rng.random_range(MIN_HEIGHT..=MAX_HEIGHT));
            0
        }
    };
    GridWorld::new(lattice, cells, start)
}

/// One move in the true world and the resulting observation.
pub fn grid_step(world: &GridWorld, cell: usize, m: Move, vis: Visibility) -> (usize, GridObservation) {
    let next = world.next_cell(cell, m);
    (next, world.observe(next, vis))
}

#[derive(Debug, Clone)]
pub struct GridEnv {
    pub world: GridWorld,
    pub position: usize,
    pub visibility: Visibility,
}

impl GridEnv {
    pub fn new(world: GridWorld, visibility: Visibility) -> Self {
        GridEnv {
            position: world.start,
            world,
            visibility,
        }
    }
}

impl Environment for GridEnv {
    type Observation = GridObservation;

    fn position(&self) -> usize {
        self.position
    }

    fn observe(&mut self) -> GridObservation {
        self.world.observe(self.position, self.visibility)
    }

    fn step(&mut self, a: usize) -> GridObservation {
        let m = Move::from_index(a).expect("grid action");
        let (next, obs) = grid_step(&self.world, self.position, m, self.visibility);
        self.position = next;
        obs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(text: &str) -> GridWorld {
        GridWorld::parse(text).unwrap()
    }

    #[test]
    fn climbing_rule() {
        let w = world("234#\n");
        assert_eq!(w.next_cell(0, Move::East), 1); // 2 -> 3
        assert_eq!(w.next_cell(1, Move::East), 2); // 3 -> 4
        assert_eq!(w.next_cell(2, Move::East), 2); // into a wall
        let w = world("24\n");
        assert_eq!(w.next_cell(0, Move::East), 0); // 2 -> 4 too steep
        assert_eq!(w.next_cell(1, Move::West), 0); // downhill always fine
        assert_eq!(w.next_cell(0, Move::West), 0); // off the grid
    }

    #[test]
    fn start_directive_and_default() {
        let w = world("% start 1 0\n#12\n");
        assert_eq!(w.start, 1);
        assert_eq!(world("#12\n").start, 1);
        assert_eq!(GridWorld::parse(&w.to_text()).unwrap(), w);
        assert!(GridWorld::parse("% start 0 0\n#1\n").is_err());
    }

    #[test]
    fn random_grids_are_reproducible() {
        let a = gen_random_grid(10, 10, 0.3, 42).unwrap();
        let b = gen_random_grid(10, 10, 0.3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(gen_random_grid(10, 10, 0.0, 1).unwrap().wall_count(), 0);
        assert!(gen_random_grid(3, 3, 1.0, 1).is_err());
    }

    #[test]
    fn observation_covers_neighbourhood() {
        let w = world("111\n111\n111\n");
        let (next, obs) = grid_step(&w, 0, Move::East, Visibility::N4);
        assert_eq!(next, 1);
        assert_eq!(obs.cells.len(), 4);
        let (_, obs) = grid_step(&w, 1, Move::South, Visibility::N4);
        assert_eq!(obs.cells.len(), 5);
    }

    #[test]
    fn recurrent_region_excludes_pits() {
        // the 1 is reachable from the 3s but cannot be left
        let w = world("% start 0 0\n331\n");
        assert_eq!(w.reachable_from(0), vec![true, true, true]);
        assert_eq!(w.recurrent_region(), vec![true, true, false]);
    }
}
