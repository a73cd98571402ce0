//! Rectangular cell lattices shared by the grid and terrain models.
//!
//! Cells are numbered row-major, `cell = y * width + x`, with `y` growing
//! southwards. Every cell has the same five actions, `Stay` first so that
//! lowest-index tie-breaking prefers not moving.

use serde::{Deserialize, Serialize};

pub const N_ACTIONS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Move {
    Stay,
    North,
    East,
    South,
    West,
}

impl Move {
    pub const ALL: [Move; N_ACTIONS] = [Move::Stay, Move::North, Move::East, Move::South, Move::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(a: usize) -> Option<Move> {
        Move::ALL.get(a).copied()
    }

    pub fn delta(self) -> (i64, i64) {
        match self {
            Move::Stay => (0, 0),
            Move::North => (0, -1),
            Move::East => (1, 0),
            Move::South => (0, 1),
            Move::West => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Move::Stay => "stay",
            Move::North => "north",
            Move::East => "east",
            Move::South => "south",
            Move::West => "west",
        }
    }
}

/// Which cells count as "immediately surrounding" for observation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    #[default]
    N4,
    N8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    pub width: usize,
    pub height: usize,
}

impl Lattice {
    pub fn new(width: usize, height: usize) -> Self {
        Lattice { width, height }
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn xy(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    pub fn offset(&self, cell: usize, dx: i64, dy: i64) -> Option<usize> {
        let (x, y) = self.xy(cell);
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            None
        } else {
            Some(self.cell(nx as usize, ny as usize))
        }
    }

    /// Destination of `m`, or `None` off the lattice.
    pub fn neighbor(&self, cell: usize, m: Move) -> Option<usize> {
        let (dx, dy) = m.delta();
        self.offset(cell, dx, dy)
    }

    /// `cell` and its in-bounds neighbours under `vis`.
    pub fn visible(&self, cell: usize, vis: Visibility) -> Vec<usize> {
        let mut out = vec![cell];
        let offsets: &[(i64, i64)] = match vis {
            Visibility::N4 => &[(0, -1), (1, 0), (0, 1), (-1, 0)],
            Visibility::N8 => &[(0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1)],
        };
        out.extend(offsets.iter().filter_map(|&(dx, dy)| self.offset(cell, dx, dy)));
        out
    }

    pub fn perimeter(&self) -> usize {
        2 * (self.width + self.height)
    }

    /// Euclidean distance between cell centres in cell units.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let (ax, ay) = self.xy(a);
        let (bx, by) = self.xy(b);
        let dx = ax as f64 - bx as f64;
        let dy = ay as f64 - by as f64;
        (dx * dx + dy * dy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corner_and_interior_visibility() {
        let l = Lattice::new(4, 3);
        assert_eq!(l.visible(0, Visibility::N4).len(), 3);
        assert_eq!(l.visible(l.cell(1, 1), Visibility::N4).len(), 5);
        assert_eq!(l.visible(l.cell(1, 1), Visibility::N8).len(), 9);
        assert_eq!(l.neighbor(0, Move::North), None);
        assert_eq!(l.neighbor(0, Move::East), Some(1));
        assert_eq!(l.neighbor(0, Move::South), Some(4));
    }
}
