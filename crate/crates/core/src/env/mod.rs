//! Ground-truth simulators and the counter-example fixtures.

pub mod fixtures;
pub mod grid;
pub mod terrain;

pub use grid::{gen_random_grid, grid_step, GridEnv, GridWorld};
pub use terrain::{synthetic_crater, terrain_step, TerrainEnv, TerrainWorld};

/// A world the explorer acts in. Observations feed the matching belief.
pub trait Environment {
    type Observation;

    fn position(&self) -> usize;

    /// What the agent sees at its current position without moving.
    fn observe(&mut self) -> Self::Observation;

    /// Applies action `a` and returns the observation at the new position.
    fn step(&mut self, a: usize) -> Self::Observation;
}
