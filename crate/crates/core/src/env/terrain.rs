//! Terrain worlds built from metre-resolution heightmaps.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::Environment;
use crate::belief::terrain::{Heightmap, TerrainConfig, TerrainObservation};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Move};
use crate::rng;

/// True cell heights, taken as the raw pixel at each cell centre.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainWorld {
    pub lattice: Lattice,
    pub heights: Vec<f64>,
    pub start: usize,
    pub config: TerrainConfig,
}

impl TerrainWorld {
    pub fn new(lattice: Lattice, heights: Vec<f64>, start: usize, config: TerrainConfig) -> Result<Self> {
        if heights.len() != lattice.n_cells() {
            return Err(Error::Dimension("height count does not match the lattice".into()));
        }
        if start >= heights.len() {
            return Err(Error::InvalidModel(format!("start cell {start} outside the world")));
        }
        Ok(TerrainWorld {
            lattice,
            heights,
            start,
            config,
        })
    }

    /// Samples `map` at the centre of each `block`-pixel cell.
    pub fn from_heightmap(map: &Heightmap, block: usize, start: (usize, usize), config: TerrainConfig) -> Result<Self> {
        if block == 0 || map.width % block != 0 || map.height % block != 0 || map.width == 0 || map.height == 0 {
            return Err(Error::Dimension(format!(
                "heightmap {}x{} is not a positive multiple of {block}",
                map.width, map.height
            )));
        }
        let lattice = Lattice::new(map.width / block, map.height / block);
        if start.0 >= lattice.width || start.1 >= lattice.height {
            return Err(Error::config("start", format!("{start:?} outside a {}x{} lattice", lattice.width, lattice.height)));
        }
        let mut heights = Vec::with_capacity(lattice.n_cells());
        for cy in 0..lattice.height {
            for cx in 0..lattice.width {
                heights.push(map.at(cx * block + block / 2, cy * block + block / 2));
            }
        }
        TerrainWorld::new(lattice, heights, lattice.cell(start.0, start.1), config)
    }

    pub fn next_cell(&self, cell: usize, m: Move) -> usize {
        match self.lattice.neighbor(cell, m) {
            Some(d) if self.config.traversable(self.heights[cell], self.heights[d]) => d,
            _ => cell,
        }
    }

    /// Noisy readings of every cell within the sensing cutoff of `cell`.
    pub fn observe(&self, cell: usize, rng: &mut rng::Rng) -> TerrainObservation {
        let sensing = self.config.sensing;
        let r = (sensing.cutoff / self.config.cell_size).floor() as i64;
        let mut measurements = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let Some(c) = self.lattice.offset(cell, dx, dy) else {
                    continue;
                };
                let d = self.lattice.distance(cell, c) * self.config.cell_size;
                if d <= sensing.cutoff {
                    let var = sensing.variance(d);
                    let z: f64 = StandardNormal.sample(rng);
                    measurements.push((c, self.heights[c] + var.sqrt() * z, var));
                }
            }
        }
        TerrainObservation {
            position: cell,
            measurements,
        }
    }
}

/// One move in the true world. The next cell does not depend on `seed`; the
/// observation noise does.
pub fn terrain_step(world: &TerrainWorld, cell: usize, m: Move, seed: u64) -> (usize, TerrainObservation) {
    let next = world.next_cell(cell, m);
    let mut rng = rng::rng_from(seed);
    (next, world.observe(next, &mut rng))
}

#[derive(Debug, Clone)]
pub struct TerrainEnv {
    pub world: TerrainWorld,
    pub position: usize,
    seed: u64,
    count: u64,
}

impl TerrainEnv {
    pub fn new(world: TerrainWorld, seed: u64) -> Self {
        TerrainEnv {
            position: world.start,
            world,
            seed,
            count: 0,
        }
    }

    fn next_seed(&mut self) -> u64 {
        self.count += 1;
        rng::derive_seed(self.seed, self.count)
    }
}

impl Environment for TerrainEnv {
    type Observation = TerrainObservation;

    fn position(&self) -> usize {
        self.position
    }

    fn observe(&mut self) -> TerrainObservation {
        let mut rng = rng::rng_from(self.next_seed());
        self.world.observe(self.position, &mut rng)
    }

    fn step(&mut self, a: usize) -> TerrainObservation {
        let m = Move::from_index(a).expect("lattice action");
        let seed = self.next_seed();
        let (next, obs) = terrain_step(&self.world, self.position, m, seed);
        self.position = next;
        obs
    }
}

/// A rolling plain with one large impact crater. The crater wall is
/// descendable but far too steep to climb, and its floor is strewn with
/// boulders, so it looks attractive to an information-seeking explorer.
/// Pixels are one metre.
pub fn synthetic_crater(width: usize, height: usize, seed: u64) -> Heightmap {
    let mut rng = rng::rng_from(seed);
    let (cx, cy) = (width as f64 * 0.5, height as f64 * 0.5);
    let radius = height.min(width) as f64 * 0.15;
    let floor_r = radius * 0.65;
    let (depth, rim) = (60.0, 8.0);
    let phase: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64, y as f64);
            let r = ((fx - cx).powi(2) + (fy - cy).powi(2)).sqrt();
            // gentle undulation, steepest gradient about 2 degrees
            let mut h = 2.0 * (fx / 160.0 + phase[0]).sin() + 1.5 * (fy / 120.0 + phase[1]).sin()
                + 1.0 * ((fx + fy) / 90.0 + phase[2]).sin();
            h += if r < floor_r {
                -depth
            } else if r < radius {
                let t = (r - floor_r) / (radius - floor_r);
                -depth + (depth + rim) * t
            } else {
                // outer flank, about 2.5 degrees
                (rim - (r - radius) * 0.045).max(0.0)
            };
            data.push(h);
        }
    }
    // surface roughness: small everywhere, boulders on the crater floor
    for y in 0..height {
        for x in 0..width {
            let r = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
            let amp = if r < floor_r { 1.5 } else { 0.15 };
            let z: f64 = StandardNormal.sample(&mut rng);
            data[y * width + x] += amp * z;
        }
    }
    Heightmap::new(width, height, data).expect("sized above")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(heights: &[f64]) -> TerrainWorld {
        TerrainWorld::new(Lattice::new(heights.len(), 1), heights.to_vec(), 0, TerrainConfig::default()).unwrap()
    }

    #[test]
    fn slope_rules() {
        let w = strip(&[0.0, 0.0, 3.0, -12.0]);
        assert_eq!(w.next_cell(0, Move::East), 1); // flat
        assert_eq!(w.next_cell(1, Move::East), 1); // +3 m over 20 m is 8.5 degrees
        assert_eq!(w.next_cell(2, Move::East), 3); // -15 m over 20 m is -36.9 degrees
        assert_eq!(w.next_cell(3, Move::West), 3);
    }

    #[test]
    fn next_cell_ignores_seed_but_noise_does_not() {
        let w = strip(&[0.0; 8]);
        let (a, oa) = terrain_step(&w, 0, Move::East, 1);
        let (b, ob) = terrain_step(&w, 0, Move::East, 2);
        assert_eq!(a, b);
        assert_ne!(oa, ob);
        assert_eq!(terrain_step(&w, 0, Move::East, 1).1, oa);
        // 100 m cutoff over 20 m cells: 5 cells either side of cell 1, clipped
        assert_eq!(oa.measurements.len(), 7);
    }

    #[test]
    fn centre_pixel_is_truth() {
        let data = (0..40 * 20).map(|i| i as f64).collect();
        let map = Heightmap::new(40, 20, data).unwrap();
        let w = TerrainWorld::from_heightmap(&map, 20, (1, 0), TerrainConfig::default()).unwrap();
        assert_eq!(w.heights, vec![map.at(10, 10), map.at(30, 10)]);
        assert_eq!(w.start, 1);
    }

    #[test]
    fn crater_is_a_trap() {
        let map = synthetic_crater(400, 200, 3);
        let w = TerrainWorld::from_heightmap(&map, 20, (1, 5), TerrainConfig::default()).unwrap();
        let centre = w.lattice.cell(10, 5);
        let outside = w.lattice.cell(1, 5);
        assert!(w.heights[centre] < w.heights[outside] - 40.0);
        // nothing on the crater floor can get back out
        let mut seen = vec![false; w.heights.len()];
        let mut stack = vec![centre];
        seen[centre] = true;
        while let Some(c) = stack.pop() {
            for m in Move::ALL {
                let d = w.next_cell(c, m);
                if !seen[d] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
        assert!(!seen[outside]);
    }
}
