//! Terrain beliefs: independent Gaussian cell heights, remote sensing with
//! distance-dependent noise, and slope-limited moves.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{bernoulli_row, bernoulli_sigma, Belief, BeliefModel, ModelSampler, UpdateSummary};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, Move, N_ACTIONS};
use crate::mdp::Mdp;
use crate::rng::{self, Rng};

/// Measurement noise `v(d) = scale * (d + offset)^2`, with no measurements
/// beyond `cutoff` (all in metres).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingModel {
    pub scale: f64,
    pub offset: f64,
    pub cutoff: f64,
}

impl Default for SensingModel {
    fn default() -> Self {
        SensingModel {
            scale: 1e-6,
            offset: 1.0,
            cutoff: 100.0,
        }
    }
}

impl SensingModel {
    pub fn variance(&self, distance: f64) -> f64 {
        self.scale * (distance + self.offset).powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TerrainConfig {
    /// Edge length of a cell in metres.
    pub cell_size: f64,
    pub sensing: SensingModel,
    /// Steepest traversable ascent, degrees.
    pub max_ascent_deg: f64,
    /// Steepest traversable descent, degrees.
    pub max_descent_deg: f64,
    /// Cells with a smaller height standard deviation count as known and
    /// moves between two known cells are decided on the means.
    pub known_std: f64,
    pub sigma_factor: f64,
    pub bonus_scale: f64,
}

impl Default for TerrainConfig {
    fn default() -> Self {
        TerrainConfig {
            cell_size: 20.0,
            sensing: SensingModel::default(),
            max_ascent_deg: 5.0,
            max_descent_deg: 45.0,
            known_std: 0.05,
            sigma_factor: 2.0,
            bonus_scale: 1.0,
        }
    }
}

impl TerrainConfig {
    /// Allowed height change `[lo, hi]` across one cell.
    pub fn rise_window(&self) -> (f64, f64) {
        (
            -self.cell_size * self.max_descent_deg.to_radians().tan(),
            self.cell_size * self.max_ascent_deg.to_radians().tan(),
        )
    }

    pub fn traversable(&self, from: f64, to: f64) -> bool {
        let (lo, hi) = self.rise_window();
        let d = to - from;
        d >= lo && d <= hi
    }
}

/// Noisy height readings taken from `position`: `(cell, value, variance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainObservation {
    pub position: usize,
    pub measurements: Vec<(usize, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct GaussianTerrainBelief {
    lattice: Lattice,
    mean: Vec<f64>,
    var: Vec<f64>,
    visited: Vec<bool>,
    config: TerrainConfig,
    revision: u64,
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

impl GaussianTerrainBelief {
    pub fn new(lattice: Lattice, mean: Vec<f64>, var: Vec<f64>, config: TerrainConfig) -> Result<Self> {
        let n = lattice.n_cells();
        if mean.len() != n || var.len() != n {
            return Err(Error::Dimension(format!(
                "{} means and {} variances for {n} cells",
                mean.len(),
                var.len()
            )));
        }
        if var.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidModel("height variances must be positive".into()));
        }
        Ok(GaussianTerrainBelief {
            lattice,
            mean,
            var,
            visited: vec![false; n],
            config,
            revision: 0,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variance(&self) -> &[f64] {
        &self.var
    }

    pub fn config(&self) -> &TerrainConfig {
        &self.config
    }

    pub fn visited(&self) -> &[bool] {
        &self.visited
    }

    /// Sum of `0.5 ln(2 pi e var)` over cells.
    pub fn entropy(&self) -> f64 {
        let c = 2.0 * std::f64::consts::PI * std::f64::consts::E;
        self.var.iter().map(|v| 0.5 * (c * v).ln()).sum()
    }

    /// Distance in metres between two cell centres.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        self.lattice.distance(a, b) * self.config.cell_size
    }

    /// Cells within the sensing cutoff of `centre`, with their distances.
    pub fn sensed_cells(&self, centre: usize) -> Vec<(usize, f64)> {
        let r = (self.config.sensing.cutoff / self.config.cell_size).floor() as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if let Some(c) = self.lattice.offset(centre, dx, dy) {
                    let d = self.distance(centre, c);
                    if d <= self.config.sensing.cutoff {
                        out.push((c, d));
                    }
                }
            }
        }
        out
    }

    /// Belief probability that move `m` from `s` respects the slope window.
    pub fn success_probability(&self, s: usize, m: Move) -> f64 {
        if m == Move::Stay {
            return 1.0;
        }
        let Some(d) = self.lattice.neighbor(s, m) else {
            return 0.0;
        };
        let known = self.config.known_std.powi(2);
        if self.var[s] < known && self.var[d] < known {
            return if self.config.traversable(self.mean[s], self.mean[d]) {
                1.0
            } else {
                0.0
            };
        }
        let (lo, hi) = self.config.rise_window();
        let mu = self.mean[d] - self.mean[s];
        let sd = (self.var[s] + self.var[d]).sqrt();
        (normal_cdf((hi - mu) / sd) - normal_cdf((lo - mu) / sd)).clamp(0.0, 1.0)
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

    /// Information gained by standing at `c`: `sum var / v(d)` over sensed cells.
    pub fn information_at(&self, c: usize) -> f64 {
        self.sensed_cells(c)
            .into_iter()
            .map(|(t, d)| self.var[t] / self.config.sensing.variance(d))
            .sum::<f64>()
            * self.config.bonus_scale
    }

    /// Bonus of each move: the information at its destination, or zero if the
    /// move cannot succeed.
    pub fn entropy_bonus(&self) -> Vec<f64> {
        let q = self.success_table();
        self.bonus_from(&q)
    }

    fn bonus_from(&self, q: &[f64]) -> Vec<f64> {
        let n = self.lattice.n_cells();
        let info: Vec<f64> = (0..n).map(|c| self.information_at(c)).collect();
        let mut out = vec![0.0; n * N_ACTIONS];
        for s in 0..n {
            for m in Move::ALL {
                let sa = s * N_ACTIONS + m.index();
                if q[sa] > 0.0 {
                    out[sa] = info[self.lattice.neighbor(s, m).expect("q > 0 implies in bounds")];
                }
            }
        }
        out
    }

    pub fn sigma_correction(&self) -> Vec<f64> {
        self.success_table()
            .into_iter()
            .map(|q| bernoulli_sigma(q, self.config.sigma_factor))
            .collect()
    }

    fn mean_from(&self, q: &[f64]) -> Mdp {
        let n = self.lattice.n_cells();
        let mut rows = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for m in Move::ALL {
                let d = self.lattice.neighbor(s, m).unwrap_or(s);
                rows.push(bernoulli_row(s, d, q[s * N_ACTIONS + m.index()]));
            }
        }
        Mdp::from_rows(&vec![N_ACTIONS; n], rows, vec![0.0; n * N_ACTIONS]).expect("well-formed lattice")
    }

    pub fn mean_mdp(&self) -> Mdp {
        self.mean_from(&self.success_table())
    }

    /// Conjugate update of one cell with a reading of variance `noise`.
    pub fn observe_cell(&mut self, c: usize, value: f64, noise: f64) {
        let precision = 1.0 / self.var[c] + 1.0 / noise;
        self.mean[c] = (self.mean[c] / self.var[c] + value / noise) / precision;
        self.var[c] = 1.0 / precision;
    }
}

impl Belief for GaussianTerrainBelief {
    type Observation = TerrainObservation;

    fn model(&self) -> BeliefModel {
        let q = self.success_table();
        BeliefModel {
            mean: self.mean_from(&q),
            sigma: q.iter().map(|&q| bernoulli_sigma(q, self.config.sigma_factor)).collect(),
            bonus: self.bonus_from(&q),
        }
    }

    fn update(&mut self, obs: &TerrainObservation) -> UpdateSummary {
        for &(c, value, noise) in &obs.measurements {
            self.observe_cell(c, value, noise);
        }
        let newly = !std::mem::replace(&mut self.visited[obs.position], true);
        let changed = newly || !obs.measurements.is_empty();
        if changed {
            self.revision += 1;
        }
        UpdateSummary {
            newly_revealed: newly as usize,
            changed,
        }
    }

    fn revision(&self) -> u64 {
        self.revision
    }

    fn sampler(&self) -> Box<dyn ModelSampler + Send + '_> {
        Box::new(TerrainSampler {
            belief: self,
            drawn: vec![0.0; self.mean.len()],
            stamp: vec![0; self.mean.len()],
            generation: 0,
        })
    }

    fn sample_mdp(&self, seed: u64) -> Mdp {
        let mut rng = rng::rng_from(seed);
        let heights: Vec<f64> = self
            .mean
            .iter()
            .zip(&self.var)
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                m + v.sqrt() * z
            })
            .collect();
        let n = self.lattice.n_cells();
        let mut q = Vec::with_capacity(n * N_ACTIONS);
        for s in 0..n {
            for mv in Move::ALL {
                q.push(match self.lattice.neighbor(s, mv) {
                    _ if mv == Move::Stay => 1.0,
                    Some(d) if self.config.traversable(heights[s], heights[d]) => 1.0,
                    _ => 0.0,
                });
            }
        }
        self.mean_from(&q)
    }

    fn known_count(&self) -> usize {
        self.visited.iter().filter(|&&v| v).count()
    }
}

struct TerrainSampler<'a> {
    belief: &'a GaussianTerrainBelief,
    drawn: Vec<f64>,
    stamp: Vec<u32>,
    generation: u32,
}

impl TerrainSampler<'_> {
    fn height(&mut self, c: usize, rng: &mut Rng) -> f64 {
        if self.stamp[c] != self.generation {
            self.stamp[c] = self.generation;
            let z: f64 = StandardNormal.sample(rng);
            self.drawn[c] = self.belief.mean[c] + self.belief.var[c].sqrt() * z;
        }
        self.drawn[c]
    }
}

impl ModelSampler for TerrainSampler<'_> {
    fn resample(&mut self, _rng: &mut Rng) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = u32::MAX);
            self.generation = 1;
        }
    }

    fn step(&mut self, s: usize, a: usize, rng: &mut Rng) -> Option<usize> {
        let m = Move::from_index(a).expect("lattice action");
        match self.belief.lattice.neighbor(s, m) {
            Some(d) if d != s => {
                let (hs, hd) = (self.height(s, rng), self.height(d, rng));
                Some(if self.belief.config.traversable(hs, hd) { d } else { s })
            }
            _ => Some(s),
        }
    }

    fn deterministic(&self) -> bool {
        true
    }
}

/// A raster of heights in metres, one value per metre-square pixel, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Heightmap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Heightmap {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples for a {width}x{height} heightmap",
                data.len()
            )));
        }
        Ok(Heightmap { width, height, data })
    }

    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Comma-separated rows.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut data = Vec::new();
        let mut width = None;
        let mut height = 0;
        for record in reader.records() {
            let record = record?;
            let row: Vec<f64> = record
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", height + 1))))
                .collect::<Result<_>>()?;
            if *width.get_or_insert(row.len()) != row.len() {
                return Err(Error::Parse(format!("row {} has {} values", height + 1, row.len())));
            }
            data.extend(row);
            height += 1;
        }
        Heightmap::new(width.unwrap_or(0), height, data)
    }

    /// Binary (`P5`) or ASCII (`P2`) graymap. Header comments of the form
    /// `# scale <metres per level>` and `# offset <metres>` map levels to
    /// heights; without them levels are metres.
    pub fn from_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let mut scale = 1.0;
        let mut offset = 0.0;
        let mut tokens: Vec<String> = Vec::new();
        while tokens.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos >= bytes.len() {
                return Err(Error::Parse("truncated graymap header".into()));
            }
            if bytes[pos] == b'#' {
                let end = bytes[pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| pos + e);
                let comment = String::from_utf8_lossy(&bytes[pos + 1..end]);
                let mut parts = comment.split_whitespace();
                match (parts.next(), parts.next().and_then(|v| v.parse::<f64>().ok())) {
                    (Some("scale"), Some(v)) => scale = v,
                    (Some("offset"), Some(v)) => offset = v,
                    _ => {}
                }
                pos = end;
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
        }
        let num = |i: usize| -> Result<usize> {
            tokens[i]
                .parse()
                .map_err(|_| Error::Parse(format!("bad graymap header field {:?}", tokens[i])))
        };
        let (width, height, maxval) = (num(1)?, num(2)?, num(3)?);
        let n = width * height;
        let levels: Vec<u32> = match tokens[0].as_str() {
            "P5" => {
                pos += 1; // single whitespace after maxval
                let bpp = if maxval > 255 { 2 } else { 1 };
                let body = bytes
                    .get(pos..pos + n * bpp)
                    .ok_or_else(|| Error::Parse("truncated graymap data".into()))?;
                if bpp == 2 {
                    body.chunks_exact(2).map(|c| u32::from(c[0]) << 8 | u32::from(c[1])).collect()
                } else {
                    body.iter().map(|&b| u32::from(b)).collect()
                }
            }
            "P2" => String::from_utf8_lossy(&bytes[pos..])
                .split_whitespace()
                .take(n)
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad graymap value {t:?}"))))
                .collect::<Result<_>>()?,
            other => return Err(Error::Parse(format!("unsupported graymap type {other}"))),
        };
        if levels.len() != n {
            return Err(Error::Parse("truncated graymap data".into()));
        }
        Heightmap::new(width, height, levels.into_iter().map(|l| offset + scale * l as f64).collect())
    }

    /// Binary 16-bit graymap with `scale`/`offset` header comments.
    pub fn to_pgm16(&self) -> Vec<u8> {
        let lo = self.data.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { (hi - lo) / 65535.0 } else { 1.0 };
        let mut out = format!(
            "P5\n# scale {scale:e}\n# offset {lo:e}\n{} {}\n65535\n",
            self.width, self.height
        )
        .into_bytes();
        for &v in &self.data {
            let level = ((v - lo) / scale).round().clamp(0.0, 65535.0) as u16;
            out.extend_from_slice(&level.to_be_bytes());
        }
        out
    }
}

fn reflect(i: i64, n: usize) -> usize {
    // half-sample symmetric extension: ... b a | a b c | c b ...
    let n = n as i64;
    let period = 2 * n;
    let mut k = i.rem_euclid(period);
    if k >= n {
        k = period - 1 - k;
    }
    k as usize
}

/// Separable Gaussian blur with standard deviation `sigma` pixels, kernel
/// truncated at four standard deviations, symmetric boundary extension.
pub fn gaussian_blur(map: &Heightmap, sigma: f64) -> Heightmap {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);
    let (w, h) = (map.width, map.height);
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &map.data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * row[reflect(x as i64 + k as i64 - radius, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (k, &kv) in kernel.iter().enumerate() {
            let src = reflect(y as i64 + k as i64 - radius, h);
            let src_row = &tmp[src * w..(src + 1) * w];
            for (o, s) in out[y * w..(y + 1) * w].iter_mut().zip(src_row) {
                *o += kv * s;
            }
        }
    }
    Heightmap {
        width: w,
        height: h,
        data: out,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestOptions {
    /// Pixels per cell edge.
    pub block: usize,
    /// Blur standard deviation in pixels.
    pub blur_sigma: f64,
    /// Variance added to every cell, m^2.
    pub v0: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            block: 20,
            blur_sigma: 5.0,
            v0: 0.0625,
        }
    }
}

/// Prior from a metre-resolution heightmap: the blurred map and the blurred
/// squared residual, each sampled at block centres, plus `v0`.
pub fn ingest_heightmap(map: &Heightmap, opts: &IngestOptions, config: TerrainConfig) -> Result<GaussianTerrainBelief> {
    let b = opts.block;
    if b == 0 || map.width % b != 0 || map.height % b != 0 || map.width == 0 || map.height == 0 {
        return Err(Error::Dimension(format!(
            "heightmap {}x{} is not a positive multiple of {b}",
            map.width, map.height
        )));
    }
    let smooth = gaussian_blur(map, opts.blur_sigma);
    let residual = Heightmap {
        width: map.width,
        height: map.height,
        data: map.data.iter().zip(&smooth.data).map(|(h, g)| (h - g).powi(2)).collect(),
    };
    let spread = gaussian_blur(&residual, opts.blur_sigma);
    let lattice = Lattice::new(map.width / b, map.height / b);
    let mut mean = Vec::with_capacity(lattice.n_cells());
    let mut var = Vec::with_capacity(lattice.n_cells());
    for cy in 0..lattice.height {
        for cx in 0..lattice.width {
            let (x, y) = (cx * b + b / 2, cy * b + b / 2);
            mean.push(smooth.at(x, y));
            var.push(spread.at(x, y) + opts.v0);
        }
    }
    GaussianTerrainBelief::new(lattice, mean, var, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn flat(n: usize, var: f64) -> GaussianTerrainBelief {
        let l = Lattice::new(n, n);
        GaussianTerrainBelief::new(l, vec![0.0; n * n], vec![var; n * n], TerrainConfig::default()).unwrap()
    }

    #[test]
    fn near_exact_measurement_at_zero_distance() {
        let mut b = flat(3, 1.0);
        b.observe_cell(4, 2.0, SensingModel::default().variance(0.0));
        assert_abs_diff_eq!(b.variance()[4], 1.0 / (1.0 + 1e6), epsilon = 1e-15);
        assert!((b.mean()[4] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn repeated_measurements_follow_precision_sum() {
        let mut b = flat(3, 0.5);
        let v = SensingModel::default().variance(20.0);
        for n in 1..=3 {
            b.observe_cell(0, 0.0, v);
            assert_abs_diff_eq!(b.variance()[0], 1.0 / (2.0 + n as f64 / v), epsilon = 1e-15);
        }
    }

    #[test]
    fn sensing_noise_at_nineteen_metres() {
        assert_abs_diff_eq!(SensingModel::default().variance(19.0), 4e-4, epsilon = 1e-18);
    }

    #[test]
    fn bonus_is_linear_in_variance() {
        let a = flat(6, 0.1).entropy_bonus();
        let b = flat(6, 0.2).entropy_bonus();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(2.0 * x, *y, epsilon = 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn slope_window() {
        let c = TerrainConfig::default();
        assert!(c.traversable(0.0, 0.0));
        assert!(!c.traversable(0.0, 3.0));
        assert!(c.traversable(0.0, -15.0));
        assert!(!c.traversable(0.0, -21.0));
        let (_, hi) = c.rise_window();
        assert_abs_diff_eq!(hi, 20.0 * 5f64.to_radians().tan(), epsilon = 1e-12);
    }

    #[test]
    fn constant_map_ingests_to_v0() {
        let map = Heightmap::new(40, 20, vec![7.5; 800]).unwrap();
        let b = ingest_heightmap(&map, &IngestOptions::default(), TerrainConfig::default()).unwrap();
        assert_eq!((b.lattice().width, b.lattice().height), (2, 1));
        for (m, v) in b.mean().iter().zip(b.variance()) {
            assert_abs_diff_eq!(*m, 7.5, epsilon = 1e-12);
            assert_abs_diff_eq!(*v, 0.0625, epsilon = 1e-12);
        }
        let bad = Heightmap::new(30, 20, vec![0.0; 600]).unwrap();
        assert!(ingest_heightmap(&bad, &IngestOptions::default(), TerrainConfig::default()).is_err());
    }

    #[test]
    fn checkerboard_variance_is_about_one() {
        let (w, h) = (120, 120);
        let data = (0..w * h).map(|i| if (i % w + i / w) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let map = Heightmap::new(w, h, data).unwrap();
        let b = ingest_heightmap(&map, &IngestOptions::default(), TerrainConfig::default()).unwrap();
        // cells far enough from the border that the boundary extension is invisible
        for (cx, cy) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let v = b.variance()[b.lattice().cell(cx, cy)];
            assert!((v - 1.0625).abs() < 1e-3, "{v}");
        }
    }

    #[test]
    fn pgm_round_trip() {
        let map = Heightmap::new(3, 2, vec![-10.0, 0.0, 5.5, 12.25, 3.0, -1.0]).unwrap();
        let back = Heightmap::from_pgm(&map.to_pgm16()).unwrap();
        for (a, b) in map.data.iter().zip(&back.data) {
            assert!((a - b).abs() < 22.25 / 65535.0);
        }
        let ascii = b"P2\n# scale 0.5\n2 1\n255\n4 6\n";
        assert_eq!(Heightmap::from_pgm(ascii).unwrap().data, vec![2.0, 3.0]);
    }

    #[test]
    fn csv_heightmap() {
        let map = Heightmap::from_csv("1, 2, 3\n4, 5, 6\n").unwrap();
        assert_eq!((map.width, map.height), (3, 2));
        assert_eq!(map.at(2, 1), 6.0);
    }
}
