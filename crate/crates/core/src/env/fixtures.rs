//! Small worlds with known answers, shipped as files under `fixtures/`.
//!
//! Each atomic fixture is a weighted set of MDPs plus named deterministic
//! policies; each grid fixture is a true world, optionally with a starting
//! belief. `manifest.json` states the property every fixture must satisfy.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::grid::GridWorld;
use crate::belief::grid::{parse_cells, GridBeliefConfig, GridHeightBelief};
use crate::belief::AtomicBelief;
use crate::error::{Error, Result};
use crate::mdp::{Mdp, MdpDocument, StochasticPolicy};

pub const NAMES: [&str; 6] = ["fig1", "fig2", "fig3", "fig5_row1", "fig5_row2", "fig5_row3"];

pub const MANIFEST: &str = include_str!("../../fixtures/manifest.json");

/// `synthetic_crater(2000, 1000, CRATER_SEED)` as a 16-bit graymap.
pub const CRATER_FILE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/crater.pgm");
pub const CRATER_SEED: u64 = 7;

fn files(name: &str) -> Option<(&'static str, Option<&'static str>)> {
    Some(match name {
        "fig1" => (include_str!("../../fixtures/fig1.json"), None),
        "fig2" => (include_str!("../../fixtures/fig2.json"), None),
        "fig3" => (include_str!("../../fixtures/fig3.json"), None),
        "fig5_row1" => (include_str!("../../fixtures/fig5_row1.world"), None),
        "fig5_row2" => (include_str!("../../fixtures/fig5_row2.world"), None),
        "fig5_row3" => (
            include_str!("../../fixtures/fig5_row3.world"),
            Some(include_str!("../../fixtures/fig5_row3.belief")),
        ),
        _ => return None,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomicFile {
    home: usize,
    #[serde(default)]
    labels: Option<Vec<String>>,
    weights: Vec<f64>,
    atoms: Vec<MdpDocument>,
    policies: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: String,
    pub files: Vec<String>,
    pub property: String,
}

pub fn manifest() -> Vec<ManifestEntry> {
    serde_json::from_str(MANIFEST).expect("bundled manifest parses")
}

#[derive(Debug, Clone)]
pub struct AtomicFixture {
    pub belief: AtomicBelief,
    pub home: usize,
    pub labels: Vec<String>,
    policies: BTreeMap<String, Vec<usize>>,
}

impl AtomicFixture {
    pub fn policy_names(&self) -> impl Iterator<Item = &str> {
        self.policies.keys().map(String::as_str)
    }

    pub fn actions(&self, name: &str) -> Option<&[usize]> {
        self.policies.get(name).map(Vec::as_slice)
    }

    pub fn policy(&self, name: &str) -> Option<StochasticPolicy> {
        let actions = self.actions(name)?;
        Some(StochasticPolicy::deterministic(&self.belief.atoms()[0].1, actions))
    }

    pub fn state(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone)]
pub struct GridFixture {
    pub world: GridWorld,
    /// Starting belief when it differs from "everything unknown".
    pub belief: Option<GridHeightBelief>,
}

impl GridFixture {
    /// The starting belief under `config`.
    pub fn initial_belief(&self, config: GridBeliefConfig) -> GridHeightBelief {
        match &self.belief {
            Some(b) => GridHeightBelief::from_cells(*b.lattice(), b.cells().to_vec(), config).expect("same grid"),
            None => GridHeightBelief::new(self.world.lattice, config),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Fixture {
    Atomic(AtomicFixture),
    Grid(GridFixture),
}

impl Fixture {
    pub fn property(name: &str) -> Option<String> {
        manifest().into_iter().find(|e| e.name == name).map(|e| e.property)
    }
}

pub fn fixture(name: &str) -> Result<Fixture> {
    let (main, extra) = files(name).ok_or_else(|| Error::UnknownFixture(name.to_string()))?;
    if main.trim_start().starts_with('{') {
        return atomic_from_json(main).map(Fixture::Atomic);
    }
    let world = GridWorld::parse(main)?;
    let belief = match extra {
        Some(text) => {
            let (lattice, cells) = parse_cells(text)?;
            if lattice != world.lattice {
                return Err(Error::Dimension(format!("{name}: belief and world differ in size")));
            }
            Some(GridHeightBelief::from_cells(lattice, cells, GridBeliefConfig::default())?)
        }
        None => None,
    };
    Ok(Fixture::Grid(GridFixture { world, belief }))
}

pub fn atomic_fixture(name: &str) -> Result<AtomicFixture> {
    match fixture(name)? {
        Fixture::Atomic(f) => Ok(f),
        Fixture::Grid(_) => Err(Error::UnknownFixture(format!("{name} is a grid fixture"))),
    }
}

pub fn grid_fixture(name: &str) -> Result<GridFixture> {
    match fixture(name)? {
        Fixture::Grid(f) => Ok(f),
        Fixture::Atomic(_) => Err(Error::UnknownFixture(format!("{name} is an atomic fixture"))),
    }
}

pub fn atomic_from_json(text: &str) -> Result<AtomicFixture> {
    let file: AtomicFile = serde_json::from_str(text)?;
    if file.weights.len() != file.atoms.len() {
        return Err(Error::Parse("one weight per atom".into()));
    }
    let atoms = file
        .weights
        .iter()
        .zip(file.atoms)
        .map(|(&w, doc)| Ok((w, Mdp::try_from(doc)?)))
        .collect::<Result<Vec<_>>>()?;
    let n = atoms.first().map_or(0, |a| a.1.n_states());
    if file.home >= n {
        return Err(Error::Parse(format!("home state {} out of range", file.home)));
    }
    let belief = AtomicBelief::new(atoms)?;
    let structure = &belief.atoms()[0].1;
    for (name, actions) in &file.policies {
        if actions.len() != n || actions.iter().enumerate().any(|(s, &a)| a >= structure.n_actions(s)) {
            return Err(Error::Parse(format!("policy {name:?} does not fit the model")));
        }
    }
    Ok(AtomicFixture {
        belief,
        home: file.home,
        labels: file.labels.unwrap_or_else(|| (0..n).map(|s| s.to_string()).collect()),
        policies: file.policies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_fixture_loads_and_is_listed() {
        let listed: Vec<String> = manifest().into_iter().map(|e| e.name).collect();
        for name in NAMES {
            fixture(name).unwrap();
            assert!(listed.iter().any(|l| l == name), "{name} missing from manifest");
        }
        assert!(matches!(fixture("fig4"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn atomic_fixtures_expose_policies() {
        let f = atomic_fixture("fig1").unwrap();
        assert_eq!(f.state("B"), Some(1));
        assert_eq!(f.actions("unsafe"), Some(&[0, 2, 0][..]));
        assert!(f.policy("missing").is_none());
    }
}
