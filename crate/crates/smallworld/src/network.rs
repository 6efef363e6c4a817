//! Network container, initializers, and snapshot persistence.
//!
//! A [`Network`] assigns every agent a sorted set of directed out-links on a
//! shared grid with shared cost parameters. Snapshots are versioned JSON
//! files that round-trip exactly and carry optional provenance (seed,
//! schedule, move/round counts) so any artifact can be regenerated.

use crate::cost::{read_weight_rows, CostParams, Weights};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, NodeId};
use crate::scalar::CostScalar;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read as _, Write as _};
use std::path::Path;

/// Current snapshot format version. Readers accept any `1.x`.
pub const SNAPSHOT_FORMAT_VERSION: &str = "1.0";

// ─── container ──────────────────────────────────────────────────────────────

/// A directed link set per agent on a toroidal grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Network<T: CostScalar = f64> {
    grid: GridSpec,
    params: CostParams<T>,
    links: Vec<Vec<NodeId>>,
    provenance: Option<Provenance>,
}

/// How a snapshot came to be; everything optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moves: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u64>,
}

/// Starting configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    /// No links at all.
    Empty,
    /// Each agent links to its `2d` grid neighbors.
    GridNeighbors,
    /// Grid neighbors plus `extra` long links per agent, each drawn by first
    /// sampling a distance class `j >= 2` with probability proportional to
    /// `(nodes at distance j) * j^(-alpha)` and then a uniform node within
    /// that sphere.
    Kleinberg { extra: u32 },
}

impl Init {
    pub fn label(&self) -> String {
        match self {
            Init::Empty => "empty".into(),
            Init::GridNeighbors => "grid-neighbors".into(),
            Init::Kleinberg { extra } => format!("kleinberg:{extra}"),
        }
    }
}

impl<T: CostScalar> Network<T> {
    /// Empty network.
    pub fn new(grid: GridSpec, params: CostParams<T>) -> Self {
        let n = grid.population();
        Network { grid, params, links: vec![Vec::new(); n], provenance: None }
    }

    /// Network with explicit link sets (validated: one set per agent, no
    /// self-links, no duplicates).
    pub fn from_links(
        grid: GridSpec,
        params: CostParams<T>,
        links: Vec<Vec<NodeId>>,
    ) -> Result<Self> {
        if links.len() != grid.population() {
            return Err(Error::InvalidParameter(format!(
                "expected {} link sets, got {}",
                grid.population(),
                links.len()
            )));
        }
        let mut sorted = links;
        for (v, set) in sorted.iter_mut().enumerate() {
            set.sort_unstable();
            for pair in set.windows(2) {
                if pair[0] == pair[1] {
                    return Err(Error::AlreadyLinked { agent: v as u64, target: pair[0].raw() as u64 });
                }
            }
            if set.binary_search(&crate::grid::nid(v)).is_ok() {
                return Err(Error::SelfLink);
            }
        }
        Ok(Network { grid, params, links: sorted, provenance: None })
    }

    /// Build an initial network.
    pub fn init(grid: GridSpec, params: CostParams<T>, init: Init, seed: u64) -> Result<Self> {
        let mut net = Network::new(grid, params);
        match init {
            Init::Empty => {}
            Init::GridNeighbors => {
                for v in net.grid.node_ids() {
                    net.links[v.index()] = net.grid.sphere(v, 1);
                }
            }
            Init::Kleinberg { extra } => {
                net.seed_kleinberg(extra, seed);
            }
        }
        net.provenance = Some(Provenance { seed: Some(seed), schedule: None, moves: None, rounds: None });
        Ok(net)
    }

    /// Grid neighbors plus long links with class probability proportional to
    /// `class_size(j) * j^(-alpha)`. Agents are seeded in id order from one
    /// stream, so the result is a pure function of `(grid, alpha, seed)`.
    fn seed_kleinberg(&mut self, extra: u32, seed: u64) {
        let alpha = self.params.alpha_f64();
        let g = &self.grid;
        let max_dist = g.max_distance();
        let mut class_weight = vec![0.0f64; (max_dist + 1) as usize];
        let mut total = 0.0f64;
        for j in 2..=max_dist {
            let w = g.sphere_size(j) as f64 * (j as f64).powf(-alpha);
            class_weight[j as usize] = w;
            total += w;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in g.node_ids() {
            let mut set = g.sphere(v, 1);
            if total > 0.0 {
                for _ in 0..extra {
                    // Rejection loop: resample on collisions with existing
                    // links, giving up (deterministically) after 64 tries.
                    for _attempt in 0..64 {
                        let mut x = rng.random::<f64>() * total;
                        let mut class = 2u64;
                        for j in 2..=max_dist {
                            x -= class_weight[j as usize];
                            if x <= 0.0 {
                                class = j;
                                break;
                            }
                            class = j;
                        }
                        let shell = g.sphere(v, class);
                        let pick = shell[rng.random_range(0..shell.len())];
                        if pick != v && !set.contains(&pick) {
                            set.push(pick);
                            break;
                        }
                    }
                }
            }
            set.sort_unstable();
            self.links[v.index()] = set;
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &CostParams<T> {
        &self.params
    }

    /// All link sets, indexed by agent id; each sorted.
    pub fn links(&self) -> &[Vec<NodeId>] {
        &self.links
    }

    /// One agent's sorted link targets.
    pub fn links_of(&self, v: NodeId) -> &[NodeId] {
        &self.links[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.links[v.index()].len()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn set_provenance(&mut self, p: Option<Provenance>) {
        self.provenance = p;
    }

    /// Replace one agent's links with an already-validated sorted set.
    pub(crate) fn set_links_sorted(&mut self, v: NodeId, links: Vec<NodeId>) {
        debug_assert!(links.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(links.binary_search(&v).is_err());
        self.links[v.index()] = links;
    }

    /// Add one link with validation (used by move replay).
    pub fn add_link(&mut self, v: NodeId, u: NodeId) -> Result<()> {
        if u == v {
            return Err(Error::SelfLink);
        }
        let set = &mut self.links[v.index()];
        match set.binary_search(&u) {
            Ok(_) => Err(Error::AlreadyLinked { agent: v.raw() as u64, target: u.raw() as u64 }),
            Err(pos) => {
                set.insert(pos, u);
                Ok(())
            }
        }
    }

    /// Remove one link with validation (used by move replay).
    pub fn remove_link(&mut self, v: NodeId, u: NodeId) -> Result<()> {
        let set = &mut self.links[v.index()];
        match set.binary_search(&u) {
            Ok(pos) => {
                set.remove(pos);
                Ok(())
            }
            Err(_) => Err(Error::NotLinked { agent: v.raw() as u64, target: u.raw() as u64 }),
        }
    }
}

// ─── snapshots ──────────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    format_version: String,
    d: u32,
    side: u32,
    alpha: f64,
    beta: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    weights_ref: Option<String>,
    links: Vec<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    provenance: Option<Provenance>,
}

impl<T: CostScalar> Network<T> {
    /// Serialize to the versioned snapshot JSON (deterministic bytes).
    pub fn to_snapshot_json(&self) -> String {
        let file = SnapshotFile {
            format_version: SNAPSHOT_FORMAT_VERSION.to_string(),
            d: self.grid.dim(),
            side: self.grid.side(),
            alpha: self.params.alpha_f64(),
            beta: self.params.beta_f64(),
            weights_ref: self.params.weights_ref().map(str::to_string),
            links: self
                .links
                .iter()
                .map(|set| set.iter().map(|u| u.raw() as u64).collect())
                .collect(),
            provenance: self.provenance.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file).expect("snapshot serializes");
        text.push('\n');
        text
    }

    /// Write a snapshot file.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        out.write_all(self.to_snapshot_json().as_bytes())?;
        Ok(())
    }

    /// Parse a snapshot. `base_dir` resolves relative weight-file references
    /// (pass the snapshot's directory).
    pub fn from_snapshot_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let file: SnapshotFile =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("snapshot: {e}")))?;
        let major = file.format_version.split('.').next().unwrap_or("");
        if major != "1" {
            return Err(Error::Format(format!(
                "unsupported snapshot format version {} (this reader handles 1.x)",
                file.format_version
            )));
        }
        let grid = GridSpec::new(file.d, file.side)?;
        let mut params = CostParams::<T>::new(file.alpha, file.beta)?;
        if let Some(reference) = &file.weights_ref {
            let weights = if let Some(gamma) = reference.strip_prefix("proximity:") {
                let gamma: f64 = gamma.parse().map_err(|_| {
                    Error::Format(format!("snapshot: bad proximity weight reference {reference:?}"))
                })?;
                Weights::Proximity { gamma }
            } else {
                let mut path = std::path::PathBuf::from(reference);
                if path.is_relative() {
                    if let Some(base) = base_dir {
                        path = base.join(path);
                    }
                }
                let rows = read_weight_rows(&path)?;
                Weights::table_from_rows(&grid, &rows)?
            };
            params = params.with_weights(weights, Some(reference.clone()))?;
        }
        let mut links = Vec::with_capacity(file.links.len());
        for set in &file.links {
            let mut parsed = Vec::with_capacity(set.len());
            for &u in set {
                parsed.push(grid.node(u)?);
            }
            links.push(parsed);
        }
        let mut net = Network::from_links(grid, params, links)?;
        net.provenance = file.provenance;
        Ok(net)
    }

    /// Read a snapshot file (weight references resolve relative to it).
    pub fn load_snapshot(path: &Path) -> Result<Self> {
        let mut text = String::new();
        std::fs::File::open(path)?.read_to_string(&mut text)?;
        Self::from_snapshot_json(&text, path.parent())
    }
}
