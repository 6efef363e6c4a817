//! Agent cost model.
//!
//! An agent `v` holding the directed link set `N(v)` pays
//!
//! ```text
//! cost(v) = beta * sum_{u in N(v)} dist(v,u)^alpha                 (link price)
//!         + sum_{u != v, u not in N(v)} w_v(u) * dist(u, N(v) ∪ {v})   (separation)
//! ```
//!
//! The separation term measures how far every other node is from the agent's
//! *serving set* — its link targets plus the agent itself — so an agent with
//! no links pays the plain distance sum. Weights default to 1; a
//! proximity-decaying preset and per-pair tables loaded from CSV are also
//! supported.
//!
//! [`ServingState`] caches, for one agent, the two nearest serving points of
//! every node. That makes single-move evaluation exact and cheap: the gain of
//! adding a link is a truncated-cone sum over the current distance field, and
//! the damage of deleting one is read off the second-nearest entries. For
//! full candidate scans there are closed-form accumulation engines on rings
//! (second differences of tent functions) and planes (per-row tent fields
//! assembled across row offsets); both are exact in integer-valued settings
//! and are cross-checked against the direct quadratic scan in tests.

use crate::error::{Error, Result};
use crate::grid::{nid, Best2, GridSpec, NodeId, NO_SOURCE};
use crate::scalar::CostScalar;
use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

// ─── weights ────────────────────────────────────────────────────────────────

/// Per-pair separation weights `w_v(u)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Weights<T> {
    /// Every pair weighs 1 (the default).
    Uniform,
    /// `w_v(u) = dist(v,u)^(-gamma)` with `gamma >= 0`: remote nodes matter
    /// less to an agent than nearby ones.
    Proximity { gamma: f64 },
    /// Explicit table; absent pairs weigh 1.
    Table(WeightTable<T>),
}

/// Explicit weight table with default 1 for absent pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightTable<T> {
    entries: HashMap<(u32, u32), T>,
    max_weight: f64,
}

impl<T: CostScalar> Weights<T> {
    /// Weight of pair `(v, u)`, `u != v`.
    pub fn node_weight(&self, g: &GridSpec, v: NodeId, u: NodeId) -> T {
        match self {
            Weights::Uniform => T::one(),
            Weights::Proximity { gamma } => {
                let d = g.distance(v, u) as f64;
                T::from_config(d.powf(-gamma)).expect("finite weight")
            }
            Weights::Table(t) => t
                .entries
                .get(&(v.raw(), u.raw()))
                .cloned()
                .unwrap_or_else(T::one),
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Weights::Uniform)
    }

    /// Upper bound on any single weight (used by sound pruning bounds).
    pub fn max_weight(&self) -> f64 {
        match self {
            Weights::Uniform => 1.0,
            Weights::Proximity { .. } => 1.0, // dist >= 1 and gamma >= 0
            Weights::Table(t) => t.max_weight.max(1.0),
        }
    }

    /// Build a table from raw `(v, u, weight)` rows. Ids must be valid,
    /// pairs distinct and non-reflexive, weights finite and non-negative.
    pub fn table_from_rows(g: &GridSpec, rows: &[(u64, u64, f64)]) -> Result<Self> {
        let mut entries = HashMap::with_capacity(rows.len());
        let mut max_weight = 0.0f64;
        for &(v, u, w) in rows {
            let v = g.node(v)?;
            let u = g.node(u)?;
            if v == u {
                return Err(Error::InvalidParameter(format!(
                    "weight row for self-pair ({v}, {u})"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "weight for ({v}, {u}) must be finite and non-negative, got {w}"
                )));
            }
            let value = T::from_config(w)
                .ok_or_else(|| Error::InvalidParameter(format!("unrepresentable weight {w}")))?;
            if entries.insert((v.raw(), u.raw()), value).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "duplicate weight row for ({v}, {u})"
                )));
            }
            max_weight = max_weight.max(w);
        }
        Ok(Weights::Table(WeightTable { entries, max_weight }))
    }
}

/// Read `(v, u, weight)` rows from a CSV file with a `v,u,weight` header.
pub fn read_weight_rows(path: &Path) -> Result<Vec<(u64, u64, f64)>> {
    let mut file = std::fs::File::open(path)?;
    let mut text = String::new();
    file.read_to_string(&mut text)?;
    parse_weight_rows(&text)
}

/// Parse weight CSV content (exposed separately for tests).
pub fn parse_weight_rows(text: &str) -> Result<Vec<(u64, u64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::Format(format!("weight csv: {e}")))?;
        let expect = ["v", "u", "weight"];
        if headers.len() != 3 || headers.iter().zip(expect).any(|(h, e)| h.trim() != e) {
            return Err(Error::Format(format!(
                "weight csv must have header v,u,weight, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(format!("weight csv: {e}")))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let v: u64 = field(0)
            .parse()
            .map_err(|_| Error::Format(format!("weight csv: bad node id {:?}", field(0))))?;
        let u: u64 = field(1)
            .parse()
            .map_err(|_| Error::Format(format!("weight csv: bad node id {:?}", field(1))))?;
        let w: f64 = field(2)
            .parse()
            .map_err(|_| Error::Format(format!("weight csv: bad weight {:?}", field(2))))?;
        rows.push((v, u, w));
    }
    Ok(rows)
}

// ─── parameters ─────────────────────────────────────────────────────────────

/// Cost parameters: distance exponent `alpha >= 0`, link price factor
/// `beta > 0`, and separation weights.
#[derive(Clone, Debug, PartialEq)]
pub struct CostParams<T: CostScalar> {
    alpha: T::Exponent,
    beta: T,
    weights: Weights<T>,
    /// Provenance of non-uniform weights for snapshots: `proximity:<gamma>`
    /// or a file path. `None` for uniform weights.
    weights_ref: Option<String>,
}

impl<T: CostScalar> CostParams<T> {
    /// Uniform-weight parameters.
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "alpha must be finite and non-negative, got {alpha}"
            )));
        }
        if !beta.is_finite() || beta <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and positive, got {beta}"
            )));
        }
        let alpha_e = T::exponent_from_f64(alpha).ok_or_else(|| {
            Error::UnsupportedMode(format!(
                "exponent {alpha} is not representable in this scalar (exact arithmetic requires a non-negative integer alpha)"
            ))
        })?;
        let beta_t = T::from_config(beta)
            .ok_or_else(|| Error::InvalidParameter(format!("unrepresentable beta {beta}")))?;
        Ok(CostParams { alpha: alpha_e, beta: beta_t, weights: Weights::Uniform, weights_ref: None })
    }

    /// Replace the weights. `weights_ref` records where they came from so
    /// snapshots can restore them (`proximity:<gamma>` or a file path).
    pub fn with_weights(mut self, weights: Weights<T>, weights_ref: Option<String>) -> Result<Self> {
        if let Weights::Proximity { gamma } = weights {
            if !gamma.is_finite() || gamma < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "proximity gamma must be finite and non-negative, got {gamma}"
                )));
            }
        }
        self.weights_ref = match (&weights, weights_ref) {
            (Weights::Uniform, _) => None,
            (Weights::Proximity { gamma }, _) => Some(format!("proximity:{gamma}")),
            (Weights::Table(_), r) => r,
        };
        self.weights = weights;
        Ok(self)
    }

    pub fn alpha(&self) -> T::Exponent {
        self.alpha
    }

    pub fn alpha_f64(&self) -> f64 {
        T::exponent_to_f64(self.alpha)
    }

    pub fn beta(&self) -> &T {
        &self.beta
    }

    pub fn beta_f64(&self) -> f64 {
        self.beta.to_f64()
    }

    pub fn weights(&self) -> &Weights<T> {
        &self.weights
    }

    pub fn weights_ref(&self) -> Option<&str> {
        self.weights_ref.as_deref()
    }

    /// Whether the closed-form accumulation engines may be used: they
    /// reassociate sums, which is lossless exactly when sums are integer
    /// (uniform weights) or the scalar itself is exact.
    pub(crate) fn analytic_scans_ok(&self) -> bool {
        T::IS_EXACT || self.weights.is_uniform()
    }
}

impl CostParams<f64> {
    /// Exact-rational view of these parameters. Fails when `alpha` is not a
    /// non-negative integer. Weight values convert exactly (every finite
    /// double is rational).
    pub fn to_exact(&self) -> Result<CostParams<crate::Rational>> {
        let p = CostParams::<crate::Rational>::new(self.alpha_f64(), self.beta_f64())?;
        let weights = match &self.weights {
            Weights::Uniform => Weights::Uniform,
            Weights::Proximity { gamma } => Weights::Proximity { gamma: *gamma },
            Weights::Table(t) => {
                let entries = t
                    .entries
                    .iter()
                    .map(|(&k, &w)| {
                        (k, crate::Rational::from_config(w).expect("finite weight"))
                    })
                    .collect();
                Weights::Table(WeightTable { entries, max_weight: t.max_weight })
            }
        };
        p.with_weights(weights, self.weights_ref.clone())
    }
}

// ─── single-agent cost evaluation ───────────────────────────────────────────

/// Price of one link from `v` to `u`: `beta * dist(v,u)^alpha`.
pub fn link_cost<T: CostScalar>(
    p: &CostParams<T>,
    g: &GridSpec,
    v: NodeId,
    u: NodeId,
) -> Result<T> {
    if v == u {
        return Err(Error::SelfLink);
    }
    Ok(p.beta.clone() * T::distance_pow(g.distance(v, u), p.alpha))
}

/// Validate a link set: no self-links, no duplicates. Returns a sorted copy.
fn validated_links(v: NodeId, links: &[NodeId]) -> Result<Vec<NodeId>> {
    let mut sorted = links.to_vec();
    sorted.sort_unstable();
    for pair in sorted.windows(2) {
        if pair[0] == pair[1] {
            return Err(Error::InvalidParameter(format!(
                "duplicate link target {}",
                pair[0]
            )));
        }
    }
    if sorted.binary_search(&v).is_ok() {
        return Err(Error::SelfLink);
    }
    Ok(sorted)
}

/// Full cost of agent `v` with link set `links`: link prices plus weighted
/// distances from every other node to the serving set `links ∪ {v}`.
/// Separation distances come from one breadth-first sweep.
pub fn total_cost<T: CostScalar>(
    p: &CostParams<T>,
    g: &GridSpec,
    v: NodeId,
    links: &[NodeId],
) -> Result<T> {
    let links = validated_links(v, links)?;
    let mut link_total = T::zero();
    for &u in &links {
        link_total += link_cost(p, g, v, u)?;
    }
    let mut serving = links.clone();
    serving.push(v);
    let dist = g.multi_source_distances(&serving)?;
    let mut sep_total = T::zero();
    for (w, &d) in dist.iter().enumerate() {
        if d == 0 {
            continue; // serving points (and v itself) contribute nothing
        }
        sep_total += p.weights.node_weight(g, v, nid(w)) * T::from_count(d as u64);
    }
    Ok(link_total + sep_total)
}

// ─── cached per-agent state ─────────────────────────────────────────────────

/// Cached serving structure of one agent: for every node, the distances to
/// its two nearest distinct serving points (the agent's link targets plus the
/// agent itself), together with running cost totals. Single-move deltas are
/// evaluated exactly against this cache, and moves can be applied in place.
#[derive(Clone, Debug)]
pub struct ServingState<T: CostScalar> {
    owner: NodeId,
    links: Vec<NodeId>,
    best: Vec<Best2>,
    link_total: T,
    sep_total: T,
}

impl<T: CostScalar> ServingState<T> {
    /// Build the cache for `owner` with the given link set.
    pub fn build(p: &CostParams<T>, g: &GridSpec, owner: NodeId, links: &[NodeId]) -> Result<Self> {
        let links = validated_links(owner, links)?;
        let mut serving = links.clone();
        serving.push(owner);
        let best = g.two_nearest(&serving);
        let mut state = ServingState {
            owner,
            links,
            best,
            link_total: T::zero(),
            sep_total: T::zero(),
        };
        state.link_total = {
            let mut acc = T::zero();
            for &u in &state.links {
                acc += link_cost(p, g, owner, u)?;
            }
            acc
        };
        state.sep_total = state.recompute_separation(p, g);
        Ok(state)
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    /// Current link targets, sorted by id.
    pub fn links(&self) -> &[NodeId] {
        &self.links
    }

    pub fn has_link(&self, u: NodeId) -> bool {
        self.links.binary_search(&u).is_ok()
    }

    /// Distance from `u` to the serving set `N(owner) ∪ {owner}`.
    pub fn served_distance(&self, u: NodeId) -> u64 {
        self.best[u.index()].d1 as u64
    }

    /// Cached total link price.
    pub fn link_cost_total(&self) -> &T {
        &self.link_total
    }

    /// Cached total separation cost.
    pub fn separation_total(&self) -> &T {
        &self.sep_total
    }

    /// Full cost of the agent in this state.
    pub fn total(&self) -> T {
        self.link_total.clone() + self.sep_total.clone()
    }

    fn recompute_separation(&self, p: &CostParams<T>, g: &GridSpec) -> T {
        let mut acc = T::zero();
        for (w, b) in self.best.iter().enumerate() {
            if b.d1 == 0 {
                continue;
            }
            acc += p.weights.node_weight(g, self.owner, nid(w)) * T::from_count(b.d1 as u64);
        }
        acc
    }

    /// Exact cost change from adding a link to `u`: the link price minus the
    /// separation gained by every node that would be served closer by `u`.
    pub fn add_delta(&self, p: &CostParams<T>, g: &GridSpec, u: NodeId) -> Result<T> {
        if u == self.owner {
            return Err(Error::SelfLink);
        }
        if self.has_link(u) {
            return Err(Error::AlreadyLinked { agent: self.owner.raw() as u64, target: u.raw() as u64 });
        }
        Ok(link_cost(p, g, self.owner, u)? - self.add_gain(p, g, u))
    }

    /// Separation reduction from adding a link to `u` (the drop in the
    /// separation term; non-negative).
    pub fn add_gain(&self, p: &CostParams<T>, g: &GridSpec, u: NodeId) -> T {
        let mut field = Vec::new();
        g.distance_field(u, &mut field);
        let mut gain = T::zero();
        for (w, b) in self.best.iter().enumerate() {
            let du = field[w];
            if b.d1 > du {
                gain += p.weights.node_weight(g, self.owner, nid(w))
                    * T::from_count((b.d1 - du) as u64);
            }
        }
        gain
    }

    /// Exact cost change from deleting the link to `u`: the refunded link
    /// price plus the separation lost by every node whose unique nearest
    /// serving point was `u` (read off the second-nearest cache).
    pub fn delete_delta(&self, p: &CostParams<T>, g: &GridSpec, u: NodeId) -> Result<T> {
        if !self.has_link(u) {
            return Err(Error::NotLinked { agent: self.owner.raw() as u64, target: u.raw() as u64 });
        }
        let mut increase = T::zero();
        for (w, b) in self.best.iter().enumerate() {
            if b.s1 == u.raw() && b.d2 > b.d1 {
                debug_assert!(b.s2 != NO_SOURCE);
                increase += p.weights.node_weight(g, self.owner, nid(w))
                    * T::from_count((b.d2 - b.d1) as u64);
            }
        }
        Ok(increase - link_cost(p, g, self.owner, u)?)
    }

    /// Apply an add move, returning its exact delta.
    pub fn apply_add(&mut self, p: &CostParams<T>, g: &GridSpec, u: NodeId) -> Result<T> {
        let delta = self.add_delta(p, g, u)?;
        let pos = self.links.binary_search(&u).unwrap_err();
        self.links.insert(pos, u);
        let mut field = Vec::new();
        g.distance_field(u, &mut field);
        for (w, b) in self.best.iter_mut().enumerate() {
            b.offer(field[w], u.raw());
        }
        self.link_total += link_cost(p, g, self.owner, u)?;
        self.sep_total = self.recompute_separation(p, g);
        Ok(delta)
    }

    /// Apply a delete move, returning its exact delta.
    pub fn apply_delete(&mut self, p: &CostParams<T>, g: &GridSpec, u: NodeId) -> Result<T> {
        let delta = self.delete_delta(p, g, u)?;
        let pos = self.links.binary_search(&u).unwrap(); // checked by delete_delta
        self.links.remove(pos);
        let mut serving = self.links.clone();
        serving.push(self.owner);
        let removed = u.raw();
        for (w, b) in self.best.iter_mut().enumerate() {
            if b.s1 != removed && b.s2 != removed {
                continue;
            }
            if b.s1 == removed {
                b.d1 = b.d2;
                b.s1 = b.s2;
            }
            // Rebuild the second-nearest entry by scanning the serving set.
            b.d2 = u32::MAX;
            b.s2 = NO_SOURCE;
            debug_assert!(b.s1 != NO_SOURCE);
            if serving.len() < 2 {
                continue;
            }
            let node = nid(w);
            for &s in &serving {
                if s.raw() == b.s1 {
                    continue;
                }
                let d = g.distance(node, s) as u32;
                if d < b.d2 {
                    b.d2 = d;
                    b.s2 = s.raw();
                }
            }
        }
        self.link_total -= link_cost(p, g, self.owner, u)?;
        self.sep_total = self.recompute_separation(p, g);
        Ok(delta)
    }

    /// Exact separation gain of adding each node as a link target, for all
    /// nodes at once (entries for the owner and current targets are
    /// meaningless and skipped by callers). Uses the closed-form engines
    /// where they are lossless, the direct quadratic scan otherwise.
    pub(crate) fn add_gain_field(&self, p: &CostParams<T>, g: &GridSpec, out: &mut Vec<T>) {
        let n = g.population();
        out.clear();
        out.resize(n, T::zero());
        if p.analytic_scans_ok() {
            match g.dim() {
                1 => {
                    self.ring_gain_field(p, g, out);
                    return;
                }
                2 => {
                    self.plane_gain_field(p, g, out);
                    return;
                }
                _ => {}
            }
        }
        // Direct reference scan: O(n^2 · d).
        for (u, slot) in out.iter_mut().enumerate() {
            *slot = self.add_gain(p, g, nid(u));
        }
    }

    /// Exact delete deltas for every current link in one pass over the
    /// two-nearest cache. Returned in link order.
    pub(crate) fn delete_delta_field(&self, p: &CostParams<T>, g: &GridSpec) -> Result<Vec<T>> {
        let mut increase = vec![T::zero(); self.links.len()];
        for (w, b) in self.best.iter().enumerate() {
            if b.s1 == self.owner.raw() || b.d1 == u32::MAX || b.d2 <= b.d1 {
                continue;
            }
            if let Ok(slot) = self.links.binary_search(&nid(b.s1 as usize)) {
                increase[slot] += p.weights.node_weight(g, self.owner, nid(w))
                    * T::from_count((b.d2 - b.d1) as u64);
            }
        }
        let mut out = Vec::with_capacity(self.links.len());
        for (slot, &u) in self.links.iter().enumerate() {
            out.push(increase[slot].clone() - link_cost(p, g, self.owner, u)?);
        }
        Ok(out)
    }

    /// Ring engine: the gain field is a sum of tent functions, one per node,
    /// accumulated through circular second differences in O(n).
    fn ring_gain_field(&self, p: &CostParams<T>, g: &GridSpec, out: &mut [T]) {
        let m = g.population();
        let weight_of = |w: usize| p.weights.node_weight(g, self.owner, nid(w));
        let heights: Vec<u32> = self.best.iter().map(|b| b.d1).collect();
        ring_tent_accumulate(m, &heights, 0, &weight_of, out);
    }

    /// Plane engine: group nodes by row; a row at row-offset `a` from the
    /// candidate contributes its ring tent field with heights lowered by `a`.
    /// Fields are precomputed per (row, offset) and assembled per candidate
    /// row, for O(n^1.5) per full scan.
    fn plane_gain_field(&self, p: &CostParams<T>, g: &GridSpec, out: &mut [T]) {
        let m = g.side() as usize;
        let half = g.half();
        let mut fields: Vec<Vec<Vec<T>>> = Vec::with_capacity(m);
        for y in 0..m {
            let row = &self.best[y * m..(y + 1) * m];
            let heights: Vec<u32> = row.iter().map(|b| b.d1).collect();
            let max_h = heights.iter().copied().max().unwrap_or(0);
            let weight_of = |x: usize| p.weights.node_weight(g, self.owner, nid(y * m + x));
            let mut per_shift = Vec::with_capacity(half as usize + 1);
            for a in 0..=half {
                if a >= max_h {
                    per_shift.push(Vec::new()); // all tents vanish at this offset
                    continue;
                }
                let mut field = vec![T::zero(); m];
                ring_tent_accumulate(m, &heights, a, &weight_of, &mut field);
                per_shift.push(field);
            }
            fields.push(per_shift);
        }
        for y0 in 0..m {
            let out_row = &mut out[y0 * m..(y0 + 1) * m];
            for (y, per_shift) in fields.iter().enumerate() {
                let a = g.axis_distance(y as u32, y0 as u32);
                let field = &per_shift[a as usize];
                if field.is_empty() {
                    continue;
                }
                for (slot, val) in out_row.iter_mut().zip(field) {
                    *slot += val.clone();
                }
            }
        }
    }
}

/// Accumulate `out[x0] += Σ_x weight(x) * max(0, heights[x] - shift - ring_dist(x, x0))`
/// for every position `x0` of an `m`-ring.
///
/// Each positive-height tent centered at `x` with apex `h` has circular
/// second difference `+w` at `x−h`, `−2w` at `x`, `+w` at `x+h` (the rule
/// also covers the wrap-around plateau cases at `h = floor(m/2)`). A tent
/// whose apex exceeds the ring radius never clips to zero: it equals a
/// radius-clamped tent plus a constant, so its slope breaks sit at the
/// clamped radius (the constant contributes nothing to the second
/// difference and is carried by the anchors). Apexes above the radius
/// occur when two-dimensional serving distances are folded into a row
/// scan, where the row offset can be smaller than the overhang. The field
/// is recovered by double prefix integration anchored at two directly
/// evaluated positions.
fn ring_tent_accumulate<T: CostScalar>(
    m: usize,
    heights: &[u32],
    shift: u32,
    weight_of: &impl Fn(usize) -> T,
    out: &mut [T],
) {
    debug_assert_eq!(heights.len(), m);
    debug_assert_eq!(out.len(), m);
    let ring_dist = |a: usize, b: usize| -> u32 {
        let d = a.abs_diff(b);
        (d.min(m - d)) as u32
    };
    // Direct anchors at positions 0 and 1.
    let mut g0 = T::zero();
    let mut g1 = T::zero();
    let mut any = false;
    for (x, &h_raw) in heights.iter().enumerate() {
        if h_raw <= shift {
            continue;
        }
        any = true;
        let h = h_raw - shift;
        let w = weight_of(x);
        let d0 = ring_dist(x, 0);
        if h > d0 {
            g0 += w.clone() * T::from_count((h - d0) as u64);
        }
        let d1 = ring_dist(x, 1);
        if h > d1 {
            g1 += w * T::from_count((h - d1) as u64);
        }
    }
    if !any {
        return;
    }
    // Second-difference accumulator.
    let mut d2 = vec![T::zero(); m];
    for (x, &h_raw) in heights.iter().enumerate() {
        if h_raw <= shift {
            continue;
        }
        let radius = ((h_raw - shift) as usize).min(m / 2);
        let w = weight_of(x);
        d2[(x + m - radius) % m] += w.clone();
        d2[(x + radius) % m] += w.clone();
        d2[x] -= w.clone() + w;
    }
    // Integrate twice: slope(i) = gain(i+1) - gain(i) satisfies
    // slope(i) = slope(i-1) + d2(i).
    let mut slope = g1.clone() - g0.clone();
    out[0] += g0;
    if m == 1 {
        return;
    }
    out[1] += g1.clone();
    let mut prev = g1;
    for i in 2..m {
        slope += d2[i - 1].clone();
        let cur = prev + slope.clone();
        out[i] += cur.clone();
        prev = cur;
    }
}
