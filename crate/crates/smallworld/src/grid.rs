//! Toroidal grid geometry.
//!
//! Nodes live on a d-dimensional grid with side length `m` and wrap-around on
//! every axis. Distance is the shortest-path metric of the lattice: the sum
//! over axes of the circular distance `min(|a-b|, m-|a-b|)`. Node ids are
//! row-major mixed-radix encodings of coordinates, with the first axis most
//! significant; all of the crate's per-node arrays are indexed by id.
//!
//! Everything here is integer geometry. Spheres and balls are generated by
//! direct coordinate-offset enumeration (each node corresponds to exactly one
//! per-axis forward offset, so wrap-around never produces duplicates), and
//! distance fields come either from the closed form or from a breadth-first
//! sweep over the lattice when there are many sources.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Identifier of a grid node / agent. Ids are dense in `0..population` for
/// the grid that issued them (see [`GridSpec::node`]).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    /// Position of this node in id order, for indexing per-node arrays.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Raw numeric id.
    pub fn raw(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Internal shorthand for building ids that are already known to be valid.
pub(crate) fn nid(index: usize) -> NodeId {
    NodeId(index as u32)
}

/// Two nearest distinct sources of a node, as produced by
/// [`GridSpec::two_nearest`]. `u32::MAX` marks an absent entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Best2 {
    pub d1: u32,
    pub s1: u32,
    pub d2: u32,
    pub s2: u32,
}

pub(crate) const NO_SOURCE: u32 = u32::MAX;

impl Best2 {
    pub(crate) const EMPTY: Best2 =
        Best2 { d1: u32::MAX, s1: NO_SOURCE, d2: u32::MAX, s2: NO_SOURCE };

    /// Insert a candidate source at the given distance, keeping the two
    /// nearest distinct sources. No-op if the source is already recorded
    /// no farther away.
    pub(crate) fn offer(&mut self, dist: u32, source: u32) {
        if self.s1 == source {
            if dist < self.d1 {
                self.d1 = dist;
            }
            return;
        }
        if dist < self.d1 {
            self.d2 = self.d1;
            self.s2 = self.s1;
            self.d1 = dist;
            self.s1 = source;
        } else if self.s2 != source && dist < self.d2 {
            self.d2 = dist;
            self.s2 = source;
        } else if self.s2 == source && dist < self.d2 {
            self.d2 = dist;
        }
    }
}

/// Shape of a toroidal grid: dimension `d >= 1` and side length `m >= 3`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSpec {
    dim: u32,
    side: u32,
    n: usize,
    /// Stride of each axis in the row-major id encoding (first axis largest).
    strides: Vec<u32>,
    /// `dist_counts[l]` = number of nodes at distance exactly `l` from any
    /// fixed node (the grid is vertex-transitive, so this is node-free).
    dist_counts: Vec<u64>,
}

/// Largest population accepted; keeps ids comfortably inside `u32`.
const MAX_POPULATION: u64 = (1 << 31) - 1;

impl GridSpec {
    /// Build a grid. Fails when the dimension is zero, the side is below 3
    /// (wrap-around needs at least 3 points per axis), or the population
    /// `side^dim` overflows the supported range.
    pub fn new(dim: u32, side: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be at least 1".into()));
        }
        if side < 3 {
            return Err(Error::InvalidGrid(format!(
                "side must be at least 3, got {side}"
            )));
        }
        let mut n: u64 = 1;
        for _ in 0..dim {
            n = n.saturating_mul(side as u64);
            if n > MAX_POPULATION {
                return Err(Error::InvalidGrid(format!(
                    "population {side}^{dim} exceeds the supported maximum {MAX_POPULATION}"
                )));
            }
        }
        let mut strides = vec![0u32; dim as usize];
        let mut s: u64 = 1;
        for i in (0..dim as usize).rev() {
            strides[i] = s as u32;
            s *= side as u64;
        }
        let dist_counts = distance_histogram(dim, side);
        Ok(GridSpec { dim, side, n: n as usize, strides, dist_counts })
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn side(&self) -> u32 {
        self.side
    }

    /// Total number of nodes, `side^dim`.
    pub fn population(&self) -> usize {
        self.n
    }

    /// Half side, the largest circular distance along one axis.
    pub fn half(&self) -> u32 {
        self.side / 2
    }

    /// Largest distance realized on this grid: `dim * floor(side/2)`.
    pub fn max_distance(&self) -> u64 {
        self.dim as u64 * self.half() as u64
    }

    /// Validate a raw id into a [`NodeId`].
    pub fn node(&self, id: u64) -> Result<NodeId> {
        if id < self.n as u64 {
            Ok(NodeId(id as u32))
        } else {
            Err(Error::InvalidNode { id, population: self.n })
        }
    }

    /// All node ids in order.
    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.n).map(nid)
    }

    /// Decode a node into coordinates, first axis first.
    pub fn coords(&self, v: NodeId) -> Vec<u32> {
        let mut rem = v.0;
        let mut out = vec![0u32; self.dim as usize];
        for i in (0..self.dim as usize).rev() {
            out[i] = rem % self.side;
            rem /= self.side;
        }
        out
    }

    /// Encode coordinates (one per axis, each `< side`) into a node.
    pub fn node_at(&self, coords: &[u32]) -> Result<NodeId> {
        if coords.len() != self.dim as usize {
            return Err(Error::InvalidParameter(format!(
                "expected {} coordinates, got {}",
                self.dim,
                coords.len()
            )));
        }
        let mut id: u64 = 0;
        for &c in coords {
            if c >= self.side {
                return Err(Error::InvalidParameter(format!(
                    "coordinate {c} out of range for side {}",
                    self.side
                )));
            }
            id = id * self.side as u64 + c as u64;
        }
        Ok(NodeId(id as u32))
    }

    /// Circular distance along one axis.
    pub fn axis_distance(&self, a: u32, b: u32) -> u32 {
        let d = a.abs_diff(b);
        d.min(self.side - d)
    }

    /// Grid distance between two nodes: the sum of circular axis distances.
    pub fn distance(&self, u: NodeId, v: NodeId) -> u64 {
        debug_assert!(u.index() < self.n && v.index() < self.n);
        let mut a = u.0;
        let mut b = v.0;
        let mut acc = 0u64;
        for _ in 0..self.dim {
            acc += self.axis_distance(a % self.side, b % self.side) as u64;
            a /= self.side;
            b /= self.side;
        }
        acc
    }

    /// Distance from `u` to the nearest member of a non-empty node set.
    pub fn set_distance(&self, u: NodeId, set: &[NodeId]) -> Result<u64> {
        if set.is_empty() {
            return Err(Error::EmptySourceSet);
        }
        Ok(set.iter().map(|&s| self.distance(u, s)).min().unwrap())
    }

    /// Coordinate-wise translation of `v` by the coordinates of `offset`.
    /// Translation is a graph automorphism, so it preserves all distances.
    pub fn translate(&self, v: NodeId, offset: NodeId) -> NodeId {
        let mut a = v.0;
        let mut b = offset.0;
        let mut id = 0u64;
        let mut scale = 1u64;
        for _ in 0..self.dim {
            let c = (a % self.side + b % self.side) % self.side;
            id += c as u64 * scale;
            scale *= self.side as u64;
            a /= self.side;
            b /= self.side;
        }
        NodeId(id as u32)
    }

    /// Fill `out` with the distance from every node to `v` (closed form, no
    /// search). `out` is resized to the population.
    pub fn distance_field(&self, v: NodeId, out: &mut Vec<u32>) {
        out.clear();
        out.resize(self.n, 0);
        let vc = self.coords(v);
        // Walk ids in order with an odometer over coordinates, maintaining
        // the running distance so each step is O(1) amortized.
        let dim = self.dim as usize;
        let mut cur = vec![0u32; dim];
        let mut dist: u32 = vc.iter().map(|&c| self.axis_distance(0, c)).sum();
        for slot in out.iter_mut() {
            *slot = dist;
            // Increment the least significant axis, carrying as needed.
            for axis in (0..dim).rev() {
                let old = cur[axis];
                let new = if old + 1 == self.side { 0 } else { old + 1 };
                dist -= self.axis_distance(old, vc[axis]);
                dist += self.axis_distance(new, vc[axis]);
                cur[axis] = new;
                if new != 0 {
                    break;
                }
            }
        }
    }

    /// Number of nodes at distance exactly `l` from any node (zero beyond
    /// the maximum distance).
    pub fn sphere_size(&self, l: u64) -> u64 {
        usize::try_from(l)
            .ok()
            .and_then(|l| self.dist_counts.get(l))
            .copied()
            .unwrap_or(0)
    }

    /// Number of nodes within distance `l` of any node (saturates at the
    /// population).
    pub fn ball_size(&self, l: u64) -> u64 {
        let cap = (self.max_distance()).min(l);
        (0..=cap).map(|j| self.sphere_size(j)).sum()
    }

    /// All nodes at distance exactly `l` from `v`, in id order. Empty when
    /// `l` exceeds the maximum distance.
    pub fn sphere(&self, v: NodeId, l: u64) -> Vec<NodeId> {
        if l > self.max_distance() {
            return Vec::new();
        }
        let vc = self.coords(v);
        let mut out = Vec::with_capacity(self.sphere_size(l) as usize);
        let mut offsets = vec![0u32; self.dim as usize];
        self.sphere_rec(&vc, l as u32, 0, &mut offsets, &mut |id| out.push(id));
        out.sort_unstable();
        debug_assert_eq!(out.len() as u64, self.sphere_size(l));
        out
    }

    /// Visit every node at distance exactly `l` from the node with
    /// coordinates `vc`, in unspecified order and without allocating.
    /// `offsets` is caller-provided scratch so hot loops can reuse it.
    pub(crate) fn for_each_at_distance(
        &self,
        vc: &[u32],
        l: u32,
        offsets: &mut Vec<u32>,
        f: &mut impl FnMut(NodeId),
    ) {
        if u64::from(l) > self.max_distance() {
            return;
        }
        offsets.clear();
        offsets.resize(self.dim as usize, 0);
        self.sphere_rec(vc, l, 0, offsets, f);
    }

    fn sphere_rec(
        &self,
        vc: &[u32],
        budget: u32,
        axis: usize,
        offsets: &mut Vec<u32>,
        out: &mut impl FnMut(NodeId),
    ) {
        let dim = self.dim as usize;
        let axes_left = (dim - axis) as u32;
        if budget > axes_left * self.half() {
            return; // remaining axes cannot absorb the budget
        }
        if axis == dim - 1 {
            // Final axis must contribute exactly `budget`.
            let mut emit = |o: u32| {
                offsets[axis] = o;
                let mut id = 0u64;
                for (i, &off) in offsets.iter().enumerate() {
                    let c = (vc[i] + off) % self.side;
                    id += c as u64 * self.strides[i] as u64;
                }
                out(NodeId(id as u32));
            };
            if budget == 0 {
                emit(0);
            } else if budget <= self.half() {
                emit(budget);
                let mirror = self.side - budget;
                if mirror != budget {
                    emit(mirror);
                }
            }
            return;
        }
        for o in 0..self.side {
            let c = o.min(self.side - o);
            if c <= budget {
                offsets[axis] = o;
                self.sphere_rec(vc, budget - c, axis + 1, offsets, out);
            }
        }
    }

    /// All nodes within distance `l` of `v` (including `v`), in id order.
    pub fn ball(&self, v: NodeId, l: u64) -> Vec<NodeId> {
        let cap = self.max_distance().min(l);
        let mut out = Vec::with_capacity(self.ball_size(l) as usize);
        for j in 0..=cap {
            out.extend(self.sphere(v, j));
        }
        out.sort_unstable();
        out
    }

    /// Distance from every node to its nearest source, by breadth-first
    /// sweep from all sources simultaneously. `O(n * d)` time.
    pub fn multi_source_distances(&self, sources: &[NodeId]) -> Result<Vec<u32>> {
        if sources.is_empty() {
            return Err(Error::EmptySourceSet);
        }
        let mut dist = vec![u32::MAX; self.n];
        let mut queue = VecDeque::with_capacity(sources.len());
        for &s in sources {
            debug_assert!(s.index() < self.n);
            if dist[s.index()] != 0 {
                dist[s.index()] = 0;
                queue.push_back(s.0);
            }
        }
        while let Some(id) = queue.pop_front() {
            let d = dist[id as usize];
            self.for_each_neighbor(id, |nbr| {
                let slot = &mut dist[nbr as usize];
                if *slot == u32::MAX {
                    *slot = d + 1;
                    queue.push_back(nbr);
                }
            });
        }
        Ok(dist)
    }

    /// The two nearest distinct sources of every node (distances are always
    /// correct; source identities may be either member of a tie). Breadth-
    /// first sweep carrying up to two labels per node.
    pub(crate) fn two_nearest(&self, sources: &[NodeId]) -> Vec<Best2> {
        debug_assert!(!sources.is_empty());
        let mut best = vec![Best2::EMPTY; self.n];
        let mut queue: VecDeque<(u32, u32, u32)> = VecDeque::with_capacity(sources.len());
        for &s in sources {
            debug_assert!(s.index() < self.n);
            queue.push_back((s.0, s.0, 0));
        }
        while let Some((id, src, d)) = queue.pop_front() {
            let b = &mut best[id as usize];
            // Accept only a new distinct label; BFS order guarantees `d` is
            // the true distance from `src` the first time it arrives.
            if b.s1 == src || b.s2 == src {
                continue;
            }
            if b.s1 == NO_SOURCE {
                b.d1 = d;
                b.s1 = src;
            } else if b.s2 == NO_SOURCE {
                b.d2 = d;
                b.s2 = src;
            } else {
                continue;
            }
            self.for_each_neighbor(id, |nbr| {
                let nb = &best[nbr as usize];
                if nb.s2 == NO_SOURCE && nb.s1 != src {
                    queue.push_back((nbr, src, d + 1));
                }
            });
        }
        best
    }

    /// Visit the `2 * dim` lattice neighbors of a node.
    #[inline]
    pub(crate) fn for_each_neighbor(&self, id: u32, mut f: impl FnMut(u32)) {
        for &stride in &self.strides {
            let coord = (id / stride) % self.side;
            let up = if coord + 1 == self.side {
                id - (self.side - 1) * stride
            } else {
                id + stride
            };
            let down = if coord == 0 {
                id + (self.side - 1) * stride
            } else {
                id - stride
            };
            f(up);
            if self.side > 2 {
                f(down);
            }
        }
    }
}

/// Distribution of distances from a fixed node: the d-fold convolution of the
/// single-axis circular distance distribution.
fn distance_histogram(dim: u32, side: u32) -> Vec<u64> {
    let half = (side / 2) as usize;
    let mut axis = vec![0u64; half + 1];
    axis[0] = 1;
    for (j, slot) in axis.iter_mut().enumerate().skip(1) {
        // Two points per circular distance, except the antipode on even sides.
        *slot = if side % 2 == 0 && j == half { 1 } else { 2 };
    }
    let mut acc = vec![1u64];
    for _ in 0..dim {
        let mut next = vec![0u64; acc.len() + half];
        for (i, &a) in acc.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in axis.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        acc = next;
    }
    acc
}
