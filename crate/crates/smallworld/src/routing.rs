//! Greedy grid routing: forward a packet from the current node to its
//! out-neighbor closest to the target in grid distance, and measure how long
//! those forwarding chains get across a whole network.
//!
//! Routing uses only each node's own links and the target's coordinates.
//! There is no fallback when no out-neighbor improves on the current node:
//! such a route reports `Stuck`, which is a meaningful property of the
//! network rather than an error.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, NodeId};
use crate::network::Network;
use crate::scalar::CostScalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// Largest population for which `routing_diameter` will evaluate every
/// ordered pair exactly.
pub const ROUTING_EXACT_CAP: usize = 4096;

// ─────────────────────────────── routes ────────────────────────────────

/// How a single greedy route ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RouteOutcome {
    /// The packet reached the target.
    Delivered,
    /// No out-neighbor of the current node was strictly closer to the target.
    Stuck,
    /// The hop budget ran out before the packet arrived.
    HopLimit,
}

impl RouteOutcome {
    /// Stable lowercase label used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            RouteOutcome::Delivered => "delivered",
            RouteOutcome::Stuck => "stuck",
            RouteOutcome::HopLimit => "hop_limit",
        }
    }
}

/// One greedy route with its full node sequence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RouteResult {
    pub source: NodeId,
    pub target: NodeId,
    /// Number of forwarding steps taken (path length minus one).
    pub hops: u64,
    /// Visited nodes in order, starting at `source`.
    pub path: Vec<NodeId>,
    pub outcome: RouteOutcome,
}

/// Default hop budget: four torus diameters, generous against every known
/// bound for networks this crate produces.
pub fn default_hop_limit(g: &GridSpec) -> u64 {
    let half_up = u64::from(g.side() / 2 + g.side() % 2);
    4 * u64::from(g.dim()) * half_up.max(1)
}

/// Next hop from `p` toward `t`: the linked node closest to `t` in grid
/// distance, ties broken by smallest id, and only if strictly closer than
/// `p` itself.
fn next_hop(g: &GridSpec, links: &[NodeId], p: NodeId, t: NodeId) -> Option<NodeId> {
    let mut best: Option<(u64, NodeId)> = None;
    for &u in links {
        let du = g.distance(u, t);
        // Links are sorted ascending, so strict improvement keeps the
        // smallest id among equally close candidates.
        if best.is_none_or(|(bd, _)| du < bd) {
            best = Some((du, u));
        }
    }
    match best {
        Some((bd, u)) if bd < g.distance(p, t) => Some(u),
        _ => None,
    }
}

/// Greedily route one packet from `source` to `target`, recording the path.
///
/// `source == target` delivers in zero hops. Requires `hop_limit >= 1`.
pub fn route<T: CostScalar>(
    net: &Network<T>,
    source: NodeId,
    target: NodeId,
    hop_limit: u64,
) -> Result<RouteResult> {
    if hop_limit < 1 {
        return Err(Error::InvalidParameter(format!(
            "hop_limit must be at least 1, got {hop_limit}"
        )));
    }
    let g = net.grid();
    g.node(u64::from(source.raw()))?;
    g.node(u64::from(target.raw()))?;

    let mut path = vec![source];
    let mut current = source;
    let mut outcome = RouteOutcome::HopLimit;
    if current == target {
        outcome = RouteOutcome::Delivered;
    } else {
        for _ in 0..hop_limit {
            match next_hop(g, net.links_of(current), current, target) {
                None => {
                    outcome = RouteOutcome::Stuck;
                    break;
                }
                Some(u) => {
                    path.push(u);
                    current = u;
                    if current == target {
                        outcome = RouteOutcome::Delivered;
                        break;
                    }
                }
            }
        }
    }
    Ok(RouteResult {
        source,
        target,
        hops: (path.len() - 1) as u64,
        path,
        outcome,
    })
}

/// Route without recording the path; used for bulk evaluation.
fn route_hops<T: CostScalar>(
    net: &Network<T>,
    source: NodeId,
    target: NodeId,
    hop_limit: u64,
) -> (u64, RouteOutcome) {
    if source == target {
        return (0, RouteOutcome::Delivered);
    }
    let g = net.grid();
    let mut current = source;
    let mut hops = 0u64;
    while hops < hop_limit {
        match next_hop(g, net.links_of(current), current, target) {
            None => return (hops, RouteOutcome::Stuck),
            Some(u) => {
                hops += 1;
                current = u;
                if current == target {
                    return (hops, RouteOutcome::Delivered);
                }
            }
        }
    }
    (hops, RouteOutcome::HopLimit)
}

/// Grid distance to the target at every node along the greedy route,
/// starting at the source. Delivered routes end at 0 and the sequence is
/// strictly decreasing by construction.
pub fn progress_profile<T: CostScalar>(
    net: &Network<T>,
    source: NodeId,
    target: NodeId,
) -> Result<Vec<u64>> {
    let r = route(net, source, target, default_hop_limit(net.grid()))?;
    let g = net.grid();
    Ok(r.path.iter().map(|&p| g.distance(p, target)).collect())
}

// ─────────────────────────── bulk evaluation ───────────────────────────

/// Which ordered pairs `routing_diameter` evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RoutingMode {
    /// Every ordered pair (s, t), s ≠ t. Population must not exceed
    /// [`ROUTING_EXACT_CAP`].
    Exact,
    /// `pairs` ordered pairs drawn seeded-uniform with s ≠ t.
    Sampled { pairs: u64 },
}

/// Aggregate routing figures over the evaluated pairs.
///
/// `max_hops` and `mean_hops` are taken over delivered routes only;
/// `stuck` counts every non-delivered route (no strictly closer neighbor,
/// or hop budget exhausted). All totals are integers, so parallel
/// aggregation is independent of thread count and split order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoutingStats {
    pub max_hops: u64,
    pub mean_hops: f64,
    pub delivered: u64,
    pub stuck: u64,
    pub evaluated: u64,
}

/// Draw `pairs` ordered pairs (s, t) with s ≠ t from a seeded generator.
pub fn sample_pairs(g: &GridSpec, pairs: u64, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    let n = g.population() as u64;
    if n < 2 {
        return Err(Error::InvalidParameter(
            "sampling ordered pairs needs at least two nodes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(pairs as usize);
    while (out.len() as u64) < pairs {
        let s = rng.random_range(0..n);
        let t = rng.random_range(0..n);
        if s != t {
            out.push((g.node(s)?, g.node(t)?));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Default)]
struct RouteTally {
    max_hops: u64,
    hop_total: u64,
    delivered: u64,
    stuck: u64,
    evaluated: u64,
}

impl RouteTally {
    fn absorb(mut self, other: RouteTally) -> RouteTally {
        self.max_hops = self.max_hops.max(other.max_hops);
        self.hop_total += other.hop_total;
        self.delivered += other.delivered;
        self.stuck += other.stuck;
        self.evaluated += other.evaluated;
        self
    }

    fn record(&mut self, hops: u64, outcome: RouteOutcome) {
        self.evaluated += 1;
        if outcome == RouteOutcome::Delivered {
            self.delivered += 1;
            self.hop_total += hops;
            self.max_hops = self.max_hops.max(hops);
        } else {
            self.stuck += 1;
        }
    }

    fn stats(self) -> RoutingStats {
        let mean_hops = if self.delivered == 0 {
            0.0
        } else {
            self.hop_total as f64 / self.delivered as f64
        };
        RoutingStats {
            max_hops: self.max_hops,
            mean_hops,
            delivered: self.delivered,
            stuck: self.stuck,
            evaluated: self.evaluated,
        }
    }
}

/// Measure greedy-routing hop counts across all ordered pairs (`Exact`) or a
/// seeded sample of them (`Sampled`), with the default hop budget.
///
/// Exact mode is refused above [`ROUTING_EXACT_CAP`] nodes; switch to
/// sampled mode there. The seed is only consumed in sampled mode.
pub fn routing_diameter<T: CostScalar>(
    net: &Network<T>,
    mode: RoutingMode,
    seed: u64,
) -> Result<RoutingStats> {
    let g = net.grid();
    let n = g.population();
    let hop_limit = default_hop_limit(g);
    let tally = match mode {
        RoutingMode::Exact => {
            if n > ROUTING_EXACT_CAP {
                return Err(Error::SizeGuard {
                    what: "exact routing diameter",
                    limit: ROUTING_EXACT_CAP,
                    actual: n,
                    hint: "use sampled mode with a pair budget and seed",
                });
            }
            (0..n)
                .into_par_iter()
                .map(|s| {
                    let source = crate::grid::nid(s);
                    let mut t = RouteTally::default();
                    for target in g.node_ids() {
                        if target != source {
                            let (hops, outcome) = route_hops(net, source, target, hop_limit);
                            t.record(hops, outcome);
                        }
                    }
                    t
                })
                .reduce(RouteTally::default, RouteTally::absorb)
        }
        RoutingMode::Sampled { pairs } => {
            if pairs < 1 {
                return Err(Error::InvalidParameter(
                    "sampled routing needs at least one pair".into(),
                ));
            }
            let drawn = sample_pairs(g, pairs, seed)?;
            drawn
                .par_iter()
                .map(|&(s, t)| {
                    let mut tally = RouteTally::default();
                    let (hops, outcome) = route_hops(net, s, t, hop_limit);
                    tally.record(hops, outcome);
                    tally
                })
                .reduce(RouteTally::default, RouteTally::absorb)
        }
    };
    Ok(tally.stats())
}

/// Route each given pair and return the full results, in input order.
pub fn route_many<T: CostScalar>(
    net: &Network<T>,
    pairs: &[(NodeId, NodeId)],
    hop_limit: u64,
) -> Result<Vec<RouteResult>> {
    pairs
        .par_iter()
        .map(|&(s, t)| route(net, s, t, hop_limit))
        .collect()
}

// ─────────────────────────────── dumps ─────────────────────────────────

/// Streaming writer for route CSV rows `source,target,hops,outcome`, plus a
/// `path` column (nodes joined by `>`) when requested. Streams so that
/// all-pairs dumps never hold every route in memory.
pub struct RouteCsvWriter<W: Write> {
    writer: csv::Writer<W>,
    include_paths: bool,
}

impl<W: Write> RouteCsvWriter<W> {
    /// Open a writer and emit the header.
    pub fn new(out: W, include_paths: bool) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        let header: &[&str] = if include_paths {
            &["source", "target", "hops", "outcome", "path"]
        } else {
            &["source", "target", "hops", "outcome"]
        };
        writer.write_record(header).map_err(csv_error)?;
        Ok(RouteCsvWriter { writer, include_paths })
    }

    /// Append one route row.
    pub fn write(&mut self, r: &RouteResult) -> Result<()> {
        let mut record = vec![
            r.source.to_string(),
            r.target.to_string(),
            r.hops.to_string(),
            r.outcome.label().to_string(),
        ];
        if self.include_paths {
            let path: Vec<String> = r.path.iter().map(|p| p.to_string()).collect();
            record.push(path.join(">"));
        }
        self.writer.write_record(&record).map_err(csv_error)
    }

    /// Flush the underlying stream.
    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Write routes as CSV rows; see [`RouteCsvWriter`] for the format.
pub fn write_route_csv<W: Write>(
    out: W,
    routes: &[RouteResult],
    include_paths: bool,
) -> Result<()> {
    let mut w = RouteCsvWriter::new(out, include_paths)?;
    for r in routes {
        w.write(r)?;
    }
    w.finish()
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("route CSV: {e}"))
}

// ─────────────────────────────── tests ─────────────────────────────────

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::CostParams;
    use crate::network::{Init, Network};

    fn ring_net(side: u32, init: Init) -> Network {
        let g = GridSpec::new(1, side).unwrap();
        let p = CostParams::<f64>::new(2.0, 0.5).unwrap();
        Network::init(g, p, init, 0).unwrap()
    }

    fn complete_net(side: u32) -> Network {
        let g = GridSpec::new(1, side).unwrap();
        let p = CostParams::<f64>::new(2.0, 0.5).unwrap();
        let n = g.population() as u64;
        let links: Vec<Vec<NodeId>> = (0..n)
            .map(|v| (0..n).filter(|&u| u != v).map(|u| g.node(u).unwrap()).collect())
            .collect();
        Network::from_links(g, p, links).unwrap()
    }

    #[test]
    fn source_equals_target_delivers_in_zero_hops() {
        let net = ring_net(9, Init::Empty);
        let v = net.grid().node(3).unwrap();
        let r = route(&net, v, v, 5).unwrap();
        assert_eq!(r.outcome, RouteOutcome::Delivered);
        assert_eq!(r.hops, 0);
        assert_eq!(r.path, vec![v]);
    }

    #[test]
    fn ring_walk_follows_grid_distance() {
        let net = ring_net(9, Init::GridNeighbors);
        let g = net.grid();
        let r = route(&net, g.node(0).unwrap(), g.node(4).unwrap(), 20).unwrap();
        assert_eq!(r.outcome, RouteOutcome::Delivered);
        assert_eq!(r.hops, 4);
        let want: Vec<NodeId> = [0u64, 1, 2, 3, 4].iter().map(|&i| g.node(i).unwrap()).collect();
        assert_eq!(r.path, want);
    }

    #[test]
    fn empty_network_gets_stuck_immediately() {
        let net = ring_net(9, Init::Empty);
        let g = net.grid();
        let r = route(&net, g.node(0).unwrap(), g.node(4).unwrap(), 20).unwrap();
        assert_eq!(r.outcome, RouteOutcome::Stuck);
        assert_eq!(r.hops, 0);
    }

    #[test]
    fn hop_budget_cuts_the_walk_short() {
        let net = ring_net(9, Init::GridNeighbors);
        let g = net.grid();
        let r = route(&net, g.node(0).unwrap(), g.node(4).unwrap(), 2).unwrap();
        assert_eq!(r.outcome, RouteOutcome::HopLimit);
        assert_eq!(r.hops, 2);
        assert_eq!(r.path.len(), 3);
    }

    #[test]
    fn zero_hop_limit_is_rejected() {
        let net = ring_net(9, Init::GridNeighbors);
        let g = net.grid();
        let err = route(&net, g.node(0).unwrap(), g.node(1).unwrap(), 0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn complete_network_delivers_every_pair_in_one_hop() {
        let net = complete_net(7);
        let stats = routing_diameter(&net, RoutingMode::Exact, 0).unwrap();
        assert_eq!(stats.max_hops, 1);
        assert_eq!(stats.mean_hops, 1.0);
        assert_eq!(stats.stuck, 0);
        assert_eq!(stats.evaluated, 42);
        assert_eq!(stats.delivered, 42);
    }

    #[test]
    fn grid_neighbor_ring_diameter_matches_closed_form() {
        let net = ring_net(9, Init::GridNeighbors);
        let stats = routing_diameter(&net, RoutingMode::Exact, 0).unwrap();
        assert_eq!(stats.max_hops, 4);
        assert_eq!(stats.stuck, 0);
        // Each source sees two nodes at each distance 1..=4.
        assert_eq!(stats.mean_hops, 2.5);
    }

    #[test]
    fn exact_mode_refuses_oversized_populations() {
        let net = ring_net(4200, Init::Empty);
        let err = routing_diameter(&net, RoutingMode::Exact, 0).unwrap_err();
        assert!(matches!(err, Error::SizeGuard { .. }));
    }

    #[test]
    fn sampled_max_is_bounded_by_exact_max() {
        let g = GridSpec::new(1, 64).unwrap();
        let p = CostParams::<f64>::new(2.0, 0.5).unwrap();
        let net = Network::init(g, p, Init::Kleinberg { extra: 2 }, 11).unwrap();
        let exact = routing_diameter(&net, RoutingMode::Exact, 0).unwrap();
        let sampled =
            routing_diameter(&net, RoutingMode::Sampled { pairs: 500 }, 5).unwrap();
        assert!(sampled.max_hops <= exact.max_hops);
        assert_eq!(sampled.evaluated, 500);
    }

    #[test]
    fn sampling_is_deterministic_in_the_seed() {
        let net = ring_net(50, Init::GridNeighbors);
        let a = routing_diameter(&net, RoutingMode::Sampled { pairs: 200 }, 9).unwrap();
        let b = routing_diameter(&net, RoutingMode::Sampled { pairs: 200 }, 9).unwrap();
        assert_eq!(a, b);
        let pairs_a = sample_pairs(net.grid(), 50, 3).unwrap();
        let pairs_b = sample_pairs(net.grid(), 50, 3).unwrap();
        assert_eq!(pairs_a, pairs_b);
    }

    #[test]
    fn progress_profile_strictly_decreases_to_zero() {
        let net = ring_net(9, Init::GridNeighbors);
        let g = net.grid();
        let prof = progress_profile(&net, g.node(0).unwrap(), g.node(4).unwrap()).unwrap();
        assert_eq!(prof, vec![4, 3, 2, 1, 0]);
        for w in prof.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn default_budget_is_four_torus_diameters() {
        assert_eq!(default_hop_limit(&GridSpec::new(1, 9).unwrap()), 20);
        assert_eq!(default_hop_limit(&GridSpec::new(2, 8).unwrap()), 32);
        assert_eq!(default_hop_limit(&GridSpec::new(1, 3).unwrap()), 8);
    }

    #[test]
    fn csv_dump_includes_paths_only_on_request() {
        let net = ring_net(9, Init::GridNeighbors);
        let g = net.grid();
        let routes = vec![route(&net, g.node(0).unwrap(), g.node(2).unwrap(), 20).unwrap()];
        let mut plain = Vec::new();
        write_route_csv(&mut plain, &routes, false).unwrap();
        assert_eq!(
            String::from_utf8(plain).unwrap(),
            "source,target,hops,outcome\n0,2,2,delivered\n"
        );
        let mut with_paths = Vec::new();
        write_route_csv(&mut with_paths, &routes, true).unwrap();
        assert_eq!(
            String::from_utf8(with_paths).unwrap(),
            "source,target,hops,outcome,path\n0,2,2,delivered,0>1>2\n"
        );
    }

    #[test]
    fn ties_forward_to_the_smallest_id() {
        // From node 0 on a 9-ring with links to 1 and 8 only, target 0's
        // antipode-ish node 4 has candidates at distance 3 (via 1) and
        // 4 (via 8): strictly better wins. For a genuine tie route toward a
        // node equidistant from both links: target 4 vs links {3, 5} from 0.
        let g = GridSpec::new(1, 9).unwrap();
        let p = CostParams::<f64>::new(2.0, 0.5).unwrap();
        let links: Vec<Vec<NodeId>> = (0..9u64)
            .map(|v| {
                if v == 0 {
                    vec![g.node(3).unwrap(), g.node(5).unwrap()]
                } else {
                    Vec::new()
                }
            })
            .collect();
        let net = Network::from_links(g, p, links).unwrap();
        let g = net.grid();
        let r = route(&net, g.node(0).unwrap(), g.node(4).unwrap(), 20).unwrap();
        // Both 3 and 5 sit at distance 1 from 4; the smaller id is taken.
        assert_eq!(r.path[1], g.node(3).unwrap());
    }
}
