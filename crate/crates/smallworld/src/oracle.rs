//! Independent reference evaluators.
//!
//! Everything here recomputes costs from the definition with plain loops and
//! direct point-to-point distances — no breadth-first sweeps, no cached
//! serving structures, no accumulation engines. The optimized paths are
//! required by tests to agree with these evaluators, so the two routes must
//! stay algorithmically disjoint; resist the temptation to "speed up" this
//! module by calling into the production code.
//!
//! All entry points are guarded to small populations: they are quadratic or
//! worse by design.

use crate::cost::{total_cost, CostParams};
use crate::error::{Error, Result};
use crate::grid::{nid, GridSpec, NodeId};
use crate::scalar::{relative_gap, CostScalar};
use crate::Rational;

/// Largest population the quadratic cost evaluator accepts.
pub const ORACLE_COST_LIMIT: usize = 4096;
/// Largest population the cubic stability sweep and the exact-arithmetic
/// check accept.
pub const ORACLE_STABILITY_LIMIT: usize = 256;
/// Relative disagreement between exact-rational and double evaluation above
/// which the arithmetic check fails.
pub const EXACT_AGREEMENT_TOLERANCE: f64 = 1e-6;

fn guard(what: &'static str, limit: usize, actual: usize, hint: &'static str) -> Result<()> {
    if actual > limit {
        return Err(Error::SizeGuard { what, limit, actual, hint });
    }
    Ok(())
}

/// Cost of agent `v` holding `links`, recomputed from the definition: every
/// link priced directly, every other node charged its weighted minimum
/// direct distance to the serving set `links ∪ {v}`.
pub fn oracle_total_cost<T: CostScalar>(
    p: &CostParams<T>,
    g: &GridSpec,
    v: NodeId,
    links: &[NodeId],
) -> Result<T> {
    guard(
        "reference cost evaluation",
        ORACLE_COST_LIMIT,
        g.population(),
        "the reference evaluator is quadratic; use total_cost for larger grids",
    )?;
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
    let mut total = T::zero();
    for &u in &sorted {
        if u == v {
            return Err(Error::SelfLink);
        }
        total += p.beta().clone() * T::distance_pow(g.distance(v, u), p.alpha());
    }
    for w in g.node_ids() {
        if w == v || sorted.binary_search(&w).is_ok() {
            continue;
        }
        let mut dmin = g.distance(w, v);
        for &s in &sorted {
            dmin = dmin.min(g.distance(w, s));
        }
        total += p.weights().node_weight(g, v, w) * T::from_count(dmin);
    }
    Ok(total)
}

/// Per-agent stability verdict from exhaustive single-move enumeration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    /// Agent has no improving single link addition.
    pub add_stable: Vec<bool>,
    /// Agent has no improving single addition *or* deletion.
    pub toggle_stable: Vec<bool>,
}

impl OracleVerdict {
    pub fn all_add_stable(&self) -> bool {
        self.add_stable.iter().all(|&x| x)
    }

    pub fn all_toggle_stable(&self) -> bool {
        self.toggle_stable.iter().all(|&x| x)
    }
}

/// Exhaustively test every agent for improving single moves, evaluating each
/// candidate configuration from scratch with [`oracle_total_cost`]. A move
/// improves when it lowers the agent's cost by more than the scalar's
/// comparison tolerance.
pub fn oracle_stability<T: CostScalar>(
    p: &CostParams<T>,
    g: &GridSpec,
    links_of: &[Vec<NodeId>],
) -> Result<OracleVerdict> {
    guard(
        "reference stability sweep",
        ORACLE_STABILITY_LIMIT,
        g.population(),
        "the reference sweep is cubic; use the certification path for larger grids",
    )?;
    if links_of.len() != g.population() {
        return Err(Error::InvalidParameter(format!(
            "expected one link set per node ({}), got {}",
            g.population(),
            links_of.len()
        )));
    }
    let threshold = T::zero() - T::tolerance();
    let mut add_stable = Vec::with_capacity(links_of.len());
    let mut toggle_stable = Vec::with_capacity(links_of.len());
    for (vi, links) in links_of.iter().enumerate() {
        let v = nid(vi);
        let base = oracle_total_cost(p, g, v, links)?;
        let mut add_ok = true;
        for u in g.node_ids() {
            if u == v || links.contains(&u) {
                continue;
            }
            let mut with = links.clone();
            with.push(u);
            let delta = oracle_total_cost(p, g, v, &with)? - base.clone();
            if crate::scalar::lt(&delta, &threshold) {
                add_ok = false;
                break;
            }
        }
        let mut delete_ok = true;
        for &u in links {
            let without: Vec<NodeId> = links.iter().copied().filter(|&x| x != u).collect();
            let delta = oracle_total_cost(p, g, v, &without)? - base.clone();
            if crate::scalar::lt(&delta, &threshold) {
                delete_ok = false;
                break;
            }
        }
        add_stable.push(add_ok);
        toggle_stable.push(add_ok && delete_ok);
    }
    Ok(OracleVerdict { add_stable, toggle_stable })
}

/// Outcome of the exact-arithmetic audit of one cost evaluation.
#[derive(Clone, Debug)]
pub struct ExactCheck {
    /// Cost in exact rational arithmetic, from the reference evaluator.
    pub exact: Rational,
    /// Cost from the production double-precision path.
    pub float: f64,
    /// `|exact - float|` relative to `max(1, |exact|)`.
    pub relative_gap: f64,
    /// Whether the gap is within [`EXACT_AGREEMENT_TOLERANCE`].
    pub ok: bool,
}

/// Evaluate one agent's cost in exact rational arithmetic and compare the
/// production double-precision evaluation against it. Requires an integer
/// exponent (fractional powers have no exact representation).
pub fn oracle_exact_arith_check(
    p: &CostParams<f64>,
    g: &GridSpec,
    v: NodeId,
    links: &[NodeId],
) -> Result<ExactCheck> {
    guard(
        "exact arithmetic audit",
        ORACLE_STABILITY_LIMIT,
        g.population(),
        "exact rational sums get large; audit small grids",
    )?;
    let pe = p.to_exact()?;
    let exact = oracle_total_cost::<Rational>(&pe, g, v, links)?;
    let float = total_cost::<f64>(p, g, v, links)?;
    let gap = relative_gap(&exact, float);
    Ok(ExactCheck { exact, float, relative_gap: gap, ok: gap <= EXACT_AGREEMENT_TOLERANCE })
}
