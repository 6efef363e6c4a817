//! Degree statistics, stretch-constant audits, growth-form fits, and the
//! parameter-sweep harness that turns stabilized networks into CSV reports.
//!
//! The audits quantify two structural claims about stable networks: every
//! node should have a serving point within a distance power of its grid
//! distance (the travel bound), and no agent should aim many links into one
//! small ball (the ball audit). Both are measured constants, reported for
//! flatness checks across a population sweep rather than asserted against
//! fixed thresholds.

use crate::cost::CostParams;
use crate::dynamics::{
    canonical_stabilize, default_max_rounds, stabilize, MoveSet, Notion, Schedule,
};
use crate::error::{Error, Result};
use crate::grid::{nid, GridSpec, NodeId};
use crate::network::{Init, Network};
use crate::routing::{routing_diameter, sample_pairs, RoutingMode, ROUTING_EXACT_CAP};
use crate::scalar::CostScalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

/// Largest population for which the stretch audits scan every ordered pair.
pub const MEASURE_EXACT_CAP: usize = 4096;

/// Source nodes scanned by the sampled travel-bound audit.
pub const MEASURE_SAMPLE_SOURCES: usize = 256;

// ─────────────────────────────── degrees ───────────────────────────────

/// Exact out-degree counts for a network.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeStats {
    pub max: u64,
    pub mean: f64,
    /// `histogram[k]` = number of agents with exactly `k` links.
    pub histogram: Vec<u64>,
}

/// Count every agent's out-degree.
pub fn degree_stats<T: CostScalar>(net: &Network<T>) -> DegreeStats {
    let n = net.grid().population();
    let max = net.links().iter().map(Vec::len).max().unwrap_or(0);
    let mut histogram = vec![0u64; max + 1];
    let mut total = 0u64;
    for set in net.links() {
        histogram[set.len()] += 1;
        total += set.len() as u64;
    }
    DegreeStats {
        max: max as u64,
        mean: total as f64 / n as f64,
        histogram,
    }
}

// ──────────────────────────── stretch audits ───────────────────────────

/// Distance from `u` to the serving set of `v` (its link targets and `v`
/// itself).
fn served_distance<T: CostScalar>(net: &Network<T>, v: NodeId, u: NodeId) -> u64 {
    let g = net.grid();
    let mut best = g.distance(v, u);
    for &w in net.links_of(v) {
        best = best.min(g.distance(w, u));
        if best == 0 {
            break;
        }
    }
    best
}

/// Worst ratio of serving distance to the distance power `d(v,u)^(α/(d+1))`,
/// floored at 1.
///
/// Exact over all ordered pairs up to [`MEASURE_EXACT_CAP`] nodes; above
/// that, [`MEASURE_SAMPLE_SOURCES`] seeded source nodes are scanned against
/// the full population. On networks where adding links no longer pays, this
/// constant should sit in a flat band as the population grows.
pub fn travel_bound_constant<T: CostScalar>(net: &Network<T>, seed: u64) -> f64 {
    let g = net.grid();
    let n = g.population();
    let expo = net.params().alpha_f64() / f64::from(g.dim() + 1);
    let worst_from = |v: NodeId| -> f64 {
        let mut worst = 0.0f64;
        for u in g.node_ids() {
            if u == v {
                continue;
            }
            let l = g.distance(v, u);
            let denom = (l as f64).powf(expo).max(1.0);
            worst = worst.max(served_distance(net, v, u) as f64 / denom);
        }
        worst
    };
    if n <= MEASURE_EXACT_CAP {
        (0..n)
            .into_par_iter()
            .map(|v| worst_from(nid(v)))
            .reduce(|| 0.0, f64::max)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sources: Vec<usize> = (0..MEASURE_SAMPLE_SOURCES)
            .map(|_| rng.random_range(0..n))
            .collect();
        sources.sort_unstable();
        sources.dedup();
        sources
            .into_par_iter()
            .map(|v| worst_from(nid(v)))
            .reduce(|| 0.0, f64::max)
    }
}

/// Largest number of links one agent aims into a ball of radius
/// `floor(epsilon * l^(α/(d+1)))` around a node at distance `l` from it.
///
/// Exact over all ordered pairs up to [`MEASURE_EXACT_CAP`] nodes, else over
/// `samples` seeded pairs. Requires `0 < epsilon < 1`.
pub fn ball_link_audit<T: CostScalar>(
    net: &Network<T>,
    epsilon: f64,
    samples: u64,
    seed: u64,
) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ball audit radius factor must lie strictly between 0 and 1, got {epsilon}"
        )));
    }
    let g = net.grid();
    let n = g.population();
    let expo = net.params().alpha_f64() / f64::from(g.dim() + 1);
    let count_for = |v: NodeId, u: NodeId| -> u64 {
        let l = g.distance(v, u);
        let radius = (epsilon * (l as f64).powf(expo)).floor() as u64;
        net.links_of(v)
            .iter()
            .filter(|&&w| g.distance(w, u) <= radius)
            .count() as u64
    };
    let worst = if n <= MEASURE_EXACT_CAP {
        (0..n)
            .into_par_iter()
            .map(|v| {
                let v = nid(v);
                let mut worst = 0u64;
                for u in g.node_ids() {
                    if u != v {
                        worst = worst.max(count_for(v, u));
                    }
                }
                worst
            })
            .reduce(|| 0, u64::max)
    } else {
        if samples < 1 {
            return Err(Error::InvalidParameter(
                "sampled ball audit needs at least one pair".into(),
            ));
        }
        sample_pairs(g, samples, seed)?
            .par_iter()
            .map(|&(v, u)| count_for(v, u))
            .reduce(|| 0, u64::max)
    };
    Ok(worst as f64)
}

// ───────────────────────────── growth fits ─────────────────────────────

/// Functional forms fitted to metric-versus-population data.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GrowthModel {
    /// `c · log2(log2 n)`
    LogLog,
    /// `c · log2 n`
    Log,
    /// `c · n^gamma`
    Poly,
}

impl GrowthModel {
    /// Stable lowercase label used in summaries.
    pub fn label(self) -> &'static str {
        match self {
            GrowthModel::LogLog => "loglog",
            GrowthModel::Log => "log",
            GrowthModel::Poly => "poly",
        }
    }
}

/// One fitted model with its root-mean-square relative residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthFit {
    pub model: GrowthModel,
    pub coefficient: f64,
    /// Fitted exponent; only the polynomial model has one.
    pub exponent: Option<f64>,
    /// RMS of `(prediction - y) / y` over the data.
    pub residual: f64,
}

/// All fitted models plus the best one by residual.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthComparison {
    pub fits: Vec<GrowthFit>,
    pub best: GrowthModel,
}

impl GrowthComparison {
    /// The fit entry for a particular model, if it was produced.
    pub fn fit(&self, model: GrowthModel) -> Option<&GrowthFit> {
        self.fits.iter().find(|f| f.model == model)
    }
}

fn rms_relative(points: &[(f64, f64)], predict: impl Fn(f64) -> f64) -> f64 {
    let total: f64 = points
        .iter()
        .map(|&(x, y)| {
            let rel = (predict(x) - y) / y;
            rel * rel
        })
        .sum();
    (total / points.len() as f64).sqrt()
}

/// Fit `c·log2(log2 n)`, `c·log2 n`, and `c·n^gamma` to (population, value)
/// points and pick the form with the smallest RMS relative residual.
///
/// Log forms are through-origin least squares; the polynomial is a log-log
/// regression. Points need positive values and populations of at least 3;
/// fewer than two distinct populations yield no fit.
pub fn fit_growth(points: &[(u64, f64)]) -> Option<GrowthComparison> {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(n, y)| n >= 3 && y > 0.0)
        .map(|&(n, y)| (n as f64, y))
        .collect();
    let mut populations: Vec<u64> = points.iter().map(|&(n, _)| n).collect();
    populations.sort_unstable();
    populations.dedup();
    if data.len() < 2 || populations.len() < 2 {
        return None;
    }

    let through_origin = |regressor: &dyn Fn(f64) -> f64| -> f64 {
        let num: f64 = data.iter().map(|&(x, y)| regressor(x) * y).sum();
        let den: f64 = data.iter().map(|&(x, _)| regressor(x) * regressor(x)).sum();
        num / den
    };

    let mut fits = Vec::with_capacity(3);

    let loglog = |x: f64| x.log2().log2();
    let c = through_origin(&loglog);
    fits.push(GrowthFit {
        model: GrowthModel::LogLog,
        coefficient: c,
        exponent: None,
        residual: rms_relative(&data, |x| c * loglog(x)),
    });

    let log = |x: f64| x.log2();
    let c = through_origin(&log);
    fits.push(GrowthFit {
        model: GrowthModel::Log,
        coefficient: c,
        exponent: None,
        residual: rms_relative(&data, |x| c * log(x)),
    });

    // Ordinary least squares on (ln n, ln y).
    let k = data.len() as f64;
    let mean_x: f64 = data.iter().map(|&(x, _)| x.ln()).sum::<f64>() / k;
    let mean_y: f64 = data.iter().map(|&(_, y)| y.ln()).sum::<f64>() / k;
    let var: f64 = data
        .iter()
        .map(|&(x, _)| {
            let d = x.ln() - mean_x;
            d * d
        })
        .sum();
    let cov: f64 = data
        .iter()
        .map(|&(x, y)| (x.ln() - mean_x) * (y.ln() - mean_y))
        .sum();
    let gamma = cov / var;
    let c = (mean_y - gamma * mean_x).exp();
    fits.push(GrowthFit {
        model: GrowthModel::Poly,
        coefficient: c,
        exponent: Some(gamma),
        residual: rms_relative(&data, |x| c * x.powf(gamma)),
    });

    let mut best = fits[0];
    for f in &fits[1..] {
        if f.residual < best.residual {
            best = *f;
        }
    }
    Some(GrowthComparison { fits, best: best.model })
}

// ─────────────────────────────── sweeps ────────────────────────────────

/// How each configuration in a sweep is driven to stability.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilizeMode {
    /// Every agent runs its own improvement loop.
    PerAgent,
    /// One agent is optimized and its links are translated to all agents
    /// (uniform weights only).
    Canonical,
}

impl StabilizeMode {
    /// Stable lowercase label used in file names and flags.
    pub fn label(self) -> &'static str {
        match self {
            StabilizeMode::PerAgent => "per-agent",
            StabilizeMode::Canonical => "canonical",
        }
    }
}

/// Sweep sizes that finish full stabilization in minutes on one core.
pub fn default_sides(dim: u32) -> Vec<u32> {
    match dim {
        1 => vec![256, 1024, 4096, 16384],
        2 => vec![8, 16, 32, 64],
        _ => vec![4, 6, 8],
    }
}

/// Link-price multiplier low enough that distant links pay for themselves
/// at desk scale.
pub fn default_beta(dim: u32) -> f64 {
    if dim == 1 {
        0.5
    } else {
        0.1
    }
}

/// Full description of one parameter sweep.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub dim: u32,
    pub sides: Vec<u32>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    /// Stability notion to drive and certify: add-only or add/delete.
    pub notion: Notion,
    pub seeds: Vec<u64>,
    pub mode: StabilizeMode,
    pub schedule: Schedule,
    pub init: Init,
    /// Round cap per configuration; `None` picks the population default.
    pub max_rounds: Option<u64>,
    /// Ordered pairs routed when the population exceeds the exact cap.
    pub route_samples: u64,
    pub ball_epsilon: f64,
    /// Pairs audited when the population exceeds the exact cap.
    pub ball_samples: u64,
    /// Keep each stabilized network in the outcome (one per row).
    pub keep_networks: bool,
}

impl SweepConfig {
    /// A single-seed toggle sweep at the regime boundary `alpha = d + 1`
    /// with this crate's default sizes; callers override fields as needed.
    pub fn new(dim: u32) -> SweepConfig {
        SweepConfig {
            dim,
            sides: default_sides(dim),
            alphas: vec![f64::from(dim + 1)],
            betas: vec![default_beta(dim)],
            notion: Notion::Toggle,
            seeds: vec![1],
            mode: StabilizeMode::Canonical,
            schedule: Schedule::RoundRobin,
            init: Init::Empty,
            max_rounds: None,
            route_samples: 100_000,
            ball_epsilon: 0.25,
            ball_samples: 200_000,
            keep_networks: false,
        }
    }
}

/// One row of the sweep report: a stabilized configuration and its
/// measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub dim: u32,
    pub side: u32,
    pub population: u64,
    pub alpha: f64,
    pub beta: f64,
    pub notion: Notion,
    pub seed: u64,
    pub max_degree: u64,
    pub mean_degree: f64,
    pub max_hops: u64,
    pub mean_hops: f64,
    pub stuck: u64,
    pub travel_c: f64,
    pub ball_c: f64,
    pub rounds: u64,
    pub truncated: bool,
    pub runtime_ms: u64,
    /// Whether the exhaustive certificate passed for the requested notion.
    /// Carried for in-process consumers; not a report column.
    pub certified: bool,
}

/// A growth-fit comparison for one metric of one parameter combination.
#[derive(Clone, Debug, PartialEq)]
pub struct RegimeFit {
    pub dim: u32,
    pub alpha: f64,
    pub beta: f64,
    pub notion: Notion,
    /// `"max_degree"` or `"max_hops"`.
    pub metric: &'static str,
    pub comparison: GrowthComparison,
}

/// Everything a sweep produced: report rows, per-regime fits, and (when
/// requested) the stabilized networks, one per row.
#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<RegimeFit>,
    pub networks: Vec<Network<f64>>,
}

/// Stabilize, certify, and measure every configuration in the sweep.
///
/// Configurations run in a fixed nested order (alpha, beta, side, seed).
/// Truncated stabilizations are recorded in their row and the sweep
/// continues; hard errors (invalid parameters) abort it. All columns except
/// `runtime_ms` regenerate identically from the same config and seeds.
pub fn regime_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    if cfg.sides.is_empty() || cfg.alphas.is_empty() || cfg.betas.is_empty() || cfg.seeds.is_empty()
    {
        return Err(Error::InvalidParameter(
            "sweep needs at least one side, alpha, beta, and seed".into(),
        ));
    }
    if !(cfg.ball_epsilon > 0.0 && cfg.ball_epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ball audit radius factor must lie strictly between 0 and 1, got {}",
            cfg.ball_epsilon
        )));
    }
    let mut rows = Vec::new();
    let mut networks = Vec::new();
    for &alpha in &cfg.alphas {
        for &beta in &cfg.betas {
            for &side in &cfg.sides {
                for &seed in &cfg.seeds {
                    let (row, net) = sweep_one(cfg, alpha, beta, side, seed)?;
                    rows.push(row);
                    if cfg.keep_networks {
                        networks.push(net);
                    }
                }
            }
        }
    }
    let fits = regime_fits(cfg, &rows);
    Ok(SweepOutcome { rows, fits, networks })
}

fn sweep_one(
    cfg: &SweepConfig,
    alpha: f64,
    beta: f64,
    side: u32,
    seed: u64,
) -> Result<(SweepRow, Network<f64>)> {
    let grid = GridSpec::new(cfg.dim, side)?;
    let params = CostParams::<f64>::new(alpha, beta)?;
    let population = grid.population();
    let started = Instant::now();

    let initial = Network::init(grid, params, cfg.init, seed)?;
    let moves = match cfg.notion {
        Notion::Add => MoveSet::AddOnly,
        Notion::Toggle => MoveSet::AddDelete,
    };
    let max_rounds = cfg.max_rounds.unwrap_or_else(|| default_max_rounds(population));
    let out = match cfg.mode {
        StabilizeMode::PerAgent => stabilize(&initial, moves, cfg.schedule, max_rounds, seed)?,
        StabilizeMode::Canonical => canonical_stabilize(&initial, moves, max_rounds, seed)?,
    };

    let degrees = degree_stats(&out.network);
    let routing_mode = if population <= ROUTING_EXACT_CAP {
        RoutingMode::Exact
    } else {
        RoutingMode::Sampled { pairs: cfg.route_samples }
    };
    let routing = routing_diameter(&out.network, routing_mode, seed)?;
    let travel_c = travel_bound_constant(&out.network, seed);
    let ball_c = ball_link_audit(&out.network, cfg.ball_epsilon, cfg.ball_samples, seed)?;

    let row = SweepRow {
        dim: cfg.dim,
        side,
        population: population as u64,
        alpha,
        beta,
        notion: cfg.notion,
        seed,
        max_degree: degrees.max,
        mean_degree: degrees.mean,
        max_hops: routing.max_hops,
        mean_hops: routing.mean_hops,
        stuck: routing.stuck,
        travel_c,
        ball_c,
        rounds: out.rounds,
        truncated: out.truncated,
        runtime_ms: started.elapsed().as_millis() as u64,
        certified: out.certificate.passes(),
    };
    Ok((row, out.network))
}

fn regime_fits(cfg: &SweepConfig, rows: &[SweepRow]) -> Vec<RegimeFit> {
    let mut fits = Vec::new();
    for &alpha in &cfg.alphas {
        for &beta in &cfg.betas {
            let mut degree_points = Vec::new();
            let mut hop_points = Vec::new();
            for &side in &cfg.sides {
                let group: Vec<&SweepRow> = rows
                    .iter()
                    .filter(|r| r.alpha == alpha && r.beta == beta && r.side == side)
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let k = group.len() as f64;
                let population = group[0].population;
                let mean =
                    |f: &dyn Fn(&SweepRow) -> f64| group.iter().map(|r| f(r)).sum::<f64>() / k;
                degree_points.push((population, mean(&|r| r.max_degree as f64)));
                hop_points.push((population, mean(&|r| r.max_hops as f64)));
            }
            for (metric, points) in [("max_degree", &degree_points), ("max_hops", &hop_points)] {
                if let Some(comparison) = fit_growth(points) {
                    fits.push(RegimeFit {
                        dim: cfg.dim,
                        alpha,
                        beta,
                        notion: cfg.notion,
                        metric,
                        comparison,
                    });
                }
            }
        }
    }
    fits
}

/// Degree-growth probe for grids of dimension at least 2 with exponents
/// above the `d + 1` boundary, where the flat-degree claim is unproven.
///
/// A control configuration at exactly `alpha = d + 1` is appended for
/// contrast. Results are evidence, not asserted bounds — summaries carry an
/// `evidence-only` status.
pub fn conjecture_probe(cfg: &SweepConfig) -> Result<SweepOutcome> {
    if cfg.dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "the degree-growth probe needs dimension at least 2, got {}",
            cfg.dim
        )));
    }
    let boundary = f64::from(cfg.dim + 1);
    for &alpha in &cfg.alphas {
        if alpha <= boundary {
            return Err(Error::InvalidParameter(format!(
                "probe exponents must exceed d + 1 = {boundary}; got {alpha} \
                 (the control at the boundary is added automatically)"
            )));
        }
    }
    let mut probe = cfg.clone();
    probe.notion = Notion::Toggle;
    probe.alphas.push(boundary);
    regime_sweep(&probe)
}

// ─────────────────────────────── reports ───────────────────────────────

/// Column order of the sweep report CSV.
pub const REPORT_COLUMNS: [&str; 17] = [
    "d",
    "side",
    "n",
    "alpha",
    "beta",
    "notion",
    "seed",
    "max_degree",
    "mean_degree",
    "max_hops",
    "mean_hops",
    "stuck",
    "travel_c",
    "ball_c",
    "rounds",
    "truncated",
    "runtime_ms",
];

/// Render sweep rows as CSV with the fixed [`REPORT_COLUMNS`] header.
///
/// Every column except `runtime_ms` is reproducible byte-for-byte from the
/// sweep config; `runtime_ms` is wall-clock and should be ignored when
/// comparing reports.
pub fn report_csv(rows: &[SweepRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_COLUMNS).expect("csv row");
    for r in rows {
        w.write_record(&[
            r.dim.to_string(),
            r.side.to_string(),
            r.population.to_string(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.notion.label().to_string(),
            r.seed.to_string(),
            r.max_degree.to_string(),
            r.mean_degree.to_string(),
            r.max_hops.to_string(),
            r.mean_hops.to_string(),
            r.stuck.to_string(),
            r.travel_c.to_string(),
            r.ball_c.to_string(),
            r.rounds.to_string(),
            r.truncated.to_string(),
            r.runtime_ms.to_string(),
        ])
        .expect("csv row");
    }
    String::from_utf8(w.into_inner().expect("csv flush")).expect("csv utf8")
}

#[derive(Serialize)]
struct ModelEntry {
    model: &'static str,
    coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    exponent: Option<f64>,
    residual: f64,
}

#[derive(Serialize)]
struct FitEntry {
    d: u32,
    alpha: f64,
    beta: f64,
    notion: &'static str,
    metric: &'static str,
    best: &'static str,
    models: Vec<ModelEntry>,
}

#[derive(Serialize)]
struct SummaryFile {
    status: &'static str,
    fits: Vec<FitEntry>,
}

/// Render the per-regime fit summary as pretty JSON (trailing newline).
///
/// `evidence_only` marks probes of unproven regimes; their fits are
/// reported but must not be read as verified bounds.
pub fn sweep_summary_json(outcome: &SweepOutcome, evidence_only: bool) -> String {
    let fits = outcome
        .fits
        .iter()
        .map(|f| FitEntry {
            d: f.dim,
            alpha: f.alpha,
            beta: f.beta,
            notion: f.notion.label(),
            metric: f.metric,
            best: f.comparison.best.label(),
            models: f
                .comparison
                .fits
                .iter()
                .map(|m| ModelEntry {
                    model: m.model.label(),
                    coefficient: m.coefficient,
                    exponent: m.exponent,
                    residual: m.residual,
                })
                .collect(),
        })
        .collect();
    let file = SummaryFile {
        status: if evidence_only { "evidence-only" } else { "measured" },
        fits,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("summary serialization");
    text.push('\n');
    text
}

// ─────────────────────────────── tests ─────────────────────────────────
