//! Command-line driver: build grid networks, run them to stability, route
//! packets greedily, verify stability and stretch properties, and sweep
//! parameter grids into CSV/JSON reports.
//!
//! Every run is deterministic in its `--seed`; `--threads` changes wall
//! time, never output bytes (the `runtime_ms` report column is the one
//! wall-clock value).

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use smallworld::{
    ball_link_audit, canonical_stabilize, certify, conjecture_probe, default_beta,
    default_hop_limit, default_max_rounds, default_sides, regime_sweep, report_csv, route,
    route_many, routing_diameter, stabilize, sweep_summary_json, travel_bound_constant,
    CostParams, GridSpec, Init, MoveSet, Network, Notion, RouteCsvWriter, RouteOutcome,
    RouteResult, RoutingMode, Schedule, StabilizeMode, StabilizeOutcome, SweepConfig, Weights,
    ROUTING_EXACT_CAP,
};
use std::fs;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit code for runs that completed but did not reach the requested state
/// (truncated stabilization, failed verification), as opposed to hard errors.
const EXIT_UNSETTLED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "smallworld",
    version,
    about = "Strategic link formation on toroidal grids: build, stabilize, route, verify, sweep",
    propagate_version = true
)]
struct Cli {
    /// Cap the worker thread pool (default: all cores). Outputs are
    /// identical for every value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a network snapshot from a named initial condition.
    Build(BuildArgs),
    /// Run best-response dynamics on a snapshot until stable (or capped).
    Stabilize(StabilizeArgs),
    /// Route packets greedily and report hop statistics.
    Route(RouteArgs),
    /// Certify stability notions and measure stretch constants.
    Verify(VerifyArgs),
    /// Stabilize and measure a whole parameter grid into report files.
    Sweep(SweepArgs),
}

// ─────────────────────────────── build ─────────────────────────────────

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    /// No links.
    Empty,
    /// Links to the 2d grid neighbors.
    GridNeighbors,
    /// Grid neighbors plus seeded long-range links (distance-power law).
    Kleinberg,
}

#[derive(Args)]
struct BuildArgs {
    /// Grid dimension.
    #[arg(long, default_value_t = 1)]
    d: u32,
    /// Side length per axis (population is side^d).
    #[arg(long)]
    side: u32,
    /// Link-cost exponent [default: d + 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Link-cost multiplier [default: 0.5 for d=1, else 0.1].
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = InitArg::Empty)]
    init: InitArg,
    /// Long-range links per agent for the kleinberg init.
    #[arg(long, default_value_t = 1)]
    long_links: u32,
    /// Weight table CSV (columns v,u,weight); store it next to the
    /// snapshot or pass an absolute path so reloads can find it.
    #[arg(long, conflicts_with = "proximity")]
    weights: Option<PathBuf>,
    /// Proximity weighting w_v(u) = distance^(-gamma).
    #[arg(long)]
    proximity: Option<f64>,
    /// Seed for the kleinberg init's link draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Snapshot path to write.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_build(a: &BuildArgs) -> Result<ExitCode> {
    let grid = GridSpec::new(a.d, a.side)?;
    let alpha = a.alpha.unwrap_or(f64::from(a.d + 1));
    let beta = a.beta.unwrap_or_else(|| default_beta(a.d));
    let mut params = CostParams::<f64>::new(alpha, beta)?;
    if let Some(path) = &a.weights {
        let rows = smallworld::cost::read_weight_rows(path)
            .with_context(|| format!("reading weight table {}", path.display()))?;
        let table = Weights::<f64>::table_from_rows(&grid, &rows)?;
        params = params.with_weights(table, Some(path.display().to_string()))?;
    } else if let Some(gamma) = a.proximity {
        params = params.with_weights(Weights::Proximity { gamma }, None)?;
    }
    let init = match a.init {
        InitArg::Empty => Init::Empty,
        InitArg::GridNeighbors => Init::GridNeighbors,
        InitArg::Kleinberg => Init::Kleinberg { extra: a.long_links },
    };
    let net = Network::init(grid, params, init, a.seed)?;
    net.save_snapshot(&a.out)?;
    println!(
        "wrote {} (n={}, init={}, alpha={}, beta={})",
        a.out.display(),
        net.grid().population(),
        init.label(),
        alpha,
        beta
    );
    Ok(ExitCode::SUCCESS)
}

// ───────────────────────────── stabilize ───────────────────────────────

#[derive(Clone, Copy, ValueEnum)]
enum MovesArg {
    /// Only link additions.
    Add,
    /// Additions and deletions.
    AddDelete,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScheduleArg {
    RoundRobin,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Every agent runs its own improvement loop.
    PerAgent,
    /// Optimize one agent and translate its links everywhere
    /// (uniform weights only).
    Canonical,
}

#[derive(Args)]
struct StabilizeArgs {
    /// Input snapshot.
    #[arg(long)]
    net: PathBuf,
    #[arg(long, value_enum, default_value_t = MovesArg::AddDelete)]
    moves: MovesArg,
    #[arg(long, value_enum, default_value_t = ScheduleArg::RoundRobin)]
    schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = ModeArg::PerAgent)]
    mode: ModeArg,
    /// Cap on improvement rounds [default: scales with log n].
    #[arg(long)]
    max_rounds: Option<u64>,
    /// Seed for the random schedule (recorded either way).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stabilized snapshot path to write.
    #[arg(long)]
    out_net: PathBuf,
    /// Move log CSV path.
    #[arg(long)]
    out_log: Option<PathBuf>,
    /// Stability certificate JSON path.
    #[arg(long)]
    out_cert: Option<PathBuf>,
}

fn cmd_stabilize(a: &StabilizeArgs) -> Result<ExitCode> {
    let net = Network::<f64>::load_snapshot(&a.net)?;
    let moves = match a.moves {
        MovesArg::Add => MoveSet::AddOnly,
        MovesArg::AddDelete => MoveSet::AddDelete,
    };
    let schedule = match a.schedule {
        ScheduleArg::RoundRobin => Schedule::RoundRobin,
        ScheduleArg::Random => Schedule::RandomPerm,
    };
    let max_rounds = a.max_rounds.unwrap_or_else(|| default_max_rounds(net.grid().population()));
    let out: StabilizeOutcome = match a.mode {
        ModeArg::PerAgent => stabilize(&net, moves, schedule, max_rounds, a.seed)?,
        ModeArg::Canonical => canonical_stabilize(&net, moves, max_rounds, a.seed)?,
    };
    out.network.save_snapshot(&a.out_net)?;
    println!("wrote {}", a.out_net.display());
    if let Some(path) = &a.out_log {
        out.log.save_csv(path)?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = &a.out_cert {
        out.certificate.save_json(path)?;
        println!("wrote {}", path.display());
    }
    println!(
        "stabilized: rounds={} moves={} truncated={} certificate={}",
        out.rounds,
        out.log.len(),
        out.truncated,
        if out.certificate.passes() { "pass" } else { "fail" }
    );
    Ok(if out.truncated { ExitCode::from(EXIT_UNSETTLED) } else { ExitCode::SUCCESS })
}

// ─────────────────────────────── route ─────────────────────────────────

#[derive(Args)]
struct RouteArgs {
    /// Input snapshot.
    #[arg(long)]
    net: PathBuf,
    /// Route every ordered pair (small networks only).
    #[arg(long)]
    all_pairs: bool,
    /// Route this many seeded source/target pairs.
    #[arg(long)]
    samples: Option<u64>,
    /// Route a single packet from this node id (with --target).
    #[arg(long, requires = "target")]
    source: Option<u64>,
    /// ...to this node id.
    #[arg(long, requires = "source")]
    target: Option<u64>,
    /// Include the full node path in output rows.
    #[arg(long)]
    paths: bool,
    /// Forwarding budget per packet [default: four torus diameters].
    #[arg(long)]
    hop_limit: Option<u64>,
    /// Seed for pair sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-route CSV path (all-pairs dumps stream, so large files work).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Running summary over routed pairs.
#[derive(Default)]
struct RouteSummary {
    evaluated: u64,
    delivered: u64,
    max_hops: u64,
    hop_total: u64,
}

impl RouteSummary {
    fn record(&mut self, r: &RouteResult) {
        self.evaluated += 1;
        if r.outcome == RouteOutcome::Delivered {
            self.delivered += 1;
            self.hop_total += r.hops;
            self.max_hops = self.max_hops.max(r.hops);
        }
    }

    fn print(&self) {
        let mean = if self.delivered == 0 {
            0.0
        } else {
            self.hop_total as f64 / self.delivered as f64
        };
        println!(
            "routes: evaluated={} delivered={} stuck={} max_hops={} mean_hops={}",
            self.evaluated,
            self.delivered,
            self.evaluated - self.delivered,
            self.max_hops,
            mean
        );
    }
}

fn cmd_route(a: &RouteArgs) -> Result<ExitCode> {
    let net = Network::<f64>::load_snapshot(&a.net)?;
    let g = net.grid();
    let hop_limit = a.hop_limit.unwrap_or_else(|| default_hop_limit(g));
    let modes = a.all_pairs as u8 + a.samples.is_some() as u8 + a.source.is_some() as u8;
    if modes != 1 {
        bail!("pick exactly one of --all-pairs, --samples, or --source/--target");
    }
    let mut writer = match &a.out {
        Some(path) => {
            let file = fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            Some(RouteCsvWriter::new(io::BufWriter::new(file), a.paths)?)
        }
        None => None,
    };

    if let (Some(s), Some(t)) = (a.source, a.target) {
        let r = route(&net, g.node(s)?, g.node(t)?, hop_limit)?;
        println!(
            "route {} -> {}: {} after {} hops",
            r.source,
            r.target,
            r.outcome.label(),
            r.hops
        );
        if a.paths {
            let path: Vec<String> = r.path.iter().map(|p| p.to_string()).collect();
            println!("path: {}", path.join(">"));
        }
        if let Some(w) = &mut writer {
            w.write(&r)?;
        }
    } else if a.all_pairs {
        match (&writer, g.population()) {
            // Summary only: the parallel aggregate path, same cap.
            (None, _) => {
                let stats = routing_diameter(&net, RoutingMode::Exact, a.seed)?;
                println!(
                    "routes: evaluated={} delivered={} stuck={} max_hops={} mean_hops={}",
                    stats.evaluated, stats.delivered, stats.stuck, stats.max_hops, stats.mean_hops
                );
            }
            (Some(_), n) if n > ROUTING_EXACT_CAP => {
                bail!(
                    "all-pairs dump covers {n} nodes but the exact cap is \
                     {ROUTING_EXACT_CAP}; use --samples with a seed"
                );
            }
            // Stream rows in (source, target) order while summarizing.
            (Some(_), _) => {
                let w = writer.as_mut().unwrap();
                let mut summary = RouteSummary::default();
                for s in g.node_ids() {
                    for t in g.node_ids() {
                        if s != t {
                            let r = route(&net, s, t, hop_limit)?;
                            summary.record(&r);
                            w.write(&r)?;
                        }
                    }
                }
                summary.print();
            }
        }
    } else {
        let pairs = smallworld::sample_pairs(g, a.samples.unwrap(), a.seed)?;
        let results = route_many(&net, &pairs, hop_limit)?;
        let mut summary = RouteSummary::default();
        for r in &results {
            summary.record(r);
            if let Some(w) = &mut writer {
                w.write(r)?;
            }
        }
        summary.print();
    }

    if let Some(w) = writer {
        w.finish()?;
        println!("wrote {}", a.out.as_ref().unwrap().display());
    }
    Ok(ExitCode::SUCCESS)
}

// ─────────────────────────────── verify ────────────────────────────────

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckArg {
    /// No agent gains by adding one link.
    AddStability,
    /// No agent gains by adding or deleting one link.
    ToggleStability,
    /// Worst serving-distance stretch constant.
    TravelBound,
    /// Most links aimed into one audited ball.
    BallAudit,
}

#[derive(Args)]
struct VerifyArgs {
    /// Input snapshot.
    #[arg(long)]
    net: PathBuf,
    /// Checks to run.
    #[arg(
        long,
        value_enum,
        value_delimiter = ',',
        default_values_t = vec![
            CheckArg::AddStability,
            CheckArg::ToggleStability,
            CheckArg::TravelBound,
            CheckArg::BallAudit,
        ]
    )]
    checks: Vec<CheckArg>,
    /// Ball-audit radius factor (strictly between 0 and 1).
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Sampled pairs for audits on large networks.
    #[arg(long, default_value_t = 200_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    let net = Network::<f64>::load_snapshot(&a.net)?;
    let mut report = serde_json::Map::new();
    let mut failed = false;
    for check in &a.checks {
        match check {
            CheckArg::AddStability => {
                let cert = certify(&net, Notion::Add)?;
                let pass = cert.all_add_stable;
                failed |= !pass;
                let violations = cert.violating_agents().count();
                println!("add-stability: {}", if pass { "pass".into() } else { format!("FAIL ({violations} agents can improve)") });
                report.insert(
                    "add_stability".into(),
                    serde_json::json!({ "passes": pass, "violations": violations }),
                );
            }
            CheckArg::ToggleStability => {
                let cert = certify(&net, Notion::Toggle)?;
                let pass = cert.all_toggle_stable;
                failed |= !pass;
                let violations = cert.violating_agents().count();
                println!("toggle-stability: {}", if pass { "pass".into() } else { format!("FAIL ({violations} agents can improve)") });
                report.insert(
                    "toggle_stability".into(),
                    serde_json::json!({ "passes": pass, "violations": violations }),
                );
            }
            CheckArg::TravelBound => {
                let c = travel_bound_constant(&net, a.seed);
                println!("travel-bound: {c}");
                report.insert("travel_bound".into(), serde_json::json!({ "constant": c }));
            }
            CheckArg::BallAudit => {
                let c = ball_link_audit(&net, a.epsilon, a.samples, a.seed)?;
                println!("ball-audit: {c} (epsilon {})", a.epsilon);
                report.insert(
                    "ball_audit".into(),
                    serde_json::json!({ "epsilon": a.epsilon, "max_links": c }),
                );
            }
        }
    }
    if let Some(path) = &a.out {
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(report))?;
        text.push('\n');
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(if failed { ExitCode::from(EXIT_UNSETTLED) } else { ExitCode::SUCCESS })
}

// ─────────────────────────────── sweep ─────────────────────────────────

#[derive(Clone, Copy, ValueEnum)]
enum NotionArg {
    Add,
    Toggle,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid dimension.
    #[arg(long, default_value_t = 1)]
    d: u32,
    /// Side lengths [default: 256,1024,4096,16384 for d=1; 8,16,32,64 for d=2].
    #[arg(long, value_delimiter = ',')]
    sides: Vec<u32>,
    /// Cost exponents [default: d + 1].
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Cost multipliers [default: 0.5 for d=1, else 0.1].
    #[arg(long, value_delimiter = ',')]
    betas: Vec<f64>,
    /// Seeds, one row per seed.
    #[arg(long, value_delimiter = ',', default_values_t = vec![1u64])]
    seeds: Vec<u64>,
    /// Stability notion to drive and certify.
    #[arg(long, value_enum, default_value_t = NotionArg::Toggle)]
    notion: NotionArg,
    #[arg(long, value_enum, default_value_t = ModeArg::Canonical)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = ScheduleArg::RoundRobin)]
    schedule: ScheduleArg,
    #[arg(long, value_enum, default_value_t = InitArg::Empty)]
    init: InitArg,
    /// Long-range links per agent for the kleinberg init.
    #[arg(long, default_value_t = 1)]
    long_links: u32,
    /// Cap on improvement rounds [default: scales with log n].
    #[arg(long)]
    max_rounds: Option<u64>,
    /// Routed pairs on networks too large for all-pairs evaluation.
    #[arg(long, default_value_t = 100_000)]
    route_samples: u64,
    /// Ball-audit radius factor.
    #[arg(long, default_value_t = 0.25)]
    epsilon: f64,
    /// Audited pairs on networks too large for the exact audit.
    #[arg(long, default_value_t = 200_000)]
    ball_samples: u64,
    /// Probe degree growth above the alpha = d+1 boundary (d >= 2 only);
    /// adds a boundary control row and marks the summary evidence-only.
    #[arg(long)]
    probe: bool,
    /// Write each stabilized network snapshot into the output directory.
    #[arg(long)]
    save_nets: bool,
    /// Directory for report.csv, summary.json, and optional snapshots.
    #[arg(long)]
    out_dir: PathBuf,
}

fn cmd_sweep(a: &SweepArgs) -> Result<ExitCode> {
    let cfg = SweepConfig {
        dim: a.d,
        sides: if a.sides.is_empty() { default_sides(a.d) } else { a.sides.clone() },
        alphas: if a.alphas.is_empty() { vec![f64::from(a.d + 1)] } else { a.alphas.clone() },
        betas: if a.betas.is_empty() { vec![default_beta(a.d)] } else { a.betas.clone() },
        notion: match a.notion {
            NotionArg::Add => Notion::Add,
            NotionArg::Toggle => Notion::Toggle,
        },
        seeds: a.seeds.clone(),
        mode: match a.mode {
            ModeArg::PerAgent => StabilizeMode::PerAgent,
            ModeArg::Canonical => StabilizeMode::Canonical,
        },
        schedule: match a.schedule {
            ScheduleArg::RoundRobin => Schedule::RoundRobin,
            ScheduleArg::Random => Schedule::RandomPerm,
        },
        init: match a.init {
            InitArg::Empty => Init::Empty,
            InitArg::GridNeighbors => Init::GridNeighbors,
            InitArg::Kleinberg => Init::Kleinberg { extra: a.long_links },
        },
        max_rounds: a.max_rounds,
        route_samples: a.route_samples,
        ball_epsilon: a.epsilon,
        ball_samples: a.ball_samples,
        keep_networks: a.save_nets,
    };
    let outcome = if a.probe { conjecture_probe(&cfg)? } else { regime_sweep(&cfg)? };

    fs::create_dir_all(&a.out_dir)
        .with_context(|| format!("creating {}", a.out_dir.display()))?;
    let report_path = a.out_dir.join("report.csv");
    fs::write(&report_path, report_csv(&outcome.rows))
        .with_context(|| format!("writing {}", report_path.display()))?;
    println!("wrote {} ({} rows)", report_path.display(), outcome.rows.len());
    let summary_path = a.out_dir.join("summary.json");
    fs::write(&summary_path, sweep_summary_json(&outcome, a.probe))
        .with_context(|| format!("writing {}", summary_path.display()))?;
    println!("wrote {} ({} fits)", summary_path.display(), outcome.fits.len());

    if a.save_nets {
        for (row, net) in outcome.rows.iter().zip(&outcome.networks) {
            let name = format!(
                "net_d{}_m{}_a{}_b{}_{}_s{}.json",
                row.dim,
                row.side,
                row.alpha,
                row.beta,
                row.notion.label(),
                row.seed
            );
            net.save_snapshot(&a.out_dir.join(name))?;
        }
        println!("wrote {} snapshots", outcome.networks.len());
    }
    let truncated = outcome.rows.iter().filter(|r| r.truncated).count();
    if truncated > 0 {
        println!("note: {truncated} row(s) hit the round cap before stabilizing");
    }
    Ok(ExitCode::SUCCESS)
}

// ─────────────────────────────── driver ────────────────────────────────

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: configuring {threads} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Stabilize(a) => cmd_stabilize(a),
        Command::Route(a) => cmd_route(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
