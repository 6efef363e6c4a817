//! Strategic link formation on toroidal grids.
//!
//! Agents sit on a d-dimensional wrap-around grid and each one chooses a set
//! of directed links. An agent's cost is the price of the links it holds
//! (`beta * distance^alpha` per link) plus, for every other node, the
//! weighted distance from that node to the agent's nearest link target (or to
//! the agent itself, whichever is closer). The crate builds such networks,
//! drives them to stability under best-response add/delete moves, routes
//! greedily over the results, and measures how degrees and route lengths grow
//! with population across the cost-exponent regimes.
//!
//! Cost bookkeeping is generic over [`CostScalar`]: `f64` for simulation
//! (the default everywhere), `f32` where slack is acceptable, and exact
//! rationals for audit paths. Grid geometry is integer arithmetic throughout.

pub mod cost;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod routing;
pub mod scalar;

pub use cost::{link_cost, total_cost, CostParams, ServingState, Weights};
pub use dynamics::{
    best_add_move, best_delete_move, canonical_stabilize, certify, default_max_rounds, stabilize,
    AddScan, MoveKind, MoveLog, MoveRecord, MoveSet, Notion, Schedule, StabilityCertificate,
    StabilizeOutcome,
};
pub use error::{Error, Result};
pub use grid::{GridSpec, NodeId};
pub use metrics::{
    ball_link_audit, conjecture_probe, default_beta, default_sides, degree_stats, fit_growth,
    regime_sweep, report_csv, sweep_summary_json, travel_bound_constant, DegreeStats,
    GrowthComparison, GrowthFit, GrowthModel, RegimeFit, StabilizeMode, SweepConfig, SweepOutcome,
    SweepRow,
};
pub use network::{Init, Network, Provenance};
pub use routing::{
    default_hop_limit, progress_profile, route, route_many, routing_diameter, sample_pairs,
    write_route_csv, RouteCsvWriter, RouteOutcome, RouteResult, RoutingMode, RoutingStats,
    ROUTING_EXACT_CAP,
};
pub use scalar::CostScalar;

/// Exact rational scalar used by the audit paths.
pub type Rational = num_rational::BigRational;
