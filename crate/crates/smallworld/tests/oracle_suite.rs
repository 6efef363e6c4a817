//! Bulk randomized cross-checks of the production cost and stability paths
//! against the independent reference evaluators, plus an exact-arithmetic
//! audit of the floating-point pipeline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallworld::oracle::{oracle_exact_arith_check, oracle_stability, oracle_total_cost};
use smallworld::{
    certify, total_cost, CostParams, GridSpec, Network, NodeId, Notion, ServingState, Weights,
};

const COST_TOLERANCE: f64 = 1e-9;

/// Grid shapes with at most 64 agents, covering lines, planes and boxes.
fn random_grid(rng: &mut ChaCha8Rng) -> GridSpec {
    let (dim, side) = match rng.random_range(0..4u32) {
        0 => (1, rng.random_range(3..=64u32)),
        1 => (2, rng.random_range(3..=8u32)),
        2 => (3, rng.random_range(3..=4u32)),
        _ => (1, rng.random_range(3..=20u32)),
    };
    GridSpec::new(dim, side).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, g: &GridSpec, exact_exponent: bool) -> CostParams<f64> {
    let alpha = if exact_exponent {
        [0.0, 1.0, 2.0, 3.0, 4.0][rng.random_range(0..5usize)]
    } else {
        match rng.random_range(0..3u32) {
            0 => [0.0, 0.5, 1.0, 2.0, 4.0][rng.random_range(0..5usize)],
            1 => f64::from(g.dim() + 1),
            _ => 5.0 * rng.random::<f64>(),
        }
    };
    let beta = [0.01, 0.1, 0.5, 1.0, 3.0, 10.0][rng.random_range(0..6usize)];
    let p = CostParams::<f64>::new(alpha, beta).unwrap();
    match rng.random_range(0..3u32) {
        0 => p,
        1 if !exact_exponent => p
            .with_weights(
                Weights::Proximity { gamma: 2.0 * rng.random::<f64>() },
                None,
            )
            .unwrap(),
        _ => {
            let n = g.population() as u64;
            let mut rows = std::collections::BTreeMap::new();
            for _ in 0..rng.random_range(1..=8usize) {
                let v = rng.random_range(0..n);
                let mut u = rng.random_range(0..n);
                if u == v {
                    u = (u + 1) % n;
                }
                rows.insert((v, u), 4.0 * rng.random::<f64>());
            }
            let rows: Vec<(u64, u64, f64)> =
                rows.into_iter().map(|((v, u), w)| (v, u, w)).collect();
            let table = Weights::<f64>::table_from_rows(g, &rows).unwrap();
            p.with_weights(table, None).unwrap()
        }
    }
}

fn random_link_set(rng: &mut ChaCha8Rng, g: &GridSpec, v: NodeId, density: f64) -> Vec<NodeId> {
    g.node_ids()
        .filter(|&u| u != v && rng.random::<f64>() < density)
        .collect()
}

fn random_network(rng: &mut ChaCha8Rng, exact_exponent: bool) -> Network<f64> {
    let g = random_grid(rng);
    let p = random_params(rng, &g, exact_exponent);
    let density = 0.5 * rng.random::<f64>();
    let links = g
        .node_ids()
        .map(|v| random_link_set(rng, &g, v, density))
        .collect();
    Network::from_links(g, p, links).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COST_TOLERANCE * 1.0f64.max(a.abs().max(b.abs()))
}

#[test]
fn production_costs_and_deltas_match_the_reference_on_a_thousand_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0_57);
    let mut instances = 0u32;
    let mut add_checks = 0u32;
    let mut delete_checks = 0u32;
    while instances < 1100 {
        let g = random_grid(&mut rng);
        let p = random_params(&mut rng, &g, false);
        let v = g.node(rng.random_range(0..g.population() as u64)).unwrap();
        let density = 0.5 * rng.random::<f64>();
        let links = random_link_set(&mut rng, &g, v, density);
        instances += 1;

        let fast = total_cost(&p, &g, v, &links).unwrap();
        let slow = oracle_total_cost(&p, &g, v, &links).unwrap();
        assert!(
            close(fast, slow),
            "instance {instances}: production {fast} vs reference {slow} on {}^{} grid",
            g.side(),
            g.dim()
        );

        // One addition delta against a from-scratch reference re-evaluation.
        let st = ServingState::build(&p, &g, v, &links).unwrap();
        let free: Vec<NodeId> = g
            .node_ids()
            .filter(|&u| u != v && !links.contains(&u))
            .collect();
        if !free.is_empty() {
            let u = free[rng.random_range(0..free.len())];
            let mut grown = links.clone();
            grown.push(u);
            let target = oracle_total_cost(&p, &g, v, &grown).unwrap() - slow;
            let delta = st.add_delta(&p, &g, u).unwrap();
            assert!(
                close(delta, target),
                "instance {instances}: add delta {delta} vs reference {target}"
            );
            add_checks += 1;
        }

        // One deletion delta the same way.
        if !links.is_empty() {
            let u = links[rng.random_range(0..links.len())];
            let mut shrunk = links.clone();
            shrunk.retain(|&w| w != u);
            let target = oracle_total_cost(&p, &g, v, &shrunk).unwrap() - slow;
            let delta = st.delete_delta(&p, &g, u).unwrap();
            assert!(
                close(delta, target),
                "instance {instances}: delete delta {delta} vs reference {target}"
            );
            delete_checks += 1;
        }
    }
    assert!(instances >= 1000);
    assert!(add_checks >= 900, "only {add_checks} additions exercised");
    assert!(delete_checks >= 300, "only {delete_checks} deletions exercised");
}

#[test]
fn certificates_agree_with_the_reference_enumeration_on_random_networks() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57_AB);
    let mut nets = 0u32;
    let mut unstable_seen = 0u32;
    while nets < 220 {
        let net = random_network(&mut rng, false);
        nets += 1;
        let verdict = oracle_stability(net.params(), net.grid(), net.links()).unwrap();
        let cert = certify(&net, Notion::Toggle).unwrap();
        for (i, agent) in cert.agents.iter().enumerate() {
            assert_eq!(
                agent.add_stable, verdict.add_stable[i],
                "net {nets} agent {i}: add-stability flags disagree"
            );
            assert_eq!(
                agent.toggle_stable, verdict.toggle_stable[i],
                "net {nets} agent {i}: toggle-stability flags disagree"
            );
        }
        assert_eq!(cert.all_add_stable, verdict.all_add_stable());
        assert_eq!(cert.all_toggle_stable, verdict.all_toggle_stable());
        if !cert.all_toggle_stable {
            unstable_seen += 1;
        }
    }
    assert!(nets >= 200);
    // The sample must exercise both verdicts, not vacuously agree.
    assert!(unstable_seen > 0, "every sampled network was stable");
}

#[test]
fn floating_point_costs_track_exact_rational_arithmetic() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xEAC7);
    let mut audited = 0u32;
    while audited < 150 {
        let net = random_network(&mut rng, true);
        let g = net.grid();
        let v = g.node(rng.random_range(0..g.population() as u64)).unwrap();
        let check = oracle_exact_arith_check(net.params(), g, v, net.links_of(v)).unwrap();
        assert!(
            check.ok,
            "agent {v}: float {} drifted {} from the exact value",
            check.float, check.relative_gap
        );
        audited += 1;
    }
}
