//! End-to-end tests of the command-line interface: each one drives the real
//! binary through temp-dir workflows and checks files, stdout, and exit
//! codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_smallworld"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

/// Run expecting success; returns stdout.
fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed with {:?}\nstdout: {}\nstderr: {}",
        args,
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf8 path")
}

fn build_ring(dir: &TempDir, name: &str, side: &str, alpha: &str, beta: &str) -> PathBuf {
    let net = dir.path().join(name);
    run_ok(&[
        "build", "--d", "1", "--side", side, "--alpha", alpha, "--beta", beta, "--init", "empty",
        "--out", path_str(&net),
    ]);
    net
}

fn links_from_snapshot(path: &Path) -> Vec<Vec<u64>> {
    let text = fs::read_to_string(path).expect("snapshot readable");
    let v: serde_json::Value = serde_json::from_str(&text).expect("snapshot json");
    v["links"]
        .as_array()
        .expect("links array")
        .iter()
        .map(|set| set.as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect())
        .collect()
}

#[test]
fn build_is_deterministic_in_the_seed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        run_ok(&[
            "build", "--d", "1", "--side", "32", "--init", "kleinberg", "--long-links", "2",
            "--seed", "7", "--out", path_str(out),
        ]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.json");
    run_ok(&[
        "build", "--d", "1", "--side", "32", "--init", "kleinberg", "--long-links", "2",
        "--seed", "8", "--out", path_str(&c),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn build_grid_neighbors_links_each_agent_to_its_ring_neighbors() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("ring.json");
    run_ok(&[
        "build", "--d", "1", "--side", "9", "--init", "grid-neighbors", "--out", path_str(&net),
    ]);
    let links = links_from_snapshot(&net);
    assert_eq!(links.len(), 9);
    for (v, set) in links.iter().enumerate() {
        let v = v as u64;
        let mut want = vec![(v + 1) % 9, (v + 8) % 9];
        want.sort_unstable();
        assert_eq!(set, &want, "agent {v}");
    }
}

#[test]
fn stabilize_is_idempotent_at_stability() {
    let dir = TempDir::new().unwrap();
    let net = build_ring(&dir, "net.json", "15", "2", "0.5");
    let stable = dir.path().join("stable.json");
    let log = dir.path().join("log.csv");
    let stdout = run_ok(&[
        "stabilize", "--net", path_str(&net), "--out-net", path_str(&stable),
        "--out-log", path_str(&log),
    ]);
    assert!(stdout.contains("truncated=false"));
    assert!(stdout.contains("certificate=pass"));
    assert_ne!(fs::read_to_string(&log).unwrap().lines().count(), 1);

    let again = dir.path().join("again.json");
    let relog = dir.path().join("relog.csv");
    let stdout = run_ok(&[
        "stabilize", "--net", path_str(&stable), "--out-net", path_str(&again),
        "--out-log", path_str(&relog),
    ]);
    assert!(stdout.contains("moves=0"));
    assert_eq!(fs::read_to_string(&relog).unwrap(), "round,agent,kind,target,delta\n");
    assert_eq!(links_from_snapshot(&stable), links_from_snapshot(&again));
}

#[test]
fn canonical_and_per_agent_modes_agree_on_degrees() {
    let dir = TempDir::new().unwrap();
    let net = build_ring(&dir, "net.json", "15", "2", "0.5");
    let per_agent = dir.path().join("per_agent.json");
    let canonical = dir.path().join("canonical.json");
    run_ok(&[
        "stabilize", "--net", path_str(&net), "--mode", "per-agent",
        "--out-net", path_str(&per_agent),
    ]);
    run_ok(&[
        "stabilize", "--net", path_str(&net), "--mode", "canonical",
        "--out-net", path_str(&canonical),
    ]);
    let degree = |links: &[Vec<u64>]| links.iter().map(Vec::len).max().unwrap();
    let pa = links_from_snapshot(&per_agent);
    let ca = links_from_snapshot(&canonical);
    assert_eq!(degree(&pa), degree(&ca));
    // Both are translation-symmetric here: every agent has the same degree.
    assert!(pa.iter().all(|set| set.len() == pa[0].len()));
}

#[test]
fn truncated_stabilization_exits_nonzero_but_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let net = build_ring(&dir, "net.json", "64", "2", "0.5");
    let out_net = dir.path().join("truncated.json");
    let cert = dir.path().join("cert.json");
    let output = bin()
        .args([
            "stabilize", "--net", path_str(&net), "--max-rounds", "1",
            "--out-net", path_str(&out_net), "--out-cert", path_str(&cert),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("truncated=true"));
    let cert_json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&cert).unwrap()).unwrap();
    assert_eq!(cert_json["all_toggle_stable"], serde_json::Value::Bool(false));
    assert!(out_net.exists());
}

#[test]
fn verify_passes_stable_networks_and_fails_unstable_ones() {
    let dir = TempDir::new().unwrap();
    let net = build_ring(&dir, "net.json", "15", "2", "0.5");
    let stable = dir.path().join("stable.json");
    run_ok(&["stabilize", "--net", path_str(&net), "--out-net", path_str(&stable)]);

    let report = dir.path().join("verify.json");
    let stdout = run_ok(&[
        "verify", "--net", path_str(&stable), "--out", path_str(&report),
    ]);
    assert!(stdout.contains("add-stability: pass"));
    assert!(stdout.contains("toggle-stability: pass"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["add_stability"]["passes"], serde_json::Value::Bool(true));
    assert!(json["travel_bound"]["constant"].as_f64().unwrap() >= 0.0);

    // The empty network wants links added: add-stability fails with code 2.
    let output = bin()
        .args(["verify", "--net", path_str(&net), "--checks", "add-stability"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stdout).contains("add-stability: FAIL"));

    // Measurement-only checks never fail the run.
    run_ok(&["verify", "--net", path_str(&net), "--checks", "travel-bound,ball-audit"]);
}

#[test]
fn route_modes_write_the_documented_rows() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("ring.json");
    run_ok(&[
        "build", "--d", "1", "--side", "9", "--init", "grid-neighbors", "--out", path_str(&net),
    ]);

    let single = dir.path().join("single.csv");
    let stdout = run_ok(&[
        "route", "--net", path_str(&net), "--source", "0", "--target", "4", "--paths",
        "--out", path_str(&single),
    ]);
    assert!(stdout.contains("route 0 -> 4: delivered after 4 hops"));
    assert!(stdout.contains("path: 0>1>2>3>4"));
    assert_eq!(
        fs::read_to_string(&single).unwrap(),
        "source,target,hops,outcome,path\n0,4,4,delivered,0>1>2>3>4\n"
    );

    let all = dir.path().join("all.csv");
    let stdout = run_ok(&[
        "route", "--net", path_str(&net), "--all-pairs", "--out", path_str(&all),
    ]);
    assert!(stdout.contains("evaluated=72 delivered=72 stuck=0 max_hops=4 mean_hops=2.5"));
    let text = fs::read_to_string(&all).unwrap();
    assert_eq!(text.lines().count(), 73);
    assert!(text.starts_with("source,target,hops,outcome\n0,1,1,delivered\n"));

    // Summary-only run prints the same aggregate line.
    let stdout = run_ok(&["route", "--net", path_str(&net), "--all-pairs"]);
    assert!(stdout.contains("evaluated=72 delivered=72 stuck=0 max_hops=4 mean_hops=2.5"));

    let sampled = dir.path().join("sampled.csv");
    let stdout = run_ok(&[
        "route", "--net", path_str(&net), "--samples", "10", "--seed", "3",
        "--out", path_str(&sampled),
    ]);
    assert!(stdout.contains("evaluated=10"));
    assert_eq!(fs::read_to_string(&sampled).unwrap().lines().count(), 11);
}

#[test]
fn route_rejects_ambiguous_or_oversized_requests() {
    let dir = TempDir::new().unwrap();
    let net = dir.path().join("ring.json");
    run_ok(&[
        "build", "--d", "1", "--side", "9", "--init", "grid-neighbors", "--out", path_str(&net),
    ]);
    let output = bin()
        .args(["route", "--net", path_str(&net), "--all-pairs", "--samples", "5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("exactly one"));

    // Above the exact cap, all-pairs evaluation directs to sampling.
    let big = dir.path().join("big.json");
    run_ok(&["build", "--d", "1", "--side", "4200", "--init", "empty", "--out", path_str(&big)]);
    let output = bin().args(["route", "--net", path_str(&big), "--all-pairs"]).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("sampled"));
}

#[test]
fn weight_options_are_recorded_and_reloadable() {
    let dir = TempDir::new().unwrap();
    let table = dir.path().join("weights.csv");
    fs::write(&table, "v,u,weight\n0,4,3.5\n2,7,0\n").unwrap();
    let net = dir.path().join("weighted.json");
    run_ok(&[
        "build", "--d", "1", "--side", "9", "--weights", path_str(&table),
        "--out", path_str(&net),
    ]);
    let text = fs::read_to_string(&net).unwrap();
    assert!(text.contains("weights_ref"));
    // Reload works (the stabilize step re-reads the referenced table).
    let out_net = dir.path().join("weighted_stable.json");
    run_ok(&["stabilize", "--net", path_str(&net), "--out-net", path_str(&out_net)]);

    let prox = dir.path().join("prox.json");
    run_ok(&[
        "build", "--d", "1", "--side", "9", "--proximity", "1.5", "--out", path_str(&prox),
    ]);
    assert!(fs::read_to_string(&prox).unwrap().contains("proximity:1.5"));
}

#[test]
fn sweep_writes_report_summary_and_snapshots() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("sweep");
    let stdout = run_ok(&[
        "sweep", "--d", "1", "--sides", "8,16", "--alphas", "2", "--seeds", "1,2",
        "--save-nets", "--out-dir", path_str(&out_dir),
    ]);
    assert!(stdout.contains("4 rows"));
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert!(report.starts_with(
        "d,side,n,alpha,beta,notion,seed,max_degree,mean_degree,max_hops,mean_hops,\
         stuck,travel_c,ball_c,rounds,truncated,runtime_ms\n"
    ));
    assert_eq!(report.lines().count(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["status"], "measured");
    assert_eq!(summary["fits"].as_array().unwrap().len(), 2);
    assert!(out_dir.join("net_d1_m8_a2_b0.5_toggle_s1.json").exists());
    assert!(out_dir.join("net_d1_m16_a2_b0.5_toggle_s2.json").exists());
}

#[test]
fn sweep_probe_adds_the_boundary_control() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("probe");
    run_ok(&[
        "sweep", "--d", "2", "--sides", "4,6", "--alphas", "4", "--probe",
        "--out-dir", path_str(&out_dir),
    ]);
    let report = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 5);
    assert!(report.contains("\n2,4,16,4,"));
    assert!(report.contains("\n2,4,16,3,"));
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"evidence-only\""));

    // The probe is for higher-dimensional grids only.
    let output = bin()
        .args(["sweep", "--d", "1", "--alphas", "4", "--probe", "--out-dir", path_str(&out_dir)])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn outputs_are_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let net = build_ring(&dir, "net.json", "32", "2", "0.5");
    let mut artifacts: Vec<Vec<Vec<u8>>> = Vec::new();
    for threads in ["1", "2"] {
        let tag = format!("t{threads}");
        let stable = dir.path().join(format!("{tag}.json"));
        let log = dir.path().join(format!("{tag}.csv"));
        let cert = dir.path().join(format!("{tag}_cert.json"));
        run_ok(&[
            "--threads", threads, "stabilize", "--net", path_str(&net), "--seed", "5",
            "--schedule", "random", "--out-net", path_str(&stable),
            "--out-log", path_str(&log), "--out-cert", path_str(&cert),
        ]);
        let routes = dir.path().join(format!("{tag}_routes.csv"));
        run_ok(&[
            "--threads", threads, "route", "--net", path_str(&stable), "--all-pairs",
            "--out", path_str(&routes),
        ]);
        artifacts.push(
            [&stable, &log, &cert, &routes].iter().map(|p| fs::read(p).unwrap()).collect(),
        );
    }
    assert_eq!(artifacts[0], artifacts[1]);
}
