//! End-to-end pipeline runs over the bundled fixtures.

mod common;

use common::{load_fixture, reference_library};
use netcloak::anonymize::{AnonymityParams, KdmaLevel};
use netcloak::pipeline::{
    run_on_snapshot, verify_equivalence, Anonymizer, ExpansionMode, RepairMode, RunConfig,
};
use netcloak::expansion::NodeMapping;
use netcloak::sim::{compute_fibs, dataplane, Network};

fn base_config(mode: ExpansionMode, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new("unused".into(), "unused-out".into());
    cfg.mode = mode;
    cfg.seed = seed;
    cfg.params = AnonymityParams {
        k_routers: 2,
        k_hosts: 2,
        kdma_level: KdmaLevel::Strong,
        mul: 1,
        seed,
    };
    cfg
}

#[test]
fn quad_embedding_end_to_end() {
    let snap = load_fixture("quad");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::Embedding, 7);
    cfg.add_routers = 4;
    let (out, report) = run_on_snapshot(&cfg, &snap, &lib).expect("pipeline runs");
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
    assert!(report.kdma_check.strong);
    assert!(report.actual_adds >= 4);
    assert!(out.routers.len() > snap.routers.len());
    // fake hosts were added for k_hosts = 2
    assert_eq!(out.hosts.len(), snap.hosts.len() * 2);
}

#[test]
fn campus_replica_end_to_end() {
    let snap = load_fixture("campus");
    let mut cfg = base_config(ExpansionMode::Replica, 1);
    cfg.add_routers = 5;
    let (_, report) = run_on_snapshot(&cfg, &snap, &[]).expect("pipeline runs");
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
    assert_eq!(report.actual_adds, 5, "one extra fold");
    assert!(report.kdma_check.strong);
}

#[test]
fn replica_rounds_up_to_multiple() {
    let snap = load_fixture("quad");
    let mut cfg = base_config(ExpansionMode::Replica, 3);
    cfg.add_routers = 5; // |V| = 4: rounds up to 8
    let (_, report) = run_on_snapshot(&cfg, &snap, &[]).unwrap();
    assert_eq!(report.actual_adds, 8);
    assert_eq!(report.requested_adds, 5);
}

#[test]
fn bgp2as_embedding_with_interas_repair() {
    let snap = load_fixture("bgp2as");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::Embedding, 11);
    cfg.add_routers = 7;
    let (_, report) = run_on_snapshot(&cfg, &snap, &lib).expect("pipeline runs");
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
    let interas = report.repair_interas.as_ref().unwrap();
    assert!(interas.converged);
}

#[test]
fn sample_connect_end_to_end() {
    let snap = load_fixture("campus");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::SampleConnect, 5);
    cfg.add_routers = 5;
    let (_, report) = run_on_snapshot(&cfg, &snap, &lib).expect("pipeline runs");
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
    assert_eq!(report.actual_adds, 5);
}

#[test]
fn iterative_repair_mode_also_converges() {
    let snap = load_fixture("campus");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::Embedding, 2);
    cfg.add_routers = 5;
    cfg.repair_mode = RepairMode::Iterative;
    let (_, report) = run_on_snapshot(&cfg, &snap, &lib).unwrap();
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
}

#[test]
fn maxsmt_anonymizer_on_small_fixture() {
    let snap = load_fixture("quad");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::Embedding, 4);
    cfg.add_routers = 4;
    cfg.anonymizer = Anonymizer::MaxSmt;
    let (_, report) = run_on_snapshot(&cfg, &snap, &lib).unwrap();
    assert!(report.kdma_check.strong);
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
}

#[test]
fn kda_anonymizer_runs() {
    let snap = load_fixture("campus");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::Embedding, 6);
    cfg.add_routers = 5;
    cfg.anonymizer = Anonymizer::Kda;
    let (_, report) = run_on_snapshot(&cfg, &snap, &lib).unwrap();
    assert!(report.functional_equivalence, "missing: {:?}", report.missing_paths);
}

#[test]
fn identical_config_gives_identical_snapshots_and_reports() {
    let snap = load_fixture("campus");
    let lib = reference_library();
    let mut cfg = base_config(ExpansionMode::Embedding, 9);
    cfg.add_routers = 5;
    let (out1, rep1) = run_on_snapshot(&cfg, &snap, &lib).unwrap();
    let (out2, rep2) = run_on_snapshot(&cfg, &snap, &lib).unwrap();
    assert_eq!(out1, out2, "snapshots byte-identical");
    let strip = |r: &netcloak::pipeline::RunReport| {
        let mut v = serde_json::to_value(r).unwrap();
        v.as_object_mut().unwrap().remove("wall_ms");
        v
    };
    assert_eq!(strip(&rep1), strip(&rep2), "reports identical modulo wall clock");
}

#[test]
fn mimicry_ablation_reduces_path_anonymity() {
    let snap = load_fixture("bgp2as");
    let lib = reference_library();
    let mut with = base_config(ExpansionMode::Embedding, 13);
    with.add_routers = 7;
    let (_, rep_with) = run_on_snapshot(&with, &snap, &lib).unwrap();
    let mut without = with.clone();
    without.mimic_filters = false;
    let (_, rep_without) = run_on_snapshot(&without, &snap, &lib).unwrap();
    assert!(
        rep_with.n_r_after > rep_without.n_r_after,
        "mimicry raises n_r: {} vs {}",
        rep_with.n_r_after,
        rep_without.n_r_after
    );
}

#[test]
fn without_repair_some_fixture_breaks_equivalence() {
    // phase isolation: an unrepaired expansion must break at least one
    // original path on at least one fixture
    let mut any_broken = false;
    for name in ["campus", "quad", "ospf10"] {
        let snap = load_fixture(name);
        let lib = reference_library();
        let orig_net = Network::build(&snap).unwrap();
        let orig_sim = compute_fibs(&orig_net).unwrap();
        let orig_dp = dataplane(&orig_net, &orig_sim.fibs);

        // expansion without cost repair: reuse the pipeline's generation
        // phases by running with repair, then stripping the repaired costs
        let mut cfg = base_config(ExpansionMode::Embedding, 21);
        cfg.add_routers = snap.routers.len();
        let (out, _) = run_on_snapshot(&cfg, &snap, &lib).unwrap();
        let mut unrepaired = out.clone();
        for cfg_r in unrepaired.routers.values_mut() {
            for st in cfg_r.stanzas.iter_mut() {
                st.commands.retain(|c| !c.raw.trim().starts_with("ip ospf cost"));
            }
        }
        let net = Network::build(&unrepaired).unwrap();
        let sim = compute_fibs(&net).unwrap();
        let dp = dataplane(&net, &sim.fibs);
        let missing = verify_equivalence(&orig_dp, &dp, &NodeMapping::default());
        if !missing.is_empty() {
            any_broken = true;
        }
    }
    assert!(any_broken, "repair phase is load-bearing on some fixture");
}
