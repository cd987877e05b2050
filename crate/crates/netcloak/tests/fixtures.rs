//! Fixture-level checks: parsing round-trips, topology extraction against
//! hand counts, and the committed simulation oracles.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::{fixture_dir, load_fixture, SNAPSHOT_FIXTURES};
use netcloak::config::{parse_config, render_config};
use netcloak::sim::{compute_fibs, dataplane, Network, Protocol};
use netcloak::topology::{degree_sequence, extract_topology};

#[test]
fn all_fixtures_parse_and_round_trip() {
    for name in SNAPSHOT_FIXTURES {
        let snap = load_fixture(name);
        assert!(!snap.routers.is_empty(), "{name} has routers");
        for (router, cfg) in &snap.routers {
            let once = render_config(cfg);
            let twice = render_config(&parse_config(&once).unwrap());
            assert_eq!(once, twice, "{name}/{router} round-trip");
            // losslessness: token multisets agree with the source file
            let src = std::fs::read_to_string(
                fixture_dir(name).join("configs").join(format!("{router}.cfg")),
            )
            .unwrap();
            fn tokens(s: &str) -> Vec<String> {
                let mut v: Vec<String> = s.split_whitespace().map(String::from).collect();
                v.sort_unstable();
                v
            }
            assert_eq!(tokens(&src), tokens(&once), "{name}/{router} tokens");
        }
    }
}

#[test]
fn campus_topology_matches_hand_wiring() {
    let snap = load_fixture("campus");
    let topo = extract_topology(&snap).unwrap();
    let g = topo.router_graph();
    assert_eq!(g.router_count(), 5);
    let expected: BTreeSet<(String, String)> = [
        ("r1", "r2"),
        ("r1", "r3"),
        ("r2", "r3"),
        ("r2", "r4"),
        ("r3", "r4"),
        ("r4", "r5"),
    ]
    .iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();
    let got: BTreeSet<(String, String)> = g.router_edges().into_iter().collect();
    assert_eq!(got, expected);
    // hand count of router degrees: r1..r5 = 2,3,3,3,1
    assert_eq!(degree_sequence(&g, true).sorted_desc, vec![3, 3, 3, 2, 1]);
    // hosts hang off their gateways
    assert!(topo.has_edge("h1", "r1"));
    assert!(topo.has_edge("h4", "r4"));
    assert!(topo.has_edge("h5", "r5"));
}

#[test]
fn host_fixture_h4_points_at_r4() {
    let snap = load_fixture("campus");
    let h4 = &snap.hosts["h4"];
    assert_eq!(h4.gateway_router, "r4");
    assert_eq!(h4.gateway_ip.to_string(), "10.1.4.1");
}

#[test]
fn campus_dataplane_matches_committed_oracle() {
    let snap = load_fixture("campus");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    let dp = dataplane(&net, &sim.fibs);
    let oracle: BTreeMap<String, Vec<Vec<String>>> = serde_json::from_str(
        &std::fs::read_to_string(fixture_dir("oracle").join("campus_dataplane.json")).unwrap(),
    )
    .unwrap();
    for (pair, paths) in &oracle {
        let (src, dst) = pair.split_once("->").unwrap();
        let got = dp.ok_paths(src, dst);
        let want: BTreeSet<Vec<String>> = paths.iter().cloned().collect();
        assert_eq!(got, want, "paths {pair}");
    }
    // oracle covers every simulated pair (3 hosts -> 6 ordered pairs)
    assert_eq!(dp.paths.len(), oracle.len());
}

#[test]
fn campus_r5_reaches_h1_through_r4() {
    let snap = load_fixture("campus");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    let h1_prefix = "10.1.1.100".parse().unwrap();
    let route = sim.fibs["r5"].lookup(h1_prefix).unwrap();
    let hops: BTreeSet<&String> = route.next_hops.iter().map(|nh| &nh.router).collect();
    assert_eq!(hops, BTreeSet::from([&"r4".to_string()]));
}

#[test]
fn campus_static_redistributes_as_external() {
    let snap = load_fixture("campus");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    // r4 redistributes its static; r1 should hold an external route
    let route = sim.fibs["r1"].lookup("10.9.9.7".parse().unwrap()).unwrap();
    assert_eq!(route.protocol, Protocol::OspfExternal);
    assert_eq!(route.metric, 20);
    // and r4 itself keeps the static
    let at_r4 = sim.fibs["r4"].lookup("10.9.9.7".parse().unwrap()).unwrap();
    assert_eq!(at_r4.protocol, Protocol::Static);
}

#[derive(serde::Deserialize)]
struct OracleEntry {
    protocol: String,
    metric: u32,
    next_hops: Vec<String>,
}

#[test]
fn bgp2as_fibs_match_hand_computed_oracle() {
    let snap = load_fixture("bgp2as");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    let oracle: BTreeMap<String, BTreeMap<String, OracleEntry>> = serde_json::from_str(
        &std::fs::read_to_string(fixture_dir("oracle").join("bgp2as_fibs.json")).unwrap(),
    )
    .unwrap();
    for (router, table) in &oracle {
        let fib = &sim.fibs[router];
        assert_eq!(
            fib.routes.len(),
            table.len(),
            "{router}: oracle covers every entry; got {:?}",
            fib.routes.keys().map(|p| p.to_string()).collect::<Vec<String>>()
        );
        for (prefix, want) in table {
            let route = fib
                .routes
                .get(&prefix.parse().unwrap())
                .unwrap_or_else(|| panic!("{router} missing {prefix}"));
            assert_eq!(format!("{:?}", route.protocol), want.protocol, "{router} {prefix}");
            assert_eq!(route.metric, want.metric, "{router} {prefix}");
            let got: BTreeSet<String> =
                route.next_hops.iter().map(|nh| nh.router.clone()).collect();
            let expect: BTreeSet<String> = want.next_hops.iter().cloned().collect();
            assert_eq!(got, expect, "{router} {prefix}");
        }
    }
    assert_eq!(oracle.len(), sim.fibs.len(), "all routers covered");
}

#[test]
fn bgp2as_filtered_prefix_takes_the_detour_session() {
    let snap = load_fixture("bgp2as");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    let dp = dataplane(&net, &sim.fibs);
    assert_eq!(
        dp.ok_paths("hs1", "hd2").iter().next().unwrap(),
        &vec!["hs1", "ra1", "ra2", "rb1", "rb3", "hd2"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<String>>()
    );
    assert_eq!(
        dp.ok_paths("hs1", "hda").iter().next().unwrap(),
        &vec!["hs1", "ra1", "ra3", "rb2", "rb4", "hda"]
            .into_iter()
            .map(String::from)
            .collect::<Vec<String>>()
    );
}

#[test]
fn fattree_has_ecmp_between_pods() {
    let snap = load_fixture("fattree02");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    let dp = dataplane(&net, &sim.fibs);
    let paths = dp.ok_paths("h1", "h3");
    assert_eq!(paths.len(), 2, "two pod-to-pod paths: {paths:?}");
    // regular degree structure: aggs 3, cores and edges 2
    let g = extract_topology(&snap).unwrap().router_graph();
    assert_eq!(
        degree_sequence(&g, true).sorted_desc,
        vec![3, 3, 3, 3, 2, 2, 2, 2, 2, 2]
    );
}

#[test]
fn ospf10_mixes_unique_and_ecmp_paths() {
    let snap = load_fixture("ospf10");
    let net = Network::build(&snap).unwrap();
    let sim = compute_fibs(&net).unwrap();
    let dp = dataplane(&net, &sim.fibs);
    let ab = dp.ok_paths("ha", "hb");
    assert!(!ab.is_empty());
    let total_pairs = dp.paths.len();
    assert_eq!(total_pairs, 6);
    for result in dp.paths.values() {
        assert!(result.paths().is_some(), "all pairs route");
    }
}

#[test]
fn graphml_corpus_loads_with_expected_sizes() {
    let lib = common::reference_library();
    assert!(lib.len() >= 12);
    let sizes: Vec<usize> = lib.iter().map(|t| t.router_count()).collect();
    assert!(sizes.iter().all(|s| *s >= 14));
    for t in &lib {
        assert!(t.is_connected_over_routers(), "{} connected", t.name);
    }
}
