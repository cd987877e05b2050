//! Shared fixture helpers for integration tests.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use netcloak::config::NetworkSnapshot;
use netcloak::topology::{load_reference_library, Topology};

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load_fixture(name: &str) -> NetworkSnapshot {
    NetworkSnapshot::load(&fixture_dir(name)).unwrap_or_else(|e| panic!("fixture {name}: {e}"))
}

pub fn reference_library() -> Vec<Topology> {
    load_reference_library(&fixture_dir("graphml")).expect("graphml corpus loads")
}

pub const SNAPSHOT_FIXTURES: [&str; 5] = ["campus", "fattree02", "bgp2as", "ospf10", "quad"];

/// Router-level paths (hosts stripped) of a path set.
pub fn router_paths(paths: &BTreeSet<Vec<String>>) -> BTreeSet<Vec<String>> {
    paths
        .iter()
        .filter(|p| p.len() >= 3)
        .map(|p| p[1..p.len() - 1].to_vec())
        .collect()
}
