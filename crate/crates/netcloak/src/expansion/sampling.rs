//! Graph sampling strategies used by the sample-connect expansion and the
//! sampling comparison experiments.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ExpansionError;
use crate::topology::{NodeKind, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SamplingKind {
    Bfs,
    Dfs,
    Rfs,
    Sbs,
    Ffs,
    Rw,
    Mhrw,
    Mhda,
    Rcmh,
}

impl SamplingKind {
    pub fn all() -> [SamplingKind; 9] {
        use SamplingKind::*;
        [Bfs, Dfs, Rfs, Sbs, Ffs, Rw, Mhrw, Mhda, Rcmh]
    }

    pub fn name(&self) -> &'static str {
        match self {
            SamplingKind::Bfs => "bfs",
            SamplingKind::Dfs => "dfs",
            SamplingKind::Rfs => "rfs",
            SamplingKind::Sbs => "sbs",
            SamplingKind::Ffs => "ffs",
            SamplingKind::Rw => "rw",
            SamplingKind::Mhrw => "mhrw",
            SamplingKind::Mhda => "mhda",
            SamplingKind::Rcmh => "rcmh",
        }
    }

    pub fn is_walk(&self) -> bool {
        matches!(
            self,
            SamplingKind::Rw | SamplingKind::Mhrw | SamplingKind::Mhda | SamplingKind::Rcmh
        )
    }
}

impl std::str::FromStr for SamplingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SamplingKind::all()
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown sampling strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingStrategy {
    pub kind: SamplingKind,
    /// Forest-fire burn probability.
    pub fire_prob: f64,
    /// Rejection-control exponent for RCMH.
    pub rejection_alpha: f64,
    /// Snowball fanout.
    pub snowball_fanout: usize,
    pub seed: u64,
}

impl SamplingStrategy {
    pub fn new(kind: SamplingKind, seed: u64) -> Self {
        SamplingStrategy {
            kind,
            fire_prob: 0.7,
            rejection_alpha: 0.5,
            snowball_fanout: 2,
            seed,
        }
    }
}

/// Induced subgraph on `n` visited nodes. Deterministic for a fixed seed.
pub fn sample_subgraph(
    reference: &Topology,
    n: usize,
    strat: &SamplingStrategy,
) -> Result<Topology, ExpansionError> {
    let total = reference.router_count();
    if n == 0 || n > total {
        return Err(ExpansionError::BadSampleSize(n, total));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strat.seed);
    let nodes: Vec<String> = reference.routers().cloned().collect();
    let start = nodes.choose(&mut rng).unwrap().clone();
    let component = reference.router_component(&start);
    if component.len() < n {
        return Err(ExpansionError::UnreachableTarget {
            wanted: n,
            reachable: component.len(),
        });
    }
    let visited = match strat.kind {
        SamplingKind::Bfs => traverse_bfs(reference, &start, n, &mut rng),
        SamplingKind::Dfs => traverse_dfs(reference, &start, n, &mut rng),
        SamplingKind::Rfs => traverse_rfs(reference, &start, n, &mut rng),
        SamplingKind::Sbs => traverse_sbs(reference, &start, n, strat.snowball_fanout, &mut rng),
        SamplingKind::Ffs => traverse_ffs(reference, &start, n, strat.fire_prob, &mut rng),
        SamplingKind::Rw | SamplingKind::Mhrw | SamplingKind::Mhda | SamplingKind::Rcmh => {
            walk(reference, &start, n, strat, &mut rng)
        }
    };
    let mut out = Topology::new(format!("{}-sample", reference.name));
    for v in &visited {
        out.add_node(v.clone(), NodeKind::Router);
    }
    for (a, b) in reference.router_edges() {
        if visited.contains(&a) && visited.contains(&b) {
            out.add_edge(&a, &b);
        }
    }
    Ok(out)
}

fn shuffled_neighbors(t: &Topology, v: &str, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut n: Vec<String> = t.router_neighbors(v).cloned().collect();
    n.shuffle(rng);
    n
}

fn traverse_bfs(t: &Topology, start: &str, n: usize, rng: &mut ChaCha8Rng) -> BTreeSet<String> {
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::from([start.to_string()]);
    while let Some(v) = queue.pop_front() {
        if visited.len() >= n {
            break;
        }
        if !visited.insert(v.clone()) {
            continue;
        }
        for u in shuffled_neighbors(t, &v, rng) {
            if !visited.contains(&u) {
                queue.push_back(u);
            }
        }
    }
    visited
}

fn traverse_dfs(t: &Topology, start: &str, n: usize, rng: &mut ChaCha8Rng) -> BTreeSet<String> {
    let mut visited = BTreeSet::new();
    let mut stack = vec![start.to_string()];
    while let Some(v) = stack.pop() {
        if visited.len() >= n {
            break;
        }
        if !visited.insert(v.clone()) {
            continue;
        }
        for u in shuffled_neighbors(t, &v, rng) {
            if !visited.contains(&u) {
                stack.push(u);
            }
        }
    }
    visited
}

/// Random-first: expand a uniformly random frontier node each step.
fn traverse_rfs(t: &Topology, start: &str, n: usize, rng: &mut ChaCha8Rng) -> BTreeSet<String> {
    let mut visited = BTreeSet::new();
    let mut frontier = vec![start.to_string()];
    while visited.len() < n && !frontier.is_empty() {
        let idx = rng.gen_range(0..frontier.len());
        let v = frontier.swap_remove(idx);
        if !visited.insert(v.clone()) {
            continue;
        }
        for u in t.router_neighbors(&v) {
            if !visited.contains(u) {
                frontier.push(u.clone());
            }
        }
    }
    visited
}

/// Snowball: breadth-first but expanding at most `fanout` random unvisited
/// neighbors per node.
fn traverse_sbs(
    t: &Topology,
    start: &str,
    n: usize,
    fanout: usize,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<String> {
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::from([start.to_string()]);
    while visited.len() < n {
        let Some(v) = queue.pop_front() else {
            // snowball starved before reaching n: restart from an unvisited
            // neighbor of the visited set to stay connected
            match boundary_node(t, &visited, rng) {
                Some(u) => {
                    queue.push_back(u);
                    continue;
                }
                None => break,
            }
        };
        if !visited.insert(v.clone()) {
            continue;
        }
        let mut nbrs = shuffled_neighbors(t, &v, rng);
        nbrs.retain(|u| !visited.contains(u));
        for u in nbrs.into_iter().take(fanout) {
            queue.push_back(u);
        }
    }
    visited
}

/// Forest fire: burn a geometric number of unvisited neighbors per node.
fn traverse_ffs(
    t: &Topology,
    start: &str,
    n: usize,
    p: f64,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<String> {
    let mut visited = BTreeSet::new();
    let mut queue = VecDeque::from([start.to_string()]);
    while visited.len() < n {
        let Some(v) = queue.pop_front() else {
            match boundary_node(t, &visited, rng) {
                Some(u) => {
                    queue.push_back(u);
                    continue;
                }
                None => break,
            }
        };
        if !visited.insert(v.clone()) {
            continue;
        }
        let mut burn = 0usize;
        while rng.gen_bool(p) {
            burn += 1;
            if burn > 16 {
                break;
            }
        }
        let mut nbrs = shuffled_neighbors(t, &v, rng);
        nbrs.retain(|u| !visited.contains(u));
        for u in nbrs.into_iter().take(burn.max(1)) {
            queue.push_back(u);
        }
    }
    visited
}

/// A random unvisited node adjacent to the visited set, if any.
fn boundary_node(t: &Topology, visited: &BTreeSet<String>, rng: &mut ChaCha8Rng) -> Option<String> {
    let mut boundary: Vec<String> = visited
        .iter()
        .flat_map(|v| t.router_neighbors(v))
        .filter(|u| !visited.contains(*u))
        .cloned()
        .collect();
    boundary.sort();
    boundary.dedup();
    boundary.choose(rng).cloned()
}

/// Random-walk family. Acceptance rules distinguish the variants; the walk
/// runs until `n` distinct nodes are visited.
fn walk(
    t: &Topology,
    start: &str,
    n: usize,
    strat: &SamplingStrategy,
    rng: &mut ChaCha8Rng,
) -> BTreeSet<String> {
    let mut visited = BTreeSet::new();
    let mut current = start.to_string();
    visited.insert(current.clone());
    // component precheck guarantees n is reachable; the cap is a stall guard
    let cap = 10_000 * n.max(1);
    let mut steps = 0;
    while visited.len() < n && steps < cap {
        steps += 1;
        let nbrs: Vec<String> = t.router_neighbors(&current).cloned().collect();
        if nbrs.is_empty() {
            break;
        }
        let proposal = nbrs.choose(rng).unwrap().clone();
        let accepted = match strat.kind {
            SamplingKind::Rw => true,
            SamplingKind::Mhrw => {
                let ratio = t.router_degree(&current) as f64 / t.router_degree(&proposal) as f64;
                rng.gen_bool(ratio.min(1.0))
            }
            SamplingKind::Rcmh => {
                let ratio = t.router_degree(&current) as f64 / t.router_degree(&proposal) as f64;
                rng.gen_bool(ratio.powf(strat.rejection_alpha).min(1.0))
            }
            SamplingKind::Mhda => {
                let ratio = t.router_degree(&current) as f64 / t.router_degree(&proposal) as f64;
                if rng.gen_bool(ratio.min(1.0)) {
                    true
                } else {
                    // delayed acceptance: second proposal through the
                    // rejected node's neighborhood
                    let hop: Vec<String> = t.router_neighbors(&proposal).cloned().collect();
                    if let Some(second) = hop.choose(rng) {
                        let r2 = t.router_degree(&current) as f64
                            / t.router_degree(second) as f64;
                        if rng.gen_bool(r2.min(1.0)) {
                            current = second.clone();
                            visited.insert(current.clone());
                        }
                    }
                    false
                }
            }
            // traversal kinds never reach the walk loop
            _ => true,
        };
        if accepted {
            current = proposal;
            visited.insert(current.clone());
        }
    }
    // stall guard tripped on a pathological graph: fill from the boundary
    while visited.len() < n {
        match boundary_node(t, &visited, rng) {
            Some(u) => {
                visited.insert(u);
            }
            None => break,
        }
    }
    visited
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{degree_sequence, ks_distance};

    fn ring(n: usize) -> Topology {
        let mut t = Topology::new("ring");
        for i in 0..n {
            t.add_node(format!("n{i}"), NodeKind::Router);
        }
        for i in 0..n {
            t.add_edge(&format!("n{i}"), &format!("n{}", (i + 1) % n));
        }
        t
    }

    #[test]
    fn full_sample_returns_whole_graph() {
        let r = ring(8);
        for kind in SamplingKind::all() {
            let s = sample_subgraph(&r, 8, &SamplingStrategy::new(kind, 7)).unwrap();
            assert_eq!(s.router_count(), 8, "{kind:?}");
            assert_eq!(s.router_edges().len(), 8, "{kind:?}");
        }
    }

    #[test]
    fn single_node_sample_has_no_edges() {
        let r = ring(5);
        let s = sample_subgraph(&r, 1, &SamplingStrategy::new(SamplingKind::Bfs, 1)).unwrap();
        assert_eq!(s.router_count(), 1);
        assert!(s.router_edges().is_empty());
    }

    #[test]
    fn disconnected_reference_is_unreachable() {
        let mut t = ring(4);
        t.add_node("lonely", NodeKind::Router);
        // walking from a seeded start may land in either component; ask for
        // more nodes than any single component has
        let err = sample_subgraph(&t, 5, &SamplingStrategy::new(SamplingKind::Rw, 3)).unwrap_err();
        assert!(matches!(err, ExpansionError::UnreachableTarget { .. }));
    }

    #[test]
    fn samples_are_connected_and_deterministic() {
        let r = ring(12);
        for kind in SamplingKind::all() {
            let strat = SamplingStrategy::new(kind, 99);
            let a = sample_subgraph(&r, 7, &strat).unwrap();
            let b = sample_subgraph(&r, 7, &strat).unwrap();
            assert_eq!(a.router_edges(), b.router_edges(), "{kind:?}");
            assert!(a.is_connected_over_routers(), "{kind:?}");
        }
    }

    #[test]
    fn sampled_sequence_comparable_to_reference() {
        let r = ring(16);
        let s = sample_subgraph(&r, 12, &SamplingStrategy::new(SamplingKind::Rw, 5)).unwrap();
        let d = ks_distance(&degree_sequence(&s, true), &degree_sequence(&r, true)).unwrap();
        assert!((0.0..=1.0).contains(&d));
    }
}
