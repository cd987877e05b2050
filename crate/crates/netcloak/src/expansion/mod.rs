//! Topology expansion: replica blow-up, sample-connect, and degree-mapped
//! greedy embedding against a reference graph.

pub mod sampling;

pub use sampling::{SamplingKind, SamplingStrategy};

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::topology::{degree_sequence, NodeKind, Topology};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExpansionError {
    #[error("replica factor must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("no complete degree-feasible matching into the reference graph")]
    IncompleteMatching,
    #[error("no reference topology admits a complete matching")]
    NoFeasibleReference,
    #[error("sampling cannot reach {wanted} distinct nodes (component has {reachable})")]
    UnreachableTarget { wanted: usize, reachable: usize },
    #[error("sample size {0} out of range 1..={1}")]
    BadSampleSize(usize, usize),
}

/// Injective map from original router ids to reference node ids.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeMapping {
    pub map: BTreeMap<String, String>,
}

impl NodeMapping {
    pub fn image(&self) -> BTreeSet<&String> {
        self.map.values().collect()
    }

    pub fn get(&self, orig: &str) -> Option<&String> {
        self.map.get(orig)
    }
}

/// k-fold replica: every original edge becomes a complete bipartite bundle
/// between the copy layers, so every layer permutation is an automorphism
/// and each copy shares its original's neighbor set.
pub fn expand_replica(g: &Topology, k: usize) -> Result<Topology, ExpansionError> {
    if k < 2 {
        return Err(ExpansionError::InvalidK(k));
    }
    let mut out = Topology::new(format!("{}-replica{k}", g.name));
    let copy_name = |v: &str, layer: usize| {
        if layer == 0 {
            v.to_string()
        } else {
            format!("{v}_{layer}")
        }
    };
    for v in g.routers() {
        for layer in 0..k {
            out.add_node(copy_name(v, layer), NodeKind::Router);
            if let Some(asn) = g.as_of(v) {
                out.set_as(&copy_name(v, layer), asn);
            }
        }
    }
    for (a, b) in g.router_edges() {
        for i in 0..k {
            for j in 0..k {
                out.add_edge(&copy_name(&a, i), &copy_name(&b, j));
            }
        }
    }
    Ok(out)
}

/// Maximum bipartite matching (Hopcroft-Karp) over the degree-feasibility
/// relation deg_ori(u) <= deg_ref(v). Errors unless it saturates the
/// original side.
pub fn node_mapping(g: &Topology, reference: &Topology) -> Result<NodeMapping, ExpansionError> {
    let left: Vec<String> = g.routers().cloned().collect();
    let right: Vec<String> = reference.routers().cloned().collect();
    if left.len() > right.len() {
        return Err(ExpansionError::IncompleteMatching);
    }
    let ldeg: Vec<usize> = left.iter().map(|v| g.router_degree(v)).collect();
    let rdeg: Vec<usize> = right.iter().map(|v| reference.router_degree(v)).collect();
    let adj: Vec<Vec<usize>> = ldeg
        .iter()
        .map(|d| {
            (0..right.len())
                .filter(|j| rdeg[*j] >= *d)
                .collect::<Vec<usize>>()
        })
        .collect();
    let matched = hopcroft_karp(left.len(), right.len(), &adj);
    let mut map = BTreeMap::new();
    for (i, m) in matched.iter().enumerate() {
        if let Some(j) = m {
            map.insert(left[i].clone(), right[*j].clone());
        } else {
            return Err(ExpansionError::IncompleteMatching);
        }
    }
    Ok(NodeMapping { map })
}

/// Left-indexed matching: result[i] = matched right index.
fn hopcroft_karp(nl: usize, nr: usize, adj: &[Vec<usize>]) -> Vec<Option<usize>> {
    const INF: usize = usize::MAX;
    let mut match_l: Vec<Option<usize>> = vec![None; nl];
    let mut match_r: Vec<Option<usize>> = vec![None; nr];
    loop {
        // BFS layering from free left vertices
        let mut dist = vec![INF; nl];
        let mut queue: std::collections::VecDeque<usize> = (0..nl)
            .filter(|i| match_l[*i].is_none())
            .inspect(|i| dist[*i] = 0)
            .collect();
        let mut found = false;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                match match_r[v] {
                    None => found = true,
                    Some(u2) if dist[u2] == INF => {
                        dist[u2] = dist[u] + 1;
                        queue.push_back(u2);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        fn try_augment(
            u: usize,
            adj: &[Vec<usize>],
            dist: &mut [usize],
            match_l: &mut [Option<usize>],
            match_r: &mut [Option<usize>],
        ) -> bool {
            for &v in &adj[u] {
                let ok = match match_r[v] {
                    None => true,
                    Some(u2) => {
                        dist[u2] == dist[u] + 1
                            && try_augment(u2, adj, dist, match_l, match_r)
                    }
                };
                if ok {
                    match_l[u] = Some(v);
                    match_r[v] = Some(u);
                    return true;
                }
            }
            dist[u] = usize::MAX;
            false
        }
        for u in 0..nl {
            if match_l[u].is_none() {
                try_augment(u, adj, &mut dist, &mut match_l, &mut match_r);
            }
        }
    }
    match_l
}

/// Pick the library graph closest in size to `wanted_total` among those
/// admitting a complete matching from `g`; ties prefer the larger graph,
/// then lexicographically smaller name.
pub fn select_reference(
    g: &Topology,
    library: &[Topology],
    wanted_total: usize,
) -> Result<Topology, ExpansionError> {
    let mut candidates: Vec<&Topology> = library.iter().collect();
    candidates.sort_by(|a, b| {
        let da = (a.router_count() as i64 - wanted_total as i64).abs();
        let db = (b.router_count() as i64 - wanted_total as i64).abs();
        da.cmp(&db)
            .then(b.router_count().cmp(&a.router_count()))
            .then(a.name.cmp(&b.name))
    });
    for cand in candidates {
        if node_mapping(g, cand).is_ok() {
            return Ok(cand.clone());
        }
    }
    Err(ExpansionError::NoFeasibleReference)
}

/// Book-keeping for the embedding construction.
#[derive(Debug)]
pub struct EmbeddingState {
    pub graph: Topology,
    pub target_deg: BTreeMap<String, usize>,
    pub need: BTreeMap<String, i64>,
    pub protected_edges: BTreeSet<(String, String)>,
}

impl EmbeddingState {
    fn add_edge(&mut self, a: &str, b: &str) {
        self.graph.add_edge(a, b);
        *self.need.get_mut(a).unwrap() -= 1;
        *self.need.get_mut(b).unwrap() -= 1;
    }

    fn remove_edge(&mut self, a: &str, b: &str) {
        debug_assert!(!self.is_protected(a, b));
        self.graph.remove_edge(a, b);
        *self.need.get_mut(a).unwrap() += 1;
        *self.need.get_mut(b).unwrap() += 1;
    }

    fn is_protected(&self, a: &str, b: &str) -> bool {
        let key = ordered(a, b);
        self.protected_edges.contains(&key)
    }
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a < b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Greedy embedding: place the original graph inside the reference node set
/// according to the mapping, then complete residual degrees Havel-Hakimi
/// style and rearrange remaining gaps.
pub fn embed_graph_greedy(
    g: &Topology,
    reference: &Topology,
) -> Result<(Topology, NodeMapping), ExpansionError> {
    let mapping = node_mapping(g, reference)?;
    let emb = embed_with_mapping(g, reference, &mapping);
    Ok((emb, mapping))
}

/// Embedding for a fixed mapping. Output node ids: original names for
/// mapped nodes, reference names (uniquified on collision) for the rest.
pub fn embed_with_mapping(g: &Topology, reference: &Topology, mapping: &NodeMapping) -> Topology {
    let mut state = init_embedding(g, reference, mapping);
    edge_completion(&mut state);
    edge_rearrangement(&mut state);
    connect_components(&mut state);
    state.graph
}

/// Merge stray fake-only components into the main component. A double
/// edge swap over two non-bridge edges preserves every degree; when either
/// side is a tree (no cycle edge to spare) a plain bridge edge is added
/// instead.
fn connect_components(state: &mut EmbeddingState) {
    loop {
        let nodes: Vec<String> = state.graph.routers().cloned().collect();
        let Some(first) = nodes.first() else {
            return;
        };
        // main component: the one holding the protected (original) edges
        let anchor = state
            .protected_edges
            .iter()
            .next()
            .map(|(a, _)| a.clone())
            .unwrap_or_else(|| first.clone());
        let main = state.graph.router_component(&anchor);
        let Some(stray) = nodes.iter().find(|n| !main.contains(*n)) else {
            return;
        };
        let stray_comp = state.graph.router_component(stray);
        let in_comp = |set: &BTreeSet<String>, a: &String, b: &String| {
            set.contains(a) && set.contains(b)
        };
        let stray_edge = state
            .graph
            .router_edges()
            .into_iter()
            .find(|(a, b)| in_comp(&stray_comp, a, b) && !is_bridge(&mut state.graph, a, b));
        let main_edge = state
            .graph
            .router_edges()
            .into_iter()
            .find(|(a, b)| {
                in_comp(&main, a, b)
                    && !state.is_protected(a, b)
                    && !is_bridge(&mut state.graph, a, b)
            });
        match (stray_edge, main_edge) {
            (Some((x, y)), Some((u, v))) => {
                state.remove_edge(&x, &y);
                state.remove_edge(&u, &v);
                state.add_edge(&x, &u);
                state.add_edge(&y, &v);
            }
            _ => {
                // bridge: cheapest deviation when no swap is possible
                let u = main.iter().next().unwrap().clone();
                state.add_edge(stray, &u);
            }
        }
    }
}

/// Does removing (a, b) disconnect a from b?
fn is_bridge(graph: &mut Topology, a: &str, b: &str) -> bool {
    graph.remove_edge(a, b);
    let reachable = graph.router_component(a).contains(b);
    graph.add_edge(a, b);
    !reachable
}

fn init_embedding(g: &Topology, reference: &Topology, mapping: &NodeMapping) -> EmbeddingState {
    let inverse: BTreeMap<&String, &String> =
        mapping.map.iter().map(|(o, r)| (r, o)).collect();
    // reference node -> output name
    let mut out_name: BTreeMap<String, String> = BTreeMap::new();
    let taken: BTreeSet<&String> = mapping.map.keys().collect();
    for r in reference.routers() {
        let name = match inverse.get(r) {
            Some(orig) => (*orig).clone(),
            None => {
                if taken.contains(r) {
                    format!("ref-{r}")
                } else {
                    r.clone()
                }
            }
        };
        out_name.insert(r.clone(), name);
    }
    let mut graph = Topology::new(format!("{}-embedded", g.name));
    let mut target_deg = BTreeMap::new();
    let mut need = BTreeMap::new();
    for r in reference.routers() {
        let name = out_name[r].clone();
        graph.add_node(name.clone(), NodeKind::Router);
        target_deg.insert(name.clone(), reference.router_degree(r));
        need.insert(name, reference.router_degree(r) as i64);
    }
    for orig in g.routers() {
        if let Some(asn) = g.as_of(orig) {
            graph.set_as(orig, asn);
        }
    }
    let mut protected_edges = BTreeSet::new();
    for (a, b) in g.router_edges() {
        graph.add_edge(&a, &b);
        *need.get_mut(&a).unwrap() -= 1;
        *need.get_mut(&b).unwrap() -= 1;
        protected_edges.insert(ordered(&a, &b));
    }
    EmbeddingState {
        graph,
        target_deg,
        need,
        protected_edges,
    }
}

/// Iteratively connect the node with the largest residual degree to
/// partners in residual-degree order; stop when the current top node cannot
/// add any edge.
fn edge_completion(state: &mut EmbeddingState) {
    loop {
        let Some(u) = state
            .need
            .iter()
            .filter(|(_, n)| **n > 0)
            .max_by(|(ida, na), (idb, nb)| na.cmp(nb).then(idb.cmp(ida)))
            .map(|(id, _)| id.clone())
        else {
            return;
        };
        let mut partners: Vec<(i64, String)> = state
            .need
            .iter()
            .filter(|(id, n)| **n > 0 && **id != u)
            .map(|(id, n)| (*n, id.clone()))
            .collect();
        partners.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut added = false;
        for (_, v) in partners {
            if state.need[&u] <= 0 {
                break;
            }
            if !state.graph.has_edge(&u, &v) {
                state.add_edge(&u, &v);
                added = true;
            }
        }
        if !added {
            return;
        }
    }
}

/// For under-target nodes u, v pick an existing unprotected edge (x, y)
/// with x not adjacent to u and y not adjacent to v, then rewire it to
/// (u, x) and (v, y). A single node two short of target reuses the same
/// move with u = v.
fn edge_rearrangement(state: &mut EmbeddingState) {
    loop {
        let under: Vec<String> = state
            .need
            .iter()
            .filter(|(_, n)| **n > 0)
            .map(|(id, _)| id.clone())
            .collect();
        if under.is_empty() {
            return;
        }
        let mut pairs: Vec<(String, String)> = Vec::new();
        for (i, u) in under.iter().enumerate() {
            for v in under.iter().skip(i + 1) {
                pairs.push((u.clone(), v.clone()));
            }
            if state.need[u] >= 2 {
                pairs.push((u.clone(), u.clone()));
            }
        }
        let mut swapped = false;
        'pair: for (u, v) in pairs {
            for (x, y) in state.graph.router_edges() {
                if state.is_protected(&x, &y) {
                    continue;
                }
                for (x, y) in [(x.clone(), y.clone()), (y, x)] {
                    if x == u || x == v || y == u || y == v {
                        continue;
                    }
                    if u == v && x == y {
                        continue;
                    }
                    if !state.graph.has_edge(&u, &x) && !state.graph.has_edge(&v, &y) {
                        state.remove_edge(&x, &y);
                        state.add_edge(&u, &x);
                        state.add_edge(&v, &y);
                        swapped = true;
                        break 'pair;
                    }
                }
            }
        }
        if !swapped {
            return;
        }
    }
}

/// Sample-connect expansion: union the original graph with a sampled
/// subgraph of the reference and hook them together with a few random
/// bridging edges (c = max(1, ceil(n_add / 4))).
pub fn expand_sample_connect(
    g: &Topology,
    reference: &Topology,
    n_add: usize,
    strat: &SamplingStrategy,
) -> Result<Topology, ExpansionError> {
    let sampled = sampling::sample_subgraph(reference, n_add, strat)?;
    let mut out = Topology::new(format!("{}-sampleconnect", g.name));
    for v in g.routers() {
        out.add_node(v.clone(), NodeKind::Router);
        if let Some(asn) = g.as_of(v) {
            out.set_as(v, asn);
        }
    }
    for (a, b) in g.router_edges() {
        out.add_edge(&a, &b);
    }
    let mut renamed: BTreeMap<String, String> = BTreeMap::new();
    for v in sampled.routers() {
        let name = if out.has_node(v) { format!("ref-{v}") } else { v.clone() };
        out.add_node(name.clone(), NodeKind::Router);
        renamed.insert(v.clone(), name);
    }
    for (a, b) in sampled.router_edges() {
        out.add_edge(&renamed[&a], &renamed[&b]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(strat.seed ^ 0x5a5a_5a5a);
    let originals: Vec<String> = g.routers().cloned().collect();
    let mut sampled_names: Vec<String> = renamed.values().cloned().collect();
    sampled_names.sort();
    let c = std::cmp::max(1, n_add.div_ceil(4));
    let mut added = 0;
    let mut guard = 0;
    while added < c && guard < 1000 {
        guard += 1;
        let a = originals.choose(&mut rng).unwrap().clone();
        let b = sampled_names.choose(&mut rng).unwrap().clone();
        if !out.has_edge(&a, &b) {
            out.add_edge(&a, &b);
            added += 1;
        }
    }
    Ok(out)
}

/// Residual degrees after placing the original edges under a mapping;
/// exposed for the embedding walkthrough tests.
pub fn residual_needs(
    g: &Topology,
    reference: &Topology,
    mapping: &NodeMapping,
) -> BTreeMap<String, i64> {
    init_embedding(g, reference, mapping).need
}

/// Convenience: does the embedded graph realize the reference degree
/// sequence exactly?
pub fn matches_reference_degrees(embedded: &Topology, reference: &Topology) -> bool {
    degree_sequence(embedded, true).sorted_desc == degree_sequence(reference, true).sorted_desc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::NodeKind;

    fn graph(name: &str, nodes: &[&str], edges: &[(&str, &str)]) -> Topology {
        let mut t = Topology::new(name);
        for n in nodes {
            t.add_node(*n, NodeKind::Router);
        }
        for (a, b) in edges {
            t.add_edge(a, b);
        }
        t
    }

    /// Check that a node permutation maps the edge set onto itself.
    fn is_automorphism(t: &Topology, perm: &BTreeMap<String, String>) -> bool {
        let edges: BTreeSet<(String, String)> = t.router_edges().into_iter().collect();
        edges.iter().all(|(a, b)| {
            let (pa, pb) = (perm[a].clone(), perm[b].clone());
            let key = if pa < pb { (pa, pb) } else { (pb, pa) };
            edges.contains(&key)
        })
    }

    #[test]
    fn replica_single_edge_swap_automorphism() {
        let g = graph("pair", &["a", "b"], &[("a", "b")]);
        let r = expand_replica(&g, 2).unwrap();
        assert_eq!(r.router_count(), 4);
        let mut perm = BTreeMap::new();
        for v in ["a", "b"] {
            perm.insert(v.to_string(), format!("{v}_1"));
            perm.insert(format!("{v}_1"), v.to_string());
        }
        assert!(is_automorphism(&r, &perm));
    }

    #[test]
    fn replica_triangle_threefold() {
        let g = graph("tri", &["a", "b", "c"], &[("a", "b"), ("b", "c"), ("a", "c")]);
        let r = expand_replica(&g, 3).unwrap();
        assert_eq!(r.router_count(), 9);
        // cyclic layer shift is an automorphism
        let shift = |v: &str, by: usize| {
            let (base, layer) = match v.rsplit_once('_') {
                Some((b, l)) if l.parse::<usize>().is_ok() => (b.to_string(), l.parse::<usize>().unwrap()),
                _ => (v.to_string(), 0),
            };
            let nl = (layer + by) % 3;
            if nl == 0 {
                base
            } else {
                format!("{base}_{nl}")
            }
        };
        let perm: BTreeMap<String, String> = r
            .routers()
            .map(|v| (v.clone(), shift(v, 1)))
            .collect();
        assert!(is_automorphism(&r, &perm));
        // original triangle is the induced subgraph on the real ids
        for (a, b) in g.router_edges() {
            assert!(r.has_edge(&a, &b));
        }
    }

    #[test]
    fn replica_rejects_small_k() {
        let g = graph("pair", &["a", "b"], &[("a", "b")]);
        assert_eq!(expand_replica(&g, 1).unwrap_err(), ExpansionError::InvalidK(1));
    }

    /// Brute-force check: does any injective degree-feasible assignment
    /// exist? Used as an oracle for the matching on tiny graphs.
    fn matching_exists_brute(ldeg: &[usize], rdeg: &[usize]) -> bool {
        fn rec(i: usize, ldeg: &[usize], rdeg: &[usize], used: &mut Vec<bool>) -> bool {
            if i == ldeg.len() {
                return true;
            }
            for j in 0..rdeg.len() {
                if !used[j] && rdeg[j] >= ldeg[i] {
                    used[j] = true;
                    if rec(i + 1, ldeg, rdeg, used) {
                        return true;
                    }
                    used[j] = false;
                }
            }
            false
        }
        rec(0, ldeg, rdeg, &mut vec![false; rdeg.len()])
    }

    #[test]
    fn node_mapping_agrees_with_brute_force() {
        // g degrees [2,1] into ref degrees [3,2,1]: feasible
        let g = graph("g", &["u", "v", "w"], &[("u", "v"), ("u", "w")]);
        let r = graph(
            "r",
            &["a", "b", "c", "d"],
            &[("a", "b"), ("a", "c"), ("a", "d"), ("b", "c")],
        );
        assert!(matching_exists_brute(&[2, 1, 1], &[3, 2, 2, 1]));
        let m = node_mapping(&g, &r).unwrap();
        assert_eq!(m.map.len(), 3);
        for (o, t) in &m.map {
            assert!(r.router_degree(t) >= g.router_degree(o));
        }
    }

    #[test]
    fn node_mapping_infeasible() {
        // single node of degree 3 cannot map into max-degree-2 reference
        let g = graph(
            "g",
            &["u", "a", "b", "c"],
            &[("u", "a"), ("u", "b"), ("u", "c")],
        );
        let r = graph("r", &["x", "y", "z", "w"], &[("x", "y"), ("y", "z"), ("z", "w")]);
        assert!(!matching_exists_brute(&[3, 1, 1, 1], &[1, 2, 2, 1]));
        assert_eq!(
            node_mapping(&g, &r).unwrap_err(),
            ExpansionError::IncompleteMatching
        );
    }

    #[test]
    fn identity_mapping_on_same_graph() {
        let g = graph("g", &["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let m = node_mapping(&g, &g).unwrap();
        for (o, t) in &m.map {
            assert_eq!(g.router_degree(o), g.router_degree(t));
        }
    }

    #[test]
    fn embed_single_edge_into_triangle() {
        let g = graph("g", &["s", "t"], &[("s", "t")]);
        let r = graph("tri", &["x", "y", "z"], &[("x", "y"), ("y", "z"), ("x", "z")]);
        let (emb, mapping) = embed_graph_greedy(&g, &r).unwrap();
        assert_eq!(emb.router_count(), 3);
        assert_eq!(emb.router_edges().len(), 3, "triangle completed");
        for (a, b) in g.router_edges() {
            assert!(emb.has_edge(&a, &b));
        }
        assert_eq!(mapping.map.len(), 2);
        assert!(matches_reference_degrees(&emb, &r));
    }

    #[test]
    fn embed_identity_adds_nothing() {
        let g = graph("g", &["a", "b", "c"], &[("a", "b"), ("b", "c")]);
        let (emb, _) = embed_graph_greedy(&g, &g).unwrap();
        assert_eq!(emb.router_edges().len(), g.router_edges().len());
    }

    #[test]
    fn sample_connect_is_deterministic_and_connected() {
        let g = graph("g", &["a", "b"], &[("a", "b")]);
        let mut r = Topology::new("ref");
        for i in 0..8 {
            r.add_node(format!("n{i}"), NodeKind::Router);
        }
        for i in 0..7 {
            r.add_edge(&format!("n{i}"), &format!("n{}", i + 1));
        }
        let strat = SamplingStrategy::new(SamplingKind::Rw, 42);
        let one = expand_sample_connect(&g, &r, 4, &strat).unwrap();
        let two = expand_sample_connect(&g, &r, 4, &strat).unwrap();
        assert_eq!(one.router_edges(), two.router_edges());
        assert_eq!(one.router_count(), 6);
        assert!(one.is_connected_over_routers());
    }
}
