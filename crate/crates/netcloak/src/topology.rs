//! Layer-3 topology graph, degree sequences and the K-S rationality metric.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use thiserror::Error;

use crate::config::{interfaces, NetworkSnapshot};
use crate::ip::Ipv4Net;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("subnet {0} is shared by {1} routers; only point-to-point links are supported")]
    AmbiguousSubnet(String, usize),
    #[error("host {0} has no gateway router in the snapshot")]
    OrphanHost(String),
    #[error("empty degree sequence")]
    EmptySequence,
    #[error("graphml read failed for {path}: {msg}")]
    GraphmlRead { path: String, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum NodeKind {
    Router,
    Host,
}

/// Simple undirected router/host graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Topology {
    pub name: String,
    kind: BTreeMap<String, NodeKind>,
    adj: BTreeMap<String, BTreeSet<String>>,
    as_of: BTreeMap<String, u32>,
}

impl Topology {
    pub fn new(name: impl Into<String>) -> Self {
        Topology {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_node(&mut self, id: impl Into<String>, kind: NodeKind) {
        let id = id.into();
        self.kind.entry(id.clone()).or_insert(kind);
        self.adj.entry(id).or_default();
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        assert!(a != b, "self loop {a}");
        assert!(self.kind.contains_key(a) && self.kind.contains_key(b), "unknown endpoint");
        self.adj.get_mut(a).unwrap().insert(b.to_string());
        self.adj.get_mut(b).unwrap().insert(a.to_string());
    }

    pub fn remove_edge(&mut self, a: &str, b: &str) {
        if let Some(s) = self.adj.get_mut(a) {
            s.remove(b);
        }
        if let Some(s) = self.adj.get_mut(b) {
            s.remove(a);
        }
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        self.adj.get(a).map(|s| s.contains(b)).unwrap_or(false)
    }

    pub fn has_node(&self, id: &str) -> bool {
        self.kind.contains_key(id)
    }

    pub fn node_kind(&self, id: &str) -> Option<NodeKind> {
        self.kind.get(id).copied()
    }

    pub fn set_as(&mut self, id: &str, asn: u32) {
        self.as_of.insert(id.to_string(), asn);
    }

    pub fn as_of(&self, id: &str) -> Option<u32> {
        self.as_of.get(id).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &String> {
        self.kind.keys()
    }

    pub fn routers(&self) -> impl Iterator<Item = &String> {
        self.kind
            .iter()
            .filter(|(_, k)| **k == NodeKind::Router)
            .map(|(n, _)| n)
    }

    pub fn router_count(&self) -> usize {
        self.routers().count()
    }

    pub fn neighbors(&self, id: &str) -> impl Iterator<Item = &String> {
        self.adj.get(id).into_iter().flatten()
    }

    /// Router-only neighbors, the degree basis for anonymity definitions.
    pub fn router_neighbors(&self, id: &str) -> impl Iterator<Item = &String> {
        self.neighbors(id)
            .filter(|n| self.kind.get(*n) == Some(&NodeKind::Router))
    }

    pub fn router_degree(&self, id: &str) -> usize {
        self.router_neighbors(id).count()
    }

    /// Undirected edge list with each pair listed once, sorted.
    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (a, nbrs) in &self.adj {
            for b in nbrs {
                if a < b {
                    out.push((a.clone(), b.clone()));
                }
            }
        }
        out
    }

    /// Edges between routers only.
    pub fn router_edges(&self) -> Vec<(String, String)> {
        self.edges()
            .into_iter()
            .filter(|(a, b)| {
                self.kind.get(a) == Some(&NodeKind::Router)
                    && self.kind.get(b) == Some(&NodeKind::Router)
            })
            .collect()
    }

    /// Induced subgraph on routers only.
    pub fn router_graph(&self) -> Topology {
        let mut t = Topology::new(self.name.clone());
        for r in self.routers() {
            t.add_node(r.clone(), NodeKind::Router);
            if let Some(asn) = self.as_of(r) {
                t.set_as(r, asn);
            }
        }
        for (a, b) in self.router_edges() {
            t.add_edge(&a, &b);
        }
        t
    }

    pub fn is_connected_over_routers(&self) -> bool {
        let routers: Vec<&String> = self.routers().collect();
        let Some(start) = routers.first() else {
            return true;
        };
        let mut seen = BTreeSet::new();
        let mut stack = vec![(*start).clone()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            for n in self.router_neighbors(&v) {
                if !seen.contains(n) {
                    stack.push(n.clone());
                }
            }
        }
        seen.len() == routers.len()
    }

    /// Connected component containing `start`, routers only.
    pub fn router_component(&self, start: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![start.to_string()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            for n in self.router_neighbors(&v) {
                if !seen.contains(n) {
                    stack.push(n.clone());
                }
            }
        }
        seen
    }
}

/// Degree multiset with a cached descending order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeSequence {
    pub values: Vec<usize>,
    pub sorted_desc: Vec<usize>,
}

impl DegreeSequence {
    pub fn from_values(values: Vec<usize>) -> Self {
        let mut sorted_desc = values.clone();
        sorted_desc.sort_unstable_by(|a, b| b.cmp(a));
        DegreeSequence { values, sorted_desc }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalityScore {
    pub ks_distance: f64,
    pub reference_name: String,
}

/// Derive the L3 graph: routers are adjacent iff they own interfaces in the
/// same subnet, hosts hang off their gateway router.
pub fn extract_topology(snapshot: &NetworkSnapshot) -> Result<Topology, TopologyError> {
    let mut t = Topology::new("snapshot");
    let mut subnet_owners: BTreeMap<Ipv4Net, BTreeSet<String>> = BTreeMap::new();
    for (name, cfg) in &snapshot.routers {
        t.add_node(name.clone(), NodeKind::Router);
        if let Some(b) = crate::config::bgp(cfg) {
            t.set_as(name, b.asn);
        }
        for iface in interfaces(cfg) {
            if iface.shutdown {
                continue;
            }
            if let Some(net) = iface.subnet() {
                subnet_owners.entry(net).or_default().insert(name.clone());
            }
        }
    }
    for (net, owners) in &subnet_owners {
        if owners.len() > 2 {
            return Err(TopologyError::AmbiguousSubnet(net.to_string(), owners.len()));
        }
        if owners.len() == 2 {
            let v: Vec<&String> = owners.iter().collect();
            t.add_edge(v[0], v[1]);
        }
    }
    for (name, host) in &snapshot.hosts {
        if !snapshot.routers.contains_key(&host.gateway_router) {
            return Err(TopologyError::OrphanHost(name.clone()));
        }
        t.add_node(name.clone(), NodeKind::Host);
        t.add_edge(name, &host.gateway_router);
    }
    Ok(t)
}

/// Degree sequence over routers (`routers_only`) or all nodes. Router
/// degrees count router neighbors only; host links are excluded from the
/// anonymity arithmetic.
pub fn degree_sequence(t: &Topology, routers_only: bool) -> DegreeSequence {
    let values = if routers_only {
        t.routers().map(|r| t.router_degree(r)).collect()
    } else {
        t.nodes().map(|n| t.neighbors(n).count()).collect()
    };
    DegreeSequence::from_values(values)
}

/// Two-sample Kolmogorov-Smirnov distance between degree multisets,
/// evaluated at the union of support points of the normalized ECDFs.
pub fn ks_distance(a: &DegreeSequence, b: &DegreeSequence) -> Result<f64, TopologyError> {
    if a.is_empty() || b.is_empty() {
        return Err(TopologyError::EmptySequence);
    }
    let mut support: BTreeSet<usize> = BTreeSet::new();
    support.extend(a.values.iter().copied());
    support.extend(b.values.iter().copied());
    let ecdf = |seq: &DegreeSequence, x: usize| {
        seq.values.iter().filter(|v| **v <= x).count() as f64 / seq.len() as f64
    };
    let mut sup: f64 = 0.0;
    for x in support {
        let d = (ecdf(a, x) - ecdf(b, x)).abs();
        if d > sup {
            sup = d;
        }
    }
    Ok(sup)
}

/// Topology rationality: K-S distance between router degree sequences.
pub fn rationality(anonym: &Topology, reference: &Topology) -> Result<RationalityScore, TopologyError> {
    let a = degree_sequence(anonym, true);
    let b = degree_sequence(reference, true);
    Ok(RationalityScore {
        ks_distance: ks_distance(&a, &b)?,
        reference_name: reference.name.clone(),
    })
}

/// Minimal GraphML reader: node elements are routers, edge elements links;
/// attributes are ignored. Accepts Topology-Zoo style exports.
pub fn read_graphml(path: &Path) -> Result<Topology, TopologyError> {
    let text = std::fs::read_to_string(path).map_err(|e| TopologyError::GraphmlRead {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "reference".to_string());
    parse_graphml(&text, &name).map_err(|msg| TopologyError::GraphmlRead {
        path: path.display().to_string(),
        msg,
    })
}

pub fn parse_graphml(text: &str, name: &str) -> Result<Topology, String> {
    let node_re = regex::Regex::new(r#"<node\b[^>]*\bid\s*=\s*"([^"]+)""#).unwrap();
    let edge_re = regex::Regex::new(
        r#"<edge\b[^>]*\bsource\s*=\s*"([^"]+)"[^>]*\btarget\s*=\s*"([^"]+)""#,
    )
    .unwrap();
    let mut t = Topology::new(name);
    for cap in node_re.captures_iter(text) {
        t.add_node(cap[1].to_string(), NodeKind::Router);
    }
    if t.router_count() == 0 {
        return Err("no node elements found".into());
    }
    for cap in edge_re.captures_iter(text) {
        let (a, b) = (&cap[1], &cap[2]);
        if !t.has_node(a) || !t.has_node(b) {
            return Err(format!("edge references unknown node {a} or {b}"));
        }
        if a != b {
            t.add_edge(a, b);
        }
    }
    Ok(t)
}

/// Serialize a topology as GraphML (fixtures and reports).
pub fn write_graphml(t: &Topology) -> String {
    let mut s = String::from(
        "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n  <graph edgedefault=\"undirected\">\n",
    );
    for n in t.routers() {
        s.push_str(&format!("    <node id=\"{n}\"/>\n"));
    }
    for (a, b) in t.router_edges() {
        s.push_str(&format!("    <edge source=\"{a}\" target=\"{b}\"/>\n"));
    }
    s.push_str("  </graph>\n</graphml>\n");
    s
}

/// Load every `.graphml` file under a directory, sorted by file name.
pub fn load_reference_library(dir: &Path) -> Result<Vec<Topology>, TopologyError> {
    let rd = std::fs::read_dir(dir).map_err(|e| TopologyError::GraphmlRead {
        path: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let mut files: Vec<_> = rd
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "graphml").unwrap_or(false))
        .collect();
    files.sort();
    files.iter().map(|p| read_graphml(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(v: &[usize]) -> DegreeSequence {
        DegreeSequence::from_values(v.to_vec())
    }

    #[test]
    fn star_degree_sequence() {
        let mut t = Topology::new("star");
        for n in ["c", "a", "b", "d"] {
            t.add_node(n, NodeKind::Router);
        }
        t.add_edge("c", "a");
        t.add_edge("c", "b");
        t.add_edge("c", "d");
        assert_eq!(degree_sequence(&t, true).sorted_desc, vec![3, 1, 1, 1]);
    }

    #[test]
    fn empty_topology_degree_sequence() {
        let t = Topology::new("empty");
        assert!(degree_sequence(&t, true).is_empty());
    }

    #[test]
    fn ks_identity_and_disjoint() {
        assert_eq!(ks_distance(&seq(&[1, 2, 3]), &seq(&[1, 2, 3])).unwrap(), 0.0);
        assert_eq!(ks_distance(&seq(&[1]), &seq(&[5])).unwrap(), 1.0);
    }

    #[test]
    fn ks_known_value() {
        // ECDFs at support {1,2,3}: a = [.5, 1, 1], b = [.25, .75, 1]
        let d = ks_distance(&seq(&[1, 1, 2, 2]), &seq(&[1, 2, 2, 3])).unwrap();
        assert!((d - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ks_empty_errors() {
        assert_eq!(
            ks_distance(&seq(&[]), &seq(&[1])).unwrap_err(),
            TopologyError::EmptySequence
        );
    }

    #[test]
    fn graphml_round_trip() {
        let mut t = Topology::new("g");
        for n in ["n0", "n1", "n2"] {
            t.add_node(n, NodeKind::Router);
        }
        t.add_edge("n0", "n1");
        t.add_edge("n1", "n2");
        let xml = write_graphml(&t);
        let back = parse_graphml(&xml, "g").unwrap();
        assert_eq!(back.router_count(), 3);
        assert_eq!(back.router_edges(), t.router_edges());
    }
}
