//! OSPF: per-source Dijkstra with equal-cost predecessor sets, route
//! installation and external redistribution.

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use crate::ip::Ipv4Net;

use super::bgp::BgpRibEntry;
use super::{Device, Network, NextHop, Protocol, Route, REDISTRIBUTE_METRIC};

/// Inbound OSPF distribute-lists veto route installation at this router.
fn igp_permitted(dev: &Device, prefix: &Ipv4Net) -> bool {
    let Some(ospf) = &dev.ospf else {
        return true;
    };
    ospf.distribute_lists
        .iter()
        .filter(|(_, dir)| dir == "in")
        .all(|(name, _)| dev.filters.permits(name, prefix))
}

/// Distances and equal-cost predecessor sets from one source router.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScostTableEntry {
    pub scost: BTreeMap<String, u64>,
    pub preds: BTreeMap<String, BTreeSet<String>>,
}

/// Shortest-path table of one AS: per source router, the cost to every
/// router and the set of cost-minimizing predecessors.
#[derive(Debug, Clone, Default)]
pub struct ScostTable {
    pub asn: u32,
    pub per_source: BTreeMap<String, ScostTableEntry>,
}

impl ScostTable {
    pub fn dist(&self, src: &str, dst: &str) -> Option<u64> {
        self.per_source.get(src)?.scost.get(dst).copied()
    }

    pub fn preds(&self, src: &str, dst: &str) -> Option<&BTreeSet<String>> {
        self.per_source.get(src)?.preds.get(dst)
    }

    /// Neighbors of `src` lying on a shortest path from `src` to `dst`.
    pub fn first_hops(&self, src: &str, dst: &str) -> BTreeSet<String> {
        let Some(entry) = self.per_source.get(src) else {
            return BTreeSet::new();
        };
        if src == dst || !entry.scost.contains_key(dst) {
            return BTreeSet::new();
        }
        // walk the predecessor DAG backwards from dst; nodes whose pred set
        // contains src are the first hops
        let mut hops = BTreeSet::new();
        let mut stack = vec![dst.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(v) = stack.pop() {
            if !seen.insert(v.clone()) {
                continue;
            }
            if let Some(preds) = entry.preds.get(&v) {
                for p in preds {
                    if p == src {
                        hops.insert(v.clone());
                    } else {
                        stack.push(p.clone());
                    }
                }
            }
        }
        hops
    }

    /// All shortest paths from src to dst as node sequences.
    pub fn all_paths(&self, src: &str, dst: &str) -> Vec<Vec<String>> {
        let Some(entry) = self.per_source.get(src) else {
            return Vec::new();
        };
        if !entry.scost.contains_key(dst) {
            return Vec::new();
        }
        if src == dst {
            return vec![vec![src.to_string()]];
        }
        let mut out = Vec::new();
        let mut partial = vec![dst.to_string()];
        expand_paths(entry, src, dst, &mut partial, &mut out, 4096);
        out.sort();
        out
    }
}

fn expand_paths(
    entry: &ScostTableEntry,
    src: &str,
    at: &str,
    partial: &mut Vec<String>,
    out: &mut Vec<Vec<String>>,
    cap: usize,
) {
    if out.len() >= cap {
        return;
    }
    if at == src {
        let mut p = partial.clone();
        p.reverse();
        out.push(p);
        return;
    }
    if let Some(preds) = entry.preds.get(at) {
        for p in preds {
            partial.push(p.clone());
            expand_paths(entry, src, p, partial, out, cap);
            partial.pop();
        }
    }
}

/// Dijkstra from every router of the AS with all equal-cost predecessors
/// retained.
pub fn compute_ospf(net: &Network, asn: u32) -> ScostTable {
    let members: Vec<String> = net
        .as_members
        .get(&asn)
        .map(|m| m.iter().cloned().collect())
        .unwrap_or_default();
    let links = net.ospf_links(asn);
    // directed adjacency with per-direction costs
    let mut adj: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
    for l in &links {
        adj.entry(&l.a).or_default().push((&l.b, net.link_cost(l, &l.a) as u64));
        adj.entry(&l.b).or_default().push((&l.a, net.link_cost(l, &l.b) as u64));
    }
    let mut table = ScostTable {
        asn,
        per_source: BTreeMap::new(),
    };
    for src in &members {
        table.per_source.insert(src.clone(), spf(src, &adj));
    }
    table
}

/// Dijkstra with equal-cost predecessor sets over an explicit directed
/// adjacency. Also the independent oracle used by the repair engine.
pub fn spf(src: &str, adj: &BTreeMap<&str, Vec<(&str, u64)>>) -> ScostTableEntry {
    let mut scost: BTreeMap<String, u64> = BTreeMap::new();
    let mut preds: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut heap: BinaryHeap<std::cmp::Reverse<(u64, String)>> = BinaryHeap::new();
    scost.insert(src.to_string(), 0);
    preds.insert(src.to_string(), BTreeSet::from([src.to_string()]));
    heap.push(std::cmp::Reverse((0, src.to_string())));
    let mut done: BTreeSet<String> = BTreeSet::new();
    while let Some(std::cmp::Reverse((d, v))) = heap.pop() {
        if !done.insert(v.clone()) {
            continue;
        }
        let Some(nbrs) = adj.get(v.as_str()) else {
            continue;
        };
        for (u, w) in nbrs {
            let cand = d + w;
            match scost.get(*u) {
                Some(cur) if cand > *cur => {}
                Some(cur) if cand == *cur => {
                    preds.entry(u.to_string()).or_default().insert(v.clone());
                }
                _ => {
                    scost.insert(u.to_string(), cand);
                    preds.insert(u.to_string(), BTreeSet::from([v.clone()]));
                    heap.push(std::cmp::Reverse((cand, u.to_string())));
                }
            }
        }
    }
    ScostTableEntry { scost, preds }
}

/// Install intra-AS OSPF routes: every OSPF-enabled interface subnet of the
/// AS is reachable through the shortest paths toward its attachment router.
pub fn install_ospf_routes(
    net: &Network,
    asn: u32,
    table: &ScostTable,
    tables: &mut BTreeMap<String, Vec<Route>>,
) {
    // prefix -> attachment routers
    let mut attach: BTreeMap<Ipv4Net, BTreeSet<String>> = BTreeMap::new();
    let Some(members) = net.as_members.get(&asn) else {
        return;
    };
    for m in members {
        for i in &net.devices[m].ifaces {
            if i.ospf_enabled {
                attach.entry(i.net).or_default().insert(m.clone());
            }
        }
    }
    for v in members {
        let dev = &net.devices[v];
        for (prefix, owners) in &attach {
            if dev.ifaces.iter().any(|i| i.net == *prefix) {
                continue; // connected beats OSPF anyway
            }
            if !igp_permitted(dev, prefix) {
                continue;
            }
            let mut best: Option<u64> = None;
            for o in owners {
                if let Some(d) = table.dist(v, o) {
                    best = Some(best.map_or(d, |b: u64| b.min(d)));
                }
            }
            let Some(best) = best else {
                continue;
            };
            let mut next_hops = BTreeSet::new();
            for o in owners {
                if table.dist(v, o) == Some(best) {
                    for hop in table.first_hops(v, o) {
                        if let Some(link) = net.link_between(v, &hop) {
                            let iface = if link.a == *v { &link.a_iface } else { &link.b_iface };
                            next_hops.insert(NextHop {
                                router: hop.clone(),
                                iface: iface.clone(),
                            });
                        }
                    }
                }
            }
            if next_hops.is_empty() {
                continue;
            }
            tables.entry(v.clone()).or_default().push(Route {
                prefix: *prefix,
                protocol: Protocol::Ospf,
                admin_distance: Protocol::Ospf.admin_distance(),
                metric: best as u32,
                next_hops,
            });
        }
    }
}

/// Externals: `redistribute static` and `redistribute bgp` at an ASBR
/// inject that router's static / eBGP prefixes AS-wide with a fixed metric.
pub fn install_ospf_externals(
    net: &Network,
    scost: &BTreeMap<u32, ScostTable>,
    bgp_rib: &BTreeMap<String, Vec<BgpRibEntry>>,
    tables: &mut BTreeMap<String, Vec<Route>>,
) {
    for (asn, members) in &net.as_members {
        let table = &scost[asn];
        // originator -> external prefixes
        let mut externals: BTreeMap<String, BTreeSet<Ipv4Net>> = BTreeMap::new();
        for m in members {
            let dev = &net.devices[m];
            let Some(ospf) = &dev.ospf else {
                continue;
            };
            for proto in &ospf.redistribute {
                match proto.as_str() {
                    "static" => {
                        for s in &dev.statics {
                            externals.entry(m.clone()).or_default().insert(s.prefix);
                        }
                    }
                    "bgp" => {
                        for e in bgp_rib.get(m).into_iter().flatten() {
                            externals.entry(m.clone()).or_default().insert(e.prefix);
                        }
                    }
                    _ => {}
                }
            }
        }
        for v in members {
            let dev = &net.devices[v];
            for (origin, prefixes) in &externals {
                if v == origin {
                    continue;
                }
                let Some(d) = table.dist(v, origin) else {
                    continue;
                };
                let _ = d;
                let mut next_hops = BTreeSet::new();
                for hop in table.first_hops(v, origin) {
                    if let Some(link) = net.link_between(v, &hop) {
                        let iface = if link.a == *v { &link.a_iface } else { &link.b_iface };
                        next_hops.insert(NextHop {
                            router: hop,
                            iface: iface.clone(),
                        });
                    }
                }
                if next_hops.is_empty() {
                    continue;
                }
                for p in prefixes {
                    if dev.ifaces.iter().any(|i| i.net == *p) {
                        continue;
                    }
                    if !igp_permitted(dev, p) {
                        continue;
                    }
                    tables.entry(v.clone()).or_default().push(Route {
                        prefix: *p,
                        protocol: Protocol::OspfExternal,
                        admin_distance: Protocol::OspfExternal.admin_distance(),
                        metric: REDISTRIBUTE_METRIC,
                        next_hops: next_hops.clone(),
                    });
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, NetworkSnapshot};

    fn line_network() -> Network {
        // a - b - c with unit costs
        let a = "hostname a\ninterface eth0\n ip address 10.0.1.1 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let b = "hostname b\ninterface eth0\n ip address 10.0.1.2 255.255.255.252\ninterface eth1\n ip address 10.0.2.1 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let c = "hostname c\ninterface eth0\n ip address 10.0.2.2 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let mut s = NetworkSnapshot::new();
        for t in [a, b, c] {
            s.add_router(parse_config(t).unwrap()).unwrap();
        }
        Network::build(&s).unwrap()
    }

    #[test]
    fn line_scost_and_preds() {
        let net = line_network();
        let table = compute_ospf(&net, 0);
        assert_eq!(table.dist("a", "c"), Some(2));
        assert_eq!(
            table.preds("a", "c").unwrap(),
            &BTreeSet::from(["b".to_string()])
        );
        assert_eq!(table.first_hops("a", "c"), BTreeSet::from(["b".to_string()]));
    }

    #[test]
    fn square_has_two_equal_cost_paths() {
        // a-b, b-c, a-d, d-c square with unit costs
        let a = "hostname a\ninterface eth0\n ip address 10.0.1.1 255.255.255.252\ninterface eth1\n ip address 10.0.4.1 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let b = "hostname b\ninterface eth0\n ip address 10.0.1.2 255.255.255.252\ninterface eth1\n ip address 10.0.2.1 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let c = "hostname c\ninterface eth0\n ip address 10.0.2.2 255.255.255.252\ninterface eth1\n ip address 10.0.3.2 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let d = "hostname d\ninterface eth0\n ip address 10.0.3.1 255.255.255.252\ninterface eth1\n ip address 10.0.4.2 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\n";
        let mut s = NetworkSnapshot::new();
        for t in [a, b, c, d] {
            s.add_router(parse_config(t).unwrap()).unwrap();
        }
        let net = Network::build(&s).unwrap();
        let table = compute_ospf(&net, 0);
        assert_eq!(table.dist("a", "c"), Some(2));
        assert_eq!(
            table.preds("a", "c").unwrap(),
            &BTreeSet::from(["b".to_string(), "d".to_string()])
        );
        let paths = table.all_paths("a", "c");
        assert_eq!(paths.len(), 2);
    }

    /// Bellman-Ford oracle: per-source distances and equal-cost preds.
    fn bellman_ford(
        nodes: &[String],
        edges: &[(String, String, u64)],
        src: &str,
    ) -> (BTreeMap<String, u64>, BTreeMap<String, BTreeSet<String>>) {
        let mut dist: BTreeMap<String, u64> = BTreeMap::new();
        dist.insert(src.to_string(), 0);
        for _ in 0..nodes.len() {
            let mut changed = false;
            for (u, v, w) in edges {
                if let Some(du) = dist.get(u).copied() {
                    let cand = du + w;
                    if dist.get(v).map_or(true, |dv| cand < *dv) {
                        dist.insert(v.clone(), cand);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut preds: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        preds.insert(src.to_string(), BTreeSet::from([src.to_string()]));
        for (u, v, w) in edges {
            if let (Some(du), Some(dv)) = (dist.get(u), dist.get(v)) {
                if du + w == *dv {
                    preds.entry(v.clone()).or_default().insert(u.clone());
                }
            }
        }
        (dist, preds)
    }

    #[test]
    fn dijkstra_matches_bellman_ford_on_random_graphs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1234);
        for trial in 0..100 {
            let n = rng.gen_range(2..=30usize);
            let nodes: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
            let mut edges: Vec<(String, String, u64)> = Vec::new();
            // random connected-ish graph: spanning chain plus extras
            for i in 1..n {
                let j = rng.gen_range(0..i);
                let w = rng.gen_range(1..=20u64);
                edges.push((nodes[i].clone(), nodes[j].clone(), w));
                edges.push((nodes[j].clone(), nodes[i].clone(), w));
            }
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i != j {
                    let w = rng.gen_range(1..=20u64);
                    edges.push((nodes[i].clone(), nodes[j].clone(), w));
                    edges.push((nodes[j].clone(), nodes[i].clone(), w));
                }
            }
            let mut adj: BTreeMap<&str, Vec<(&str, u64)>> = BTreeMap::new();
            for (u, v, w) in &edges {
                adj.entry(u.as_str()).or_default().push((v.as_str(), *w));
            }
            let src = &nodes[rng.gen_range(0..n)];
            let got = spf(src, &adj);
            let (dist, preds) = bellman_ford(&nodes, &edges, src);
            assert_eq!(got.scost, dist, "trial {trial}");
            assert_eq!(got.preds, preds, "trial {trial}");
        }
    }
}
