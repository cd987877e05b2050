//! Configuration generation: turn topology deltas into concrete device
//! configurations using template-based mimicry, place fake hosts, and
//! mirror filter treatment of real hosts onto their fake counterparts.

mod expand;
mod metrics;

pub use expand::{
    add_fake_hosts, expand_network, join_ibgp_mesh, mimic_filters, LinkAssignment,
};
pub use metrics::{
    path_anonymity, sim_cmd, sim_order, sim_stanza, similarity, PathAnonymity, SimilarityReport,
    SimilarityWeights, DEFAULT_WEIGHTS,
};

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::config::{self, ConfigError, NetworkSnapshot, RouterConfig, Stanza, StanzaKind};
use crate::ip::Ipv4Net;
use crate::topology::Topology;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfgenError {
    #[error("new routers {0:?} are never adjacent to a configured node")]
    UnreachablePlan(Vec<String>),
    #[error("subnet pool exhausted")]
    SubnetPoolExhausted,
    #[error("incomplete assignment: {0}")]
    IncompleteAssignment(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Sequential /30 allocator skipping subnets already present anywhere in
/// the snapshot.
#[derive(Debug, Clone)]
pub struct SubnetPool {
    base: u32,
    limit: u32,
    cursor: u32,
    taken: BTreeSet<Ipv4Net>,
}

pub const LINK_POOL_BASE: &str = "10.250.0.0/16";
pub const HOST_POOL_BASE: &str = "10.251.0.0/16";

impl SubnetPool {
    pub fn new(base: Ipv4Net, snapshot: &NetworkSnapshot) -> SubnetPool {
        let mut taken = BTreeSet::new();
        for cfg in snapshot.routers.values() {
            for iface in config::interfaces(cfg) {
                if let Some(net) = iface.subnet() {
                    taken.insert(net);
                }
            }
        }
        for host in snapshot.hosts.values() {
            if let Some(net) = host.subnet() {
                taken.insert(net);
            }
        }
        SubnetPool {
            base: u32::from(base.addr()),
            limit: 1u32 << (32 - base.len()),
            cursor: 0,
            taken,
        }
    }

    pub fn next(&mut self) -> Result<Ipv4Net, ConfgenError> {
        while self.cursor + 4 <= self.limit {
            let net = Ipv4Net::new(Ipv4Addr::from(self.base + self.cursor), 30);
            self.cursor += 4;
            if self.taken.iter().all(|t| !t.overlaps(&net)) {
                self.taken.insert(net);
                return Ok(net);
            }
        }
        Err(ConfgenError::SubnetPoolExhausted)
    }
}

/// Topology delta to realize as configuration changes.
#[derive(Debug, Clone, Default)]
pub struct ExpansionPlan {
    /// Anonymized router graph (real and fake nodes).
    pub graph: Topology,
    pub new_edges: Vec<(String, String)>,
    pub new_routers: BTreeSet<String>,
    /// Filled during expansion: style template used per fake router.
    pub template_of: BTreeMap<String, String>,
    /// Filled by fake-host placement.
    pub new_hosts: BTreeSet<String>,
    pub host_map: BTreeMap<String, String>,
}

impl ExpansionPlan {
    pub fn from_graphs(original: &Topology, anonymized: &Topology) -> ExpansionPlan {
        let orig_nodes: BTreeSet<String> = original.routers().cloned().collect();
        let orig_edges: BTreeSet<(String, String)> = original.router_edges().into_iter().collect();
        let new_routers: BTreeSet<String> = anonymized
            .routers()
            .filter(|r| !orig_nodes.contains(*r))
            .cloned()
            .collect();
        let new_edges: Vec<(String, String)> = anonymized
            .router_edges()
            .into_iter()
            .filter(|e| !orig_edges.contains(e))
            .collect();
        ExpansionPlan {
            graph: anonymized.clone(),
            new_edges,
            new_routers,
            ..Default::default()
        }
    }
}

/// Mimic the dominant hostname convention: continue the shared
/// prefix+number pattern when one exists, otherwise fall back to fk<N>.
pub fn fake_router_names(real: &[String], count: usize) -> Vec<String> {
    let pattern = real
        .iter()
        .map(|n| {
            let digits = n.chars().rev().take_while(|c| c.is_ascii_digit()).count();
            (n[..n.len() - digits].to_string(), digits)
        })
        .collect::<Vec<(String, usize)>>();
    let prefix = pattern
        .first()
        .filter(|(p, d)| *d > 0 && pattern.iter().all(|(q, e)| q == p && *e > 0))
        .map(|(p, _)| p.clone());
    let (prefix, start) = match prefix {
        Some(p) => {
            let max = real
                .iter()
                .filter_map(|n| n[p.len()..].parse::<u64>().ok())
                .max()
                .unwrap_or(0);
            (p, max + 1)
        }
        None => ("fk".to_string(), 1),
    };
    (0..count as u64)
        .map(|i| format!("{prefix}{}", start + i))
        .collect()
}

fn protocol_set(cfg: &RouterConfig) -> BTreeSet<&'static str> {
    let mut s = BTreeSet::new();
    if config::ospf(cfg).is_some() {
        s.insert("ospf");
    }
    if config::bgp(cfg).is_some() {
        s.insert("bgp");
    }
    if !config::static_routes(cfg).is_empty() {
        s.insert("static");
    }
    s
}

/// Template scoring weights: degree closeness, neighbor overlap, same AS,
/// protocol overlap.
const W_DEGREE: f64 = 0.3;
const W_NEIGHBORS: f64 = 0.2;
const W_SAME_AS: f64 = 0.3;
const W_PROTOCOLS: f64 = 0.2;

/// Pick the most similar real router to serve as the fake node's config
/// template; ties break toward the lexicographically smallest name.
pub fn select_template(
    fake: &str,
    snapshot: &NetworkSnapshot,
    graph: &Topology,
    fake_asn: u32,
    fake_protocols: &BTreeSet<&'static str>,
) -> String {
    let max_deg = graph
        .routers()
        .map(|r| graph.router_degree(r))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let fake_deg = graph.router_degree(fake) as f64;
    let fake_nbrs: BTreeSet<&String> = graph.router_neighbors(fake).collect();
    let mut best: Option<(f64, &String)> = None;
    for (name, cfg) in &snapshot.routers {
        if !graph.has_node(name) {
            continue;
        }
        let deg = graph.router_degree(name) as f64;
        let degree_score = 1.0 - (fake_deg - deg).abs() / max_deg;
        let nbrs: BTreeSet<&String> = graph.router_neighbors(name).collect();
        let union = fake_nbrs.union(&nbrs).count();
        let neighbor_score = if union == 0 {
            0.0
        } else {
            fake_nbrs.intersection(&nbrs).count() as f64 / union as f64
        };
        let asn = config::bgp(cfg).map(|b| b.asn).unwrap_or(0);
        let as_score = if asn == fake_asn { 1.0 } else { 0.0 };
        let protos = protocol_set(cfg);
        let proto_union = fake_protocols.union(&protos).count();
        let proto_score = if proto_union == 0 {
            1.0
        } else {
            fake_protocols.intersection(&protos).count() as f64 / proto_union as f64
        };
        let score = W_DEGREE * degree_score
            + W_NEIGHBORS * neighbor_score
            + W_SAME_AS * as_score
            + W_PROTOCOLS * proto_score;
        match best {
            Some((b, bn)) if b > score || (b == score && bn < name) => {}
            _ => best = Some((score, name)),
        }
    }
    best.map(|(_, n)| n.clone()).unwrap_or_default()
}

/// Interface naming convention of a config: shared alphabetic prefix plus
/// the next free index.
fn iface_naming(cfg: &RouterConfig) -> (String, u64) {
    let names: Vec<String> = config::interfaces(cfg).iter().map(|i| i.name.clone()).collect();
    for n in &names {
        let digits = n.chars().rev().take_while(|c| c.is_ascii_digit()).count();
        if digits > 0 && digits < n.len() {
            let prefix = &n[..n.len() - digits];
            let max = names
                .iter()
                .filter(|m| m.starts_with(prefix))
                .filter_map(|m| m[prefix.len()..].parse::<u64>().ok())
                .max()
                .unwrap_or(0);
            return (prefix.to_string(), max + 1);
        }
    }
    ("eth".to_string(), names.len() as u64)
}

/// Median interface OSPF cost of a template; initial cost for fake links.
pub fn template_median_cost(cfg: &RouterConfig) -> u32 {
    let mut costs: Vec<u32> = config::interfaces(cfg)
        .iter()
        .map(|i| i.ospf_cost.unwrap_or(1))
        .collect();
    if costs.is_empty() {
        return 1;
    }
    costs.sort_unstable();
    costs[costs.len() / 2]
}

/// Concrete values for instantiating a fake router from a template.
#[derive(Debug, Clone, Default)]
pub struct FakeAssignments {
    pub hostname: String,
    /// (ip, mask, ospf cost) per interface; names follow the template.
    pub ifaces: Vec<(Ipv4Addr, Ipv4Addr, Option<u32>)>,
    pub asn: Option<u32>,
    /// (peer ip, remote as, next_hop_self) eBGP/iBGP sessions.
    pub neighbors: Vec<(Ipv4Addr, u32, bool)>,
}

/// Instantiate a fake router configuration from its template: stanza
/// order, indentation, peer-group structure and filter style survive;
/// addresses, names and sessions are replaced; referenced policy objects
/// are deep-copied under fresh names.
pub fn generate_fake_config(
    template: &RouterConfig,
    assignments: &FakeAssignments,
) -> Result<RouterConfig, ConfgenError> {
    if assignments.hostname.is_empty() {
        return Err(ConfgenError::IncompleteAssignment("hostname".into()));
    }
    let suffix = {
        // fresh-name suffix for copied policy objects
        let tail: String = assignments
            .hostname
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        tail.to_uppercase()
    };
    let rename = |name: &str| format!("{name}-{suffix}");
    let (if_prefix, _) = iface_naming(template);
    let mut out = RouterConfig {
        hostname: assignments.hostname.clone(),
        stanzas: Vec::new(),
        trailing: template.trailing.clone(),
    };
    let mut ifaces_emitted = false;
    let mut iface_idx = 0u64;
    for st in &template.stanzas {
        match st.kind {
            StanzaKind::Hostname => {
                let mut s = Stanza::new(StanzaKind::Hostname, format!("hostname {}", assignments.hostname));
                s.trivia = st.trivia.clone();
                out.stanzas.push(s);
            }
            StanzaKind::Interface => {
                if ifaces_emitted {
                    continue;
                }
                ifaces_emitted = true;
                let indent = st.indent();
                let has_cost_cmds = template.stanzas.iter().any(|t| {
                    t.kind == StanzaKind::Interface
                        && t.commands.iter().any(|c| c.raw.trim().starts_with("ip ospf cost"))
                });
                for (ip, mask, cost) in &assignments.ifaces {
                    let mut s = Stanza::new(
                        StanzaKind::Interface,
                        format!("interface {if_prefix}{iface_idx}"),
                    );
                    if iface_idx == 0 {
                        s.trivia = st.trivia.clone();
                    }
                    iface_idx += 1;
                    s.commands.push(config::Command::new(format!(
                        "{indent}ip address {ip} {mask}"
                    )));
                    if let Some(c) = cost {
                        if has_cost_cmds || *c != 1 {
                            s.commands.push(config::Command::new(format!(
                                "{indent}ip ospf cost {c}"
                            )));
                        }
                    }
                    out.stanzas.push(s);
                }
            }
            StanzaKind::RouterOspf => {
                let pid = st.header_tokens().get(2).unwrap_or(&"1").to_string();
                let mut s = Stanza::new(StanzaKind::RouterOspf, format!("router ospf {pid}"));
                s.trivia = st.trivia.clone();
                let indent = st.indent();
                for (ip, mask, _) in &assignments.ifaces {
                    if let Some(net) = Ipv4Net::from_addr_mask(*ip, *mask) {
                        let wc = Ipv4Addr::from(!u32::from(net.mask()));
                        s.commands.push(config::Command::new(format!(
                            "{indent}network {} {} area 0",
                            net.addr(),
                            wc
                        )));
                    }
                }
                out.stanzas.push(s);
            }
            StanzaKind::RouterBgp => {
                let Some(asn) = assignments.asn else {
                    continue; // fake runs no BGP
                };
                let mut s = Stanza::new(StanzaKind::RouterBgp, format!("router bgp {asn}"));
                s.trivia = st.trivia.clone();
                let indent = st.indent();
                // keep peer-group declarations and settings, renaming the
                // referenced route maps
                let bgp = config::bgp(template);
                if let Some(bgp) = &bgp {
                    for (gname, grp) in &bgp.peer_groups {
                        s.commands.push(config::Command::new(format!(
                            "{indent}neighbor {gname} peer-group"
                        )));
                        if let Some(ras) = grp.remote_as {
                            s.commands.push(config::Command::new(format!(
                                "{indent}neighbor {gname} remote-as {ras}"
                            )));
                        }
                        if let Some(rm) = &grp.route_map_in {
                            s.commands.push(config::Command::new(format!(
                                "{indent}neighbor {gname} route-map {} in",
                                rename(rm)
                            )));
                        }
                        if let Some(rm) = &grp.route_map_out {
                            s.commands.push(config::Command::new(format!(
                                "{indent}neighbor {gname} route-map {} out",
                                rename(rm)
                            )));
                        }
                        if grp.next_hop_self {
                            s.commands.push(config::Command::new(format!(
                                "{indent}neighbor {gname} next-hop-self"
                            )));
                        }
                    }
                }
                for (peer, remote_as, nhs) in &assignments.neighbors {
                    // sessions matching a template peer group join it
                    let group = bgp.as_ref().and_then(|b| {
                        b.peer_groups
                            .iter()
                            .find(|(_, g)| g.remote_as == Some(*remote_as))
                            .map(|(n, _)| n.clone())
                    });
                    match group {
                        Some(g) => {
                            s.commands.push(config::Command::new(format!(
                                "{indent}neighbor {peer} peer-group {g}"
                            )));
                        }
                        None => {
                            s.commands.push(config::Command::new(format!(
                                "{indent}neighbor {peer} remote-as {remote_as}"
                            )));
                            if *nhs {
                                s.commands.push(config::Command::new(format!(
                                    "{indent}neighbor {peer} next-hop-self"
                                )));
                            }
                        }
                    }
                }
                out.stanzas.push(s);
            }
            StanzaKind::StaticRoute => {
                // template statics point at template next hops; skip
            }
            StanzaKind::AccessList => {
                // numbered lists keep their numbers (scoped per router)
                let mut s = st.clone();
                s.trivia = st.trivia.clone();
                out.stanzas.push(s);
            }
            StanzaKind::PrefixList => {
                let toks = st.header_tokens();
                if toks.len() >= 3 {
                    let mut new_toks: Vec<String> = toks.iter().map(|t| t.to_string()).collect();
                    new_toks[2] = rename(&new_toks[2]);
                    let mut s = Stanza::new(StanzaKind::PrefixList, new_toks.join(" "));
                    s.trivia = st.trivia.clone();
                    out.stanzas.push(s);
                }
            }
            StanzaKind::RouteMap => {
                let toks = st.header_tokens();
                if toks.len() >= 3 {
                    let mut new_toks: Vec<String> = toks.iter().map(|t| t.to_string()).collect();
                    new_toks[1] = rename(&new_toks[1]);
                    let mut s = Stanza::new(StanzaKind::RouteMap, new_toks.join(" "));
                    s.trivia = st.trivia.clone();
                    for c in &st.commands {
                        let ct = c.raw.trim();
                        if let Some(rest) = ct.strip_prefix("match ip address prefix-list ") {
                            let indent = st.indent();
                            s.commands.push(config::Command::new(format!(
                                "{indent}match ip address prefix-list {}",
                                rename(rest.trim())
                            )));
                        } else {
                            s.commands.push(c.clone());
                        }
                    }
                    out.stanzas.push(s);
                }
            }
            StanzaKind::DistributeListHost | StanzaKind::Other => {
                let mut s = st.clone();
                s.trivia = st.trivia.clone();
                out.stanzas.push(s);
            }
        }
    }
    // a template without interface stanzas still needs the fake's links
    if !ifaces_emitted && !assignments.ifaces.is_empty() {
        for (ip, mask, cost) in &assignments.ifaces {
            let mut s = Stanza::new(
                StanzaKind::Interface,
                format!("interface {if_prefix}{iface_idx}"),
            );
            iface_idx += 1;
            s.commands
                .push(config::Command::new(format!(" ip address {ip} {mask}")));
            if let Some(c) = cost {
                if *c != 1 {
                    s.commands
                        .push(config::Command::new(format!(" ip ospf cost {c}")));
                }
            }
            out.insert_stanza(s);
        }
    }
    Ok(out)
}

/// Plain generated config without any template, the from-scratch contrast
/// baseline for the mimicry metrics.
pub fn skeleton_config(assignments: &FakeAssignments) -> RouterConfig {
    let mut text = format!("hostname {}\n", assignments.hostname);
    for (i, (ip, mask, _)) in assignments.ifaces.iter().enumerate() {
        text.push_str(&format!("interface Ethernet{i}\n ip address {ip} {mask}\n"));
    }
    if !assignments.ifaces.is_empty() {
        text.push_str("router ospf 1\n");
        for (ip, mask, _) in &assignments.ifaces {
            if let Some(net) = Ipv4Net::from_addr_mask(*ip, *mask) {
                let wc = Ipv4Addr::from(!u32::from(net.mask()));
                text.push_str(&format!(" network {} {} area 0\n", net.addr(), wc));
            }
        }
    }
    if let Some(asn) = assignments.asn {
        text.push_str(&format!("router bgp {asn}\n"));
        for (peer, remote_as, _) in &assignments.neighbors {
            text.push_str(&format!(" neighbor {peer} remote-as {remote_as}\n"));
        }
    }
    config::parse_config(&text).expect("skeleton parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn subnet_pool_skips_collisions() {
        let mut snap = NetworkSnapshot::new();
        snap.add_router(
            parse_config("hostname r1\ninterface eth0\n ip address 10.250.0.1 255.255.255.252\n")
                .unwrap(),
        )
        .unwrap();
        let mut pool = SubnetPool::new(LINK_POOL_BASE.parse().unwrap(), &snap);
        let first = pool.next().unwrap();
        assert_eq!(first.to_string(), "10.250.0.4/30", "0.0/30 was taken");
        let second = pool.next().unwrap();
        assert_eq!(second.to_string(), "10.250.0.8/30");
    }

    #[test]
    fn fake_names_continue_the_pattern() {
        let real = vec!["r1".to_string(), "r2".to_string(), "r5".to_string()];
        assert_eq!(fake_router_names(&real, 3), vec!["r6", "r7", "r8"]);
        let mixed = vec!["core".to_string(), "edge7".to_string()];
        assert_eq!(fake_router_names(&mixed, 2), vec!["fk1", "fk2"]);
    }

    #[test]
    fn minimal_template_only_hostname_changes() {
        let template = parse_config("hostname real1\n").unwrap();
        let fake = generate_fake_config(
            &template,
            &FakeAssignments {
                hostname: "fk1".into(),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(fake.hostname, "fk1");
        assert_eq!(fake.stanzas.len(), 1);
        assert_eq!(fake.stanzas[0].header, "hostname fk1");
    }

    #[test]
    fn peer_group_structure_is_retained() {
        let template = parse_config(
            "hostname edge\nrouter bgp 100\n neighbor ISP1 peer-group\n neighbor ISP1 remote-as 714\n neighbor ISP1 route-map ISP-IMP in\n neighbor 17.56.7.8 peer-group ISP1\n neighbor 17.56.8.9 peer-group ISP1\nroute-map ISP-IMP permit 10\n",
        )
        .unwrap();
        let fake = generate_fake_config(
            &template,
            &FakeAssignments {
                hostname: "fk9".into(),
                asn: Some(100),
                neighbors: vec![("9.9.9.9".parse().unwrap(), 714, false)],
                ..Default::default()
            },
        )
        .unwrap();
        let rendered = crate::config::render_config(&fake);
        assert!(rendered.contains("neighbor ISP1 peer-group"));
        assert!(
            rendered.contains("neighbor 9.9.9.9 peer-group ISP1"),
            "session with matching remote-as joins the group: {rendered}"
        );
        assert!(rendered.contains("route-map ISP-IMP-FK9 permit 10"));
        // no dangling references
        let reparsed = parse_config(&rendered).unwrap();
        assert_eq!(
            crate::config::render_config(&reparsed),
            rendered,
            "byte-stable re-render"
        );
    }

    #[test]
    fn fake_scores_at_least_skeleton_against_template() {
        let template = parse_config(
            "hostname edge\n! uplink block\ninterface Gig0\n ip address 10.0.0.1 255.255.255.252\n ip ospf cost 5\ninterface Gig1\n ip address 10.0.0.5 255.255.255.252\nrouter ospf 1\n network 10.0.0.0 0.0.0.255 area 0\n redistribute static\nip route 10.9.0.0 255.255.0.0 10.0.0.2\n",
        )
        .unwrap();
        let assignments = FakeAssignments {
            hostname: "edge9".into(),
            ifaces: vec![(
                "10.250.0.1".parse().unwrap(),
                "255.255.255.252".parse().unwrap(),
                Some(5),
            )],
            ..Default::default()
        };
        let fake = generate_fake_config(&template, &assignments).unwrap();
        let skeleton = skeleton_config(&assignments);
        let mimic = similarity(&fake, &[&template], DEFAULT_WEIGHTS);
        let plain = similarity(&skeleton, &[&template], DEFAULT_WEIGHTS);
        assert!(
            mimic.overall >= plain.overall,
            "mimicry {} vs skeleton {}",
            mimic.overall,
            plain.overall
        );
    }
}
