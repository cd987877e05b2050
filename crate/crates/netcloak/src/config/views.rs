//! Typed read-only views extracted from the stanza structure.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use crate::ip::Ipv4Net;

use super::{RouterConfig, Stanza, StanzaKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterfaceConfig {
    pub name: String,
    pub ip: Option<Ipv4Addr>,
    pub mask: Option<Ipv4Addr>,
    pub ospf_cost: Option<u32>,
    pub shutdown: bool,
}

impl InterfaceConfig {
    pub fn subnet(&self) -> Option<Ipv4Net> {
        Ipv4Net::from_addr_mask(self.ip?, self.mask?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OspfConfig {
    pub process_id: Option<u32>,
    /// (base, wildcard, area) triples from network statements.
    pub networks: Vec<(Ipv4Addr, Ipv4Addr, u32)>,
    pub redistribute: Vec<String>,
    /// (prefix-list name, direction) from distribute-list commands.
    pub distribute_lists: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeerGroup {
    pub remote_as: Option<u32>,
    pub route_map_in: Option<String>,
    pub route_map_out: Option<String>,
    pub next_hop_self: bool,
    pub members: Vec<Ipv4Addr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpNeighbor {
    pub peer_ip: Ipv4Addr,
    pub remote_as: u32,
    pub peer_group: Option<String>,
    pub route_map_in: Option<String>,
    pub route_map_out: Option<String>,
    pub distribute_list_in: Option<String>,
    pub distribute_list_out: Option<String>,
    pub prefix_list_in: Option<String>,
    pub prefix_list_out: Option<String>,
    pub next_hop_self: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BgpConfig {
    pub asn: u32,
    pub neighbors: Vec<BgpNeighbor>,
    pub peer_groups: BTreeMap<String, PeerGroup>,
    pub networks: Vec<Ipv4Net>,
    pub redistributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StaticRoute {
    pub prefix: Ipv4Net,
    pub next_hop: Ipv4Addr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FilterKind {
    StdAcl,
    ExtAcl,
    PrefixList,
    RouteMap,
    DistributeList,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterEntry {
    pub permit: bool,
    /// Matched prefix; `None` means "any".
    pub prefix: Option<Ipv4Net>,
    pub le: Option<u8>,
    pub ge: Option<u8>,
    pub sequence: u32,
    /// Route-map clauses match through a referenced list instead of an
    /// inline prefix.
    pub match_list: Option<String>,
    /// Index of the stanza carrying this entry, for adjacent insertion.
    pub stanza_index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterRule {
    pub kind: FilterKind,
    pub name: String,
    pub entries: Vec<FilterEntry>,
}

impl FilterRule {
    /// First matching entry decides; no entry means implicit deny.
    pub fn permits(&self, net: &Ipv4Net) -> bool {
        for e in self.entries.iter() {
            if entry_matches(e, net) {
                return e.permit;
            }
        }
        false
    }
}

/// All filter objects of one router, with route-map references resolved.
#[derive(Debug, Clone, Default)]
pub struct FilterSet {
    pub rules: Vec<FilterRule>,
}

impl FilterSet {
    pub fn get(&self, name: &str) -> Option<&FilterRule> {
        self.rules.iter().find(|r| r.name == name)
    }

    /// Evaluate the named filter against a prefix. Unknown names permit
    /// everything (an unresolved reference must not black-hole a session).
    pub fn permits(&self, name: &str, net: &Ipv4Net) -> bool {
        let Some(rule) = self.get(name) else {
            return true;
        };
        if rule.kind != FilterKind::RouteMap {
            return rule.permits(net);
        }
        for clause in &rule.entries {
            let matched = match &clause.match_list {
                None => true,
                Some(list) => self.get(list).map(|r| r.permits(net)).unwrap_or(false),
            };
            if matched {
                return clause.permit;
            }
        }
        false
    }
}

fn entry_matches(e: &FilterEntry, net: &Ipv4Net) -> bool {
    match &e.prefix {
        None => true,
        Some(p) => {
            let lower = e.ge.unwrap_or(p.len());
            let upper = e.le.unwrap_or_else(|| if e.ge.is_some() { 32 } else { p.len() });
            p.contains_net(net) && net.len() >= lower && net.len() <= upper
        }
    }
}

fn cmd_tokens(stanza: &Stanza) -> Vec<Vec<String>> {
    stanza
        .commands
        .iter()
        .filter(|c| {
            let t = c.raw.trim();
            !t.is_empty() && !t.starts_with('!')
        })
        .map(|c| c.tokens().iter().map(|t| t.to_string()).collect())
        .collect()
}

pub fn interfaces(cfg: &RouterConfig) -> Vec<InterfaceConfig> {
    let mut out = Vec::new();
    for st in cfg.stanzas_of(StanzaKind::Interface) {
        let name = st.header_tokens().get(1).unwrap_or(&"").to_string();
        let mut iface = InterfaceConfig {
            name,
            ip: None,
            mask: None,
            ospf_cost: None,
            shutdown: false,
        };
        for toks in cmd_tokens(st) {
            let toks: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
            match toks.as_slice() {
                ["ip", "address", a, m] => {
                    iface.ip = a.parse().ok();
                    iface.mask = m.parse().ok();
                }
                ["ip", "ospf", "cost", c] => iface.ospf_cost = c.parse().ok(),
                ["shutdown"] => iface.shutdown = true,
                _ => {}
            }
        }
        out.push(iface);
    }
    out
}

pub fn ospf(cfg: &RouterConfig) -> Option<OspfConfig> {
    let st = cfg.stanzas_of(StanzaKind::RouterOspf).next()?;
    let mut o = OspfConfig {
        process_id: st.header_tokens().get(2).and_then(|t| t.parse().ok()),
        ..Default::default()
    };
    for toks in cmd_tokens(st) {
        let toks: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
        match toks.as_slice() {
            ["network", a, w, "area", ar] => {
                if let (Ok(a), Ok(w), Ok(ar)) = (a.parse(), w.parse(), ar.parse()) {
                    o.networks.push((a, w, ar));
                }
            }
            ["redistribute", proto, ..] => o.redistribute.push(proto.to_string()),
            ["distribute-list", "prefix", name, dir] => {
                o.distribute_lists.push((name.to_string(), dir.to_string()));
            }
            _ => {}
        }
    }
    Some(o)
}

fn blank_neighbor(ip: Ipv4Addr) -> BgpNeighbor {
    BgpNeighbor {
        peer_ip: ip,
        remote_as: 0,
        peer_group: None,
        route_map_in: None,
        route_map_out: None,
        distribute_list_in: None,
        distribute_list_out: None,
        prefix_list_in: None,
        prefix_list_out: None,
        next_hop_self: false,
    }
}

pub fn bgp(cfg: &RouterConfig) -> Option<BgpConfig> {
    let st = cfg.stanzas_of(StanzaKind::RouterBgp).next()?;
    let asn: u32 = st.header_tokens().get(2)?.parse().ok()?;
    let mut b = BgpConfig {
        asn,
        ..Default::default()
    };
    // pass 1: peer-group declarations (neighbor NAME peer-group)
    for toks in cmd_tokens(st) {
        let toks: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
        if let ["neighbor", name, "peer-group"] = toks.as_slice() {
            b.peer_groups.insert(name.to_string(), PeerGroup::default());
        }
    }
    // pass 2: per-neighbor settings, group settings and memberships
    let mut per_ip: BTreeMap<Ipv4Addr, BgpNeighbor> = BTreeMap::new();
    for toks in cmd_tokens(st) {
        let toks: Vec<&str> = toks.iter().map(|s| s.as_str()).collect();
        match toks.as_slice() {
            ["neighbor", who, rest @ ..] => {
                if let Ok(ip) = who.parse::<Ipv4Addr>() {
                    if let ["peer-group", grp] = rest {
                        if let Some(g) = b.peer_groups.get_mut(*grp) {
                            g.members.push(ip);
                        }
                        per_ip.entry(ip).or_insert_with(|| blank_neighbor(ip));
                    } else {
                        let n = per_ip.entry(ip).or_insert_with(|| blank_neighbor(ip));
                        apply_neighbor_setting(n, rest);
                    }
                } else if let Some(grp) = b.peer_groups.get_mut(*who) {
                    apply_group_setting(grp, rest);
                }
            }
            ["network", a, "mask", m] => {
                if let (Ok(a), Ok(m)) = (a.parse(), m.parse()) {
                    if let Some(net) = Ipv4Net::from_addr_mask(a, m) {
                        b.networks.push(net);
                    }
                }
            }
            ["redistribute", proto, ..] => b.redistributes.push(proto.to_string()),
            _ => {}
        }
    }
    // resolve group membership into effective neighbor settings
    for (name, grp) in &b.peer_groups {
        for member in &grp.members {
            let n = per_ip.entry(*member).or_insert_with(|| blank_neighbor(*member));
            n.peer_group = Some(name.clone());
            if n.remote_as == 0 {
                n.remote_as = grp.remote_as.unwrap_or(0);
            }
            if n.route_map_in.is_none() {
                n.route_map_in = grp.route_map_in.clone();
            }
            if n.route_map_out.is_none() {
                n.route_map_out = grp.route_map_out.clone();
            }
            n.next_hop_self |= grp.next_hop_self;
        }
    }
    b.neighbors = per_ip.into_values().collect();
    Some(b)
}

fn apply_neighbor_setting(n: &mut BgpNeighbor, rest: &[&str]) {
    match rest {
        ["remote-as", asn] => n.remote_as = asn.parse().unwrap_or(0),
        ["route-map", name, "in"] => n.route_map_in = Some(name.to_string()),
        ["route-map", name, "out"] => n.route_map_out = Some(name.to_string()),
        ["distribute-list", name, "in"] => n.distribute_list_in = Some(name.to_string()),
        ["distribute-list", name, "out"] => n.distribute_list_out = Some(name.to_string()),
        ["prefix-list", name, "in"] => n.prefix_list_in = Some(name.to_string()),
        ["prefix-list", name, "out"] => n.prefix_list_out = Some(name.to_string()),
        ["next-hop-self"] => n.next_hop_self = true,
        ["peer-group", _] => {} // membership handled via group pass
        _ => {}
    }
}

fn apply_group_setting(g: &mut PeerGroup, rest: &[&str]) {
    match rest {
        ["peer-group"] => {}
        ["remote-as", asn] => g.remote_as = asn.parse().ok(),
        ["route-map", name, "in"] => g.route_map_in = Some(name.to_string()),
        ["route-map", name, "out"] => g.route_map_out = Some(name.to_string()),
        ["next-hop-self"] => g.next_hop_self = true,
        _ => {}
    }
}

pub fn static_routes(cfg: &RouterConfig) -> Vec<StaticRoute> {
    let mut out = Vec::new();
    for st in cfg.stanzas_of(StanzaKind::StaticRoute) {
        let toks = st.header_tokens();
        if let ["ip", "route", p, m, nh] = toks.as_slice() {
            if let (Ok(p), Ok(m), Ok(nh)) = (
                p.parse::<Ipv4Addr>(),
                m.parse::<Ipv4Addr>(),
                nh.parse::<Ipv4Addr>(),
            ) {
                if let Some(prefix) = Ipv4Net::from_addr_mask(p, m) {
                    out.push(StaticRoute { prefix, next_hop: nh });
                }
            }
        }
    }
    out
}

/// Collect all named filter objects of the router: numbered ACLs, prefix
/// lists and route maps (route maps reduce to the prefix sets they match).
pub fn filters(cfg: &RouterConfig) -> Vec<FilterRule> {
    let mut rules: BTreeMap<(FilterKind, String), FilterRule> = BTreeMap::new();
    let mut seq_counter: BTreeMap<(FilterKind, String), u32> = BTreeMap::new();

    for (idx, st) in cfg.stanzas.iter().enumerate() {
        match st.kind {
            StanzaKind::AccessList => {
                let toks = st.header_tokens();
                // access-list N permit|deny [host] A [wildcard]
                if let Some((name, rest)) = toks.split_first().and_then(|(first, rest)| {
                    (*first == "access-list").then(|| (rest[0].to_string(), &rest[1..]))
                }) {
                    let num: u32 = name.parse().unwrap_or(0);
                    let kind = if num >= 100 {
                        FilterKind::ExtAcl
                    } else {
                        FilterKind::StdAcl
                    };
                    let seq = seq_counter.entry((kind, name.clone())).or_insert(0);
                    *seq += 10;
                    if let Some(entry) = parse_acl_entry(rest, *seq, idx, kind) {
                        rules
                            .entry((kind, name.clone()))
                            .or_insert_with(|| FilterRule {
                                kind,
                                name,
                                entries: Vec::new(),
                            })
                            .entries
                            .push(entry);
                    }
                }
            }
            StanzaKind::PrefixList => {
                let toks = st.header_tokens();
                // ip prefix-list NAME [seq N] permit|deny P/L [le N] [ge N]
                if toks.len() >= 4 && toks[0] == "ip" && toks[1] == "prefix-list" {
                    let name = toks[2].to_string();
                    let mut rest = &toks[3..];
                    let mut sequence = {
                        let c = seq_counter
                            .entry((FilterKind::PrefixList, name.clone()))
                            .or_insert(0);
                        *c += 10;
                        *c
                    };
                    if rest.first() == Some(&"seq") && rest.len() >= 2 {
                        sequence = rest[1].parse().unwrap_or(sequence);
                        rest = &rest[2..];
                    }
                    if let Some(entry) = parse_prefix_list_entry(rest, sequence, idx) {
                        rules
                            .entry((FilterKind::PrefixList, name.clone()))
                            .or_insert_with(|| FilterRule {
                                kind: FilterKind::PrefixList,
                                name,
                                entries: Vec::new(),
                            })
                            .entries
                            .push(entry);
                    }
                }
            }
            StanzaKind::RouteMap => {
                // route-map NAME permit|deny SEQ; one clause per stanza
                let toks = st.header_tokens();
                if toks.len() >= 3 {
                    let name = toks[1].to_string();
                    let permit = toks[2] == "permit";
                    let sequence: u32 = toks.get(3).and_then(|t| t.parse().ok()).unwrap_or(10);
                    let mut match_list = None;
                    for ctoks in cmd_tokens(st) {
                        let ctoks: Vec<&str> = ctoks.iter().map(|s| s.as_str()).collect();
                        match ctoks.as_slice() {
                            ["match", "ip", "address", "prefix-list", n]
                            | ["match", "ip", "address", n] => {
                                match_list = Some(n.to_string());
                            }
                            _ => {}
                        }
                    }
                    rules
                        .entry((FilterKind::RouteMap, name.clone()))
                        .or_insert_with(|| FilterRule {
                            kind: FilterKind::RouteMap,
                            name,
                            entries: Vec::new(),
                        })
                        .entries
                        .push(FilterEntry {
                            permit,
                            prefix: None,
                            le: None,
                            ge: None,
                            sequence,
                            match_list,
                            stanza_index: idx,
                        });
                }
            }
            _ => {}
        }
    }
    rules.into_values().collect()
}

fn parse_acl_entry(rest: &[&str], seq: u32, idx: usize, kind: FilterKind) -> Option<FilterEntry> {
    let permit = match rest.first()? {
        &"permit" => true,
        &"deny" => false,
        _ => return None,
    };
    let body = &rest[1..];
    let body = if kind == FilterKind::ExtAcl && body.first() == Some(&"ip") {
        &body[1..]
    } else {
        body
    };
    match body {
        ["any", ..] => Some(FilterEntry {
            permit,
            prefix: None,
            le: None,
            ge: None,
            sequence: seq,
            match_list: None,
            stanza_index: idx,
        }),
        ["host", ip, ..] => {
            let ip: Ipv4Addr = ip.parse().ok()?;
            Some(FilterEntry {
                permit,
                prefix: Some(Ipv4Net::new(ip, 32)),
                le: None,
                ge: None,
                sequence: seq,
                match_list: None,
                stanza_index: idx,
            })
        }
        [base, wildcard, ..] => {
            let base: Ipv4Addr = base.parse().ok()?;
            let wc: Ipv4Addr = wildcard.parse().ok()?;
            let len = 32u8.saturating_sub(u32::from(wc).count_ones() as u8);
            Some(FilterEntry {
                permit,
                prefix: Some(Ipv4Net::new(base, len)),
                le: Some(32),
                ge: None,
                sequence: seq,
                match_list: None,
                stanza_index: idx,
            })
        }
        [ip] => {
            let ip: Ipv4Addr = ip.parse().ok()?;
            Some(FilterEntry {
                permit,
                prefix: Some(Ipv4Net::new(ip, 32)),
                le: None,
                ge: None,
                sequence: seq,
                match_list: None,
                stanza_index: idx,
            })
        }
        _ => None,
    }
}

fn parse_prefix_list_entry(rest: &[&str], sequence: u32, idx: usize) -> Option<FilterEntry> {
    let permit = match rest.first()? {
        &"permit" => true,
        &"deny" => false,
        _ => return None,
    };
    let prefix: Option<Ipv4Net> = match rest.get(1)? {
        &"any" => None,
        p => Some(p.parse().ok()?),
    };
    let mut le = None;
    let mut ge = None;
    let mut i = 2;
    while i + 1 < rest.len() {
        match rest[i] {
            "le" => le = rest[i + 1].parse().ok(),
            "ge" => ge = rest[i + 1].parse().ok(),
            _ => {}
        }
        i += 2;
    }
    Some(FilterEntry {
        permit,
        prefix,
        le,
        ge,
        sequence,
        match_list: None,
        stanza_index: idx,
    })
}

/// Convenience constructor for a router's resolved filter set.
pub fn filter_set(cfg: &RouterConfig) -> FilterSet {
    FilterSet { rules: filters(cfg) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn prefix_list_first_match_wins() {
        let text = "hostname r1\nip prefix-list P seq 5 deny 10.200.4.0/24\nip prefix-list P seq 10 permit 0.0.0.0/0 le 32\n";
        let cfg = parse_config(text).unwrap();
        let rules = filters(&cfg);
        let p = rules.iter().find(|r| r.name == "P").unwrap();
        assert!(!p.permits(&"10.200.4.0/24".parse().unwrap()));
        assert!(p.permits(&"10.200.3.0/24".parse().unwrap()));
    }

    #[test]
    fn std_acl_host_entry() {
        let text = "hostname r1\naccess-list 5 deny host 10.0.1.100\naccess-list 5 permit any\n";
        let cfg = parse_config(text).unwrap();
        let rules = filters(&cfg);
        let acl = rules.iter().find(|r| r.name == "5").unwrap();
        assert_eq!(acl.kind, FilterKind::StdAcl);
        assert!(!acl.permits(&"10.0.1.100/32".parse().unwrap()));
        assert!(acl.permits(&"10.0.1.101/32".parse().unwrap()));
    }

    #[test]
    fn static_route_view() {
        let text = "hostname r1\nip route 10.9.9.0 255.255.255.0 10.0.45.2\n";
        let cfg = parse_config(text).unwrap();
        let st = static_routes(&cfg);
        assert_eq!(st.len(), 1);
        assert_eq!(st[0].prefix.to_string(), "10.9.9.0/24");
    }
}
