//! Worklist-driven network expansion: realize new links and routers as
//! configuration, place fake hosts, and mimic filter treatment.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use crate::config::{
    self, Command, HostSpec, NetworkSnapshot, RouterConfig, Stanza, StanzaKind,
};
use crate::ip::Ipv4Net;

use super::{
    generate_fake_config, select_template, template_median_cost, ConfgenError, ExpansionPlan,
    FakeAssignments, SubnetPool,
};

/// Per-link assignment produced by the expansion pass.
#[derive(Debug, Clone)]
pub struct LinkAssignment {
    pub subnet: Ipv4Net,
    pub a_ip: Ipv4Addr,
    pub b_ip: Ipv4Addr,
}

fn next_iface_name(cfg: &RouterConfig) -> String {
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
            return format!("{prefix}{}", max + 1);
        }
    }
    format!("eth{}", names.len())
}

fn asn_of(cfg: &RouterConfig) -> u32 {
    config::bgp(cfg).map(|b| b.asn).unwrap_or(0)
}

fn runs_ospf(cfg: &RouterConfig) -> bool {
    config::ospf(cfg).is_some()
}

/// Append an interface plus the matching OSPF coverage to an existing
/// (real or already-configured fake) router.
fn add_link_interface(
    cfg: &mut RouterConfig,
    ip: Ipv4Addr,
    subnet: Ipv4Net,
    cost: Option<u32>,
    with_ospf: bool,
) {
    let name = next_iface_name(cfg);
    let mut st = Stanza::new(StanzaKind::Interface, format!("interface {name}"));
    st.commands.push(Command::new(format!(" ip address {ip} {}", subnet.mask())));
    if let Some(c) = cost {
        if c != 1 {
            st.commands.push(Command::new(format!(" ip ospf cost {c}")));
        }
    }
    cfg.insert_stanza(st);
    if with_ospf {
        if let Some(ospf) = cfg.stanzas_of_mut(StanzaKind::RouterOspf).next() {
            let wc = Ipv4Addr::from(!u32::from(subnet.mask()));
            let line = format!("network {} {} area 0", subnet.addr(), wc);
            if !ospf.has_command_with(&line) {
                ospf.push_command(&line);
            }
        }
    }
}

/// Append an eBGP session to a router, creating the bgp stanza when the
/// router did not speak BGP before.
fn add_ebgp_session(cfg: &mut RouterConfig, own_asn: u32, peer: Ipv4Addr, remote_as: u32) {
    let has_bgp = cfg.stanzas_of(StanzaKind::RouterBgp).next().is_some();
    if !has_bgp {
        cfg.insert_stanza(Stanza::new(
            StanzaKind::RouterBgp,
            format!("router bgp {own_asn}"),
        ));
    }
    let bgp_view = config::bgp(cfg);
    let stanza = cfg.stanzas_of_mut(StanzaKind::RouterBgp).next().unwrap();
    // iBGP additions join an existing iBGP peer group when one exists
    let group = bgp_view.as_ref().and_then(|b| {
        b.peer_groups
            .iter()
            .find(|(_, g)| g.remote_as == Some(remote_as))
            .map(|(n, _)| n.clone())
    });
    match group {
        Some(g) => stanza.push_command(&format!("neighbor {peer} peer-group {g}")),
        None => {
            stanza.push_command(&format!("neighbor {peer} remote-as {remote_as}"));
            if own_asn == remote_as {
                // match the router's own iBGP next-hop-self habit
                let uses_nhs = bgp_view
                    .as_ref()
                    .map(|b| {
                        b.neighbors
                            .iter()
                            .any(|n| n.remote_as == own_asn && n.next_hop_self)
                    })
                    .unwrap_or(false);
                if uses_nhs {
                    stanza.push_command(&format!("neighbor {peer} next-hop-self"));
                }
            }
        }
    }
}

/// Algorithm: process the new-edge worklist; skip edges between two
/// unconfigured new routers, configure a new router from its first
/// configured neighbor (protocols, AS number, style template), then
/// configure each link with a fresh subnet.
pub fn expand_network(
    snapshot: &mut NetworkSnapshot,
    plan: &mut ExpansionPlan,
    pool: &mut SubnetPool,
) -> Result<BTreeMap<(String, String), LinkAssignment>, ConfgenError> {
    let mut configured: BTreeSet<String> = snapshot.routers.keys().cloned().collect();
    let mut worklist: Vec<(String, String)> = plan.new_edges.clone();
    let mut assignments: BTreeMap<(String, String), LinkAssignment> = BTreeMap::new();
    // staged interfaces for fake routers: config is generated on first
    // contact, further links append
    while !worklist.is_empty() {
        let mut processed: Vec<usize> = Vec::new();
        for (idx, (u, v)) in worklist.iter().enumerate() {
            let u_conf = configured.contains(u);
            let v_conf = configured.contains(v);
            if !u_conf && !v_conf {
                continue;
            }
            // configure the unconfigured endpoint from the configured one
            let (old, new) = match (u_conf, v_conf) {
                (true, false) => (u.clone(), Some(v.clone())),
                (false, true) => (v.clone(), Some(u.clone())),
                _ => (u.clone(), None),
            };
            if let Some(new_name) = &new {
                configure_new_router(snapshot, plan, &old, new_name)?;
                configured.insert(new_name.clone());
            }
            configure_link(snapshot, plan, pool, u, v, &mut assignments)?;
            processed.push(idx);
        }
        if processed.is_empty() {
            let stuck: Vec<String> = worklist
                .iter()
                .flat_map(|(a, b)| [a.clone(), b.clone()])
                .filter(|n| !configured.contains(n))
                .collect();
            return Err(ConfgenError::UnreachablePlan(stuck));
        }
        for idx in processed.into_iter().rev() {
            worklist.remove(idx);
        }
    }
    Ok(assignments)
}

fn configure_new_router(
    snapshot: &mut NetworkSnapshot,
    plan: &mut ExpansionPlan,
    old: &str,
    new_name: &str,
) -> Result<(), ConfgenError> {
    let old_cfg = snapshot.routers.get(old).ok_or_else(|| {
        ConfgenError::IncompleteAssignment(format!("adjacent router {old} missing"))
    })?;
    let asn = asn_of(old_cfg);
    let protocols = super::protocol_set(old_cfg);
    let template_name = select_template(new_name, snapshot, &plan.graph, asn, &protocols);
    let template = snapshot
        .routers
        .get(&template_name)
        .ok_or_else(|| ConfgenError::IncompleteAssignment("no template candidate".into()))?;
    let mut fake = generate_fake_config(
        template,
        &FakeAssignments {
            hostname: new_name.to_string(),
            ifaces: Vec::new(),
            asn: config::bgp(template).is_some().then_some(asn),
            neighbors: Vec::new(),
        },
    )?;
    // the fake must speak the protocols of its attachment point even when
    // the style template does not
    let old_cfg = &snapshot.routers[old];
    if config::ospf(old_cfg).is_some() && config::ospf(&fake).is_none() {
        let pid = config::ospf(old_cfg)
            .and_then(|o| o.process_id)
            .unwrap_or(1);
        fake.insert_stanza(Stanza::new(
            StanzaKind::RouterOspf,
            format!("router ospf {pid}"),
        ));
    }
    if config::bgp(old_cfg).is_some() && config::bgp(&fake).is_none() && asn != 0 {
        fake.insert_stanza(Stanza::new(
            StanzaKind::RouterBgp,
            format!("router bgp {asn}"),
        ));
    }
    plan.template_of
        .insert(new_name.to_string(), template_name.clone());
    snapshot.add_router(fake)?;
    Ok(())
}

fn configure_link(
    snapshot: &mut NetworkSnapshot,
    plan: &ExpansionPlan,
    pool: &mut SubnetPool,
    u: &str,
    v: &str,
    assignments: &mut BTreeMap<(String, String), LinkAssignment>,
) -> Result<(), ConfgenError> {
    let subnet = pool.next()?;
    let (a, b) = if u < v { (u, v) } else { (v, u) };
    let a_ip = subnet.host(1);
    let b_ip = subnet.host(2);
    let asn_a = asn_of(&snapshot.routers[a]);
    let asn_b = asn_of(&snapshot.routers[b]);
    let same_as = asn_a == asn_b;
    let both_ospf = runs_ospf(&snapshot.routers[a]) && runs_ospf(&snapshot.routers[b]);
    let with_ospf = same_as && both_ospf;
    // fake-link costs start from the style template's median; repair may
    // overwrite them later
    let cost_a = plan
        .template_of
        .get(a)
        .and_then(|t| snapshot.routers.get(t))
        .map(template_median_cost);
    let cost_b = plan
        .template_of
        .get(b)
        .and_then(|t| snapshot.routers.get(t))
        .map(template_median_cost);
    {
        let cfg = snapshot.routers.get_mut(a).unwrap();
        add_link_interface(cfg, a_ip, subnet, cost_a.or(Some(1)), with_ospf);
    }
    {
        let cfg = snapshot.routers.get_mut(b).unwrap();
        add_link_interface(cfg, b_ip, subnet, cost_b.or(Some(1)), with_ospf);
    }
    if !same_as {
        let cfg_a = snapshot.routers.get_mut(a).unwrap();
        add_ebgp_session(cfg_a, asn_a, b_ip, asn_b);
        let cfg_b = snapshot.routers.get_mut(b).unwrap();
        add_ebgp_session(cfg_b, asn_b, a_ip, asn_a);
    }
    assignments.insert(
        (a.to_string(), b.to_string()),
        LinkAssignment { subnet, a_ip, b_ip },
    );
    Ok(())
}

/// Join a newly configured BGP-speaking fake router into its AS's iBGP
/// mesh: sessions to every same-AS speaker, in both directions.
pub fn join_ibgp_mesh(snapshot: &mut NetworkSnapshot, plan: &ExpansionPlan) {
    // anchor address per router: lowest interface address
    let anchor: BTreeMap<String, Ipv4Addr> = snapshot
        .routers
        .iter()
        .filter_map(|(name, cfg)| {
            config::interfaces(cfg)
                .iter()
                .filter_map(|i| i.ip)
                .min()
                .map(|ip| (name.clone(), ip))
        })
        .collect();
    let speakers: Vec<(String, u32)> = snapshot
        .routers
        .iter()
        .filter_map(|(name, cfg)| config::bgp(cfg).map(|b| (name.clone(), b.asn)))
        .collect();
    for fake in &plan.new_routers {
        let Some((_, fake_asn)) = speakers.iter().find(|(n, _)| n == fake) else {
            continue;
        };
        let Some(fake_ip) = anchor.get(fake).copied() else {
            continue;
        };
        let peers: Vec<(String, Ipv4Addr)> = speakers
            .iter()
            .filter(|(n, a)| n != fake && a == fake_asn)
            .filter_map(|(n, _)| anchor.get(n).map(|ip| (n.clone(), *ip)))
            .collect();
        for (peer_name, peer_ip) in peers {
            {
                let cfg = snapshot.routers.get_mut(fake).unwrap();
                if !has_neighbor(cfg, peer_ip) {
                    add_ebgp_session(cfg, *fake_asn, peer_ip, *fake_asn);
                }
            }
            {
                let cfg = snapshot.routers.get_mut(&peer_name).unwrap();
                if !has_neighbor(cfg, fake_ip) {
                    add_ebgp_session(cfg, *fake_asn, fake_ip, *fake_asn);
                }
            }
        }
    }
}

fn has_neighbor(cfg: &RouterConfig, peer: Ipv4Addr) -> bool {
    config::bgp(cfg)
        .map(|b| b.neighbors.iter().any(|n| n.peer_ip == peer))
        .unwrap_or(false)
}

/// Place k_hosts - 1 fake hosts per real host: first the other real egress
/// routers of the AS, then fake routers, then the host's own gateway.
pub fn add_fake_hosts(
    snapshot: &mut NetworkSnapshot,
    plan: &mut ExpansionPlan,
    pool: &mut SubnetPool,
    k_hosts: usize,
) -> Result<(), ConfgenError> {
    if k_hosts <= 1 {
        return Ok(());
    }
    let real_hosts: Vec<HostSpec> = snapshot.hosts.values().cloned().collect();
    let egress_by_as: BTreeMap<u32, BTreeSet<String>> = {
        let mut m: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
        for h in &real_hosts {
            if let Some(cfg) = snapshot.routers.get(&h.gateway_router) {
                m.entry(asn_of(cfg)).or_default().insert(h.gateway_router.clone());
            }
        }
        m
    };
    let fake_by_as: BTreeMap<u32, Vec<String>> = {
        let mut m: BTreeMap<u32, Vec<String>> = BTreeMap::new();
        for f in &plan.new_routers {
            if let Some(cfg) = snapshot.routers.get(f) {
                m.entry(asn_of(cfg)).or_default().push(f.clone());
            }
        }
        m
    };
    let names = super::fake_router_names(
        &real_hosts.iter().map(|h| h.hostname.clone()).collect::<Vec<String>>(),
        real_hosts.len() * (k_hosts - 1),
    );
    let mut name_iter = names.into_iter();
    for h in &real_hosts {
        let asn = snapshot
            .routers
            .get(&h.gateway_router)
            .map(|c| asn_of(c))
            .unwrap_or(0);
        let mut candidates: Vec<String> = egress_by_as
            .get(&asn)
            .map(|s| s.iter().filter(|r| **r != h.gateway_router).cloned().collect())
            .unwrap_or_default();
        candidates.extend(fake_by_as.get(&asn).cloned().unwrap_or_default());
        candidates.push(h.gateway_router.clone());
        for i in 0..(k_hosts - 1) {
            let gateway = candidates[i % candidates.len()].clone();
            let name = name_iter.next().expect("enough names");
            let subnet = pool.next()?;
            let gw_ip = subnet.host(1);
            let host_ip = subnet.host(2);
            let with_ospf = snapshot
                .routers
                .get(&gateway)
                .map(|c| runs_ospf(c))
                .unwrap_or(false);
            {
                let cfg = snapshot.routers.get_mut(&gateway).ok_or_else(|| {
                    ConfgenError::IncompleteAssignment(format!("gateway {gateway} missing"))
                })?;
                add_link_interface(cfg, gw_ip, subnet, None, with_ospf);
                advertise_host_subnet(cfg, subnet);
            }
            let spec = HostSpec {
                hostname: name.clone(),
                iface_ip: host_ip,
                mask: subnet.mask(),
                gateway_router: gateway.clone(),
                gateway_ip: gw_ip,
            };
            snapshot.add_host(spec)?;
            plan.new_hosts.insert(name.clone());
            plan.host_map.insert(name, h.hostname.clone());
        }
    }
    Ok(())
}

/// BGP-originating gateways advertise the new host subnet the same way
/// they advertise their real ones.
fn advertise_host_subnet(cfg: &mut RouterConfig, subnet: Ipv4Net) {
    let has_network_stmts = config::bgp(cfg)
        .map(|b| !b.networks.is_empty())
        .unwrap_or(false);
    let redistributes_ospf = config::bgp(cfg)
        .map(|b| b.redistributes.iter().any(|r| r == "ospf"))
        .unwrap_or(false);
    if has_network_stmts && !redistributes_ospf {
        if let Some(st) = cfg.stanzas_of_mut(StanzaKind::RouterBgp).next() {
            st.push_command(&format!("network {} mask {}", subnet.addr(), subnet.mask()));
        }
    }
}

/// For every filter entry matching a real host, insert an analogous entry
/// for each of its fake hosts right next to it. Idempotent.
pub fn mimic_filters(snapshot: &mut NetworkSnapshot, host_map: &BTreeMap<String, String>) {
    // real host -> fakes
    let mut fakes_of: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (fake, real) in host_map {
        fakes_of.entry(real.clone()).or_default().push(fake.clone());
    }
    let hosts = snapshot.hosts.clone();
    let router_names: Vec<String> = snapshot.routers.keys().cloned().collect();
    for rname in router_names {
        let cfg = snapshot.routers.get_mut(&rname).unwrap();
        // position -> stanzas to insert after it
        let mut insertions: Vec<(usize, Stanza)> = Vec::new();
        for (idx, st) in cfg.stanzas.iter().enumerate() {
            let headers = match st.kind {
                StanzaKind::AccessList | StanzaKind::PrefixList => {
                    mimic_entry_lines(&st.header, &hosts, &fakes_of)
                }
                _ => Vec::new(),
            };
            for line in headers {
                let exists = cfg.stanzas.iter().any(|s| s.header == line)
                    || insertions.iter().any(|(_, s)| s.header == line);
                if !exists {
                    insertions.push((idx, Stanza::new(st.kind, line)));
                }
            }
        }
        for (idx, st) in insertions.into_iter().rev() {
            cfg.stanzas.insert(idx + 1, st);
        }
    }
}

/// Rewritten filter lines for fake hosts, from one matched entry line.
fn mimic_entry_lines(
    header: &str,
    hosts: &BTreeMap<String, HostSpec>,
    fakes_of: &BTreeMap<String, Vec<String>>,
) -> Vec<String> {
    let toks: Vec<&str> = header.split_whitespace().collect();
    let mut out = Vec::new();
    for (real_name, fakes) in fakes_of {
        let Some(real) = hosts.get(real_name) else {
            continue;
        };
        let Some(real_subnet) = real.subnet() else {
            continue;
        };
        for fake_name in fakes {
            let Some(fake) = hosts.get(fake_name) else {
                continue;
            };
            let Some(fake_subnet) = fake.subnet() else {
                continue;
            };
            let line = rewrite_filter_line(&toks, real, &real_subnet, fake, &fake_subnet);
            if let Some(l) = line {
                out.push(l);
            }
        }
    }
    out
}

fn rewrite_filter_line(
    toks: &[&str],
    real: &HostSpec,
    real_subnet: &Ipv4Net,
    fake: &HostSpec,
    fake_subnet: &Ipv4Net,
) -> Option<String> {
    let mut matched = false;
    let mut out: Vec<String> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let t = toks[i];
        // host-form: `host <ip>`
        if t == "host" && i + 1 < toks.len() {
            if let Ok(ip) = toks[i + 1].parse::<Ipv4Addr>() {
                if ip == real.iface_ip {
                    matched = true;
                    out.push("host".into());
                    out.push(fake.iface_ip.to_string());
                    i += 2;
                    continue;
                }
            }
        }
        // prefix-list form: `A.B.C.D/L`
        if let Ok(net) = t.parse::<Ipv4Net>() {
            if net.contains(real.iface_ip) && net.len() >= real_subnet.len() {
                matched = true;
                out.push(fake_subnet.to_string());
                i += 1;
                continue;
            }
        }
        // acl form: `<base> <wildcard>`
        if i + 1 < toks.len() {
            if let (Ok(base), Ok(wc)) = (t.parse::<Ipv4Addr>(), toks[i + 1].parse::<Ipv4Addr>()) {
                let len = 32u8.saturating_sub(u32::from(wc).count_ones() as u8);
                let net = Ipv4Net::new(base, len);
                if u32::from(wc).leading_zeros() >= 8
                    && net.contains(real.iface_ip)
                    && len >= real_subnet.len()
                {
                    matched = true;
                    out.push(fake_subnet.addr().to_string());
                    out.push(Ipv4Addr::from(!u32::from(fake_subnet.mask())).to_string());
                    i += 2;
                    continue;
                }
            }
        }
        out.push(t.to_string());
        i += 1;
    }
    if !matched {
        return None;
    }
    // fresh sequence number for prefix-list entries to keep them unique
    if let Some(pos) = out.iter().position(|t| t == "seq") {
        let bump: u32 = out.get(pos + 1)?.parse().ok()?;
        out[pos + 1] = (bump + 1).to_string();
    }
    Some(out.join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;
    use crate::topology::{extract_topology, NodeKind};

    fn mini_snapshot() -> NetworkSnapshot {
        let r1 = "hostname r1\ninterface eth0\n ip address 10.1.1.1 255.255.255.0\nrouter ospf 1\n network 10.0.0.0 0.255.255.255 area 0\n";
        let mut s = NetworkSnapshot::new();
        s.add_router(parse_config(r1).unwrap()).unwrap();
        s.add_host(
            config::parse_host(
                r#"{"hostname":"h1","iface_ip":"10.1.1.100","mask":"255.255.255.0","gateway_router":"r1","gateway_ip":"10.1.1.1"}"#,
            )
            .unwrap(),
        )
        .unwrap();
        s
    }

    #[test]
    fn expand_chain_configures_in_waves() {
        // edges (r1,f1) and (f1,f2): f1 first wave, f2 second
        let mut snap = mini_snapshot();
        let mut graph = extract_topology(&snap).unwrap().router_graph();
        for f in ["f1", "f2"] {
            graph.add_node(f, NodeKind::Router);
        }
        graph.add_edge("r1", "f1");
        graph.add_edge("f1", "f2");
        let orig = extract_topology(&snap).unwrap().router_graph();
        let mut plan = ExpansionPlan::from_graphs(&orig, &graph);
        let mut pool = SubnetPool::new(super::super::LINK_POOL_BASE.parse().unwrap(), &snap);
        let links = expand_network(&mut snap, &mut plan, &mut pool).unwrap();
        assert_eq!(links.len(), 2);
        assert!(snap.routers.contains_key("f1"));
        assert!(snap.routers.contains_key("f2"));
        assert_eq!(plan.template_of["f1"], "r1");
        // both new routers re-extract as adjacent
        let topo = extract_topology(&snap).unwrap();
        assert!(topo.has_edge("r1", "f1"));
        assert!(topo.has_edge("f1", "f2"));
    }

    #[test]
    fn empty_plan_changes_nothing() {
        let mut snap = mini_snapshot();
        let before = crate::config::render_config(&snap.routers["r1"]);
        let orig = extract_topology(&snap).unwrap().router_graph();
        let mut plan = ExpansionPlan::from_graphs(&orig, &orig);
        let mut pool = SubnetPool::new(super::super::LINK_POOL_BASE.parse().unwrap(), &snap);
        expand_network(&mut snap, &mut plan, &mut pool).unwrap();
        assert_eq!(crate::config::render_config(&snap.routers["r1"]), before);
    }

    #[test]
    fn isolated_fake_pair_is_unreachable() {
        let mut snap = mini_snapshot();
        let mut graph = extract_topology(&snap).unwrap().router_graph();
        for f in ["f1", "f2"] {
            graph.add_node(f, NodeKind::Router);
        }
        graph.add_edge("f1", "f2");
        let orig = extract_topology(&snap).unwrap().router_graph();
        let mut plan = ExpansionPlan::from_graphs(&orig, &graph);
        let mut pool = SubnetPool::new(super::super::LINK_POOL_BASE.parse().unwrap(), &snap);
        assert!(matches!(
            expand_network(&mut snap, &mut plan, &mut pool),
            Err(ConfgenError::UnreachablePlan(_))
        ));
    }

    #[test]
    fn original_lines_survive_expansion_verbatim() {
        let mut snap = mini_snapshot();
        let before = crate::config::render_config(&snap.routers["r1"]);
        let mut graph = extract_topology(&snap).unwrap().router_graph();
        graph.add_node("f1", NodeKind::Router);
        graph.add_edge("r1", "f1");
        let orig = extract_topology(&snap).unwrap().router_graph();
        let mut plan = ExpansionPlan::from_graphs(&orig, &graph);
        let mut pool = SubnetPool::new(super::super::LINK_POOL_BASE.parse().unwrap(), &snap);
        expand_network(&mut snap, &mut plan, &mut pool).unwrap();
        let after = crate::config::render_config(&snap.routers["r1"]);
        for line in before.lines() {
            assert!(after.contains(line), "missing original line {line:?}");
        }
    }

    #[test]
    fn filter_mimicry_inserts_adjacent_and_idempotent() {
        let r1 = "hostname r1\ninterface eth0\n ip address 10.1.1.1 255.255.255.0\naccess-list 5 deny host 10.1.1.100\naccess-list 5 permit any\n";
        let mut snap = NetworkSnapshot::new();
        snap.add_router(parse_config(r1).unwrap()).unwrap();
        snap.add_host(
            config::parse_host(
                r#"{"hostname":"h1","iface_ip":"10.1.1.100","mask":"255.255.255.0","gateway_router":"r1","gateway_ip":"10.1.1.1"}"#,
            )
            .unwrap(),
        )
        .unwrap();
        snap.add_host(
            config::parse_host(
                r#"{"hostname":"h2","iface_ip":"10.251.0.2","mask":"255.255.255.252","gateway_router":"r1","gateway_ip":"10.251.0.1"}"#,
            )
            .unwrap(),
        )
        .unwrap();
        let map = BTreeMap::from([("h2".to_string(), "h1".to_string())]);
        mimic_filters(&mut snap, &map);
        let once = crate::config::render_config(&snap.routers["r1"]);
        assert!(once.contains("access-list 5 deny host 10.251.0.2"), "{once}");
        // the mimic entry sits right after the matched one
        let lines: Vec<&str> = once.lines().collect();
        let a = lines.iter().position(|l| l.contains("deny host 10.1.1.100")).unwrap();
        assert_eq!(lines[a + 1], "access-list 5 deny host 10.251.0.2");
        mimic_filters(&mut snap, &map);
        let twice = crate::config::render_config(&snap.routers["r1"]);
        assert_eq!(once, twice, "idempotent");
    }

    #[test]
    fn no_filters_means_no_change() {
        let mut snap = mini_snapshot();
        let before = crate::config::render_config(&snap.routers["r1"]);
        let map = BTreeMap::new();
        mimic_filters(&mut snap, &map);
        assert_eq!(crate::config::render_config(&snap.routers["r1"]), before);
    }
}
