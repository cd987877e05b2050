//! Inter-AS repair: compare each real ASBR's forwarding table against the
//! stored original dump and neutralize discrepancies by inserting deny
//! filters on the offending sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{NetworkSnapshot, Stanza, StanzaKind};
use crate::ip::Ipv4Net;
use crate::sim::{compute_fibs, discover_sessions, Network, Protocol, Simulation};

use super::{RepairError, RepairLog};

/// How to neutralize an iBGP route whose next hop is not directly adjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbgpStrategy {
    /// Block the IGP route to the next hop so the router discards the
    /// iBGP route.
    BlockIgp,
    /// Apply a filter on the next-hop router so it drops the destination
    /// network route (touches the network less).
    FilterNexthop,
}

impl FromStr for IbgpStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "block-igp" => Ok(IbgpStrategy::BlockIgp),
            "filter-nexthop" => Ok(IbgpStrategy::FilterNexthop),
            other => Err(format!("unknown ibgp strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredEntry {
    pub protocol: Protocol,
    pub next_hop_routers: BTreeSet<String>,
}

/// ASBR forwarding tables of the original network, the diff anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StoredFibs {
    pub routers: BTreeMap<String, BTreeMap<Ipv4Net, StoredEntry>>,
}

impl StoredFibs {
    /// Capture the FIBs of the given routers from a simulation.
    pub fn capture(sim: &Simulation, routers: &BTreeSet<String>) -> StoredFibs {
        let mut out = StoredFibs::default();
        for r in routers {
            let Some(fib) = sim.fibs.get(r) else {
                continue;
            };
            let table = out.routers.entry(r.clone()).or_default();
            for (p, route) in &fib.routes {
                table.insert(
                    *p,
                    StoredEntry {
                        protocol: route.protocol,
                        next_hop_routers: route
                            .next_hops
                            .iter()
                            .map(|nh| nh.router.clone())
                            .collect(),
                    },
                );
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("stored fibs serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<StoredFibs, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

/// Longest-prefix effective route for a stored prefix: the most specific
/// current entry containing it, falling back to the default route.
fn effective(sim: &Simulation, router: &str, prefix: &Ipv4Net) -> Option<StoredEntry> {
    let fib = sim.fibs.get(router)?;
    let route = fib
        .routes
        .values()
        .filter(|r| r.prefix.contains_net(prefix))
        .max_by_key(|r| r.prefix.len())?;
    Some(StoredEntry {
        protocol: route.protocol,
        next_hop_routers: route.next_hops.iter().map(|nh| nh.router.clone()).collect(),
    })
}

#[derive(Debug)]
struct Discrepancy {
    router: String,
    prefix: Ipv4Net,
}

/// Iteratively simulate, diff real-ASBR FIBs restricted to the stored
/// (original) prefixes, and add one deny filter per discrepancy until the
/// diff is empty or the iteration cap is hit.
pub fn interas_repair(
    snapshot: &mut NetworkSnapshot,
    stored: &StoredFibs,
    strategy: IbgpStrategy,
    cap: usize,
) -> Result<RepairLog, RepairError> {
    let mut log = RepairLog::default();
    let mut last_diff_count = usize::MAX;
    for _ in 0..cap {
        log.iterations += 1;
        let net = Network::build(snapshot)
            .map_err(|e| RepairError::ConflictingRequirement(e.to_string()))?;
        let sim = compute_fibs(&net)
            .map_err(|e| RepairError::ConflictingRequirement(e.to_string()))?;
        let mut diffs = Vec::new();
        for (router, table) in &stored.routers {
            for (prefix, want) in table {
                let got = effective(&sim, router, prefix);
                if got.as_ref() != Some(want) {
                    // connected and static entries cannot drift; only rou-
                    // ting protocol outcomes are repaired
                    if matches!(want.protocol, Protocol::Connected | Protocol::Static) {
                        continue;
                    }
                    diffs.push(Discrepancy {
                        router: router.clone(),
                        prefix: *prefix,
                    });
                }
            }
        }
        if diffs.is_empty() {
            log.converged = true;
            return Ok(log);
        }
        // progress guard: the discrepancy count must not grow
        if diffs.len() > last_diff_count {
            return Err(RepairError::NonConvergence(log.iterations));
        }
        last_diff_count = diffs.len();
        for d in &diffs {
            resolve_discrepancy(snapshot, &net, &sim, d, stored, strategy, &mut log)?;
        }
    }
    Err(RepairError::NonConvergence(cap))
}

fn resolve_discrepancy(
    snapshot: &mut NetworkSnapshot,
    net: &Network,
    sim: &Simulation,
    d: &Discrepancy,
    stored: &StoredFibs,
    strategy: IbgpStrategy,
    log: &mut RepairLog,
) -> Result<(), RepairError> {
    let cur = effective(sim, &d.router, &d.prefix);
    let Some(cur) = cur else {
        return Err(RepairError::ConflictingRequirement(format!(
            "{} lost every route to {} and filters cannot restore one",
            d.router, d.prefix
        )));
    };
    match cur.protocol {
        Protocol::Ebgp => {
            // deny the prefix inbound on the session it was learned from
            let entry = selected_bgp_entry(sim, &d.router, &d.prefix).ok_or_else(|| {
                RepairError::ConflictingRequirement(format!(
                    "ebgp route for {} at {} has no rib entry",
                    d.prefix, d.router
                ))
            })?;
            let peer = entry.learned_from.clone().unwrap_or_default();
            add_session_deny(snapshot, net, &d.router, &peer, &d.prefix, log)
        }
        Protocol::Ibgp => {
            let entry = selected_bgp_entry(sim, &d.router, &d.prefix).ok_or_else(|| {
                RepairError::ConflictingRequirement(format!(
                    "ibgp route for {} at {} has no rib entry",
                    d.prefix, d.router
                ))
            })?;
            match strategy {
                IbgpStrategy::BlockIgp => {
                    // deny the IGP route resolving the next hop
                    let resolving = resolving_prefix(sim, &d.router, entry.next_hop_ip)
                        .ok_or_else(|| {
                            RepairError::ConflictingRequirement(format!(
                                "no IGP route resolves next hop {} at {}",
                                entry.next_hop_ip, d.router
                            ))
                        })?;
                    add_ospf_block(snapshot, &d.router, &resolving, log)
                }
                IbgpStrategy::FilterNexthop => {
                    // drop the destination network route on the next-hop
                    // router instead
                    let owner = net
                        .owner_of_ip(entry.next_hop_ip)
                        .map(|dev| dev.name.clone())
                        .ok_or_else(|| {
                            RepairError::ConflictingRequirement(format!(
                                "next hop {} owned by no router",
                                entry.next_hop_ip
                            ))
                        })?;
                    let upstream = selected_bgp_entry(sim, &owner, &d.prefix)
                        .and_then(|e| e.learned_from.clone());
                    match upstream {
                        Some(peer) => {
                            add_session_deny(snapshot, net, &owner, &peer, &d.prefix, log)
                        }
                        None => Err(RepairError::ConflictingRequirement(format!(
                            "next-hop router {owner} originates {} itself",
                            d.prefix
                        ))),
                    }
                }
            }
        }
        other => {
            // IGP-level drift cannot be repaired with session filters; block
            // the offending IGP route only when the stored table wanted a
            // BGP route here
            let wanted = stored.routers[&d.router][&d.prefix].protocol;
            if matches!(wanted, Protocol::Ebgp | Protocol::Ibgp)
                && matches!(other, Protocol::Ospf | Protocol::OspfExternal)
            {
                add_ospf_block(snapshot, &d.router, &d.prefix, log)
            } else {
                Err(RepairError::ConflictingRequirement(format!(
                    "{} route for {} at {} cannot be filtered back to {:?}",
                    protocol_name(other),
                    d.prefix,
                    d.router,
                    wanted
                )))
            }
        }
    }
}

fn protocol_name(p: Protocol) -> &'static str {
    match p {
        Protocol::Connected => "connected",
        Protocol::Static => "static",
        Protocol::Ebgp => "ebgp",
        Protocol::Ospf => "ospf",
        Protocol::OspfExternal => "ospf-external",
        Protocol::Ibgp => "ibgp",
    }
}

fn selected_bgp_entry<'a>(
    sim: &'a Simulation,
    router: &str,
    prefix: &Ipv4Net,
) -> Option<&'a crate::sim::BgpRibEntry> {
    sim.bgp_rib
        .get(router)?
        .iter()
        .find(|e| e.prefix == *prefix)
}

fn resolving_prefix(sim: &Simulation, router: &str, ip: std::net::Ipv4Addr) -> Option<Ipv4Net> {
    let fib = sim.fibs.get(router)?;
    fib.routes
        .values()
        .filter(|r| {
            !matches!(r.protocol, Protocol::Ebgp | Protocol::Ibgp)
                && !r.prefix.is_default()
                && r.prefix.contains(ip)
        })
        .max_by_key(|r| r.prefix.len())
        .map(|r| r.prefix)
}

/// Append `deny <prefix>` to the inbound prefix list governing the session
/// from `peer` at `router`, creating the list and the neighbor hook on
/// first use.
fn add_session_deny(
    snapshot: &mut NetworkSnapshot,
    net: &Network,
    router: &str,
    peer: &str,
    prefix: &Ipv4Net,
    log: &mut RepairLog,
) -> Result<(), RepairError> {
    let sessions = discover_sessions(net)
        .map_err(|e| RepairError::ConflictingRequirement(e.to_string()))?;
    let session = sessions
        .iter()
        .find(|s| s.local == router && s.peer == peer)
        .ok_or_else(|| {
            RepairError::ConflictingRequirement(format!("no session {router} -> {peer}"))
        })?;
    let peer_ip = session.peer_ip;
    let list = format!("ncl-{}", sanitize(peer));
    let cfg = snapshot
        .routers
        .get_mut(router)
        .ok_or_else(|| RepairError::ConflictingRequirement(format!("unknown router {router}")))?;

    // next free sequence below the catch-all
    let deny_count = cfg
        .stanzas
        .iter()
        .filter(|s| {
            s.kind == StanzaKind::PrefixList && s.header_tokens().get(2) == Some(&list.as_str())
        })
        .count();
    let is_new = deny_count == 0;
    let seq = 5 + 5 * deny_count as u32;
    let deny = Stanza::new(
        StanzaKind::PrefixList,
        format!("ip prefix-list {list} seq {seq} deny {prefix}"),
    );
    cfg.insert_stanza(deny);
    if is_new {
        let permit = Stanza::new(
            StanzaKind::PrefixList,
            format!("ip prefix-list {list} seq 1000 permit 0.0.0.0/0 le 32"),
        );
        cfg.insert_stanza(permit);
        if let Some(bgp_stanza) = cfg.stanzas_of_mut(StanzaKind::RouterBgp).next() {
            bgp_stanza.push_command(&format!("neighbor {peer_ip} prefix-list {list} in"));
        } else {
            return Err(RepairError::ConflictingRequirement(format!(
                "{router} has no bgp stanza for session filter"
            )));
        }
    }
    log.filters_added.push((
        router.to_string(),
        format!("prefix-list {list} deny {prefix} in from {peer}"),
    ));
    Ok(())
}

/// Deny a prefix from entering the router's OSPF RIB via an inbound
/// distribute list.
fn add_ospf_block(
    snapshot: &mut NetworkSnapshot,
    router: &str,
    prefix: &Ipv4Net,
    log: &mut RepairLog,
) -> Result<(), RepairError> {
    let list = format!("ncl-igp-{}", sanitize(router));
    let cfg = snapshot
        .routers
        .get_mut(router)
        .ok_or_else(|| RepairError::ConflictingRequirement(format!("unknown router {router}")))?;
    let deny_count = cfg
        .stanzas
        .iter()
        .filter(|s| {
            s.kind == StanzaKind::PrefixList && s.header_tokens().get(2) == Some(&list.as_str())
        })
        .count();
    let is_new = deny_count == 0;
    let seq = 5 + 5 * deny_count as u32;
    cfg.insert_stanza(Stanza::new(
        StanzaKind::PrefixList,
        format!("ip prefix-list {list} seq {seq} deny {prefix}"),
    ));
    if is_new {
        cfg.insert_stanza(Stanza::new(
            StanzaKind::PrefixList,
            format!("ip prefix-list {list} seq 1000 permit 0.0.0.0/0 le 32"),
        ));
        if let Some(ospf_stanza) = cfg.stanzas_of_mut(StanzaKind::RouterOspf).next() {
            ospf_stanza.push_command(&format!("distribute-list prefix {list} in"));
        } else {
            return Err(RepairError::ConflictingRequirement(format!(
                "{router} has no ospf stanza for distribute-list"
            )));
        }
    }
    log.filters_added.push((
        router.to_string(),
        format!("ospf distribute-list {list} deny {prefix} in"),
    ));
    Ok(())
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}
