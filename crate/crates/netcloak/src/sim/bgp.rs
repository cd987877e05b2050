//! Simplified BGP: session discovery, filtered route exchange to a
//! fixpoint, and best-path selection by (origin rank, AS-path length,
//! lowest neighbor address). iBGP routes install only when their next hop
//! resolves through the IGP.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use crate::config::BgpNeighbor;
use crate::ip::Ipv4Net;

use super::ospf::ScostTable;
use super::{Network, NextHop, Protocol, Route, SimError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BgpRibEntry {
    pub prefix: Ipv4Net,
    pub as_path: Vec<u32>,
    pub next_hop_ip: Ipv4Addr,
    /// Advertising peer; `None` for locally originated prefixes.
    pub learned_from: Option<String>,
    pub learned_from_ip: Option<Ipv4Addr>,
    pub via_ebgp: bool,
}

impl BgpRibEntry {
    fn rank(&self) -> (u8, usize, Ipv4Addr) {
        let origin = match (&self.learned_from, self.via_ebgp) {
            (None, _) => 0,
            (Some(_), true) => 1,
            (Some(_), false) => 2,
        };
        (
            origin,
            self.as_path.len(),
            self.learned_from_ip.unwrap_or(Ipv4Addr::UNSPECIFIED),
        )
    }
}

/// An established session: both sides point at each other's addresses.
#[derive(Debug, Clone)]
pub struct Session {
    pub local: String,
    pub peer: String,
    /// Address the peer dials on us = our advertising next hop.
    pub local_ip: Ipv4Addr,
    pub peer_ip: Ipv4Addr,
    pub ebgp: bool,
    pub neighbor_cfg: BgpNeighbor,
}

pub fn discover_sessions(net: &Network) -> Result<Vec<Session>, SimError> {
    let mut sessions = Vec::new();
    for (name, dev) in &net.devices {
        let Some(bgp) = &dev.bgp else {
            continue;
        };
        for n in &bgp.neighbors {
            let Some(peer_dev) = net.owner_of_ip(n.peer_ip) else {
                continue; // dangling neighbor, session never comes up
            };
            if peer_dev.name == *name {
                continue;
            }
            if n.remote_as != 0 && peer_dev.asn != n.remote_as {
                return Err(SimError::SessionMismatch {
                    local: name.clone(),
                    peer_ip: n.peer_ip,
                    configured: n.remote_as,
                    actual: peer_dev.asn,
                });
            }
            // reverse direction must exist for the session to establish
            let reverse_ip = peer_dev.bgp.as_ref().and_then(|pb| {
                pb.neighbors
                    .iter()
                    .map(|pn| pn.peer_ip)
                    .find(|ip| dev.owns_ip(*ip))
            });
            let Some(local_ip) = reverse_ip else {
                continue;
            };
            sessions.push(Session {
                local: name.clone(),
                peer: peer_dev.name.clone(),
                local_ip,
                peer_ip: n.peer_ip,
                ebgp: n.remote_as != bgp.asn,
                neighbor_cfg: n.clone(),
            });
        }
    }
    Ok(sessions)
}

fn originated(net: &Network, router: &str) -> Vec<BgpRibEntry> {
    let dev = &net.devices[router];
    let Some(bgp) = &dev.bgp else {
        return Vec::new();
    };
    let self_ip = dev.router_ip().unwrap_or(Ipv4Addr::UNSPECIFIED);
    let mut prefixes: BTreeSet<Ipv4Net> = bgp.networks.iter().copied().collect();
    for r in &bgp.redistributes {
        match r.as_str() {
            "static" => prefixes.extend(dev.statics.iter().map(|s| s.prefix)),
            "connected" => prefixes.extend(dev.ifaces.iter().map(|i| i.net)),
            "ospf" => {
                for m in net.as_members.get(&dev.asn).into_iter().flatten() {
                    for i in &net.devices[m].ifaces {
                        if i.ospf_enabled {
                            prefixes.insert(i.net);
                        }
                    }
                }
            }
            _ => {}
        }
    }
    prefixes
        .into_iter()
        .map(|prefix| BgpRibEntry {
            prefix,
            as_path: Vec::new(),
            next_hop_ip: self_ip,
            learned_from: None,
            learned_from_ip: None,
            via_ebgp: false,
        })
        .collect()
}

/// Session-level export policy of the advertising router.
fn export_permitted(net: &Network, s: &Session, prefix: &Ipv4Net) -> bool {
    let filters = &net.devices[&s.local].filters;
    let n = &s.neighbor_cfg;
    for name in [&n.route_map_out, &n.prefix_list_out, &n.distribute_list_out]
        .into_iter()
        .flatten()
    {
        if !filters.permits(name, prefix) {
            return false;
        }
    }
    true
}

/// Session-level import policy of the receiving router.
fn import_permitted(net: &Network, s: &Session, prefix: &Ipv4Net) -> bool {
    let filters = &net.devices[&s.peer].filters;
    // find the receiving side's neighbor entry for this session
    let Some(bgp) = &net.devices[&s.peer].bgp else {
        return false;
    };
    let Some(n) = bgp.neighbors.iter().find(|n| n.peer_ip == s.local_ip) else {
        return false;
    };
    for name in [&n.route_map_in, &n.prefix_list_in, &n.distribute_list_in]
        .into_iter()
        .flatten()
    {
        if !filters.permits(name, prefix) {
            return false;
        }
    }
    true
}

/// Is the entry usable at `router` (next hop reachable)? eBGP-learned
/// entries resolve over their session subnet; everything else needs a
/// non-BGP route covering the next hop.
fn resolvable(
    net: &Network,
    tables: &BTreeMap<String, Vec<Route>>,
    router: &str,
    e: &BgpRibEntry,
) -> bool {
    if e.learned_from.is_none() || e.via_ebgp {
        return true;
    }
    let dev = &net.devices[router];
    if dev.owns_ip(e.next_hop_ip) {
        return false;
    }
    if dev.ifaces.iter().any(|i| i.net.contains(e.next_hop_ip)) {
        return true;
    }
    tables
        .get(router)
        .into_iter()
        .flatten()
        .any(|r| {
            !matches!(r.protocol, Protocol::Ebgp | Protocol::Ibgp)
                && !r.prefix.is_default()
                && r.prefix.contains(e.next_hop_ip)
                && !r.next_hops.is_empty()
        })
}

/// Exchange routes until stable and install the winners. Returns each
/// router's selected BGP entries (its Loc-RIB) for redistribution.
pub fn compute_bgp(
    net: &Network,
    scost: &BTreeMap<u32, ScostTable>,
    tables: &mut BTreeMap<String, Vec<Route>>,
) -> Result<BTreeMap<String, Vec<BgpRibEntry>>, SimError> {
    let _ = scost;
    let sessions = discover_sessions(net)?;
    let speakers: Vec<String> = net
        .devices
        .values()
        .filter(|d| d.bgp.is_some())
        .map(|d| d.name.clone())
        .collect();

    // adj-rib-in per router: (prefix, advertising peer) -> entry
    let mut rib_in: BTreeMap<String, BTreeMap<(Ipv4Net, String), BgpRibEntry>> = BTreeMap::new();
    let mut loc_rib: BTreeMap<String, BTreeMap<Ipv4Net, BgpRibEntry>> = BTreeMap::new();

    for round in 0..64 {
        // select
        let mut next_loc: BTreeMap<String, BTreeMap<Ipv4Net, BgpRibEntry>> = BTreeMap::new();
        for r in &speakers {
            let mut candidates: BTreeMap<Ipv4Net, Vec<BgpRibEntry>> = BTreeMap::new();
            for e in originated(net, r) {
                candidates.entry(e.prefix).or_default().push(e);
            }
            for e in rib_in.get(r).into_iter().flat_map(|m| m.values()) {
                if resolvable(net, tables, r, e) {
                    candidates.entry(e.prefix).or_default().push(e.clone());
                }
            }
            let best: BTreeMap<Ipv4Net, BgpRibEntry> = candidates
                .into_iter()
                .filter_map(|(p, mut v)| {
                    v.sort_by_key(|e| e.rank());
                    v.into_iter().next().map(|e| (p, e))
                })
                .collect();
            next_loc.insert(r.clone(), best);
        }
        let stable = next_loc == loc_rib;
        loc_rib = next_loc;
        if stable && round > 0 {
            break;
        }
        // advertise
        let mut next_in: BTreeMap<String, BTreeMap<(Ipv4Net, String), BgpRibEntry>> =
            BTreeMap::new();
        for s in &sessions {
            let local_asn = net.devices[&s.local].asn;
            let peer_asn = net.devices[&s.peer].asn;
            for e in loc_rib.get(&s.local).into_iter().flat_map(|m| m.values()) {
                // iBGP-learned routes are not reflected to iBGP peers
                if !s.ebgp && e.learned_from.is_some() && !e.via_ebgp {
                    continue;
                }
                if !export_permitted(net, s, &e.prefix) {
                    continue;
                }
                let mut as_path = e.as_path.clone();
                let next_hop_ip = if s.ebgp {
                    as_path.insert(0, local_asn);
                    s.local_ip
                } else if s.neighbor_cfg.next_hop_self {
                    net.devices[&s.local].router_ip().unwrap_or(s.local_ip)
                } else {
                    e.next_hop_ip
                };
                if as_path.contains(&peer_asn) {
                    continue; // loop prevention
                }
                if !import_permitted(net, s, &e.prefix) {
                    continue;
                }
                next_in.entry(s.peer.clone()).or_default().insert(
                    (e.prefix, s.local.clone()),
                    BgpRibEntry {
                        prefix: e.prefix,
                        as_path,
                        next_hop_ip,
                        learned_from: Some(s.local.clone()),
                        learned_from_ip: Some(s.local_ip),
                        via_ebgp: s.ebgp,
                    },
                );
            }
        }
        if next_in == rib_in && stable {
            break;
        }
        rib_in = next_in;
    }

    // install winners into the route tables
    for (r, best) in &loc_rib {
        for e in best.values() {
            let Some(from) = &e.learned_from else {
                continue; // originated prefixes are covered by IGP routes
            };
            let route = if e.via_ebgp {
                let Some(link) = net.link_between(r, from) else {
                    continue;
                };
                let iface = if link.a == *r { &link.a_iface } else { &link.b_iface };
                Route {
                    prefix: e.prefix,
                    protocol: Protocol::Ebgp,
                    admin_distance: Protocol::Ebgp.admin_distance(),
                    metric: e.as_path.len() as u32,
                    next_hops: BTreeSet::from([NextHop {
                        router: from.clone(),
                        iface: iface.clone(),
                    }]),
                }
            } else {
                let Some(next_hops) = resolve_recursive(net, tables, r, e.next_hop_ip) else {
                    continue;
                };
                Route {
                    prefix: e.prefix,
                    protocol: Protocol::Ibgp,
                    admin_distance: Protocol::Ibgp.admin_distance(),
                    metric: e.as_path.len() as u32,
                    next_hops,
                }
            };
            tables.entry(r.clone()).or_default().push(route);
        }
    }

    Ok(loc_rib
        .into_iter()
        .map(|(r, m)| (r, m.into_values().collect()))
        .collect())
}

/// Recursive next-hop resolution for iBGP: find the best non-BGP route
/// covering the next hop and inherit its forwarding next hops.
fn resolve_recursive(
    net: &Network,
    tables: &BTreeMap<String, Vec<Route>>,
    router: &str,
    next_hop_ip: Ipv4Addr,
) -> Option<BTreeSet<NextHop>> {
    let dev = &net.devices[router];
    // directly connected next hop
    for i in &dev.ifaces {
        if i.net.contains(next_hop_ip) && i.ip != next_hop_ip {
            let owner = net
                .devices
                .values()
                .find(|d| d.name != *router && d.owns_ip(next_hop_ip))?;
            return Some(BTreeSet::from([NextHop {
                router: owner.name.clone(),
                iface: i.name.clone(),
            }]));
        }
    }
    let candidates = tables.get(router)?;
    let best = candidates
        .iter()
        .filter(|r| {
            !matches!(r.protocol, Protocol::Ebgp | Protocol::Ibgp)
                && !r.prefix.is_default()
                && r.prefix.contains(next_hop_ip)
                && !r.next_hops.is_empty()
        })
        .max_by_key(|r| (r.prefix.len(), std::cmp::Reverse(r.admin_distance)))?;
    Some(best.next_hops.clone())
}
