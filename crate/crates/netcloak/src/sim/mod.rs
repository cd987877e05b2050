//! Control-plane simulator: OSPF shortest paths with ECMP, simplified BGP,
//! static routes, FIB construction and host-to-host traceroute. Serves as
//! the verification oracle for repair and functional equivalence.

mod bgp;
mod ospf;
mod trace;

pub use bgp::{compute_bgp, discover_sessions, BgpRibEntry, Session};
pub use ospf::{compute_ospf, spf, ScostTable, ScostTableEntry};
pub use trace::{dataplane, traceroute, DataPlane, PathResult};

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{self, FilterSet, HostSpec, NetworkSnapshot};
use crate::ip::{wildcard_match, Ipv4Net};
use crate::topology::TopologyError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("bgp session {local}->{peer_ip}: remote-as {configured} but peer is AS {actual}")]
    SessionMismatch {
        local: String,
        peer_ip: Ipv4Addr,
        configured: u32,
        actual: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Protocol {
    Connected,
    Static,
    Ebgp,
    Ospf,
    OspfExternal,
    Ibgp,
}

impl Protocol {
    pub fn admin_distance(&self) -> u32 {
        match self {
            Protocol::Connected => 0,
            Protocol::Static => 1,
            Protocol::Ebgp => 20,
            Protocol::Ospf => 110,
            Protocol::OspfExternal => 110,
            Protocol::Ibgp => 200,
        }
    }
}

/// Forwarding next hop: adjacent router reached through a local interface.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NextHop {
    pub router: String,
    pub iface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    pub prefix: Ipv4Net,
    pub protocol: Protocol,
    pub admin_distance: u32,
    pub metric: u32,
    /// Empty for locally connected prefixes.
    pub next_hops: BTreeSet<NextHop>,
}

/// Best-route table of one router; lookup is longest-prefix-match with the
/// default route as the final fallback.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Fib {
    pub router: String,
    pub routes: BTreeMap<Ipv4Net, Route>,
}

impl Fib {
    pub fn lookup(&self, ip: Ipv4Addr) -> Option<&Route> {
        self.routes
            .values()
            .filter(|r| r.prefix.contains(ip))
            .max_by_key(|r| r.prefix.len())
    }
}

/// One point-to-point link derived from a shared subnet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: String,
    pub a_iface: String,
    pub a_ip: Ipv4Addr,
    pub b: String,
    pub b_iface: String,
    pub b_ip: Ipv4Addr,
    pub subnet: Ipv4Net,
}

#[derive(Debug, Clone)]
pub struct IfaceState {
    pub name: String,
    pub ip: Ipv4Addr,
    pub net: Ipv4Net,
    pub ospf_enabled: bool,
    pub ospf_cost: u32,
}

#[derive(Debug, Clone)]
pub struct Device {
    pub name: String,
    pub ifaces: Vec<IfaceState>,
    pub asn: u32,
    pub ospf: Option<config::OspfConfig>,
    pub bgp: Option<config::BgpConfig>,
    pub statics: Vec<config::StaticRoute>,
    pub filters: FilterSet,
}

impl Device {
    pub fn iface_by_subnet(&self, net: &Ipv4Net) -> Option<&IfaceState> {
        self.ifaces.iter().find(|i| i.net == *net)
    }

    pub fn owns_ip(&self, ip: Ipv4Addr) -> bool {
        self.ifaces.iter().any(|i| i.ip == ip)
    }

    /// Stable identity address: lowest OSPF-enabled interface IP, falling
    /// back to the lowest interface IP. Used as the iBGP next-hop-self
    /// address and the BGP tie-break id.
    pub fn router_ip(&self) -> Option<Ipv4Addr> {
        self.ifaces
            .iter()
            .filter(|i| i.ospf_enabled)
            .map(|i| i.ip)
            .min()
            .or_else(|| self.ifaces.iter().map(|i| i.ip).min())
    }
}

/// Immutable network model derived from a snapshot.
#[derive(Debug, Clone)]
pub struct Network {
    pub devices: BTreeMap<String, Device>,
    pub links: Vec<Link>,
    pub as_members: BTreeMap<u32, BTreeSet<String>>,
    pub hosts: BTreeMap<String, HostSpec>,
}

pub const DEFAULT_OSPF_COST: u32 = 1;
pub const REDISTRIBUTE_METRIC: u32 = 20;

impl Network {
    pub fn build(snapshot: &NetworkSnapshot) -> Result<Network, SimError> {
        let mut devices = BTreeMap::new();
        for (name, cfg) in &snapshot.routers {
            let ospf = config::ospf(cfg);
            let bgp = config::bgp(cfg);
            let mut ifaces = Vec::new();
            for ic in config::interfaces(cfg) {
                if ic.shutdown {
                    continue;
                }
                let (Some(ip), Some(net)) = (ic.ip, ic.subnet()) else {
                    continue;
                };
                let ospf_enabled = ospf
                    .as_ref()
                    .map(|o| {
                        o.networks
                            .iter()
                            .any(|(base, wc, _)| wildcard_match(*base, *wc, ip))
                    })
                    .unwrap_or(false);
                ifaces.push(IfaceState {
                    name: ic.name.clone(),
                    ip,
                    net,
                    ospf_enabled,
                    ospf_cost: ic.ospf_cost.unwrap_or(DEFAULT_OSPF_COST),
                });
            }
            let asn = bgp.as_ref().map(|b| b.asn).unwrap_or(0);
            devices.insert(
                name.clone(),
                Device {
                    name: name.clone(),
                    ifaces,
                    asn,
                    ospf,
                    bgp,
                    statics: config::static_routes(cfg),
                    filters: config::filter_set(cfg),
                },
            );
        }

        // links from shared subnets (point-to-point only)
        let mut owners: BTreeMap<Ipv4Net, Vec<(String, String, Ipv4Addr)>> = BTreeMap::new();
        for dev in devices.values() {
            for i in &dev.ifaces {
                owners
                    .entry(i.net)
                    .or_default()
                    .push((dev.name.clone(), i.name.clone(), i.ip));
            }
        }
        let mut links = Vec::new();
        for (net, own) in &owners {
            if own.len() > 2 {
                return Err(TopologyError::AmbiguousSubnet(net.to_string(), own.len()).into());
            }
            if own.len() == 2 {
                let (a, b) = (&own[0], &own[1]);
                links.push(Link {
                    a: a.0.clone(),
                    a_iface: a.1.clone(),
                    a_ip: a.2,
                    b: b.0.clone(),
                    b_iface: b.1.clone(),
                    b_ip: b.2,
                    subnet: *net,
                });
            }
        }

        let mut as_members: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
        for dev in devices.values() {
            as_members.entry(dev.asn).or_default().insert(dev.name.clone());
        }

        Ok(Network {
            devices,
            links,
            as_members,
            hosts: snapshot.hosts.clone(),
        })
    }

    /// Links with both endpoints in the given AS and OSPF enabled on both
    /// interfaces.
    pub fn ospf_links(&self, asn: u32) -> Vec<&Link> {
        self.links
            .iter()
            .filter(|l| {
                let (Some(da), Some(db)) = (self.devices.get(&l.a), self.devices.get(&l.b)) else {
                    return false;
                };
                da.asn == asn
                    && db.asn == asn
                    && da.iface_by_subnet(&l.subnet).map(|i| i.ospf_enabled).unwrap_or(false)
                    && db.iface_by_subnet(&l.subnet).map(|i| i.ospf_enabled).unwrap_or(false)
            })
            .collect()
    }

    /// Directed OSPF cost of the link from `from`, as configured on its
    /// outgoing interface.
    pub fn link_cost(&self, link: &Link, from: &str) -> u32 {
        let dev = &self.devices[from];
        let iface = if link.a == from { &link.a_iface } else { &link.b_iface };
        dev.ifaces
            .iter()
            .find(|i| i.name == *iface)
            .map(|i| i.ospf_cost)
            .unwrap_or(DEFAULT_OSPF_COST)
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&Link> {
        self.links
            .iter()
            .find(|l| (l.a == a && l.b == b) || (l.a == b && l.b == a))
    }

    /// Router owning the given interface address.
    pub fn owner_of_ip(&self, ip: Ipv4Addr) -> Option<&Device> {
        self.devices.values().find(|d| d.owns_ip(ip))
    }

    /// Routers holding at least one eBGP session.
    pub fn asbrs(&self) -> BTreeSet<String> {
        self.devices
            .values()
            .filter(|d| {
                d.bgp
                    .as_ref()
                    .map(|b| {
                        b.neighbors
                            .iter()
                            .any(|n| n.remote_as != 0 && n.remote_as != b.asn)
                    })
                    .unwrap_or(false)
            })
            .map(|d| d.name.clone())
            .collect()
    }
}

/// Full simulation result: per-router FIBs plus per-AS shortest path tables.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub fibs: BTreeMap<String, Fib>,
    pub scost: BTreeMap<u32, ScostTable>,
    pub bgp_rib: BTreeMap<String, Vec<BgpRibEntry>>,
}

/// Compute FIBs for every router: connected, static, OSPF (with ECMP),
/// BGP and redistributed externals, merged by admin distance then metric.
pub fn compute_fibs(net: &Network) -> Result<Simulation, SimError> {
    let mut tables: BTreeMap<String, Vec<Route>> = BTreeMap::new();
    for (name, dev) in &net.devices {
        let mut routes = Vec::new();
        for i in &dev.ifaces {
            routes.push(Route {
                prefix: i.net,
                protocol: Protocol::Connected,
                admin_distance: 0,
                metric: 0,
                next_hops: BTreeSet::new(),
            });
        }
        for s in &dev.statics {
            if let Some(nh) = resolve_static_next_hop(net, dev, s.next_hop) {
                routes.push(Route {
                    prefix: s.prefix,
                    protocol: Protocol::Static,
                    admin_distance: 1,
                    metric: 0,
                    next_hops: BTreeSet::from([nh]),
                });
            }
        }
        tables.insert(name.clone(), routes);
    }

    // OSPF per AS
    let mut scost_tables = BTreeMap::new();
    for asn in net.as_members.keys().copied().collect::<Vec<u32>>() {
        let table = compute_ospf(net, asn);
        ospf::install_ospf_routes(net, asn, &table, &mut tables);
        scost_tables.insert(asn, table);
    }

    // BGP fixpoint (needs IGP tables for iBGP resolution)
    let bgp_rib = compute_bgp(net, &scost_tables, &mut tables)?;

    // externals redistributed into OSPF (static and bgp sources)
    ospf::install_ospf_externals(net, &scost_tables, &bgp_rib, &mut tables);

    let mut fibs = BTreeMap::new();
    for (name, routes) in tables {
        let mut best: BTreeMap<Ipv4Net, Route> = BTreeMap::new();
        for r in routes {
            match best.get_mut(&r.prefix) {
                None => {
                    best.insert(r.prefix, r);
                }
                Some(cur) => {
                    let cand = (r.admin_distance, r.metric);
                    let have = (cur.admin_distance, cur.metric);
                    if cand < have {
                        *cur = r;
                    } else if cand == have && cur.protocol == r.protocol {
                        cur.next_hops.extend(r.next_hops);
                    }
                }
            }
        }
        fibs.insert(name.clone(), Fib { router: name, routes: best });
    }
    Ok(Simulation {
        fibs,
        scost: scost_tables,
        bgp_rib,
    })
}

fn resolve_static_next_hop(net: &Network, dev: &Device, nh_ip: Ipv4Addr) -> Option<NextHop> {
    for i in &dev.ifaces {
        if i.net.contains(nh_ip) && i.ip != nh_ip {
            let router = net
                .devices
                .values()
                .find(|d| d.name != dev.name && d.owns_ip(nh_ip))
                .map(|d| d.name.clone())?;
            return Some(NextHop {
                router,
                iface: i.name.clone(),
            });
        }
    }
    None
}

/// Serialize FIBs sorted by router then prefix (repair diffs, golden tests).
pub fn fib_dump(fibs: &BTreeMap<String, Fib>) -> String {
    let mut out: BTreeMap<&String, BTreeMap<String, &Route>> = BTreeMap::new();
    for (router, fib) in fibs {
        let entry = out.entry(router).or_default();
        for (p, r) in &fib.routes {
            entry.insert(p.to_string(), r);
        }
    }
    let mut s = serde_json::to_string_pretty(&out).expect("fib serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn snap(configs: &[&str]) -> NetworkSnapshot {
        let mut s = NetworkSnapshot::new();
        for c in configs {
            s.add_router(parse_config(c).unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn admin_distance_ladder() {
        assert!(Protocol::Static.admin_distance() < Protocol::Ospf.admin_distance());
        assert!(Protocol::Ebgp.admin_distance() < Protocol::Ospf.admin_distance());
        assert!(Protocol::Ospf.admin_distance() < Protocol::Ibgp.admin_distance());
    }

    #[test]
    fn connected_and_static_fib() {
        let r1 = "hostname r1\ninterface eth0\n ip address 10.0.12.1 255.255.255.252\nip route 10.9.9.0 255.255.255.0 10.0.12.2\n";
        let r2 = "hostname r2\ninterface eth0\n ip address 10.0.12.2 255.255.255.252\n";
        let net = Network::build(&snap(&[r1, r2])).unwrap();
        assert_eq!(net.links.len(), 1);
        let sim = compute_fibs(&net).unwrap();
        let fib = &sim.fibs["r1"];
        let static_route = fib.lookup("10.9.9.7".parse().unwrap()).unwrap();
        assert_eq!(static_route.protocol, Protocol::Static);
        assert_eq!(static_route.next_hops.iter().next().unwrap().router, "r2");
    }

    #[test]
    fn lpm_prefers_longer_match() {
        let r1 = "hostname r1\ninterface eth0\n ip address 10.0.12.1 255.255.255.252\nip route 10.0.0.0 255.0.0.0 10.0.12.2\nip route 10.1.0.0 255.255.0.0 10.0.12.2\n";
        let r2 = "hostname r2\ninterface eth0\n ip address 10.0.12.2 255.255.255.252\n";
        let net = Network::build(&snap(&[r1, r2])).unwrap();
        let sim = compute_fibs(&net).unwrap();
        let fib = &sim.fibs["r1"];
        let hit = fib.lookup("10.1.2.3".parse().unwrap()).unwrap();
        assert_eq!(hit.prefix.to_string(), "10.1.0.0/16");
        let fallback = fib.lookup("10.200.0.1".parse().unwrap()).unwrap();
        assert_eq!(fallback.prefix.to_string(), "10.0.0.0/8");
    }
}
