//! Host-to-host path enumeration over computed FIBs.

use std::collections::{BTreeMap, BTreeSet};

use super::{Fib, Network};

pub const MAX_HOPS: usize = 64;
pub const MAX_BRANCHES: usize = 256;

/// Enumerated paths for one ordered host pair, or the failure mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathResult {
    Paths(BTreeSet<Vec<String>>),
    NoRoute { at: String },
    LoopDetected { at: String },
}

impl PathResult {
    pub fn paths(&self) -> Option<&BTreeSet<Vec<String>>> {
        match self {
            PathResult::Paths(p) => Some(p),
            _ => None,
        }
    }
}

/// All host-to-host routing paths: the data plane of the snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataPlane {
    pub paths: BTreeMap<(String, String), PathResult>,
}

impl DataPlane {
    /// Successful paths for a pair, empty set when the pair failed.
    pub fn ok_paths(&self, src: &str, dst: &str) -> BTreeSet<Vec<String>> {
        self.paths
            .get(&(src.to_string(), dst.to_string()))
            .and_then(|r| r.paths().cloned())
            .unwrap_or_default()
    }
}

/// Follow every ECMP next hop from the source host's gateway to the
/// destination host, collecting complete paths (h_s, r_s, ..., r_d, h_d).
pub fn traceroute(
    net: &Network,
    fibs: &BTreeMap<String, Fib>,
    src_host: &str,
    dst_host: &str,
) -> PathResult {
    let (Some(src), Some(dst)) = (net.hosts.get(src_host), net.hosts.get(dst_host)) else {
        return PathResult::NoRoute {
            at: src_host.to_string(),
        };
    };
    let dst_ip = dst.iface_ip;
    let mut done: BTreeSet<Vec<String>> = BTreeSet::new();
    let mut frontier: Vec<Vec<String>> = vec![vec![src_host.to_string(), src.gateway_router.clone()]];
    while let Some(path) = frontier.pop() {
        if path.len() > MAX_HOPS {
            return PathResult::LoopDetected {
                at: path.last().unwrap().clone(),
            };
        }
        if done.len() + frontier.len() > MAX_BRANCHES {
            return PathResult::LoopDetected {
                at: path.last().unwrap().clone(),
            };
        }
        let here = path.last().unwrap().clone();
        // delivery: destination host hangs off this router
        if here == dst.gateway_router {
            let dev = &net.devices[&here];
            if dev.ifaces.iter().any(|i| i.net.contains(dst_ip)) {
                let mut complete = path.clone();
                complete.push(dst_host.to_string());
                done.insert(complete);
                continue;
            }
        }
        let Some(fib) = fibs.get(&here) else {
            return PathResult::NoRoute { at: here };
        };
        let Some(route) = fib.lookup(dst_ip) else {
            return PathResult::NoRoute { at: here };
        };
        if route.next_hops.is_empty() {
            // connected route at a router that is not the gateway
            return PathResult::NoRoute { at: here };
        }
        for nh in &route.next_hops {
            if path.contains(&nh.router) {
                return PathResult::LoopDetected { at: nh.router.clone() };
            }
            let mut next = path.clone();
            next.push(nh.router.clone());
            frontier.push(next);
        }
    }
    if done.is_empty() {
        PathResult::NoRoute {
            at: src.gateway_router.clone(),
        }
    } else {
        PathResult::Paths(done)
    }
}

/// Traceroute over all ordered host pairs. Per-pair failures are recorded,
/// not fatal.
pub fn dataplane(net: &Network, fibs: &BTreeMap<String, Fib>) -> DataPlane {
    let mut dp = DataPlane::default();
    for s in net.hosts.keys() {
        for d in net.hosts.keys() {
            if s == d {
                continue;
            }
            dp.paths
                .insert((s.clone(), d.clone()), traceroute(net, fibs, s, d));
        }
    }
    dp
}
