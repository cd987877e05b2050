//! IPv4 prefix arithmetic shared by the parser, simulator and generators.

use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// An IPv4 network given by its base address and prefix length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Ipv4Net {
    addr: u32,
    len: u8,
}

impl Ipv4Net {
    pub fn new(addr: Ipv4Addr, len: u8) -> Self {
        assert!(len <= 32, "prefix length out of range");
        let raw = u32::from(addr);
        let masked = raw & mask_bits(len);
        Ipv4Net { addr: masked, len }
    }

    /// Build from an address and a dotted netmask (e.g. 255.255.255.0).
    pub fn from_addr_mask(addr: Ipv4Addr, mask: Ipv4Addr) -> Option<Self> {
        let len = mask_len(mask)?;
        Some(Ipv4Net::new(addr, len))
    }

    pub fn addr(&self) -> Ipv4Addr {
        Ipv4Addr::from(self.addr)
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn mask(&self) -> Ipv4Addr {
        Ipv4Addr::from(mask_bits(self.len))
    }

    pub fn contains(&self, ip: Ipv4Addr) -> bool {
        u32::from(ip) & mask_bits(self.len) == self.addr
    }

    pub fn contains_net(&self, other: &Ipv4Net) -> bool {
        other.len >= self.len && other.addr & mask_bits(self.len) == self.addr
    }

    pub fn overlaps(&self, other: &Ipv4Net) -> bool {
        self.contains_net(other) || other.contains_net(self)
    }

    /// Default route 0.0.0.0/0.
    pub fn default_route() -> Self {
        Ipv4Net { addr: 0, len: 0 }
    }

    pub fn is_default(&self) -> bool {
        self.len == 0
    }

    /// The n-th host address inside the network (1-based, skips the base).
    pub fn host(&self, n: u32) -> Ipv4Addr {
        Ipv4Addr::from(self.addr + n)
    }
}

impl fmt::Display for Ipv4Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for Ipv4Net {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, l) = s
            .split_once('/')
            .ok_or_else(|| format!("missing '/' in prefix {s:?}"))?;
        let addr: Ipv4Addr = a.parse().map_err(|e| format!("bad address {a:?}: {e}"))?;
        let len: u8 = l.parse().map_err(|e| format!("bad length {l:?}: {e}"))?;
        if len > 32 {
            return Err(format!("prefix length {len} out of range"));
        }
        Ok(Ipv4Net::new(addr, len))
    }
}

impl From<Ipv4Net> for String {
    fn from(n: Ipv4Net) -> String {
        n.to_string()
    }
}

impl TryFrom<String> for Ipv4Net {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

fn mask_bits(len: u8) -> u32 {
    if len == 0 {
        0
    } else {
        u32::MAX << (32 - len)
    }
}

/// Netmask to prefix length; `None` for non-contiguous masks.
pub fn mask_len(mask: Ipv4Addr) -> Option<u8> {
    let raw = u32::from(mask);
    let len = raw.leading_ones() as u8;
    (raw == mask_bits(len)).then_some(len)
}

/// Wildcard (inverse mask) match as used by OSPF network statements and ACLs.
pub fn wildcard_match(base: Ipv4Addr, wildcard: Ipv4Addr, ip: Ipv4Addr) -> bool {
    let w = u32::from(wildcard);
    (u32::from(base) & !w) == (u32::from(ip) & !w)
}
