//! Cisco-style configuration model: parsing, rendering and editing.
//!
//! The parser is line oriented. A line without leading whitespace opens a
//! stanza; indented lines are commands of the stanza above them. Comment
//! (`!`) and blank lines are kept verbatim, attached to the stanza that
//! follows them, so a parse/render cycle is byte stable after one
//! normalization pass (trailing whitespace stripped, single trailing
//! newline).

mod host;
mod snapshot;
mod views;

pub use host::{parse_host, render_host, HostSpec};
pub use snapshot::NetworkSnapshot;
pub use views::{
    bgp, filter_set, filters, interfaces, ospf, static_routes, BgpConfig, BgpNeighbor,
    FilterEntry, FilterKind, FilterRule, FilterSet, InterfaceConfig, OspfConfig, StaticRoute,
};

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("missing hostname")]
    MissingHostname,
    #[error("duplicate hostname {0}")]
    DuplicateHostname(String),
    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("malformed host descriptor: {0}")]
    MalformedHost(String),
    #[error("io error on {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Classification of a top-level stanza, derived from its header keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StanzaKind {
    Hostname,
    Interface,
    RouterOspf,
    RouterBgp,
    StaticRoute,
    AccessList,
    PrefixList,
    RouteMap,
    DistributeListHost,
    Other,
}

impl fmt::Display for StanzaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StanzaKind::Hostname => "hostname",
            StanzaKind::Interface => "interface",
            StanzaKind::RouterOspf => "router-ospf",
            StanzaKind::RouterBgp => "router-bgp",
            StanzaKind::StaticRoute => "static-route",
            StanzaKind::AccessList => "access-list",
            StanzaKind::PrefixList => "prefix-list",
            StanzaKind::RouteMap => "route-map",
            StanzaKind::DistributeListHost => "distribute-list",
            StanzaKind::Other => "other",
        };
        f.write_str(s)
    }
}

/// One configuration line inside a stanza, stored raw for fidelity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Command {
    pub raw: String,
}

impl Command {
    pub fn new(raw: impl Into<String>) -> Self {
        Command { raw: raw.into() }
    }

    pub fn tokens(&self) -> Vec<&str> {
        self.raw.split_whitespace().collect()
    }

    /// Tokens with parameters (addresses, masks, numbers, free names)
    /// replaced by `_`, used for command-level similarity.
    pub fn keyword_path(&self) -> Vec<String> {
        self.tokens()
            .iter()
            .map(|t| {
                if is_keyword(t) {
                    t.to_string()
                } else {
                    "_".to_string()
                }
            })
            .collect()
    }

    /// Raw parameter tokens, in order.
    pub fn params(&self) -> Vec<String> {
        self.tokens()
            .iter()
            .filter(|t| !is_keyword(t))
            .map(|t| t.to_string())
            .collect()
    }
}

/// Grammar vocabulary; anything else in a command is treated as a parameter.
const KEYWORDS: &[&str] = &[
    "hostname", "interface", "ip", "address", "ospf", "cost", "shutdown", "router", "bgp",
    "network", "area", "redistribute", "static", "connected", "neighbor", "remote-as",
    "route-map", "peer-group", "next-hop-self", "mask", "route", "access-list", "prefix-list",
    "distribute-list", "permit", "deny", "in", "out", "seq", "le", "ge", "match", "host", "any",
    "standard", "extended", "metric", "no", "update-source", "description",
];

fn is_keyword(token: &str) -> bool {
    KEYWORDS.contains(&token)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stanza {
    pub kind: StanzaKind,
    /// Comment and blank lines preceding the header, kept verbatim.
    pub trivia: Vec<String>,
    pub header: String,
    pub commands: Vec<Command>,
}

impl Stanza {
    pub fn new(kind: StanzaKind, header: impl Into<String>) -> Self {
        Stanza {
            kind,
            trivia: Vec::new(),
            header: header.into(),
            commands: Vec::new(),
        }
    }

    pub fn header_tokens(&self) -> Vec<&str> {
        self.header.split_whitespace().collect()
    }

    /// Indentation used by this stanza's existing commands, falling back to
    /// a single space (the dominant Cisco convention).
    pub fn indent(&self) -> String {
        for c in &self.commands {
            let ws: String = c.raw.chars().take_while(|ch| ch.is_whitespace()).collect();
            if !ws.is_empty() {
                return ws;
            }
        }
        " ".to_string()
    }

    pub fn push_command(&mut self, body: &str) {
        let indent = self.indent();
        self.commands.push(Command::new(format!("{indent}{body}")));
    }

    pub fn has_command_with(&self, needle: &str) -> bool {
        self.commands.iter().any(|c| c.raw.trim() == needle)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouterConfig {
    pub hostname: String,
    pub stanzas: Vec<Stanza>,
    /// Trailing comment/blank lines after the last stanza.
    pub trailing: Vec<String>,
}

impl RouterConfig {
    pub fn stanzas_of(&self, kind: StanzaKind) -> impl Iterator<Item = &Stanza> {
        self.stanzas.iter().filter(move |s| s.kind == kind)
    }

    pub fn stanzas_of_mut(&mut self, kind: StanzaKind) -> impl Iterator<Item = &mut Stanza> {
        self.stanzas.iter_mut().filter(move |s| s.kind == kind)
    }

    pub fn interface(&self, name: &str) -> Option<&Stanza> {
        self.stanzas_of(StanzaKind::Interface)
            .find(|s| s.header_tokens().get(1) == Some(&name))
    }

    pub fn interface_mut(&mut self, name: &str) -> Option<&mut Stanza> {
        self.stanzas
            .iter_mut()
            .filter(|s| s.kind == StanzaKind::Interface)
            .find(|s| s.header_tokens().get(1) == Some(&name))
    }

    /// Insert a stanza after the last stanza of the same kind, or before the
    /// first route/filter stanza otherwise, keeping the conventional layout
    /// (hostname, interfaces, routers, routes, filters).
    pub fn insert_stanza(&mut self, stanza: Stanza) {
        if let Some(pos) = self
            .stanzas
            .iter()
            .rposition(|s| s.kind == stanza.kind)
        {
            self.stanzas.insert(pos + 1, stanza);
            return;
        }
        let rank = stanza_rank(stanza.kind);
        let pos = self
            .stanzas
            .iter()
            .position(|s| stanza_rank(s.kind) > rank)
            .unwrap_or(self.stanzas.len());
        self.stanzas.insert(pos, stanza);
    }
}

fn stanza_rank(kind: StanzaKind) -> u8 {
    match kind {
        StanzaKind::Hostname => 0,
        StanzaKind::Interface => 1,
        StanzaKind::RouterOspf => 2,
        StanzaKind::RouterBgp => 3,
        StanzaKind::StaticRoute => 4,
        StanzaKind::AccessList => 5,
        StanzaKind::PrefixList => 6,
        StanzaKind::RouteMap => 7,
        StanzaKind::DistributeListHost => 8,
        StanzaKind::Other => 9,
    }
}

fn classify_header(tokens: &[&str]) -> StanzaKind {
    match tokens {
        ["hostname", ..] => StanzaKind::Hostname,
        ["interface", ..] => StanzaKind::Interface,
        ["router", "ospf", ..] => StanzaKind::RouterOspf,
        ["router", "bgp", ..] => StanzaKind::RouterBgp,
        ["ip", "route", ..] => StanzaKind::StaticRoute,
        ["access-list", ..] | ["ip", "access-list", ..] => StanzaKind::AccessList,
        ["ip", "prefix-list", ..] => StanzaKind::PrefixList,
        ["route-map", ..] => StanzaKind::RouteMap,
        ["distribute-list", ..] => StanzaKind::DistributeListHost,
        _ => StanzaKind::Other,
    }
}

/// Parse one configuration file into its stanza structure.
pub fn parse_config(text: &str) -> Result<RouterConfig, ConfigError> {
    let mut stanzas: Vec<Stanza> = Vec::new();
    let mut trivia: Vec<String> = Vec::new();
    let mut hostname: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end();
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('!') {
            trivia.push(line.to_string());
            continue;
        }
        let indented = line.len() != trimmed.len();
        if indented {
            match stanzas.last_mut() {
                Some(st) => {
                    validate_command(st.kind, trimmed, line_no)?;
                    st.commands.push(Command::new(line));
                    if !trivia.is_empty() {
                        // comments inside a stanza stay with the upcoming
                        // sibling; fold them into the command stream instead
                        for t in trivia.drain(..) {
                            let pos = st.commands.len() - 1;
                            st.commands.insert(pos, Command::new(t));
                        }
                    }
                }
                None => {
                    return Err(ConfigError::MalformedLine {
                        line: line_no,
                        reason: "indented line before any stanza".into(),
                    })
                }
            }
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        let kind = classify_header(&tokens);
        validate_header(kind, &tokens, line_no)?;
        if kind == StanzaKind::Hostname {
            let name = tokens[1].to_string();
            if hostname.is_some() {
                return Err(ConfigError::DuplicateHostname(name));
            }
            hostname = Some(name);
        }
        let mut st = Stanza::new(kind, line);
        st.trivia = std::mem::take(&mut trivia);
        stanzas.push(st);
    }

    let hostname = hostname.ok_or(ConfigError::MissingHostname)?;
    Ok(RouterConfig {
        hostname,
        stanzas,
        trailing: trivia,
    })
}

fn validate_header(kind: StanzaKind, tokens: &[&str], line: usize) -> Result<(), ConfigError> {
    let err = |reason: &str| ConfigError::MalformedLine {
        line,
        reason: reason.to_string(),
    };
    match kind {
        StanzaKind::Hostname => {
            if tokens.len() != 2 {
                return Err(err("hostname expects exactly one name"));
            }
        }
        StanzaKind::Interface => {
            if tokens.len() != 2 {
                return Err(err("interface expects exactly one name"));
            }
        }
        StanzaKind::RouterOspf => {
            if let Some(pid) = tokens.get(2) {
                pid.parse::<u32>()
                    .map_err(|_| err("router ospf process id must be numeric"))?;
            }
        }
        StanzaKind::RouterBgp => {
            let asn = tokens.get(2).ok_or_else(|| err("router bgp needs an AS number"))?;
            let v: u64 = asn.parse().map_err(|_| err("AS number must be numeric"))?;
            if v == 0 || v > u32::MAX as u64 {
                return Err(err("AS number out of range"));
            }
        }
        StanzaKind::StaticRoute => {
            // ip route PREFIX MASK NEXTHOP
            if tokens.len() < 5 {
                return Err(err("ip route expects prefix, mask and next hop"));
            }
            parse_ip(tokens[2]).ok_or_else(|| err("bad static route prefix"))?;
            parse_ip(tokens[3]).ok_or_else(|| err("bad static route mask"))?;
            parse_ip(tokens[4]).ok_or_else(|| err("bad static route next hop"))?;
        }
        StanzaKind::AccessList | StanzaKind::PrefixList | StanzaKind::RouteMap
        | StanzaKind::DistributeListHost | StanzaKind::Other => {}
    }
    Ok(())
}

fn validate_command(kind: StanzaKind, trimmed: &str, line: usize) -> Result<(), ConfigError> {
    let err = |reason: String| ConfigError::MalformedLine { line, reason };
    let tokens: Vec<&str> = trimmed.split_whitespace().collect();
    match kind {
        StanzaKind::Interface => match tokens.as_slice() {
            ["ip", "address", a, m] => {
                let addr = parse_ip(a).ok_or_else(|| err(format!("bad address {a}")))?;
                let mask = parse_ip(m).ok_or_else(|| err(format!("bad mask {m}")))?;
                crate::ip::Ipv4Net::from_addr_mask(addr, mask)
                    .ok_or_else(|| err(format!("non-contiguous mask {m}")))?;
            }
            ["ip", "address", ..] => return Err(err("ip address expects addr and mask".into())),
            ["ip", "ospf", "cost", c] => {
                let v: u32 = c
                    .parse()
                    .map_err(|_| err(format!("ospf cost {c} not numeric")))?;
                if !(1..=65535).contains(&v) {
                    return Err(err(format!("ospf cost {v} out of [1, 65535]")));
                }
            }
            ["ip", "ospf", "cost"] => return Err(err("ip ospf cost expects a value".into())),
            _ => {}
        },
        StanzaKind::RouterOspf => match tokens.as_slice() {
            ["network", a, w, "area", ar] => {
                parse_ip(a).ok_or_else(|| err(format!("bad network base {a}")))?;
                parse_ip(w).ok_or_else(|| err(format!("bad wildcard {w}")))?;
                ar.parse::<u32>()
                    .map_err(|_| err(format!("bad area {ar}")))?;
            }
            ["network", ..] => {
                return Err(err("network expects base, wildcard and area".into()))
            }
            _ => {}
        },
        StanzaKind::RouterBgp => match tokens.as_slice() {
            ["neighbor", _peer, "remote-as", asn] => {
                asn.parse::<u32>()
                    .map_err(|_| err(format!("bad remote-as {asn}")))?;
            }
            ["network", a, "mask", m] => {
                parse_ip(a).ok_or_else(|| err(format!("bad network {a}")))?;
                parse_ip(m).ok_or_else(|| err(format!("bad mask {m}")))?;
            }
            _ => {}
        },
        _ => {}
    }
    Ok(())
}

pub(crate) fn parse_ip(s: &str) -> Option<std::net::Ipv4Addr> {
    s.parse().ok()
}

/// Render a configuration back to text. Untouched stanzas reproduce their
/// source bytes; freshly inserted lines carry the stanza's indentation.
pub fn render_config(cfg: &RouterConfig) -> String {
    let mut out = String::new();
    for st in &cfg.stanzas {
        for t in &st.trivia {
            out.push_str(t);
            out.push('\n');
        }
        out.push_str(&st.header);
        out.push('\n');
        for c in &st.commands {
            out.push_str(&c.raw);
            out.push('\n');
        }
    }
    for t in &cfg.trailing {
        out.push_str(t);
        out.push('\n');
    }
    out
}

/// Stanza-kind frequency vector over the fixed kind universe.
pub fn stanza_kind_counts(cfg: &RouterConfig) -> Vec<(StanzaKind, usize)> {
    let mut kinds: Vec<StanzaKind> = cfg.stanzas.iter().map(|s| s.kind).collect();
    kinds.sort();
    let set: BTreeSet<StanzaKind> = kinds.iter().copied().collect();
    set.into_iter()
        .map(|k| (k, kinds.iter().filter(|x| **x == k).count()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI: &str = "hostname r1\ninterface eth0\n ip address 10.0.1.1 255.255.255.0\n";

    #[test]
    fn parses_minimal_config() {
        let cfg = parse_config(MINI).unwrap();
        assert_eq!(cfg.hostname, "r1");
        assert_eq!(cfg.stanzas.len(), 2);
        let iface = cfg.interface("eth0").unwrap();
        assert_eq!(iface.commands.len(), 1);
        let v = views::interfaces(&cfg);
        assert_eq!(v[0].subnet().unwrap().to_string(), "10.0.1.0/24");
    }

    #[test]
    fn empty_input_is_missing_hostname() {
        assert_eq!(parse_config("").unwrap_err(), ConfigError::MissingHostname);
    }

    #[test]
    fn duplicate_hostname_rejected() {
        let text = "hostname a\nhostname b\n";
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::DuplicateHostname(_)
        ));
    }

    #[test]
    fn peer_group_structure_survives() {
        let text = "hostname edge\nrouter bgp 100\n neighbor ISP1 peer-group\n neighbor ISP1 remote-as 714\n neighbor ISP1 route-map ISP-IMP in\n neighbor 17.56.7.8 peer-group ISP1\n neighbor 17.56.8.9 peer-group ISP1\n";
        let cfg = parse_config(text).unwrap();
        let bgp = views::bgp(&cfg).unwrap();
        assert_eq!(bgp.asn, 100);
        let grp = bgp.peer_groups.get("ISP1").unwrap();
        assert_eq!(grp.members.len(), 2);
        assert_eq!(grp.remote_as, Some(714));
        assert_eq!(grp.route_map_in.as_deref(), Some("ISP-IMP"));
    }

    #[test]
    fn malformed_interface_line_reports_line_number() {
        let text = "hostname r1\ninterface eth0\n ip address 10.0.1.1\n";
        match parse_config(text).unwrap_err() {
            ConfigError::MalformedLine { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_lines_survive_in_other_stanzas() {
        let text = "hostname r1\nbanner motd welcome\ninterface eth0\n ip address 10.0.1.1 255.255.255.0\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.stanzas[1].kind, StanzaKind::Other);
        assert!(render_config(&cfg).contains("banner motd welcome"));
    }

    #[test]
    fn render_round_trip_is_idempotent() {
        let messy = "hostname r9\n!\n! uplink\ninterface eth0\n ip address 10.9.0.1 255.255.255.252\n ip ospf cost 5\n\nrouter ospf 1\n network 10.9.0.0 0.0.0.3 area 0\n";
        let once = render_config(&parse_config(messy).unwrap());
        let twice = render_config(&parse_config(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn reordered_stanzas_preserved() {
        let text = "router ospf 1\n network 10.0.0.0 0.0.0.255 area 0\nhostname r1\ninterface eth0\n ip address 10.0.0.1 255.255.255.0\n";
        let cfg = parse_config(text).unwrap();
        let kinds: Vec<StanzaKind> = cfg.stanzas.iter().map(|s| s.kind).collect();
        assert_eq!(
            kinds,
            vec![StanzaKind::RouterOspf, StanzaKind::Hostname, StanzaKind::Interface]
        );
        let rendered = render_config(&cfg);
        assert!(rendered.starts_with("router ospf 1\n"));
    }

    #[test]
    fn inserted_command_is_only_diff() {
        let cfg = parse_config(MINI).unwrap();
        let before = render_config(&cfg);
        let mut edited = cfg.clone();
        edited
            .interface_mut("eth0")
            .unwrap()
            .push_command("ip ospf cost 10");
        let after = render_config(&edited);
        let added: Vec<&str> = after
            .lines()
            .filter(|l| !before.contains(l.trim_end()))
            .collect();
        assert_eq!(added, vec![" ip ospf cost 10"]);
    }
}
