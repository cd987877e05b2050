//! Host descriptors, stored as JSON sidecars next to the router configs.

use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::ip::Ipv4Net;

use super::ConfigError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostSpec {
    pub hostname: String,
    pub iface_ip: Ipv4Addr,
    pub mask: Ipv4Addr,
    pub gateway_router: String,
    pub gateway_ip: Ipv4Addr,
}

impl HostSpec {
    pub fn subnet(&self) -> Option<Ipv4Net> {
        Ipv4Net::from_addr_mask(self.iface_ip, self.mask)
    }
}

pub fn parse_host(text: &str) -> Result<HostSpec, ConfigError> {
    let raw: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| ConfigError::MalformedHost(format!("invalid json: {e}")))?;
    let host: HostSpec = serde_json::from_value(raw)
        .map_err(|e| ConfigError::MalformedHost(format!("bad host fields: {e}")))?;
    let subnet = host
        .subnet()
        .ok_or_else(|| ConfigError::MalformedHost(format!("non-contiguous mask {}", host.mask)))?;
    if !subnet.contains(host.gateway_ip) {
        return Err(ConfigError::MalformedHost(format!(
            "gateway {} outside host subnet {subnet}",
            host.gateway_ip
        )));
    }
    if host.hostname.is_empty() {
        return Err(ConfigError::MalformedHost("empty hostname".into()));
    }
    Ok(host)
}

pub fn render_host(host: &HostSpec) -> String {
    let mut s = serde_json::to_string_pretty(host).expect("host serializes");
    s.push('\n');
    s
}
