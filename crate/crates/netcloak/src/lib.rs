//! Network configuration anonymization through topology expansion.
//!
//! The pipeline parses a snapshot of Cisco-style configurations, expands the
//! topology with synthetic routers and hosts (replica, sample-connect or
//! reference-graph embedding), enforces k-degree-mapping anonymity,
//! generates style-mimicking configurations for the fake devices, and
//! repairs routing so every original forwarding path survives.

pub mod anonymize;
pub mod config;
pub mod confgen;
pub mod expansion;
pub mod ip;
pub mod pipeline;
pub mod repair;
pub mod sim;
pub mod topology;
