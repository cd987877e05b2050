//! Snapshot assembly: a directory of router configs plus host descriptors.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{host, parse_config, render_config, ConfigError, HostSpec, RouterConfig};

/// A parsed network snapshot: the configuration half plus host sidecars.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSnapshot {
    pub routers: BTreeMap<String, RouterConfig>,
    pub hosts: BTreeMap<String, HostSpec>,
}

impl NetworkSnapshot {
    pub fn new() -> Self {
        NetworkSnapshot {
            routers: BTreeMap::new(),
            hosts: BTreeMap::new(),
        }
    }

    pub fn add_router(&mut self, cfg: RouterConfig) -> Result<(), ConfigError> {
        if self.routers.contains_key(&cfg.hostname) {
            return Err(ConfigError::DuplicateHostname(cfg.hostname));
        }
        self.routers.insert(cfg.hostname.clone(), cfg);
        Ok(())
    }

    pub fn add_host(&mut self, spec: HostSpec) -> Result<(), ConfigError> {
        if !self.routers.contains_key(&spec.gateway_router) {
            return Err(ConfigError::MalformedHost(format!(
                "host {} references unknown gateway router {}",
                spec.hostname, spec.gateway_router
            )));
        }
        if self.hosts.contains_key(&spec.hostname) || self.routers.contains_key(&spec.hostname) {
            return Err(ConfigError::DuplicateHostname(spec.hostname));
        }
        self.hosts.insert(spec.hostname.clone(), spec);
        Ok(())
    }

    /// Load `<dir>/configs/*.cfg` and `<dir>/hosts/*.json`, in sorted file
    /// order so the result is independent of directory enumeration.
    pub fn load(dir: &Path) -> Result<Self, ConfigError> {
        let mut snap = NetworkSnapshot::new();
        let configs = dir.join("configs");
        let mut cfg_files = list_files(&configs, "cfg")?;
        cfg_files.sort();
        for f in cfg_files {
            let text = fs::read_to_string(&f).map_err(|e| ConfigError::Io {
                path: f.display().to_string(),
                msg: e.to_string(),
            })?;
            snap.add_router(parse_config(&text)?)?;
        }
        let hosts = dir.join("hosts");
        if hosts.is_dir() {
            let mut host_files = list_files(&hosts, "json")?;
            host_files.sort();
            for f in host_files {
                let text = fs::read_to_string(&f).map_err(|e| ConfigError::Io {
                    path: f.display().to_string(),
                    msg: e.to_string(),
                })?;
                snap.add_host(host::parse_host(&text)?)?;
            }
        }
        Ok(snap)
    }

    /// Write the snapshot mirroring the input layout.
    pub fn save(&self, dir: &Path) -> Result<(), ConfigError> {
        let io_err = |p: &Path, e: std::io::Error| ConfigError::Io {
            path: p.display().to_string(),
            msg: e.to_string(),
        };
        let configs = dir.join("configs");
        fs::create_dir_all(&configs).map_err(|e| io_err(&configs, e))?;
        for (name, cfg) in &self.routers {
            let p = configs.join(format!("{name}.cfg"));
            fs::write(&p, render_config(cfg)).map_err(|e| io_err(&p, e))?;
        }
        let hosts = dir.join("hosts");
        fs::create_dir_all(&hosts).map_err(|e| io_err(&hosts, e))?;
        for (name, spec) in &self.hosts {
            let p = hosts.join(format!("{name}.json"));
            fs::write(&p, host::render_host(spec)).map_err(|e| io_err(&p, e))?;
        }
        Ok(())
    }

    pub fn hosts_of_router(&self, router: &str) -> Vec<&HostSpec> {
        self.hosts
            .values()
            .filter(|h| h.gateway_router == router)
            .collect()
    }
}

impl Default for NetworkSnapshot {
    fn default() -> Self {
        Self::new()
    }
}

fn list_files(dir: &Path, ext: &str) -> Result<Vec<std::path::PathBuf>, ConfigError> {
    let rd = fs::read_dir(dir).map_err(|e| ConfigError::Io {
        path: dir.display().to_string(),
        msg: e.to_string(),
    })?;
    let mut out = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|e| ConfigError::Io {
            path: dir.display().to_string(),
            msg: e.to_string(),
        })?;
        let p = entry.path();
        if p.extension().map(|x| x == ext).unwrap_or(false) {
            out.push(p);
        }
    }
    Ok(out)
}
