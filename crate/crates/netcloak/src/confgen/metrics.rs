//! Configuration similarity and path anonymity metrics.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::config::{RouterConfig, StanzaKind};
use crate::sim::DataPlane;

pub const DEFAULT_WEIGHTS: SimilarityWeights = SimilarityWeights {
    stanza: 0.2,
    cmd: 0.5,
    order: 0.3,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimilarityWeights {
    pub stanza: f64,
    pub cmd: f64,
    pub order: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    pub sim_stanza: f64,
    pub sim_cmd: f64,
    pub sim_order: f64,
    pub overall: f64,
    pub weights: SimilarityWeights,
    /// Real config the maximum was achieved against.
    pub best_match: String,
}

/// Cosine similarity of stanza-kind frequency vectors.
pub fn sim_stanza(a: &RouterConfig, b: &RouterConfig) -> f64 {
    let count = |cfg: &RouterConfig| {
        let mut m: BTreeMap<StanzaKind, f64> = BTreeMap::new();
        for s in &cfg.stanzas {
            *m.entry(s.kind).or_insert(0.0) += 1.0;
        }
        m
    };
    let (va, vb) = (count(a), count(b));
    let kinds: BTreeSet<&StanzaKind> = va.keys().chain(vb.keys()).collect();
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for k in kinds {
        let x = va.get(k).copied().unwrap_or(0.0);
        let y = vb.get(k).copied().unwrap_or(0.0);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return if na == nb { 1.0 } else { 0.0 };
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Parameter-stripped command multiset of one stanza, header included.
fn command_set(cfg: &RouterConfig, idx: usize) -> BTreeSet<String> {
    let st = &cfg.stanzas[idx];
    let mut set = BTreeSet::new();
    let strip = |raw: &str| crate::config::Command::new(raw).keyword_path().join(" ");
    set.insert(strip(&st.header));
    for c in &st.commands {
        let t = c.raw.trim();
        if t.is_empty() || t.starts_with('!') {
            continue;
        }
        set.insert(strip(t));
    }
    set
}

/// Mean Jaccard similarity of commands over stanzas aligned by kind and
/// position.
pub fn sim_cmd(a: &RouterConfig, b: &RouterConfig) -> f64 {
    let by_kind = |cfg: &RouterConfig| {
        let mut m: BTreeMap<StanzaKind, Vec<usize>> = BTreeMap::new();
        for (i, s) in cfg.stanzas.iter().enumerate() {
            m.entry(s.kind).or_default().push(i);
        }
        m
    };
    let (ka, kb) = (by_kind(a), by_kind(b));
    let kinds: BTreeSet<StanzaKind> = ka.keys().chain(kb.keys()).copied().collect();
    let mut total_slots = 0usize;
    let mut score = 0.0;
    for k in kinds {
        let ia = ka.get(&k).cloned().unwrap_or_default();
        let ib = kb.get(&k).cloned().unwrap_or_default();
        let slots = ia.len().max(ib.len());
        total_slots += slots;
        for i in 0..ia.len().min(ib.len()) {
            let sa = command_set(a, ia[i]);
            let sb = command_set(b, ib[i]);
            let inter = sa.intersection(&sb).count() as f64;
            let union = sa.union(&sb).count() as f64;
            score += if union == 0.0 { 1.0 } else { inter / union };
        }
    }
    if total_slots == 0 {
        return 1.0;
    }
    score / total_slots as f64
}

/// Stanza positional-order agreement: over every pair of stanza kinds both
/// configs contain, do the first occurrences appear in the same relative
/// order?
pub fn sim_order(a: &RouterConfig, b: &RouterConfig) -> f64 {
    let firsts = |cfg: &RouterConfig| {
        let mut m: BTreeMap<StanzaKind, usize> = BTreeMap::new();
        for (i, s) in cfg.stanzas.iter().enumerate() {
            m.entry(s.kind).or_insert(i);
        }
        m
    };
    let (fa, fb) = (firsts(a), firsts(b));
    let common: Vec<StanzaKind> = fa.keys().filter(|k| fb.contains_key(k)).copied().collect();
    if common.len() < 2 {
        return 1.0;
    }
    let mut agree = 0usize;
    let mut total = 0usize;
    for i in 0..common.len() {
        for j in (i + 1)..common.len() {
            let (x, y) = (common[i], common[j]);
            total += 1;
            if (fa[&x] < fa[&y]) == (fb[&x] < fb[&y]) {
                agree += 1;
            }
        }
    }
    agree as f64 / total as f64
}

/// Weighted similarity of a fake config against each real one; the report
/// carries the maximum, as anonymity is judged against the closest real
/// device.
pub fn similarity(
    fake: &RouterConfig,
    reals: &[&RouterConfig],
    weights: SimilarityWeights,
) -> SimilarityReport {
    let mut best: Option<SimilarityReport> = None;
    for real in reals {
        let s = sim_stanza(fake, real);
        let c = sim_cmd(fake, real);
        let o = sim_order(fake, real);
        let overall = weights.stanza * s + weights.cmd * c + weights.order * o;
        let report = SimilarityReport {
            sim_stanza: s,
            sim_cmd: c,
            sim_order: o,
            overall,
            weights,
            best_match: real.hostname.clone(),
        };
        match &best {
            Some(b) if b.overall >= overall => {}
            _ => best = Some(report),
        }
    }
    best.unwrap_or(SimilarityReport {
        sim_stanza: 0.0,
        sim_cmd: 0.0,
        sim_order: 0.0,
        overall: 0.0,
        weights,
        best_match: String::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathAnonymity {
    pub n_r: f64,
    pub pairs: usize,
}

/// Average number of distinct router-level paths observed between ordered
/// pairs of real egress routers.
pub fn path_anonymity(dp: &DataPlane, real_egress: &BTreeSet<String>) -> PathAnonymity {
    let mut distinct: BTreeMap<(String, String), BTreeSet<Vec<String>>> = BTreeMap::new();
    for result in dp.paths.values() {
        let Some(paths) = result.paths() else {
            continue;
        };
        for p in paths {
            if p.len() < 3 {
                continue;
            }
            let routers = &p[1..p.len() - 1];
            let (src, dst) = (&routers[0], &routers[routers.len() - 1]);
            if src == dst || !real_egress.contains(src) || !real_egress.contains(dst) {
                continue;
            }
            distinct
                .entry((src.clone(), dst.clone()))
                .or_default()
                .insert(routers.to_vec());
        }
    }
    if distinct.is_empty() {
        return PathAnonymity { n_r: 0.0, pairs: 0 };
    }
    let total: usize = distinct.values().map(|s| s.len()).sum();
    PathAnonymity {
        n_r: total as f64 / distinct.len() as f64,
        pairs: distinct.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    const SAMPLE: &str = "hostname r1\ninterface eth0\n ip address 10.0.1.1 255.255.255.0\n ip ospf cost 5\nrouter ospf 1\n network 10.0.0.0 0.0.255.255 area 0\nip route 10.9.9.0 255.255.255.0 10.0.1.2\n";

    #[test]
    fn self_similarity_is_exactly_one() {
        let cfg = parse_config(SAMPLE).unwrap();
        let rep = similarity(&cfg, &[&cfg], DEFAULT_WEIGHTS);
        assert_eq!(rep.sim_stanza, 1.0);
        assert_eq!(rep.sim_cmd, 1.0);
        assert_eq!(rep.sim_order, 1.0);
        assert_eq!(rep.overall, 1.0);
    }

    #[test]
    fn disjoint_stanza_kinds_score_zero_stanza() {
        let a = parse_config("hostname a\n").unwrap();
        let b = parse_config("hostname b\ninterface eth0\n ip address 10.0.0.1 255.255.255.0\n").unwrap();
        // drop the hostname stanza from a to make kinds fully disjoint
        let mut a2 = a.clone();
        a2.stanzas.retain(|s| s.kind != StanzaKind::Hostname);
        let mut b2 = b;
        b2.stanzas.retain(|s| s.kind == StanzaKind::Interface);
        assert_eq!(sim_stanza(&a2, &b2), 0.0);
    }

    #[test]
    fn weighted_sum_matches_hand_value() {
        // components (1.0, 0.8, 0.5) with weights (0.2, 0.5, 0.3) -> 0.75
        let w = DEFAULT_WEIGHTS;
        let overall = w.stanza * 1.0 + w.cmd * 0.8 + w.order * 0.5;
        assert!((overall - 0.75).abs() < 1e-12);
    }

    #[test]
    fn order_metric_detects_swap() {
        let a = parse_config("hostname a\ninterface e0\n ip address 10.0.0.1 255.255.255.0\nrouter ospf 1\n network 10.0.0.0 0.0.0.255 area 0\n").unwrap();
        let b = parse_config("router ospf 1\n network 10.0.0.0 0.0.0.255 area 0\nhostname b\ninterface e0\n ip address 10.0.0.2 255.255.255.0\n").unwrap();
        let o = sim_order(&a, &b);
        assert!(o < 1.0);
        assert!(o > 0.0);
    }
}
