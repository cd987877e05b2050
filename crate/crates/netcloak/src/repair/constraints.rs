//! Shortest-path constraint encoding over link-cost variables.
//!
//! Variables are directed edge costs plus per-source distance labels. Every
//! emitted constraint has the linear form
//!
//! ```text
//! d[s][a] - d[s][b] + sign * c[e] <= k
//! ```
//!
//! which covers the relaxation clause (every edge bounds its head's
//! distance), the equality clauses pinning a requested path, and the strict
//! clauses that exclude alternative predecessors.

use std::collections::{BTreeMap, BTreeSet};

use super::{PathKind, PathRequirement, RepairError};

/// Directed-edge cost variables with bounds and pins.
#[derive(Debug, Clone)]
pub struct CostModel {
    /// Directed edges (tail, head); the variable index is the position.
    pub edges: Vec<(String, String)>,
    pub index: BTreeMap<(String, String), usize>,
    /// Inclusive bounds for free costs.
    pub min_cost: i64,
    pub max_cost: i64,
    /// Pinned costs (original links keep their configured values).
    pub fixed: BTreeMap<usize, i64>,
    /// Current assignment, used as the starting point and for reporting.
    pub initial: Vec<i64>,
}

pub const COST_MAX: i64 = 65_535;
pub const INITIAL_SEARCH_BOUND: i64 = 1_000;

impl CostModel {
    pub fn new(edges: Vec<(String, String)>) -> Self {
        let index = edges
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let initial = vec![1; edges.len()];
        CostModel {
            edges,
            index,
            min_cost: 1,
            max_cost: COST_MAX,
            fixed: BTreeMap::new(),
            initial,
        }
    }

    pub fn edge(&self, tail: &str, head: &str) -> Option<usize> {
        self.index.get(&(tail.to_string(), head.to_string())).copied()
    }

    pub fn pin(&mut self, tail: &str, head: &str, cost: i64) {
        if let Some(e) = self.edge(tail, head) {
            self.fixed.insert(e, cost);
            self.initial[e] = cost;
        }
    }

    pub fn set_initial(&mut self, tail: &str, head: &str, cost: i64) {
        if let Some(e) = self.edge(tail, head) {
            self.initial[e] = cost;
        }
    }

    pub fn in_edges(&self, head: &str) -> Vec<usize> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, (_, h))| h == head)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn nodes(&self) -> BTreeSet<String> {
        self.edges
            .iter()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect()
    }
}

/// One linear clause: d[s][a] - d[s][b] + sign*c[e] <= k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinClause {
    pub source: usize,
    pub a: usize,
    pub b: usize,
    pub edge: usize,
    pub sign: i8,
    pub k: i64,
}

/// Accumulated constraints for one AS, with per-source distance variables
/// shared across same-source requirements.
#[derive(Debug, Default)]
pub struct ConstraintSet {
    pub nodes: Vec<String>,
    pub node_index: BTreeMap<String, usize>,
    pub sources: Vec<String>,
    pub clauses: Vec<LinClause>,
    /// Sources whose relaxation clauses have been emitted already.
    relaxed: BTreeSet<usize>,
}

impl ConstraintSet {
    pub fn new(model: &CostModel) -> Self {
        let nodes: Vec<String> = model.nodes().into_iter().collect();
        let node_index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        ConstraintSet {
            nodes,
            node_index,
            sources: Vec::new(),
            clauses: Vec::new(),
            relaxed: BTreeSet::new(),
        }
    }

    fn source_id(&mut self, src: &str) -> usize {
        match self.sources.iter().position(|s| s == src) {
            Some(i) => i,
            None => {
                self.sources.push(src.to_string());
                self.sources.len() - 1
            }
        }
    }

    /// Relaxation clauses: for every directed edge (u, v),
    /// d[s][v] <= d[s][u] + c[(u,v)].
    fn emit_relaxations(&mut self, model: &CostModel, s: usize) {
        if !self.relaxed.insert(s) {
            return;
        }
        for (e, (u, v)) in model.edges.iter().enumerate() {
            let (u, v) = (self.node_index[u], self.node_index[v]);
            self.clauses.push(LinClause {
                source: s,
                a: v,
                b: u,
                edge: e,
                sign: -1,
                k: 0,
            });
        }
    }

    /// d[s][v] = d[s][u] + c[e], as a pair of inequalities.
    fn emit_equality(&mut self, s: usize, v: usize, u: usize, e: usize) {
        self.clauses.push(LinClause {
            source: s,
            a: v,
            b: u,
            edge: e,
            sign: -1,
            k: 0,
        });
        self.clauses.push(LinClause {
            source: s,
            a: u,
            b: v,
            edge: e,
            sign: 1,
            k: 0,
        });
    }

    /// Exclude w as a predecessor of v: d[s][w] + c[(w,v)] >= d[s][v] + 1.
    fn emit_strict(&mut self, s: usize, v: usize, w: usize, e: usize) {
        self.clauses.push(LinClause {
            source: s,
            a: v,
            b: w,
            edge: e,
            sign: -1,
            k: -1,
        });
    }
}

/// Encode a primary-path requirement: the requested path must be the
/// unique shortest path, enforced by pinning the predecessor chain (the
/// alternative-predecessor clauses are instantiated at the path nodes).
pub fn encode_primary(
    req: &PathRequirement,
    model: &CostModel,
    cs: &mut ConstraintSet,
) -> Result<(), RepairError> {
    debug_assert_eq!(req.kind, PathKind::Primary);
    let path = req
        .paths
        .iter()
        .next()
        .ok_or_else(|| RepairError::PathNotInGraph(req.src.clone(), req.dst.clone()))?;
    validate_path(path, model, req)?;
    let s = cs.source_id(&req.src);
    cs.emit_relaxations(model, s);
    for i in 1..path.len() {
        let (u_name, v_name) = (&path[i - 1], &path[i]);
        let e = model.edge(u_name, v_name).expect("validated edge");
        let (u, v) = (cs.node_index[u_name], cs.node_index[v_name]);
        cs.emit_equality(s, v, u, e);
        for alt in model.in_edges(v_name) {
            let w_name = &model.edges[alt].0;
            if w_name != u_name {
                cs.emit_strict(s, v, cs.node_index[w_name], alt);
            }
        }
    }
    Ok(())
}

/// Encode an ECMP requirement: on every node of the requested DAG the
/// predecessor set must equal the requested one exactly, distinguishing
/// genuine load balancing from a single enforced route.
pub fn encode_ecmp(
    req: &PathRequirement,
    model: &CostModel,
    cs: &mut ConstraintSet,
) -> Result<(), RepairError> {
    debug_assert_eq!(req.kind, PathKind::Ecmp);
    if req.paths.is_empty() {
        return Err(RepairError::PathNotInGraph(req.src.clone(), req.dst.clone()));
    }
    for path in &req.paths {
        validate_path(path, model, req)?;
    }
    let s = cs.source_id(&req.src);
    cs.emit_relaxations(model, s);
    let wanted = requested_preds(&req.paths);
    for (v_name, preds) in &wanted {
        let v = cs.node_index[v_name];
        for p_name in preds {
            let e = model.edge(p_name, v_name).expect("validated edge");
            cs.emit_equality(s, v, cs.node_index[p_name], e);
        }
        for alt in model.in_edges(v_name) {
            let w_name = &model.edges[alt].0;
            if !preds.contains(w_name) {
                cs.emit_strict(s, v, cs.node_index[w_name], alt);
            }
        }
    }
    Ok(())
}

/// Per-node requested predecessor sets over the union of the paths.
pub fn requested_preds(paths: &BTreeSet<Vec<String>>) -> BTreeMap<String, BTreeSet<String>> {
    let mut wanted: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for path in paths {
        for i in 1..path.len() {
            wanted
                .entry(path[i].clone())
                .or_default()
                .insert(path[i - 1].clone());
        }
    }
    wanted
}

fn validate_path(
    path: &[String],
    model: &CostModel,
    req: &PathRequirement,
) -> Result<(), RepairError> {
    if path.len() < 2
        || path.first() != Some(&req.src)
        || path.last() != Some(&req.dst)
    {
        return Err(RepairError::PathNotInGraph(req.src.clone(), req.dst.clone()));
    }
    for w in path.windows(2) {
        if model.edge(&w[0], &w[1]).is_none() {
            return Err(RepairError::PathNotInGraph(w[0].clone(), w[1].clone()));
        }
    }
    Ok(())
}
