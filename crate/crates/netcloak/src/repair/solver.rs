//! Exact finite-domain solver for the link-cost constraint system: bounds
//! propagation over the linear clauses plus depth-first branching on cost
//! variables. Leaves (all costs fixed) are accepted only if an independent
//! shortest-path check satisfies every encoded requirement.

use std::collections::BTreeMap;

use super::constraints::{ConstraintSet, CostModel, INITIAL_SEARCH_BOUND};
use super::{verify_requirement, PathRequirement, RepairError};

#[derive(Debug, Clone)]
struct Domains {
    /// cost variable bounds, indexed by edge
    c_lo: Vec<i64>,
    c_hi: Vec<i64>,
    /// distance variable bounds, indexed source-major
    d_lo: Vec<i64>,
    d_hi: Vec<i64>,
    n_nodes: usize,
}

impl Domains {
    fn d_idx(&self, s: usize, v: usize) -> usize {
        s * self.n_nodes + v
    }
}

#[derive(Debug)]
pub struct SolveStats {
    pub nodes_explored: u64,
}

/// Find integer costs within bounds satisfying all clauses and all
/// requirements, or prove none exist under the search bound. The search
/// bound escalates once before giving up, per the model's cost ceiling.
pub fn solve_costs(
    cs: &ConstraintSet,
    model: &CostModel,
    reqs: &[&PathRequirement],
    budget: u64,
) -> Result<(Vec<i64>, SolveStats), RepairError> {
    let bound = INITIAL_SEARCH_BOUND.min(model.max_cost);
    match solve_with_bound(cs, model, reqs, bound, budget) {
        Err(RepairError::Unsat) if bound < model.max_cost => {
            solve_with_bound(cs, model, reqs, model.max_cost, budget)
        }
        other => other,
    }
}

fn solve_with_bound(
    cs: &ConstraintSet,
    model: &CostModel,
    reqs: &[&PathRequirement],
    bound: i64,
    budget: u64,
) -> Result<(Vec<i64>, SolveStats), RepairError> {
    let n_nodes = cs.nodes.len();
    let n_sources = cs.sources.len();
    let d_cap = (n_nodes as i64 + 1) * bound.max(1);
    let mut dom = Domains {
        c_lo: vec![model.min_cost; model.edges.len()],
        c_hi: vec![bound; model.edges.len()],
        d_lo: vec![0; n_sources * n_nodes],
        d_hi: vec![d_cap; n_sources * n_nodes],
        n_nodes,
    };
    for (e, v) in &model.fixed {
        dom.c_lo[*e] = *v;
        dom.c_hi[*e] = *v;
    }
    // edges no clause mentions keep their current costs
    let mut referenced = vec![false; model.edges.len()];
    for cl in &cs.clauses {
        referenced[cl.edge] = true;
    }
    for e in 0..model.edges.len() {
        if !referenced[e] && !model.fixed.contains_key(&e) {
            let v = model.initial[e].clamp(model.min_cost, bound);
            dom.c_lo[e] = v;
            dom.c_hi[e] = v;
        }
    }
    for (s, src) in cs.sources.iter().enumerate() {
        let v = cs.node_index[src];
        let i = dom.d_idx(s, v);
        dom.d_lo[i] = 0;
        dom.d_hi[i] = 0;
    }
    // edges appearing in an equality clause lie on a requested path
    let mut on_path = vec![false; model.edges.len()];
    for cl in &cs.clauses {
        if cl.sign > 0 {
            on_path[cl.edge] = true;
        }
    }
    let mut stats = SolveStats { nodes_explored: 0 };
    let found = dfs(cs, model, reqs, &on_path, &mut dom, &mut stats, budget)?;
    match found {
        Some(costs) => Ok((costs, stats)),
        None => Err(RepairError::Unsat),
    }
}

/// Propagate bounds to a fixpoint; false means a domain emptied.
fn propagate(cs: &ConstraintSet, dom: &mut Domains) -> bool {
    loop {
        let mut changed = false;
        for cl in &cs.clauses {
            // d[a] - d[b] + sign*c <= k
            let (ai, bi) = (dom.d_idx(cl.source, cl.a), dom.d_idx(cl.source, cl.b));
            let e = cl.edge;
            if cl.sign < 0 {
                // d[a] <= d[b] + c + k
                let ub_a = dom.d_hi[bi].saturating_add(dom.c_hi[e]).saturating_add(cl.k);
                if ub_a < dom.d_hi[ai] {
                    dom.d_hi[ai] = ub_a;
                    changed = true;
                }
                // d[b] >= d[a] - c - k
                let lb_b = dom.d_lo[ai].saturating_sub(dom.c_hi[e]).saturating_sub(cl.k);
                if lb_b > dom.d_lo[bi] {
                    dom.d_lo[bi] = lb_b;
                    changed = true;
                }
                // c >= d[a] - d[b] - k
                let lb_c = dom.d_lo[ai].saturating_sub(dom.d_hi[bi]).saturating_sub(cl.k);
                if lb_c > dom.c_lo[e] {
                    dom.c_lo[e] = lb_c;
                    changed = true;
                }
            } else {
                // d[a] <= d[b] - c + k
                let ub_a = dom.d_hi[bi].saturating_sub(dom.c_lo[e]).saturating_add(cl.k);
                if ub_a < dom.d_hi[ai] {
                    dom.d_hi[ai] = ub_a;
                    changed = true;
                }
                // d[b] >= d[a] + c - k
                let lb_b = dom.d_lo[ai].saturating_add(dom.c_lo[e]).saturating_sub(cl.k);
                if lb_b > dom.d_lo[bi] {
                    dom.d_lo[bi] = lb_b;
                    changed = true;
                }
                // c <= d[b] - d[a] + k
                let ub_c = dom.d_hi[bi].saturating_sub(dom.d_lo[ai]).saturating_add(cl.k);
                if ub_c < dom.c_hi[e] {
                    dom.c_hi[e] = ub_c;
                    changed = true;
                }
            }
        }
        let empty = dom
            .c_lo
            .iter()
            .zip(&dom.c_hi)
            .any(|(l, h)| l > h)
            || dom.d_lo.iter().zip(&dom.d_hi).any(|(l, h)| l > h);
        if empty {
            return false;
        }
        if !changed {
            return true;
        }
    }
}

fn dfs(
    cs: &ConstraintSet,
    model: &CostModel,
    reqs: &[&PathRequirement],
    on_path: &[bool],
    dom: &mut Domains,
    stats: &mut SolveStats,
    budget: u64,
) -> Result<Option<Vec<i64>>, RepairError> {
    stats.nodes_explored += 1;
    if stats.nodes_explored > budget {
        return Err(RepairError::SolverTimeout(budget));
    }
    if !propagate(cs, dom) {
        return Ok(None);
    }
    // branch on the unfixed cost variable with the smallest domain,
    // requested-path edges first
    let branch = (0..model.edges.len())
        .filter(|e| dom.c_lo[*e] < dom.c_hi[*e])
        .min_by_key(|e| (!on_path[*e], dom.c_hi[*e] - dom.c_lo[*e], *e));
    let Some(e) = branch else {
        // all costs fixed: accept only if the independent check passes
        let costs: Vec<i64> = dom.c_lo.clone();
        let ok = reqs.iter().all(|r| verify_requirement(model, &costs, r));
        return Ok(if ok { Some(costs) } else { None });
    };
    // binary interval split; requested-path edges prefer the low half,
    // shortcut candidates the high half
    let mid = dom.c_lo[e] + (dom.c_hi[e] - dom.c_lo[e]) / 2;
    let low = (dom.c_lo[e], mid);
    let high = (mid + 1, dom.c_hi[e]);
    let halves = if on_path[e] { [low, high] } else { [high, low] };
    for (lo, hi) in halves {
        let mut child = dom.clone();
        child.c_lo[e] = lo;
        child.c_hi[e] = hi;
        if let Some(sol) = dfs(cs, model, reqs, on_path, &mut child, stats, budget)? {
            return Ok(Some(sol));
        }
    }
    Ok(None)
}

/// Costs keyed by directed edge, for reporting.
pub fn costs_by_edge(model: &CostModel, costs: &[i64]) -> BTreeMap<(String, String), i64> {
    model
        .edges
        .iter()
        .cloned()
        .zip(costs.iter().copied())
        .collect()
}
